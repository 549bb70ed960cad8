"""Sampled complex fields on declared point grids and their CSV form."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["GridFunction", "emit_grid", "read_grid", "plane_grid", "box_grid"]

HEADER = "x,y,z,re,im"


@dataclass
class GridFunction:
    """Complex values at 3D points, in declaration order, plus metadata."""

    points: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=complex).reshape(-1)
        if self.points.shape != (len(self.values), 3):
            raise ValueError("points must be (M, 3) with one value per point")

    def __len__(self):
        return len(self.values)


def _g17(x):
    return format(float(x), ".17g")


def emit_grid(values, path):
    """Write ``x,y,z,re,im`` rows with 17 significant digits. Returns the path."""
    if len(values) == 0:
        raise ValueError("grid is empty")
    lines = [HEADER]
    for p, v in zip(values.points, values.values):
        lines.append(",".join(_g17(t) for t in (*p, v.real, v.imag)))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_grid(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return GridFunction(data[:, :3], data[:, 3] + 1j * data[:, 4])


def plane_grid(origin, u, v, shape):
    """Points ``origin + i/(n1-1) u + j/(n2-1) v`` in row-major order."""
    n1, n2 = shape
    s = np.linspace(0.0, 1.0, n1) if n1 > 1 else np.zeros(1)
    t = np.linspace(0.0, 1.0, n2) if n2 > 1 else np.zeros(1)
    o, u, v = (np.asarray(a, dtype=float) for a in (origin, u, v))
    return np.array([o + a * u + b * v for a in s for b in t])


def box_grid(lo, hi, shape):
    """Tensor grid over the box ``[lo, hi]`` with ``shape`` points per axis."""
    axes = [np.linspace(a, b, n) for a, b, n in zip(lo, hi, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
