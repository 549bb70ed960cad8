"""Run configuration: a JSON document describing one model and one command.

Layout::

    {
      "model": {"kind": "points", "centers": [[0, 0, 0]], "alpha": 0.0795},
      "command": "bound-states",          # optional, must match the CLI
      "kappa_range": [0.01, 10.0],
      "z": [-1.0, 0.0],                   # number or [re, im]
      "grid": {"kind": "box", "lo": [...], "hi": [...], "shape": [5, 5, 5]},
      "source": {"center": [0, 0, 2], "width": 0.5},
      "seed": 7
    }

Model kinds and their fields:

* ``finite``: either explicit real matrices ``A``, ``F``, ``W`` or a random
  instance from ``n``, ``N`` (and optional ``singular_w``, ``instances``,
  ``energies_per_instance``) drawn with the seed.
* ``points``: ``centers`` plus ``W`` (matrix) or ``alpha`` (``alpha * I``).
* ``lattice``: ``dims``, ``spacing``, optional ``origin``, and ``alpha``.
* ``segment``: ``l``, optional ``potential`` and ``n_nodes``.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import box_grid, plane_grid

__all__ = ["RunConfig", "load_config", "parse_config", "COMMANDS", "MODEL_KINDS"]

COMMANDS = ("bound-states", "green", "verify", "trace")
MODEL_KINDS = ("finite", "points", "lattice", "segment")

_REQUIRED = {
    "finite": (),
    "points": ("centers",),
    "lattice": ("dims", "spacing", "alpha"),
    "segment": ("l",),
}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    model: dict
    command: str = None
    kappa_range: tuple = (1e-3, 20.0)
    z: complex = -1.0 + 0j
    grid: np.ndarray = None
    source: dict = field(default_factory=lambda: {"center": [0.0, 0.0, 2.0], "width": 0.5})
    trace: dict = field(default_factory=dict)
    seed: int = 0


def _check_finite(obj, where="config"):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return
    if isinstance(obj, (int, float)):
        if not math.isfinite(obj):
            raise ConfigError(f"{where}: non-finite number {obj!r}")
        return
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
        return
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")
        return
    raise ConfigError(f"{where}: unsupported value {obj!r}")


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{name}' must be a number, got {value!r}")
    return float(value)


def _complex(value, name):
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(f"field '{name}' must be a number or [re, im]")
        return complex(_number(value[0], name), _number(value[1], name))
    return complex(_number(value, name), 0.0)


def _array(value, name, shape=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}' must be a numeric array") from exc
    if shape is not None and (arr.ndim != len(shape) or any(
            s is not None and s != a for s, a in zip(shape, arr.shape))):
        raise ConfigError(f"field '{name}' has shape {arr.shape}, expected {shape}")
    return arr


def _grid(spec):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("field 'grid' must be an object with a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "points":
            pts = _array(spec["points"], "grid.points", (None, 3))
        elif kind == "plane":
            pts = plane_grid(
                _array(spec["origin"], "grid.origin", (3,)),
                _array(spec["u"], "grid.u", (3,)),
                _array(spec["v"], "grid.v", (3,)),
                tuple(int(n) for n in spec["shape"]),
            )
        elif kind == "box":
            pts = box_grid(
                _array(spec["lo"], "grid.lo", (3,)),
                _array(spec["hi"], "grid.hi", (3,)),
                tuple(int(n) for n in spec["shape"]),
            )
        else:
            raise ConfigError(f"unknown grid kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"grid of kind {kind!r}: missing field '{exc.args[0]}'") from exc
    if len(pts) == 0:
        raise ConfigError("grid is empty")
    return pts


def parse_config(doc, command=None, seed=None):
    """Validate a decoded JSON document into a :class:`RunConfig`.

    ``command`` and ``seed`` come from the command line; a ``command`` in the
    document must agree, and ``seed`` overrides the document's seed.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_finite(doc)
    model = doc.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing field 'model'")
    kind = model.get("kind")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"field 'model.kind' must be one of {MODEL_KINDS}, got {kind!r}")
    for name in _REQUIRED[kind]:
        if name not in model:
            raise ConfigError(f"{kind} model: missing required field '{name}'")
    if kind == "points" and not ("W" in model or "alpha" in model):
        raise ConfigError("points model: missing required field 'W' (or 'alpha')")
    if kind == "finite" and not ({"A", "F", "W"} <= model.keys() or {"n", "N"} <= model.keys()):
        raise ConfigError("finite model: needs fields 'A', 'F', 'W' or 'n', 'N'")

    cmd = doc.get("command")
    if cmd is not None and command is not None and cmd != command:
        raise ConfigError(f"config is for command {cmd!r}, not {command!r}")
    cmd = command or cmd
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")

    kw = {"kind": kind, "model": model, "command": cmd}
    if "kappa_range" in doc:
        kr = _array(doc["kappa_range"], "kappa_range", (2,))
        if not 0 < kr[0] < kr[1]:
            raise ConfigError("field 'kappa_range' must satisfy 0 < lo < hi")
        kw["kappa_range"] = (float(kr[0]), float(kr[1]))
    if "z" in doc:
        kw["z"] = _complex(doc["z"], "z")
    if "grid" in doc:
        kw["grid"] = _grid(doc["grid"])
    elif cmd == "green":
        raise ConfigError("command 'green': missing field 'grid'")
    if "source" in doc:
        src = doc["source"]
        if not isinstance(src, dict) or "center" not in src or "width" not in src:
            raise ConfigError("field 'source' needs 'center' and 'width'")
        _array(src["center"], "source.center", (3,))
        if _number(src["width"], "source.width") <= 0:
            raise ConfigError("field 'source.width' must be positive")
        kw["source"] = src
    if "trace" in doc:
        if not isinstance(doc["trace"], dict):
            raise ConfigError("field 'trace' must be an object")
        kw["trace"] = doc["trace"]
    if cmd == "trace" and kind != "segment":
        raise ConfigError("command 'trace' needs a segment model")
    s = seed if seed is not None else doc.get("seed", 0)
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise ConfigError(f"field 'seed' must be an unsigned 64-bit integer, got {s!r}")
    kw["seed"] = s
    return RunConfig(**kw)


def load_config(path, command=None, seed=None):
    """Read and validate a JSON config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, command, seed)
