"""Command-line front end: ``kreinlab {bound-states,green,verify,trace}``.

Every run writes one CSV (``<command>.csv``) and ``summary.json`` into
``--out``. Exit status: 0 success, 1 a ``verify`` check failed, 2 bad
configuration, 3 the model violates a precondition (or a numerical solve
broke down).
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy.linalg as la
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigError, KreinError
from .config import load_config
from .grid import GridFunction, emit_grid
from .kernels import (
    Energy,
    GaussianSource,
    PointConfiguration,
    cubic_lattice,
    gram_neg_energy,
    lattice_tail_bound,
    point_q_matrix,
)
from .krein_core import (
    FiniteModel,
    compress_singular_w,
    conjugate_symmetry_residual,
    direct_perturbed,
    hilbert_residual,
    krein_rank_n,
    random_finite_model,
    random_nonreal,
)
from .points import (
    CONVENTION_NOTE,
    apply_resolvent,
    bound_states,
    boundary_condition_residual,
    eigenfunction,
    make_point_model,
    perturbed_green,
)
from .segment import (
    apply_r_l,
    build_segment_q,
    build_sturm_liouville,
    gstar_g_matrix,
    log_boundary_trace,
    make_segment_model,
    negative_spectrum,
    solve_segment,
)

__all__ = ["main", "run", "TOLERANCES"]

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_MODEL = 0, 1, 2, 3
THREADS_ENV = "KREIN_LAB_THREADS"

TOLERANCES = {
    "krein_oracle_rel": 1e-10,
    "hilbert_identity": 1e-10,
    "conjugate_symmetry": 1e-10,
    "compression_kernel": 1e-12,
    "single_center_kappa_rel": 1e-8,
    "boundary_condition": 1e-6,
    "q_nevanlinna_min_eig": -1e-12,
    "green_reciprocity": 1e-12,
    "lattice_delta_rowsum": 1.0,
    "segment_gstar_g": 1e-8,
    "segment_norm_slack": 1e-6,
    "segment_lambda1_rel": 1e-3,
    "trace_rel": 1e-3,
}


def _g17(x):
    return format(float(x), ".17g")


def _cplx(z):
    z = complex(z)
    return [z.real, z.imag]


def _write_csv(path, header, rows):
    lines = [header] + [",".join(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# model construction


def _finite_models(cfg, rng):
    m = cfg.model
    if {"A", "F", "W"} <= m.keys():
        try:
            return [FiniteModel(np.asarray(m["A"], float), np.asarray(m["F"], float),
                                np.asarray(m["W"], float))]
        except ValueError as exc:
            if isinstance(exc, KreinError):
                raise
            raise ConfigError(f"finite model: {exc}") from exc
    n, N = int(m["n"]), int(m["N"])
    if not 0 <= N <= n or n < 1:
        raise ConfigError("finite model: need 1 <= n and 0 <= N <= n")
    count = int(m.get("instances", 10))
    return [random_finite_model(rng, n, N, bool(m.get("singular_w", False)))
            for _ in range(count)]


def _point_model(cfg):
    m = cfg.model
    if cfg.kind == "lattice":
        dims = tuple(int(d) for d in m["dims"])
        if len(dims) != 3 or min(dims) < 1:
            raise ConfigError("lattice model: field 'dims' must be three positive integers")
        centers = cubic_lattice(dims, float(m["spacing"]), m.get("origin", (0.0, 0.0, 0.0)))
    else:
        centers = PointConfiguration(np.asarray(m["centers"], dtype=float).reshape(-1, 3))
    N = len(centers)
    W = float(m["alpha"]) * np.eye(N) if "alpha" in m else np.asarray(m["W"], dtype=float)
    return make_point_model(centers, W)


def _segment_model(cfg):
    m = cfg.model
    return make_segment_model(float(m["l"]), m.get("potential", 0.0), int(m.get("n_nodes", 200)))


def _source(cfg):
    return GaussianSource(cfg.source["center"], float(cfg.source["width"]))


# ---------------------------------------------------------------------------
# commands


def _cmd_bound_states(cfg, out):
    if cfg.kind == "finite":
        raise ConfigError("command 'bound-states' needs a points, lattice or segment model")
    if cfg.kind == "segment":
        pairs = negative_spectrum(_segment_model(cfg), cfg.kappa_range)
        states = [{"kappa": k, "E": E} for k, E in pairs]
    else:
        model = _point_model(cfg)
        states = [{"kappa": s.kappa, "E": s.energy,
                   "coeffs": [_cplx(c) for c in s.coeffs]}
                  for s in bound_states(model, cfg.kappa_range)]
    _write_csv(out / "bound_states.csv", "kappa,E",
               [(_g17(s["kappa"]), _g17(s["E"])) for s in states])
    return {"states": states, "count": len(states), "kappa_range": list(cfg.kappa_range)}, True


def _cmd_green(cfg, out):
    e = Energy.from_z(cfg.z)
    if cfg.kind == "finite":
        raise ConfigError("command 'green' needs a points, lattice or segment model")
    if cfg.kind == "segment":
        gf = apply_r_l(_segment_model(cfg), e, _source(cfg), cfg.grid)
    else:
        gf = apply_resolvent(_point_model(cfg), e, _source(cfg), cfg.grid)
    emit_grid(gf, out / "green.csv")
    return {"z": _cplx(e.z), "points": len(gf), "source": cfg.source,
            "max_abs": float(np.max(np.abs(gf.values)))}, True


def _cmd_trace(cfg, out):
    model = _segment_model(cfg)
    e = Energy.from_z(cfg.z)
    xs = [float(x) for x in cfg.trace.get("x", [model.l / 2])]
    rhos = [float(r) for r in cfg.trace.get("rho", [1e-2, 1e-3, 1e-4])]
    sol = solve_segment(model, e, _source(cfg))
    points, values, reports = [], [], []
    for x in xs:
        rep = log_boundary_trace(model, e, sol.source, x, rhos, solution=sol)
        r = np.asarray(rhos) / np.sqrt(2)
        points.append(np.column_stack([np.full(len(rhos), x), r, r]))
        values.append(rep.f)
        reports.append({
            "x": x,
            "u_f": _cplx(rep.u_f),
            "u_f_expected": _cplx(rep.u_f_expected),
            "rel_error": rep.rel_error,
            "bracket_last": _cplx(rep.bracket[-1]),
            "bracket_target": _cplx(rep.bracket_target),
            "bracket_rate": rep.bracket_rate,
        })
    emit_grid(GridFunction(np.vstack(points), np.concatenate(values)), out / "trace.csv")
    worst = max(r["rel_error"] for r in reports)
    return {"z": _cplx(e.z), "rho": rhos, "traces": reports, "max_rel_error": worst,
            "within_tolerance": worst < TOLERANCES["trace_rel"]}, True


def _check(checks, name, value, tol, ok):
    checks.append({"check": name, "value": float(value), "tolerance": tol, "pass": bool(ok)})


def _verify_finite(cfg, rng, checks):
    models = _finite_models(cfg, rng)
    per = int(cfg.model.get("energies_per_instance", 10))
    oracle = hilbert = conj = kern = 0.0
    compressed = False
    for model in models:
        zs = random_nonreal(rng, per)
        if model.w_is_invertible():
            rmap = lambda z, m=model: krein_rank_n(m, z)  # noqa: E731
            for z in zs:
                D = direct_perturbed(model, z)
                dev = np.linalg.norm(krein_rank_n(model, z) - D, 2) / np.linalg.norm(D, 2)
                oracle = max(oracle, dev)
        else:
            compressed = True
            def rmap(z, m=model):
                return compress_singular_w(m, z).matrix

            for z in zs:
                c = compress_singular_w(model, z)
                kern = max(kern, np.linalg.norm(c.full @ c.kernel_basis, 2))
        for z1, z2 in zip(zs[:-1], zs[1:]):
            hilbert = max(hilbert, hilbert_residual(rmap, z1, z2))
        for z in zs:
            conj = max(conj, conjugate_symmetry_residual(rmap, z))
    tol = TOLERANCES
    if compressed:
        _check(checks, "compression_kernel", kern, tol["compression_kernel"],
               kern < tol["compression_kernel"])
    if any(m.w_is_invertible() for m in models):
        _check(checks, "krein_oracle_rel", oracle, tol["krein_oracle_rel"],
               oracle < tol["krein_oracle_rel"])
    _check(checks, "hilbert_identity", hilbert, tol["hilbert_identity"],
           hilbert < tol["hilbert_identity"])
    _check(checks, "conjugate_symmetry", conj, tol["conjugate_symmetry"],
           conj < tol["conjugate_symmetry"])
    return {"instances": len(models), "energies_per_instance": per,
            "max_oracle_deviation": oracle}


def _verify_points(cfg, rng, checks):
    model = _point_model(cfg)
    tol = TOLERANCES
    extra = {}
    if cfg.kind == "lattice":
        kappa = float(cfg.model.get("kappa", 3.0))
        worst = -np.inf
        for m in range(model.N):
            rowsum, bound = lattice_tail_bound(model.cfg, m, kappa)
            worst = max(worst, rowsum - bound)
        _check(checks, "lattice_rowsum_minus_bound", worst, 0.0, worst <= 0.0)
        G = 8 * np.pi * kappa * gram_neg_energy(model.cfg, kappa)
        delta = np.max(np.sum(np.abs(G - np.eye(model.N)), axis=1))
        _check(checks, "lattice_delta_rowsum", delta, tol["lattice_delta_rowsum"],
               delta < tol["lattice_delta_rowsum"])
        mineig = la.eigvalsh(G)[0]
        _check(checks, "gram_min_eigenvalue", mineig, 0.0, mineig > 0)
        extra["kappa"] = kappa
        return extra
    states = bound_states(model, cfg.kappa_range)
    bc = 0.0
    for s in states:
        f = lambda p, s=s: eigenfunction(model, s, p)  # noqa: E731
        for m in range(model.N):
            bc = max(bc, boundary_condition_residual(model, f, m))
    _check(checks, "boundary_condition", bc, tol["boundary_condition"],
           bc < tol["boundary_condition"])
    if model.N == 1 and states and model.W[0, 0].real > 0:
        expected = 4 * np.pi * model.W[0, 0].real
        rel = abs(states[0].kappa - expected) / expected
        _check(checks, "single_center_kappa_rel", rel, tol["single_center_kappa_rel"],
               rel < tol["single_center_kappa_rel"])
    mineig, recip = np.inf, 0.0
    for z in random_nonreal(rng, 5):
        e = Energy.from_z(z)
        Q = point_q_matrix(model.cfg, e)
        mineig = min(mineig, la.eigvalsh((Q - Q.conj().T) / (2j * z.imag))[0])
        x, y = rng.normal(size=(2, 3)) * 2
        a = perturbed_green(model, e, x, y)
        b = np.conj(perturbed_green(model, e.conj(), y, x))
        recip = max(recip, abs(a - b) / max(abs(a), 1e-300))
    _check(checks, "q_nevanlinna_min_eig", mineig, tol["q_nevanlinna_min_eig"],
           mineig >= tol["q_nevanlinna_min_eig"])
    _check(checks, "green_reciprocity", recip, tol["green_reciprocity"],
           recip < tol["green_reciprocity"])
    extra["bound_states"] = [s.kappa for s in states]
    return extra


def _verify_segment(cfg, rng, checks):
    model = _segment_model(cfg)
    tol = TOLERANCES
    ident = norm_excess = -np.inf
    for z in (1j, 2j):
        e = Energy.from_z(z)
        Q = build_segment_q(model, e)
        GG = gstar_g_matrix(model, e)
        ident = max(ident, np.max(np.abs((Q - Q.conj().T) / (z - np.conj(z)) - GG)))
        # The Nystrom matrix carries the weights; symmetrise before the norm.
        w = np.sqrt(model.weights)
        nrm = np.linalg.norm((w[:, None] * GG) / w[None, :], 2)
        norm_excess = max(norm_excess, nrm - 1 / (8 * np.pi * e.sqrt_z.imag))
    _check(checks, "segment_gstar_g", ident, tol["segment_gstar_g"],
           ident < tol["segment_gstar_g"])
    _check(checks, "segment_norm_excess", norm_excess, tol["segment_norm_slack"],
           norm_excess <= tol["segment_norm_slack"])
    lam1 = build_sturm_liouville(model).eigenvalues[0]
    extra = {"lambda1": lam1}
    if np.all(model.v == 0):
        ref = (np.pi / model.l) ** 2
        rel = abs(lam1 - ref) / ref
        _check(checks, "segment_lambda1_rel", rel, tol["segment_lambda1_rel"],
               rel < tol["segment_lambda1_rel"])
    return extra


def _cmd_verify(cfg, out):
    rng = np.random.default_rng(cfg.seed)
    checks = []
    if cfg.kind == "finite":
        extra = _verify_finite(cfg, rng, checks)
    elif cfg.kind == "segment":
        extra = _verify_segment(cfg, rng, checks)
    else:
        extra = _verify_points(cfg, rng, checks)
    _write_csv(out / "verify.csv", "check,value,tolerance,pass",
               [(c["check"], _g17(c["value"]), _g17(c["tolerance"]), str(c["pass"]).lower())
                for c in checks])
    violations = [c["check"] for c in checks if not c["pass"]]
    return {"checks": checks, "violations": violations, **extra}, not violations


COMMAND_RUNNERS = {
    "bound-states": _cmd_bound_states,
    "green": _cmd_green,
    "verify": _cmd_verify,
    "trace": _cmd_trace,
}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return _cplx(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def run(cfg, out):
    """Execute a validated :class:`~kreinlab.config.RunConfig`; returns the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    result, ok = COMMAND_RUNNERS[cfg.command](cfg, out)
    summary = {
        "command": cfg.command,
        "model": cfg.model,
        "seed": cfg.seed,
        "convention": CONVENTION_NOTE,
        "tolerances": TOLERANCES,
        "status": "ok" if ok else "violation",
        "result": result,
        "version": __version__,
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2, default=_json_default) + "\n"
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _seed(text):
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return s


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kreinlab", description="Krein-formula resolvents of singular perturbations."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("bound-states", "negative eigenvalues of a point or segment model"),
        ("green", "perturbed resolvent applied to a Gaussian source on a grid"),
        ("verify", "invariant checks; exit 1 on any violation"),
        ("trace", "logarithmic boundary trace near the segment"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=_seed, default=None, help="overrides the config seed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, args.seed)
        with threadpool_limits(limits=_threads()):
            return run(cfg, args.out)
    except ConfigError as exc:
        print(f"kreinlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KreinError as exc:
        print(f"kreinlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ValueError, TypeError) as exc:
        # Values that parse but do not describe a model (bad shapes, lengths).
        print(f"kreinlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
