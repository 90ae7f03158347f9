"""Batch driver: ``degensl <command> --config <path> [--out <dir>]``.

Every command writes ``report.json`` plus its tables into the output
directory.  Exit status 0 means success, 2 a validation error (bad config
or input file) and 3 a numerical failure or a missed tolerance; in the
last case the error is recorded in ``report.json``.
"""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import green, inverse, io, ode, plotting
from .config import COMMANDS, RunConfig, load_config
from .errors import DegenslError, NumericalError, ValidationError
from .potential import PotentialGrid
from .spectral import DELTA, DetEvaluator, SpectralPoint, degenerate_floor, find_zeros, winding_number

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

DEGENERATE_FLAG = "degenerate determinant"
_GREEN_CSV_MAX = 129
_BRACKET_TRIPLES = 50
_BRACKET_SEED = 20240601


class ToleranceExceeded(NumericalError):
    """A computed check missed its configured tolerance."""


def _check(value, tol, relation="<="):
    passed = value <= tol if relation == "<=" else value > tol
    return {"value": value, "tol": tol, "relation": relation, "passed": bool(passed)}


def _enforce(report: dict):
    failed = [name for name, c in report.get("checks", {}).items() if not c["passed"]]
    if failed:
        raise ToleranceExceeded("checks failed: " + ", ".join(failed))


def _grid(cfg: RunConfig):
    (a, b), (c, d) = cfg.region
    n_re, n_im = cfg.scan_points
    re = np.linspace(a, b, n_re) if n_re > 1 else np.array([0.5 * (a + b)])
    im = np.linspace(c, d, n_im) if n_im > 1 else np.array([0.5 * (c + d)])
    return re, im


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


# ---------------------------------------------------------------- commands


def cmd_forward(cfg: RunConfig, out: Path, report: dict):
    q = cfg.load_potential()
    mus = np.array(cfg.mus, dtype=complex)
    c, cp, s, sp = ode.fundamental_batch(q, mus)
    refined = ode.endpoints(q, mus, error_estimate=True)
    wr = np.max(np.abs(c * sp - cp * s - 1.0), axis=1)
    rows = []
    for k, mu in enumerate(mus):
        delta = c[k, -1] - sp[k, -1]
        rows.append([mu.real, mu.imag, *_cplx(c[k, -1]), *_cplx(cp[k, -1]), *_cplx(s[k, -1]),
                     *_cplx(sp[k, -1]), *_cplx(delta), wr[k], float(np.max(refined.error[:, k]))])
    io.write_csv(out / "endpoints.csv",
                 ["mu_re", "mu_im", "c_re", "c_im", "cp_re", "cp_im", "s_re", "s_im",
                  "sp_re", "sp_im", "delta_re", "delta_im", "wronskian_defect", "richardson_error"], rows)
    io.write_csv(out / "fundamental.csv",
                 ["x", "c_re", "c_im", "cp_re", "cp_im", "s_re", "s_im", "sp_re", "sp_im"],
                 ([x, *_cplx(c[0, i]), *_cplx(cp[0, i]), *_cplx(s[0, i]), *_cplx(sp[0, i])]
                  for i, x in enumerate(q.x)))
    report["grid_points"] = q.n_points
    report["max_wronskian_defect"] = float(np.max(wr))
    report["checks"] = {"wronskian": _check(float(np.max(wr)), 1e-8)}
    if cfg.figures:
        plotting.plot_fundamental(q.x, c[0], s[0], mus[0], out / "fundamental.png")


def cmd_det_scan(cfg: RunConfig, out: Path, report: dict):
    q = cfg.load_potential()
    re, im = _grid(cfg)
    mu = re[None, :] + 1j * im[:, None]
    vals = DetEvaluator(cfg.det, q, cfg.theta).raw(mu.ravel()).reshape(mu.shape)
    io.write_csv(out / "det_scan.csv", ["mu_re", "mu_im", "delta_re", "delta_im"],
                 ([z.real, z.imag, v.real, v.imag] for z, v in zip(mu.ravel(), vals.ravel())))
    floor = degenerate_floor(q)
    mag = np.abs(vals)
    flags = [DEGENERATE_FLAG] if cfg.det == DELTA and np.all(mag < floor) else []
    report.update({"det": cfg.det, "points": int(mag.size), "floor": floor,
                   "max_abs": float(mag.max()), "min_abs": float(mag.min()), "flags": flags})
    if cfg.figures:
        plotting.plot_det_scan(re, im, vals, out / "det_scan.png",
                               "Delta" if cfg.det == DELTA else "s(pi)")


def cmd_eig(cfg: RunConfig, out: Path, report: dict):
    q = cfg.load_potential()
    region = cfg.search_region
    points = find_zeros(cfg.det, q, cfg.theta, region)
    io.write_json(out / "eigs.json", [p.to_json() for p in points])
    report.update({"det": cfg.det, "count": sum(p.multiplicity for p in points),
                   "zeros": len(points)})
    if cfg.figures:
        plotting.plot_zeros(points, region, out / "eigs.png")


def _residual_rows(table):
    return ([mu, r.real, r.imag] for mu, r in table)


def _write_reconstruction(rep: inverse.ReconstructionReport, out: Path, report: dict, cfg: RunConfig):
    io.write_csv(out / "residuals.csv", ["mu", "re_residual", "im_residual"], _residual_rows(rep.residual_table))
    report.update(rep.to_json())
    tol = cfg.tolerances
    dmax = max((e for _, _, e in rep.dirichlet_match), default=0.0)
    report["checks"] = {
        "residual": _check(rep.max_residual, tol["residual"]),
        "dirichlet": _check(dmax, tol["dirichlet"]),
    }
    if cfg.figures and rep.residual_table:
        mus = np.array([m for m, _ in rep.residual_table])
        res = np.array([r for _, r in rep.residual_table])
        plotting.plot_residuals(mus, res, out / "residuals.png")


def cmd_inverse(cfg: RunConfig, out: Path, report: dict):
    t = cfg.load_target()
    tol = cfg.tolerances
    res = inverse.run_inverse(t, n_points=cfg.grid_points, M=cfg.truncation_M, tail=cfg.tail,
                              tail_tol=tol["tail"], cond_max=tol["cond_max"], probe=cfg.probe)
    q_hat = res.q_hat
    io.write_csv(out / "q_hat.csv", ["x", "q_re", "q_im"],
                 ([x, v.real, v.imag] for x, v in zip(q_hat.x, q_hat.values)))
    aux = res.aux
    io.write_csv(out / "aux_spectrum.csv", ["n", "mu", "c_re", "c_im", "w_re", "w_im"],
                 ([n, m, c.real, c.imag, w.real, w.imag]
                  for n, m, c, w in zip(itertools.count(1), aux.mu_seq, aux.c_seq, aux.w_seq)))
    _write_reconstruction(res.report, out, report, cfg)
    report["checks"]["re_w_positive"] = _check(float(np.min(aux.w_seq.real)), 0.0, ">")
    if cfg.probe:
        report["checks"]["probe"] = _check(res.report.summary["probe_max_g_norm"], tol["probe"])
    if cfg.figures:
        plotting.plot_potential(q_hat.x, q_hat.values, out / "q_hat.png")


def read_q_hat(path: Path) -> PotentialGrid:
    if not path.is_file():
        raise ValidationError(f"q_hat file not found: {path}")
    header, data = io.read_csv(path)
    if header != ["x", "q_re", "q_im"]:
        raise ValidationError(f"q_hat file {path}: expected columns x, q_re, q_im")
    if data.shape[0] < 5:
        raise ValidationError(f"q_hat file {path}: too few rows")
    grid = np.linspace(0.0, np.pi, data.shape[0])
    if np.max(np.abs(data[:, 0] - grid)) > 1e-12:
        raise ValidationError(f"q_hat file {path}: x must be the uniform grid on [0, pi]")
    return PotentialGrid(data[:, 1] + 1j * data[:, 2])


def cmd_verify(cfg: RunConfig, out: Path, report: dict):
    t = cfg.load_target()
    path = cfg.q_hat_path(out)
    q_hat = read_q_hat(path)
    N = inverse.select_N(t)
    if cfg.truncation_M <= N:
        raise ValidationError(f"config field 'truncation_M': must exceed N={N}")
    aux = inverse.build_aux_spectrum(t, N, cfg.truncation_M)
    summary = {"N": N, "M": cfg.truncation_M, "m": t.m, "grid_points": q_hat.n_points}
    # residuals stored next to q_hat (normally by `inverse`) are the round-trip reference
    previous = path.parent / "report.json"
    stored = _stored_residuals(previous) if previous.is_file() else None
    rep = inverse.verify_reconstruction(t, aux, q_hat, summary=summary)
    _write_reconstruction(rep, out, report, cfg)
    if stored is not None:
        fresh = np.array([[m, r.real, r.imag] for m, r in rep.residual_table])
        if stored.shape != fresh.shape or np.max(np.abs(stored[:, 0] - fresh[:, 0]), initial=0.0) > 0:
            raise ValidationError(f"{previous}: residual table does not match this verification grid")
        diff = float(np.max(np.abs(stored[:, 1:] - fresh[:, 1:]), initial=0.0))
        report["roundtrip_max_diff"] = diff
        report["checks"]["roundtrip"] = _check(diff, cfg.tolerances["roundtrip"])


def _stored_residuals(path: Path):
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    table = doc.get("residual_table") if isinstance(doc, dict) else None
    if not table:
        return None
    return np.array(table, dtype=float)


def cmd_green(cfg: RunConfig, out: Path, report: dict):
    q = cfg.load_potential()
    mu = cfg.mus[0]
    G = green.green_function(q, cfg.theta, mu)
    bc1, bc2, scale = green.boundary_residuals(q, cfg.theta, mu)
    n = q.n_points
    cols = sorted({2, n // 4, n // 2, (3 * n) // 4, n - 3})
    jumps = [(float(q.x[j]), green.derivative_jump(G, j)) for j in cols]
    jump_err = max(abs(j + 1.0) for _, j in jumps)

    bracket = green.phi_forms_defect(q, _BRACKET_TRIPLES, _BRACKET_SEED) if cfg.theta == 0 else None
    stride = max(1, (n - 1) // 256)
    asym = [[m, green.asymptotic_defect(q, cfg.theta, m, stride)] for m in cfg.asymptotic_mu]

    step = max(1, -(-(n - 1) // (_GREEN_CSV_MAX - 1)))
    idx = np.arange(0, n, step)
    io.write_csv(out / "green.csv", ["x", "xi", "g_re", "g_im"],
                 ([q.x[i], q.x[k], G.values[i, k].real, G.values[i, k].imag] for i in idx for k in idx))
    tol = cfg.tolerances
    report.update({
        "mu": _cplx(mu),
        "theta": cfg.theta,
        "delta": _cplx(G.delta),
        "bc_scale": scale,
        "bc_residual": [float(bc1.max()), float(bc2.max())],
        "jumps": [[x, *_cplx(j)] for x, j in jumps],
        "phi_forms_max_diff": bracket,
        "asymptotic_defect": asym,
    })
    report["checks"] = {
        "bc": _check(max(float(bc1.max()), float(bc2.max())) / scale, tol["bc"]),
        "jump": _check(jump_err, 10.0 * q.h),
    }
    if bracket is not None:
        report["checks"]["phi_forms"] = _check(bracket, 1e-12)
    if cfg.figures:
        plotting.plot_green(q.x, G.values, out / "green.png")


def cmd_projections(cfg: RunConfig, out: Path, report: dict):
    q = cfg.load_potential()
    points = find_zeros(DELTA, q, cfg.theta, cfg.search_region)
    ordered = sorted(points, key=lambda p: (p.lam.real, p.lam.imag))
    chosen = ordered[: cfg.n_eigs] if cfg.n_eigs else ordered
    kernels = []
    for p in chosen:
        r = green.projection_radius(p, points)
        kernels.append(green.spectral_projection(q, cfg.theta, p, r, n_contour=cfg.n_contour))
    norms = [green.projection_norm(k) for k in kernels]
    io.write_csv(out / "proj_norms.csv", ["n", "re_lambda", "im_lambda", "multiplicity", "proj_norm"],
                 ([n, k.center.lam.real, k.center.lam.imag, k.center.multiplicity, v]
                  for n, k, v in zip(itertools.count(1), kernels, norms)))
    entries = []
    for k, v in zip(kernels, norms):
        entries.append({
            "mu": _cplx(k.center.mu),
            "lambda": _cplx(k.center.lam),
            "multiplicity": k.center.multiplicity,
            "radius": k.contour_radius,
            "contour_points": k.n_contour,
            "doubling_change": k.doubling_change,
            "trace": _cplx(k.trace()),
            "idempotence_defect": k.idempotence_defect(),
            "rank": k.rank(),
            "norm": v,
        })
    pair = 0.0
    for a, b in itertools.combinations(kernels, 2):
        pair = max(pair, a.product_norm(b) / (a.hs_norm() * b.hs_norm()),
                   b.product_norm(a) / (a.hs_norm() * b.hs_norm()))
    tol = cfg.tolerances["projection"]
    trace_err = max((abs(k.trace() - k.center.multiplicity) for k in kernels), default=0.0)
    idem = max((e["idempotence_defect"] for e in entries), default=0.0)
    report.update({"count": sum(p.multiplicity for p in points), "projections": entries,
                   "max_pair_product": pair})
    report["checks"] = {
        "trace": _check(trace_err, tol),
        "idempotence": _check(idem, tol),
        "pairwise": _check(pair, tol),
        "norm_lower_bound": _check(min(norms, default=1.0), 1.0 - tol, ">"),
        "rank": _check(max((abs(e["rank"] - e["multiplicity"]) for e in entries), default=0), 0),
    }
    if cfg.figures and kernels:
        plotting.plot_norms(np.arange(1, len(norms) + 1), norms, out / "proj_norms.png")


def cmd_diag(cfg: RunConfig, out: Path, report: dict):
    q = cfg.load_potential()
    verdict = green.completeness_heuristic(q, cfg.theta, cfg.epsilon)
    mus = np.linspace(0.5, 20.5, 100)
    vals = DetEvaluator(DELTA, q, cfg.theta).raw(mus)
    floor = degenerate_floor(q)
    flags = [DEGENERATE_FLAG] if np.all(np.abs(vals) < floor) else []
    report.update({"completeness": verdict.to_json(), "det_floor": floor,
                   "max_abs_delta": float(np.max(np.abs(vals))), "flags": flags})
    if cfg.region is not None and not flags:
        region = cfg.search_region
        if region.re_min < region.re_max and region.im_min < region.im_max:
            report["winding_number"] = winding_number(DELTA, q, cfg.theta, region)
    if cfg.figures:
        plotting.plot_symmetry(q.x, q.values, out / "symmetry.png")


HANDLERS = {
    "forward": cmd_forward,
    "det-scan": cmd_det_scan,
    "eig": cmd_eig,
    "inverse": cmd_inverse,
    "verify": cmd_verify,
    "green": cmd_green,
    "projections": cmd_projections,
    "diag": cmd_diag,
}


def run(cfg: RunConfig, out: Path) -> int:
    """Execute one configured command; artifacts go to ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"command": cfg.command, "status": "ok", "error": None}
    try:
        HANDLERS[cfg.command](cfg, out, report)
        _enforce(report)
    except ValidationError:
        raise
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        report["status"] = "error"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        io.write_json(out / "report.json", report)
        print(f"degensl {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    io.write_json(out / "report.json", report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degensl", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, args.command)
        return run(cfg, args.out)
    except ValidationError as exc:
        print(f"degensl {args.command}: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegenslError as exc:
        print(f"degensl {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
