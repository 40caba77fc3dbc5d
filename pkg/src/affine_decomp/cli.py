"""Command-line front end.

Subcommands::

    decompose    dyadic decompositions over a range of scales
    verify-geom  geometric inequality, Jacobian identity and injectivity per cell
    identity     Sylvester, quotient-lemma and Jacobian-identity suites
    knapp        Knapp-example ratio scan across scales delta
    region       admissible (1/q', 1/p') polygon and threshold epsilon

Exit status is 0 when every asserted bound passes, 2 when a run completes
with flagged failures, and 1 on errors (including malformed curve specs).
"""

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .curves import curve_to_dict, load_curve, moment_curve
from .decomposition import (DEFAULT_SHRINK_A, HGridPolicy, full_decomposition,
                            summarize)
from .geometry import (CertificateError, QuadratureError, certify_injectivity,
                       check_dw_lemma, check_geometric_inequality,
                       check_jacobian_identity, sylvester_sides)
from .levelsets import OscillationBudgetError
from .report import canonical_json, write_csv, write_json
from .restriction import (RegionSpec, admissible_q, emit_region_polygon,
                          knapp_scan, min_epsilon_for_full_range)

COMMANDS = ("decompose", "verify-geom", "identity", "knapp", "region")
EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2
KNAPP_DEFAULT_P = 1.25


@dataclass
class RunConfig:
    command: str
    curve_path: str = None
    k_range: tuple = (0, 4)
    A: float = DEFAULT_SHRINK_A
    hgrid_m: int = 3
    hgrid_points: int = 5
    quad_tol: float = 1e-9
    id_tol: float = 1e-6
    seed: int = 0
    json_path: str = None
    csv_path: str = None
    samples: int = 2000
    id_samples: int = 20
    grid_density: int = 20
    p: float = None
    q: float = None
    epsilon: float = 0.0
    d: int = 2
    N: float = 4.0
    delta_exps: tuple = (2, 6)
    t0: float = None
    threads: int = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not (self.quad_tol > 0 and self.id_tol > 0):
            raise ValueError("tolerances must be positive")
        lo, hi = self.k_range
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
            raise ValueError("k_range must be a finite nonempty range")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def public(self):
        """Config fields that determine the report content."""
        out = asdict(self)
        for key in ("json_path", "csv_path", "threads", "extra"):
            out.pop(key)
        return out


def _child_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _curve(config, required=True):
    if config.curve_path is None:
        if required:
            raise ValueError("--curve is required for this command")
        return None
    return load_curve(config.curve_path)


def _decompose(config, curve):
    hgrid = HGridPolicy(config.hgrid_m, config.hgrid_points)
    return full_decomposition(curve, tuple(config.k_range), config.A, hgrid,
                              threads=config.threads)


def _run_decompose(config):
    curve = _curve(config)
    reports = _decompose(config, curve)
    rows = summarize(reports)
    flagged = any(r.flags or not r.within_bounds for r in reports)
    payload = {"config": config.public(), "curve": curve_to_dict(curve),
               "scales": [r.to_dict() for r in reports], "summary": rows}
    return (EXIT_FLAGGED if flagged else EXIT_OK), payload, rows


def _verify_cell(config, curve, cell, index):
    seed = _child_seed(config.seed, index)
    out = {"cell": cell.to_dict()}
    ok = True
    try:
        geo = check_geometric_inequality(curve, cell, config.samples, seed)
        out["geometric"] = {"inf_ratio": geo.inf_ratio, "sup_ratio": geo.sup_ratio,
                            "pass": geo.passed, "sign": geo.sign}
        ok &= geo.passed
    except ValueError as exc:
        out["geometric"] = {"pass": False, "error": str(exc)}
        return False, out
    if curve.d <= 4:
        try:
            res = check_jacobian_identity(curve, cell, config.id_samples,
                                          config.id_tol, seed=seed,
                                          quad_tol=config.quad_tol)
            id_ok = all(r.passed(config.id_tol) for r in res)
            out["identity"] = {"max_rel_err": max(r.rel_err for r in res),
                               "n_samples": len(res), "pass": id_ok}
            ok &= id_ok
        except (CertificateError, QuadratureError) as exc:
            out["identity"] = {"pass": False, "error": str(exc)}
            ok = False
    if geo.passed:
        try:
            cert = certify_injectivity(curve, cell, config.grid_density,
                                       config.samples, seed, geometric=geo)
            out["injectivity"] = cert.to_dict()
            ok &= cert.ok
        except ValueError as exc:
            out["injectivity"] = {"signed_ok": False, "error": str(exc)}
            ok = False
    out["pass"] = bool(ok)
    return bool(ok), out


def _run_verify(config):
    curve = _curve(config)
    reports = _decompose(config, curve)
    cells, rows, all_ok = [], [], True
    index = 0
    for r in reports:
        for cell in r.cells:
            ok, entry = _verify_cell(config, curve, cell, index)
            index += 1
            all_ok &= ok
            entry["k_d"] = r.k_d
            cells.append(entry)
            geo = entry["geometric"]
            rows.append({"k_d": r.k_d, "left": cell.interval[0],
                         "right": cell.interval[1],
                         "sigma": " ".join(map(str, cell.sigma)),
                         "inf_ratio": geo.get("inf_ratio", math.nan),
                         "sup_ratio": geo.get("sup_ratio", math.nan),
                         "max_rel_err": entry.get("identity", {}).get("max_rel_err",
                                                                      math.nan),
                         "pass": ok})
        all_ok &= not r.flags
    payload = {"config": config.public(), "curve": curve_to_dict(curve),
               "cells": cells, "decomposition_flags": [f for r in reports for f in r.flags]}
    return (EXIT_OK if all_ok else EXIT_FLAGGED), payload, rows


def _random_rational_matrix(rng, size):
    num = rng.integers(-10, 11, size=(size, size))
    den = rng.integers(1, 11, size=(size, size))
    return [[Fraction(int(a), int(b)) for a, b in zip(ra, rb)]
            for ra, rb in zip(num, den)]


def _run_identity(config):
    rows, ok = [], True
    syl = {}
    for size in (3, 4, 5):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, size]))
        passed = 0
        for _ in range(config.samples):
            lhs, rhs = sylvester_sides(_random_rational_matrix(rng, size))
            passed += lhs == rhs
        syl[str(size)] = {"n": config.samples, "passed": passed}
        ok &= passed == config.samples
        rows.append({"suite": "sylvester", "size": size, "n": config.samples,
                     "passed": passed, "max_rel_err": 0.0})
    curve = _curve(config, required=False)
    dw_curve = curve if curve is not None else moment_curve(config.d)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    dw_max, dw_pass = 0.0, 0
    rows_dw = tuple(range(min(dw_curve.d, 4)))
    for _ in range(config.id_samples):
        t = np.sort(rng.uniform(*dw_curve.domain, size=len(rows_dw)))
        res = check_dw_lemma(dw_curve, rows_dw, t, config.id_tol)
        dw_max = max(dw_max, res.rel_err)
        dw_pass += res.passed(config.id_tol)
    ok &= dw_pass == config.id_samples
    rows.append({"suite": "quotient_lemma", "size": len(rows_dw),
                 "n": config.id_samples, "passed": dw_pass, "max_rel_err": dw_max})
    payload = {"config": config.public(), "sylvester": syl,
               "quotient_lemma": {"n": config.id_samples, "passed": dw_pass,
                                  "max_rel_err": dw_max}}
    if curve is not None:
        jac = []
        index = 0
        for r in _decompose(config, curve):
            for cell in r.cells:
                res = check_jacobian_identity(curve, cell, config.id_samples,
                                              config.id_tol,
                                              seed=_child_seed(config.seed, index),
                                              quad_tol=config.quad_tol)
                index += 1
                passed = sum(x.passed(config.id_tol) for x in res)
                err = max(x.rel_err for x in res)
                jac.append({"cell": cell.to_dict(), "n": len(res), "passed": passed,
                            "max_rel_err": err})
                ok &= passed == len(res)
                rows.append({"suite": "jacobian", "size": curve.d, "n": len(res),
                             "passed": passed, "max_rel_err": err})
        payload["jacobian_identity"] = jac
    return (EXIT_OK if ok else EXIT_FLAGGED), payload, rows


def _run_knapp(config):
    curve = _curve(config, required=False)
    if curve is None:
        curve = moment_curve(config.d, (-1.0, 1.0))
    p = KNAPP_DEFAULT_P if config.p is None else config.p
    lo, hi = config.delta_exps
    deltas = [2.0**-e for e in range(int(lo), int(hi) + 1)]
    region = RegionSpec(curve.d, curve.N, config.epsilon)
    D = curve.d**2 + curve.d
    p_conj = p / (p - 1) if p != 1 else math.inf
    q_line = 2 * p_conj / D
    qs = [q_line] if config.q is None else [config.q]
    scans, rows = [], []
    for q in qs:
        scan = knapp_scan(curve, p, q, deltas, t0=config.t0,
                          epsilon=config.epsilon, tol=config.quad_tol)
        scans.append(scan.to_dict())
        rows.extend(scan.rows(curve.d, curve.N, config.epsilon))
    payload = {"config": config.public(), "curve": curve_to_dict(curve),
               "scaling_line_q": q_line,
               "admissible_q": list(admissible_q(region, p)),
               "scans": scans}
    flagged = any(s["flags"] for s in scans)
    return (EXIT_FLAGGED if flagged else EXIT_OK), payload, rows


def _run_region(config):
    region = RegionSpec(config.d, config.N, config.epsilon)
    poly = emit_region_polygon(region)
    payload = {"config": config.public(), "S": float(region.S),
               "epsilon_full_range": float(min_epsilon_for_full_range(config.d,
                                                                       config.N)),
               "polygon": poly.to_dict()}
    if config.p is not None:
        q, inclusive = admissible_q(region, config.p)
        payload["admissible_q"] = {"p": config.p, "q_bound": q, "inclusive": inclusive}
    rows = [{"index": i, "inv_q_conj": x, "inv_p_conj": y,
             "edge_strict": s} for i, ((x, y), s) in enumerate(zip(poly.vertices,
                                                                    poly.strict))]
    return EXIT_OK, payload, rows


_RUNNERS = {"decompose": _run_decompose, "verify-geom": _run_verify,
            "identity": _run_identity, "knapp": _run_knapp, "region": _run_region}


def run(config):
    """Execute one command; returns ``(exit_status, payload, csv_rows)``."""
    return _RUNNERS[config.command](config)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="affine-decomp",
        description="Dyadic torsion decompositions, geometric checks and "
                    "restriction probes for curves.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--curve", dest="curve_path", help="JSON curve spec")
        sp.add_argument("--k-min", type=int, default=0)
        sp.add_argument("--k-max", type=int, default=4)
        sp.add_argument("--shrink-A", dest="A", type=float, default=DEFAULT_SHRINK_A)
        sp.add_argument("--hgrid-m", type=int, default=3)
        sp.add_argument("--hgrid-points", type=int, default=5)
        sp.add_argument("--quad-tol", type=float, default=1e-9)
        sp.add_argument("--id-tol", type=float, default=1e-6)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--json", dest="json_path")
        sp.add_argument("--csv", dest="csv_path")
        sp.add_argument("--samples", type=int, default=2000,
                        help="random tuples per cell, or matrices per size")
        sp.add_argument("--id-samples", type=int, default=20)
        sp.add_argument("--grid-density", type=int, default=20)
        sp.add_argument("--p", type=float, default=None,
                        help="knapp default 1.25")
        sp.add_argument("--q", type=float, default=None,
                        help="default: the scaling-line value")
        sp.add_argument("--epsilon", type=float, default=0.0)
        sp.add_argument("--d", type=int, default=2)
        sp.add_argument("--N", type=float, default=4.0)
        sp.add_argument("--delta-min-exp", type=int, default=2)
        sp.add_argument("--delta-max-exp", type=int, default=6)
        sp.add_argument("--t0", type=float, default=None)
        sp.add_argument("--threads", type=int, default=None)
    return parser


def config_from_args(args):
    return RunConfig(
        command=args.command, curve_path=args.curve_path,
        k_range=(args.k_min, args.k_max), A=args.A, hgrid_m=args.hgrid_m,
        hgrid_points=args.hgrid_points, quad_tol=args.quad_tol, id_tol=args.id_tol,
        seed=args.seed, json_path=args.json_path, csv_path=args.csv_path,
        samples=args.samples, id_samples=args.id_samples,
        grid_density=args.grid_density, p=args.p, q=args.q, epsilon=args.epsilon,
        d=args.d, N=args.N, delta_exps=(args.delta_min_exp, args.delta_max_exp),
        t0=args.t0, threads=args.threads)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        status, payload, rows = run(config)
    except json.JSONDecodeError as exc:
        print(f"error: malformed curve spec at line {exc.lineno}, column {exc.colno}: "
              f"{exc.msg}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, ArithmeticError, OscillationBudgetError,
            QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    payload["exit_status"] = status
    if config.json_path:
        write_json(config.json_path, payload)
    else:
        sys.stdout.write(canonical_json(payload))
    if config.csv_path:
        write_csv(config.csv_path, rows)
    return status


if __name__ == "__main__":
    sys.exit(main())
