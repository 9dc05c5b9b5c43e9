"""Command line entry point: ``hspace6 verify``, ``hspace6 fixtures``."""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import SUITES, ConfigError, RunConfig, fixture_names, fixture_path, load_config
from .curvature import PlaneSamplingExhausted, cross_validate_constant_curvature
from .jets import PoleError
from .metrics import (
    SELECTED_VARIANTS,
    DegeneracyError,
    SamplingExhausted,
    SpecError,
    check_signature,
    fd_metric_discrepancy,
    sample_points,
)
from .solution import (
    SHIFT_ORIENTATION,
    OrientationError,
    build_solution,
    calibrate_orientation,
    calibrate_riemann_sign,
    calibrate_variants,
    eisenhart_residual,
    integrability_residual,
    plain_partial_checks,
    proof_relation_checks,
    vanishing_components,
)
from .tensors import RIEMANN_SIGN, geometry_at, metric_compatibility, riemann_symmetry_residuals

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SAMPLING = 0, 1, 2, 3

METRIC_COMPAT_TOL = 1e-12
FLIP_WITNESS_MIN = 1e-2
FD_POINTS = 20
CURVATURE_POINTS = 20
CALIBRATION_POINTS = 5
EXPECTED_SIGNATURE = (2, 4)

_POINT_ERRORS = (PoleError, DegeneracyError, OrientationError, ArithmeticError, ValueError, np.linalg.LinAlgError)


@dataclass
class RunReport:
    config: dict
    suites: dict = field(default_factory=dict)
    per_point: list = field(default_factory=list)
    calibration: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    version: str = __version__
    wall_clock_s: float | None = None

    @property
    def passed(self) -> bool:
        return all(s["pass"] for s in self.suites.values())

    def to_dict(self) -> dict:
        d = {
            "config": self.config,
            "suites": self.suites,
            "per_point": self.per_point,
            "calibration": self.calibration,
            "errors": self.errors,
            "passed": self.passed,
            "version": self.version,
        }
        if self.wall_clock_s is not None:
            d["wall_clock_s"] = self.wall_clock_s
        return d


def _evaluate_point(cfg: RunConfig, k: int, p: np.ndarray, sign: int) -> tuple[dict, dict, list]:
    """Worst residual per suite at one point, per-check details, and error records."""
    spec = cfg.spec
    worst: dict[str, float] = {}
    details: dict[str, dict[str, float]] = {}
    errors = []

    def record(suite, exc):
        worst[suite] = math.inf
        errors.append({"point": k, "suite": suite, "error": f"{type(exc).__name__}: {exc}"})

    try:
        m, sol = build_solution(spec, p, cfg.a1)
        geom = geometry_at(m, sign)
    except _POINT_ERRORS as exc:
        for s in cfg.suites:
            if s != "curvature":
                record(s, exc)
        return worst, details, errors

    for suite in cfg.suites:
        try:
            if suite == "metric":
                sig = check_signature(m.g.val)
                d = {"signature_ok": 0.0 if sig == EXPECTED_SIGNATURE else math.inf}
                if k < FD_POINTS:
                    d["fd_discrepancy"] = fd_metric_discrepancy(spec, p)
                details[suite] = d
            elif suite == "tensors":
                d = {"metric_compatibility": metric_compatibility(m, geom.christoffel)}
                d.update(riemann_symmetry_residuals(geom.riemann))
                details[suite] = d
            elif suite == "eisenhart":
                details[suite] = {"residual": eisenhart_residual(spec, sol, p, geom)}
            elif suite == "integrability":
                d = {"residual": integrability_residual(spec, sol, p, geom)}
                d["flipped_sign"] = integrability_residual(spec, sol, p, geom, sign=-sign)
                details[suite] = d
            elif suite == "vanishing":
                d = vanishing_components(spec, sol, geom)
                d.update(plain_partial_checks(spec, sol))
                details[suite] = d
            elif suite == "proof_ids":
                details[suite] = proof_relation_checks(spec, sol, p, m)
            else:
                continue
            if suite == "integrability":
                worst[suite] = details[suite]["residual"]
            elif suite == "tensors":
                # compatibility has its own, tighter bound; fold it into the suite scale
                d = details[suite]
                sym = max(v for key, v in d.items() if key != "metric_compatibility")
                ratio = cfg.tolerances["tensors"] / METRIC_COMPAT_TOL
                worst[suite] = max(sym, d["metric_compatibility"] * ratio)
            else:
                worst[suite] = max(details[suite].values()) if details[suite] else 0.0
        except _POINT_ERRORS as exc:
            record(suite, exc)
    return worst, details, errors


def _calibrate(cfg: RunConfig, points: list) -> dict:
    spec = cfg.spec
    pts = points[:CALIBRATION_POINTS]
    variants = calibrate_variants({spec.tag: spec}, {spec.tag: pts})[spec.tag]
    sign = calibrate_riemann_sign(spec, pts)
    return {
        "riemann_sign": {
            "selected": sign["selected"],
            "in_use": cfg.riemann_sign if cfg.riemann_sign is not None else RIEMANN_SIGN,
            "overridden": cfg.riemann_sign is not None,
            "residuals": {str(k): v for k, v in sign["residuals"].items()},
        },
        "variants": {
            "selected": variants["selected"],
            "in_use": SELECTED_VARIANTS[spec.tag],
            "residuals": variants["residuals"],
        },
        "shift_orientation": {"admissible": calibrate_orientation(spec, pts[0]), "in_use": SHIFT_ORIENTATION},
    }


def run_verify(cfg: RunConfig, workers: int = 1, timing: bool = False) -> RunReport:
    start = time.perf_counter()
    points = sample_points(cfg.spec, cfg.sampler)
    sign = cfg.riemann_sign if cfg.riemann_sign is not None else RIEMANN_SIGN
    report = RunReport(
        config={
            "name": cfg.name,
            "source": cfg.source,
            "a1": cfg.a1,
            "suites": list(cfg.suites),
            "tolerances": {s: cfg.tolerances[s] for s in cfg.suites},
            "points": len(points),
            "sampler": {
                "box": [list(b) for b in cfg.sampler.box],
                "count": cfg.sampler.count,
                "margin": cfg.sampler.margin,
                "seed": cfg.sampler.seed,
            },
            "backend": _kernels.backend(),
        }
    )
    report.calibration = _calibrate(cfg, points)

    def job(item):
        k, p = item
        return _evaluate_point(cfg, k, p, sign)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(job, enumerate(points)))
    else:
        results = [job(item) for item in enumerate(points)]

    for suite in cfg.suites:
        if suite == "curvature":
            continue
        per_check: dict[str, float] = {}
        worst, worst_at = 0.0, None
        for k, (w, details, _) in enumerate(results):
            v = w.get(suite, 0.0)
            if worst_at is None or v > worst:
                worst, worst_at = v, k
            for key, val in details.get(suite, {}).items():
                per_check[key] = max(per_check.get(key, 0.0), val)
        tol = cfg.tolerances[suite]
        entry = {"worst": worst, "worst_point": worst_at, "tolerance": tol, "checks": per_check}
        if suite == "integrability":
            entry["checks"].pop("flipped_sign", None)
            entry["flipped_sign_worst"] = max(d.get(suite, {}).get("flipped_sign", 0.0) for _, d, _ in results)
        entry["pass"] = bool(worst <= tol)
        report.suites[suite] = entry

    for k, (w, _, errs) in enumerate(results):
        report.per_point.append({"index": k, "point": [float(x) for x in points[k]], "worst": w})
        report.errors.extend(errs)

    if "curvature" in cfg.suites:
        report.suites["curvature"] = _curvature_suite(cfg, points)
    if timing:
        report.wall_clock_s = time.perf_counter() - start
    return report


def _curvature_suite(cfg: RunConfig, points: list) -> dict:
    tol = cfg.tolerances["curvature"]
    try:
        cc = cross_validate_constant_curvature(cfg.spec, points[:CURVATURE_POINTS], cfg.planes_per_point, cfg.sampler.seed)
    except (PlaneSamplingExhausted, *_POINT_ERRORS) as exc:
        return {"pass": False, "error": f"{type(exc).__name__}: {exc}", "tolerance": tol}
    ok = cc.spread <= tol if cc.predicate else cc.spread >= 1e-3
    return {
        "pass": bool(ok),
        "predicate": cc.predicate,
        "spread": cc.spread,
        "k_min": cc.k_min,
        "k_max": cc.k_max,
        "pairs": cc.pairs,
        "degenerate": cc.degenerate,
        "tolerance": tol,
    }


# --- canonical emission ----------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def _encode(obj, out: list[str]) -> None:
    import json

    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for n, key in enumerate(sorted(obj, key=str)):
            if n:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for n, item in enumerate(obj):
            if n:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def emit_report(r: RunReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        out: list[str] = []
        _encode(r.to_dict(), out)
        return ("".join(out) + "\n").encode()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines = [f"hspace6 {r.version}  {r.config.get('name', '')}  points={r.config.get('points')}"]
    for suite in SUITES:
        if suite not in r.suites:
            continue
        s = r.suites[suite]
        status = "PASS" if s["pass"] else "FAIL"
        if suite == "curvature":
            if "error" in s:
                lines.append(f"{status} {suite:14s} {s['error']}")
            else:
                lines.append(f"{status} {suite:14s} predicate={s['predicate']} spread={s['spread']:.3e}")
        else:
            lines.append(f"{status} {suite:14s} worst={s['worst']:.3e} tol={s['tolerance']:.1e}")
    for e in r.errors[:10]:
        lines.append(f"  error at point {e['point']} ({e['suite']}): {e['error']}")
    return ("\n".join(lines) + "\n").encode()


# --- argument handling -----------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hspace6", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the residual suites for one configuration")
    v.add_argument("config", help="JSON configuration file")
    v.add_argument("--out", help="write the report here instead of stdout")
    v.add_argument("--format", choices=("json", "text"), default="json")
    v.add_argument("--suite", action="append", choices=SUITES, help="restrict to this suite (repeatable)")
    v.add_argument("--seed", type=int, help="override sampler seed")
    v.add_argument("--points", type=int, help="override sampler point count")
    v.add_argument("--workers", type=int, default=1, help="evaluate points on this many threads")
    v.add_argument("--timing", action="store_true", help="include wall-clock seconds (report no longer reproducible)")

    f = sub.add_parser("fixtures", help="shipped fixture configurations")
    fsub = f.add_subparsers(dest="fixtures_command", required=True)
    fsub.add_parser("list", help="print fixture names and paths")
    ra = fsub.add_parser("run-all", help="verify every shipped fixture, one summary line each")
    ra.add_argument("--points", type=int, help="override sampler point count")
    ra.add_argument("--workers", type=int, default=1)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    sampler = cfg.sampler
    if getattr(args, "seed", None) is not None:
        sampler = replace(sampler, seed=args.seed)
    if getattr(args, "points", None) is not None:
        if args.points < 1:
            raise ConfigError("--points must be positive")
        sampler = replace(sampler, count=args.points)
    suites = cfg.suites
    if getattr(args, "suite", None):
        suites = tuple(dict.fromkeys(args.suite))
    return replace(cfg, sampler=sampler, suites=suites)


def _write(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    Path(out).write_bytes(data)


def _verify(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report = run_verify(cfg, workers=args.workers, timing=args.timing)
    _write(emit_report(report, args.format), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _fixtures(args) -> int:
    if args.fixtures_command == "list":
        for name in fixture_names():
            print(f"{name}\t{fixture_path(name)}")
        return EXIT_OK
    status = EXIT_OK
    for name in fixture_names():
        cfg = _apply_overrides(load_config(fixture_path(name)), args)
        report = run_verify(cfg, workers=args.workers)
        failed = [s for s, v in report.suites.items() if not v["pass"]]
        print(f"{'PASS' if not failed else 'FAIL'} {name:16s}" + (f" failing: {', '.join(failed)}" if failed else ""))
        if failed:
            status = EXIT_FAIL
    return status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _verify(args)
        return _fixtures(args)
    except SamplingExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLING
    except (ConfigError, SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
