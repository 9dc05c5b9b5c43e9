"""End-to-end acceptance checks over the shipped fixtures.

Each test records one PASS/FAIL line; conftest prints them in the terminal
summary.  Run with ``pytest tests/test_acceptance.py``.
"""

from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest

from conftest import TAGS
from hspace6.cli import main, run_verify
from hspace6.config import fixture_path, load_fixture
from hspace6.metrics import sample_points
from hspace6.solution import build_solution

RESULTS: list[str] = []
SCALES = (1.0, 2.0, -3.0)


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


@lru_cache(maxsize=None)
def report(name, a1=1.0):
    cfg = load_fixture(name)
    if a1 != 1.0:
        cfg = replace(cfg, a1=a1)
    return run_verify(cfg)


def generic(tag):
    return f"{tag.lower()}_generic"


def worst_suite(suite):
    vals = {t: report(generic(t)).suites[suite] for t in TAGS}
    return vals, max(v["worst"] for v in vals.values())


def test_criterion_1_eisenhart():
    vals, worst = worst_suite("eisenhart")
    points = min(report(generic(t)).config["points"] for t in TAGS)
    ok = worst <= 1e-8 and points >= 100
    assert record(1, ok, f"eisenhart worst={worst:.2e} (tol 1e-8, {points} points per type)")


def test_criterion_2_integrability():
    vals, worst = worst_suite("integrability")
    flipped = min(v["flipped_sign_worst"] for v in vals.values())
    ok = worst <= 1e-7 and flipped > 1e-2
    assert record(2, ok, f"integrability worst={worst:.2e} (tol 1e-7), flipped-sign min over types={flipped:.2e} (> 1e-2)")


@pytest.mark.parametrize("tag", TAGS)
def test_criterion_3_vanishing(tag):
    s = report(generic(tag)).suites["vanishing"]
    bad = sorted(k for k, v in s["checks"].items() if not v <= 1e-9)
    detail = f"{tag} vanishing worst={s['worst']:.2e} (tol 1e-9, {len(s['checks'])} checks)"
    if bad:
        detail += f" failing: {', '.join(bad)}"
    assert record(3, not bad, detail)


def test_criterion_4_proof_identities():
    vals, worst = worst_suite("proof_ids")
    count = sum(len(v["checks"]) for v in vals.values())
    assert record(4, worst <= 1e-8, f"proof identities worst={worst:.2e} (tol 1e-8, {count} identities)")


def test_criterion_5_constant_curvature():
    lines, ok = [], True
    for tag in TAGS:
        for kind, want in (("generic", False), ("constant", True)):
            name = f"{tag.lower()}_{kind}"
            if kind == "generic":
                c = report(name).suites["curvature"]
            else:
                c = run_verify(replace(load_fixture(name), suites=("curvature",))).suites["curvature"]
            good = c.get("predicate") is want and c["pairs"] >= 200
            good = good and (c["spread"] <= 1e-8 if want else c["spread"] >= 1e-3)
            ok &= good
            lines.append(f"{name}={c['spread']:.1e}")
    assert record(5, ok, "spreads " + " ".join(lines))


def test_criterion_6_fd_oracle():
    worst = max(report(generic(t)).suites["metric"]["checks"]["fd_discrepancy"] for t in TAGS)
    assert record(6, worst <= 1e-6, f"metric jets vs central FD worst={worst:.2e} (tol 1e-6, 20 points per type)")


def test_criterion_7_tensor_identities():
    compat = max(report(generic(t)).suites["tensors"]["checks"]["metric_compatibility"] for t in TAGS)
    sym = max(
        v
        for t in TAGS
        for k, v in report(generic(t)).suites["tensors"]["checks"].items()
        if k != "metric_compatibility"
    )
    ok = compat <= 1e-12 and sym <= 1e-10
    assert record(7, ok, f"nabla g={compat:.2e} (tol 1e-12), riemann symmetries={sym:.2e} (tol 1e-10)")


@pytest.mark.parametrize("tag", TAGS)
def test_criterion_8_scaling(tag):
    name = generic(tag)
    cfg = load_fixture(name)
    pts = sample_points(cfg.spec, cfg.sampler)
    lin = 0.0
    for p in pts[:20]:
        _, base = build_solution(cfg.spec, p, 1.0)
        for a1 in SCALES[1:]:
            _, sol = build_solution(cfg.spec, p, a1)
            for got, ref in ((sol.phi.val, base.phi.val), (sol.phi.grad, base.phi.grad), (sol.phi.hess, base.phi.hess)):
                scale = max(np.abs(a1 * ref).max(), 1e-300)
                lin = max(lin, np.abs(got - a1 * ref).max() / scale)
    failing = sorted({f"{s}@a1={a1:g}" for a1 in SCALES for s, v in report(name, a1).suites.items() if not v["pass"]})
    ok = lin <= 1e-15 and not failing
    detail = f"{tag} phi linearity={lin:.1e}"
    detail += f" failing: {', '.join(failing)}" if failing else " all suites pass for a1 in {1, 2, -3}"
    assert record(8, ok, detail)


def test_criterion_9_determinism(tmp_path):
    path = str(fixture_path("t2211_generic"))
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        main(["verify", path, "--out", str(out)])
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    assert record(9, ok, f"two verify runs on t2211_generic identical={ok} ({len(outs[0])} bytes)")
