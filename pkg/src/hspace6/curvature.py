"""Curvature invariants of the simple-root sector and constant-curvature tests.

The rho quantities combine the derivatives of the simple-root eigenvalues
f_s(x^s) with the diagonal metric entries g_ss.  The bracket in rho_{sp}
carries 2 f_s'' / (f_s')^2; it is multiplied through by (f_s')^2 here so the
expression stays finite when a root is constant.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from typing import Sequence

import numpy as np

from .jets import DIM, PoleError, as_point
from .metrics import HSpaceSpec, eigenvalue_functions, metric_at, metric_value
from .tensors import geometry_at, sectional_curvature

PREDICATE_TOL = 1e-10
CONSTANT_SPREAD_TOL = 1e-8
NONCONSTANT_SPREAD_MIN = 1e-3

# eigenvalue coordinates p (last coordinate of each Jordan block) the rho
# quantities are indexed by, per type
BLOCK_INDICES = {
    "T2211": (2, 4),
    "T321": (3, 5),
    "T33": (3, 6),
    "T411": (4,),
    "T51": (5,),
}


class PlaneSamplingExhausted(RuntimeError):
    pass


@dataclass
class CurvatureReport:
    point: tuple[float, ...]
    rho_p: dict[int, float] = field(default_factory=dict)
    rho_pq: dict[tuple[int, int], float] = field(default_factory=dict)
    rho_sigma_p: dict[tuple[int, int], float] = field(default_factory=dict)
    gamma1: float | None = None
    gamma2: float | None = None
    predicate: bool | None = None
    measured_K_spread: float | None = None


def _root_data(spec: HSpaceSpec, p: np.ndarray):
    """Eigenvalues f_1..f_6, and (f', f'', g_ss) for each simple root s."""
    fs = [f.val for f in eigenvalue_functions(spec, p)]
    g = metric_value(spec, p)
    roots = {}
    for s in spec.type.simple_roots:
        _, d1, d2 = spec.f_simple[s].derivs(p[s - 1])
        roots[s] = (d1, d2, g[s - 1, s - 1])
    return fs, roots


def _diff(a: float, b: float, where: str, p) -> float:
    d = a - b
    if d == 0.0:
        raise PoleError(f"eigenvalue collision in {where}", p)
    return d


def curvature_quantities(spec: HSpaceSpec, p: Sequence[float]) -> CurvatureReport:
    p = as_point(p)
    fs, roots = _root_data(spec, p)
    f = lambda i: fs[i - 1]  # noqa: E731
    rep = CurvatureReport(point=tuple(float(v) for v in p))
    idx = BLOCK_INDICES[spec.tag]

    for q in idx:
        rep.rho_p[q] = -0.25 * sum(
            d1**2 / (_diff(f(s), f(q), "rho_p", p) ** 2 * gss) for s, (d1, _, gss) in roots.items()
        )
    for q1, q2 in permutations(idx, 2):
        rep.rho_pq[(q1, q2)] = -0.25 * sum(
            d1**2 / (_diff(f(s), f(q1), "rho_pq", p) * _diff(f(s), f(q2), "rho_pq", p) * gss)
            for s, (d1, _, gss) in roots.items()
        )
    for s, (d1, d2, gss) in roots.items():
        recip = sum(1.0 / _diff(fs[i], f(s), "rho_sp", p) for i in range(DIM) if i != s - 1)
        for q in idx:
            dsq = _diff(f(s), f(q), "rho_sp", p)
            head = -0.25 / (dsq * gss) * (2 * d2 + d1**2 * (-1.0 / dsq + recip))
            tail = -0.25 * sum(
                e1**2 / (_diff(f(r), f(q), "rho_sp", p) * _diff(f(r), f(s), "rho_sp", p) * grr)
                for r, (e1, _, grr) in roots.items()
                if r != s
            )
            rep.rho_sigma_p[(s, q)] = head + tail
    if spec.tag == "T411":
        rep.gamma1 = -0.25 * sum(d1**2 / (_diff(f(s), f(4), "gamma1", p) ** 3 * gss) for s, (d1, _, gss) in roots.items())
        rep.gamma2 = -0.25 * sum(d1**2 / (_diff(f(s), f(4), "gamma2", p) ** 4 * gss) for s, (d1, _, gss) in roots.items())
    return rep


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _point_conditions(spec: HSpaceSpec, p, tol: float) -> bool:
    tag = spec.tag
    if tag in ("T321", "T51"):
        return abs(spec.f_simple[6].derivs(p[5])[1]) <= tol
    if tag == "T33":
        return True
    rep = curvature_quantities(spec, p)
    if tag == "T2211":
        for q in (2, 4):
            other = 4 if q == 2 else 2
            if not _close(rep.rho_p[q], rep.rho_pq[(q, other)], tol):
                return False
            if not all(_close(rep.rho_p[q], rep.rho_sigma_p[(s, q)], tol) for s in (5, 6)):
                return False
        return True
    # T411
    if not all(_close(rep.rho_p[4], rep.rho_sigma_p[(s, 4)], tol) for s in (5, 6)):
        return False
    return abs(rep.gamma1) <= tol and abs(rep.gamma2) <= tol


def constant_curvature_predicate(spec: HSpaceSpec, samples: Sequence[Sequence[float]], tol: float = PREDICATE_TOL) -> bool:
    """Closed-form constant-curvature conditions, function-valued parts checked at every sample."""
    if spec.eps != 0:
        return False
    if spec.type.has_eps_tilde and spec.eps_tilde != 0:
        return False
    return all(_point_conditions(spec, as_point(p), tol) for p in samples)


@dataclass
class CrossCheck:
    predicate: bool
    spread: float
    k_min: float
    k_max: float
    pairs: int
    degenerate: bool
    consistent: bool


def _planes(rng: np.random.Generator, g: np.ndarray, count: int, max_tries: int, rel_tol: float):
    out = []
    tries = 0
    while len(out) < count:
        if tries >= max_tries:
            raise PlaneSamplingExhausted(f"only {len(out)} of {count} admissible planes after {tries} draws")
        tries += 1
        u, v = rng.standard_normal(DIM), rng.standard_normal(DIM)
        guu, gvv, guv = u @ g @ u, v @ g @ v, u @ g @ v
        q = guu * gvv - guv * guv
        if abs(q) > rel_tol * (abs(guu * gvv) + guv * guv):
            out.append((u, v))
    return out


def measure_sectional_curvatures(
    spec: HSpaceSpec,
    samples: Sequence[Sequence[float]],
    planes_per_point: int,
    seed: int = 0,
    plane_rel_tol: float = 1e-3,
    workers: int = 1,
) -> np.ndarray:
    """K for every (point, plane) pair, shape (len(samples), planes_per_point).

    Planes are drawn from a generator seeded per point index, so the result does
    not depend on the worker count.
    """

    def one(args):
        k, p = args
        m = metric_at(spec, p)
        geom = geometry_at(m)
        rng = np.random.default_rng([seed, k])
        planes = _planes(rng, m.g.val, planes_per_point, 100 * planes_per_point, plane_rel_tol)
        return [sectional_curvature(geom.riemann, m, u, v) for u, v in planes]

    items = list(enumerate(samples))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, items))
    else:
        rows = [one(it) for it in items]
    return np.array(rows, dtype=float).reshape(len(samples), planes_per_point)


def cross_validate_constant_curvature(
    spec: HSpaceSpec,
    samples: Sequence[Sequence[float]],
    planes_per_point: int,
    seed: int = 0,
    workers: int = 1,
) -> CrossCheck:
    pred = constant_curvature_predicate(spec, samples)
    ks = measure_sectional_curvatures(spec, samples, planes_per_point, seed, workers=workers)
    k_min, k_max = float(ks.min()), float(ks.max())
    spread = k_max - k_min
    consistent = spread <= CONSTANT_SPREAD_TOL if pred else spread >= NONCONSTANT_SPREAD_MIN
    return CrossCheck(
        predicate=pred,
        spread=spread,
        k_min=k_min,
        k_max=k_max,
        pairs=int(ks.size),
        degenerate=ks.size < 2,
        consistent=consistent,
    )
