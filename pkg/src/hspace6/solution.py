"""Canonical projective-motion solution (b, phi) and its residual checks.

The characteristic operator B is block diagonal in canonical coordinates.  On
a Jordan block with coordinates c1..cn and eigenvalue f it is f*I + N with

    N^{ck}_{c(k+1)} = 1                (k < n-1)
    N^{c(n-1)}_{cn}  = (n-1) * A
    N^{ck}_{cn}      = k * eps * x^{ck} (k < n-1)

where A is the block amplitude from :func:`hspace6.metrics.block_amplitudes`.
The tensor solving the Eisenhart equation with phi = a1/2 * sum(f_i) is
b = a1 * (g B + tr(B) g).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .jets import DIM, Jet2, JetMatrix, as_point, coordinates, eval_param_fn
from .metrics import (
    SELECTED_VARIANTS,
    VARIANTS,
    HSpaceSpec,
    MetricField,
    block_amplitudes,
    eigenvalue_functions,
    metric_at,
    zero_pattern,
)
from .tensors import Geometry, covariant_derivative_2tensor, covariant_hessian_scalar, geometry_at

NORM_FLOOR = 1e-30

# frozen outcome of calibrate_orientation(); asserted by the tests
SHIFT_ORIENTATION = "upper"


class OrientationError(ValueError):
    """b = g B came out asymmetric: the nilpotent shift points the wrong way."""


@dataclass(frozen=True)
class CanonicalSolution:
    b: JetMatrix
    phi: Jet2
    a1: float


@dataclass
class ResidualReport:
    point: tuple[float, ...]
    eisenhart_max: float
    integrability_max: float
    vanishing_max: float
    proof_ids_max: dict[str, float] = field(default_factory=dict)


def jordan_operator(
    spec: HSpaceSpec,
    p: Sequence[float],
    orientation: str | None = None,
    variant: str | None = None,
) -> JetMatrix:
    """B^i_j as a jet matrix (row i, column j)."""
    orientation = orientation or SHIFT_ORIENTATION
    if orientation not in ("upper", "lower"):
        raise ValueError(f"orientation must be 'upper' or 'lower', got {orientation!r}")
    x = coordinates(p)
    fs = eigenvalue_functions(spec, p)
    amps = block_amplitudes(spec, p, variant)
    rows: list[list[Jet2 | float]] = [[0.0] * DIM for _ in range(DIM)]
    for i in range(DIM):
        rows[i][i] = fs[i]
    for blk, A in zip(spec.type.jordan_blocks, amps):
        eps = spec.eps if blk.role == "eps" else spec.eps_tilde
        c = [k - 1 for k in blk.coords]
        n = len(c)
        entries = {(c[k], c[k + 1]): Jet2(1.0) for k in range(n - 2)}
        entries[(c[n - 2], c[n - 1])] = (n - 1) * A
        for k in range(n - 2):
            entries[(c[k], c[n - 1])] = (k + 1) * eps * x[c[k]]
        for (i, j), v in entries.items():
            if orientation == "lower":
                i, j = j, i
            rows[i][j] = v
    return JetMatrix.from_entries(rows)


def _trace(B: JetMatrix) -> Jet2:
    return Jet2(np.trace(B.val), np.einsum("iik->k", B.grad), np.einsum("iikl->kl", B.hess))


def canonical_b(m: MetricField, B: JetMatrix, a1: float = 1.0, sym_tol: float = 1e-12) -> JetMatrix:
    gb = m.g.matmul(B)
    if not gb.is_symmetric(sym_tol):
        raise OrientationError("g B is not symmetric; B is not self-adjoint for this metric")
    b = (gb + m.g.scale(_trace(B))).scale(a1)
    # symmetrize exactly: round-off in the product is the only asymmetry left
    return JetMatrix(
        0.5 * (b.val + b.val.T),
        0.5 * (b.grad + b.grad.swapaxes(0, 1)),
        0.5 * (b.hess + b.hess.swapaxes(0, 1)),
    )


def defining_function(spec: HSpaceSpec, a1: float, p: Sequence[float]) -> Jet2:
    total = Jet2(0.0)
    for f in eigenvalue_functions(spec, p):
        total = total + f
    return total * (0.5 * a1)


def build_solution(
    spec: HSpaceSpec, p: Sequence[float], a1: float = 1.0, m: MetricField | None = None, variant: str | None = None
) -> tuple[MetricField, CanonicalSolution]:
    p = as_point(p)
    m = m if m is not None else metric_at(spec, p, variant)
    B = jordan_operator(spec, p, variant=variant)
    return m, CanonicalSolution(canonical_b(m, B, a1), defining_function(spec, a1, p), float(a1))


def _geom(spec, sol, p, geom, sign=None):
    if geom is not None:
        return geom
    return geometry_at(metric_at(spec, p), sign)


def eisenhart_terms(sol: CanonicalSolution, geom: Geometry) -> tuple[np.ndarray, float]:
    """Residual tensor of b_{ij;k} = 2 g_ij phi_k + g_ik phi_j + g_jk phi_i and its term scale."""
    g = geom.metric.g.val
    d = sol.phi.grad
    t0 = covariant_derivative_2tensor(sol.b, geom.christoffel)
    t1 = 2 * np.einsum("ij,k->ijk", g, d)
    t2 = np.einsum("ik,j->ijk", g, d)
    t3 = np.einsum("jk,i->ijk", g, d)
    # the covariant derivative is itself a sum; its pieces set the round-off scale
    conn = np.einsum("mik,mj->ijk", geom.christoffel.gamma, sol.b.val)
    scale = max(np.abs(t).max() for t in (sol.b.grad, conn, t1, t2, t3))
    return t0 - t1 - t2 - t3, float(scale)


def eisenhart_residual(
    spec: HSpaceSpec, sol: CanonicalSolution, p: Sequence[float], geom: Geometry | None = None
) -> float:
    res, scale = eisenhart_terms(sol, _geom(spec, sol, p, geom))
    return float(np.abs(res).max() / max(scale, NORM_FLOOR))


def integrability_residual(
    spec: HSpaceSpec,
    sol: CanonicalSolution,
    p: Sequence[float],
    geom: Geometry | None = None,
    sign: int | None = None,
) -> float:
    geom = _geom(spec, sol, p, geom, sign)
    if sign is not None and geom is not None:
        # rebuild curvature with the requested sign from the same connection
        from .tensors import riemann

        geom = Geometry(geom.metric, geom.christoffel, riemann(geom.christoffel, geom.metric, sign))
    g = geom.metric.g.val
    b = sol.b.val
    R = geom.riemann.r_updown
    h = covariant_hessian_scalar(sol.phi, geom.christoffel)
    t1 = np.einsum("mi,mjkl->ijkl", b, R)
    t2 = t1.transpose(1, 0, 2, 3)
    t3 = np.einsum("ik,jl->ijkl", g, h)
    t4 = np.einsum("jk,il->ijkl", g, h)
    t5 = np.einsum("li,jk->ijkl", g, h)
    t6 = np.einsum("lj,ik->ijkl", g, h)
    res = t1 + t2 - t3 - t4 + t5 + t6
    scale = max(np.abs(t).max() for t in (t1, t2, t3, t4, t5, t6))
    return float(np.abs(res).max() / max(scale, NORM_FLOOR))


def vanishing_components(spec: HSpaceSpec, sol: CanonicalSolution, geom: Geometry) -> dict[str, float]:
    """Normalized |b_ab| and |phi_{;ab}| over the metric's zero pattern."""
    b = sol.b.val
    h = covariant_hessian_scalar(sol.phi, geom.christoffel)
    h_scale = max(np.abs(sol.phi.hess).max(), np.abs(np.einsum("mij,m->ij", geom.christoffel.gamma, sol.phi.grad)).max())
    b_scale = np.abs(b).max()
    out = {}
    for i, j in zero_pattern(spec):
        out[f"b_{i}{j}"] = abs(b[i - 1, j - 1]) / max(b_scale, NORM_FLOOR)
        out[f"phi;{i}{j}"] = abs(h[i - 1, j - 1]) / max(h_scale, NORM_FLOOR)
    return out


def vanishing_checks(spec: HSpaceSpec, sol: CanonicalSolution, p: Sequence[float], geom: Geometry | None = None) -> float:
    comps = vanishing_components(spec, sol, _geom(spec, sol, p, geom))
    return max(comps.values()) if comps else 0.0


# coordinate pairs whose plain second partial of phi the classification argument sets to zero
PLAIN_PARTIAL_PAIRS: dict[str, tuple[tuple[int, int], ...]] = {
    "T2211": ((5, 6), (2, 5), (2, 6), (4, 5), (4, 6), (2, 4), (2, 2), (4, 4)),
    "T321": ((3, 6), (3, 5), (3, 3), (5, 5)),
    "T33": ((3, 6), (3, 3), (6, 6)),
    "T411": ((5, 6), (4, 5), (4, 6), (4, 4)),
    "T51": ((5, 6), (5, 5)),
}


def plain_partial_checks(spec: HSpaceSpec, sol: CanonicalSolution) -> dict[str, float]:
    H = sol.phi.hess
    scale = max(np.abs(H).max(), np.abs(sol.phi.grad).max(), NORM_FLOOR)
    return {f"d{i}{j}phi": abs(H[i - 1, j - 1]) / scale for i, j in PLAIN_PARTIAL_PAIRS[spec.tag]}


class _Ctx:
    """Quantities shared by the identity checks at one point (1-based accessors)."""

    def __init__(self, spec: HSpaceSpec, sol: CanonicalSolution, m: MetricField):
        self.spec = spec
        self.sol = sol
        self.g = m.g.val
        self.b = sol.b.val
        self.db = sol.b.grad
        self.dphi = sol.phi.grad
        self.hphi = sol.phi.hess
        self.fs = [f.val for f in eigenvalue_functions(spec, m.point)]
        self.x = m.point
        self.floor = max(np.abs(self.dphi).max(), NORM_FLOOR)

    def phi(self, i):
        return self.dphi[i - 1]

    def f(self, i):
        return self.fs[i - 1]

    def fd(self, s):
        """(f_s, f_s', f_s'') of a simple root."""
        return self.spec.f_simple[s].derivs(self.x[s - 1])

    def ratio(self, i, j):
        return self.b[i - 1, j - 1] / self.g[i - 1, j - 1]

    def rel(self, lhs, rhs, *extra):
        terms = [abs(t) for t in (lhs, rhs) + extra]
        return abs(lhs - rhs) / max(max(terms), self.floor)


def _zero(c: _Ctx, *idx):
    return max(abs(c.phi(i)) / c.floor for i in idx)


def _sum_recip(c: _Ctx, t):
    return sum(1.0 / (c.f(i) - c.f(t)) for i in range(1, DIM + 1) if i != t)


def _d_btt(c: _Ctx, t):
    """d_t b_tt / g_tt against -f_t' sum_i (f_i - f_t)^-1 b_tt/g_tt + 4 phi_t."""
    _, fp, _ = c.fd(t)
    lhs = c.db[t - 1, t - 1, t - 1] / c.g[t - 1, t - 1]
    a = -fp * _sum_recip(c, t) * c.ratio(t, t)
    return c.rel(lhs, a + 4 * c.phi(t), a, 4 * c.phi(t))


def _second_order(c: _Ctx, t):
    """f_t' d_t phi_t = f_t'' phi_t."""
    _, fp, fpp = c.fd(t)
    return c.rel(fp * c.hphi[t - 1, t - 1], fpp * c.phi(t))


def _block_formula(c: _Ctx, lhs_idx, coef, simple_or_pair, ref_pair, denom):
    """phi_lhs = coef / denom * (b/g[simple_or_pair] - b/g[ref_pair])."""
    diff = c.ratio(*simple_or_pair) - c.ratio(*ref_pair)
    rhs = coef / denom * diff
    return c.rel(c.phi(lhs_idx), rhs)


def _closed_form(c: _Ctx):
    """phi against a1/2 * sum f_i evaluated from the raw parameter functions."""
    spec, x = c.spec, c.x
    total = 0.0
    for blk in spec.type.blocks:
        last = blk.coords[-1]
        if blk.role == "simple":
            v = spec.f_simple[last](x[last - 1])
        elif blk.role == "eps":
            v = spec.eps * x[last - 1]
        else:
            v = spec.eps_tilde * x[last - 1] + (spec.a or 0.0)
        total += len(blk.coords) * v
    expect = 0.5 * c.sol.a1 * total
    return abs(c.sol.phi.val - expect) / max(abs(expect), abs(c.sol.phi.val), NORM_FLOOR)


def _ids_2211(c: _Ctx) -> dict[str, float]:
    eps, et, a1 = c.spec.eps, c.spec.eps_tilde, c.sol.a1
    out = {"phi_1=0": _zero(c, 1), "phi_3=0": _zero(c, 3)}
    f2, f4 = c.f(2), c.f(4)
    for s, t in ((5, 6), (6, 5)):
        P = 0.5 * (c.ratio(t, t) - c.ratio(s, s)) / (c.f(t) - c.f(s))
        out[f"phi_{s}=f{s}'P_{s}{t}"] = c.rel(c.phi(s), c.fd(s)[1] * P)
    for t in (5, 6):
        fp = c.fd(t)[1]
        ft = c.f(t)
        out[f"phi_{t}_from_block12"] = _block_formula(c, t, 0.5 * fp, (t, t), (1, 2), ft - f2)
        out[f"phi_2_from_root{t}"] = _block_formula(c, 2, eps, (t, t), (1, 2), ft - f2)
        out[f"d{t}b_{t}{t}"] = _d_btt(c, t)
        out[f"2eps*phi_{t}=f{t}'phi_2"] = c.rel(2 * eps * c.phi(t), fp * c.phi(2))
        out[f"f{t}'d{t}phi_{t}=f{t}''phi_{t}"] = _second_order(c, t)
        out[f"2epst*phi_{t}=f{t}'phi_4"] = c.rel(2 * et * c.phi(t), fp * c.phi(4))
        out[f"phi_{t}=a1f{t}'/2"] = c.rel(c.phi(t), 0.5 * a1 * fp)
    # block-to-block relations; each block's own eps multiplies its own gradient
    out["phi_2_from_block34"] = _block_formula(c, 2, eps, (3, 4), (1, 2), f4 - f2)
    out["phi_4_from_block34"] = _block_formula(c, 4, et, (3, 4), (1, 2), f4 - f2)
    out["eps*phi_4=epst*phi_2"] = c.rel(eps * c.phi(4), et * c.phi(2))
    out["phi_2=a1*eps"] = c.rel(c.phi(2), a1 * eps)
    out["phi_4=a1*epst"] = c.rel(c.phi(4), a1 * et)
    out["phi=a1*sum(f)/2"] = _closed_form(c)
    return out


def _ids_321(c: _Ctx) -> dict[str, float]:
    eps, et = c.spec.eps, c.spec.eps_tilde
    f3, f5, f6 = c.f(3), c.f(5), c.f(6)
    fp6 = c.fd(6)[1]
    return {
        "phi_1=phi_2=phi_4=0": _zero(c, 1, 2, 4),
        "phi_6_from_block123": _block_formula(c, 6, 0.5 * fp6, (6, 6), (1, 3), f6 - f3),
        "phi_3_from_root6": _block_formula(c, 3, 1.5 * eps, (6, 6), (1, 3), f6 - f3),
        "d6b_66": _d_btt(c, 6),
        "f6'd6phi_6=f6''phi_6": _second_order(c, 6),
        "3eps*phi_6=f6'phi_3": c.rel(3 * eps * c.phi(6), fp6 * c.phi(3)),
        # relations obtained from the second block (indices 4, 5)
        "phi_6_from_block45": _block_formula(c, 6, 0.5 * fp6, (6, 6), (4, 5), f6 - f5),
        "phi_5_from_root6": _block_formula(c, 5, et, (6, 6), (4, 5), f6 - f5),
        "2epst*phi_6=f6'phi_5": c.rel(2 * et * c.phi(6), fp6 * c.phi(5)),
        "phi_3_from_block45": _block_formula(c, 3, 1.5 * eps, (4, 5), (1, 3), f5 - f3),
        "phi_5_from_block45": _block_formula(c, 5, et, (4, 5), (1, 3), f5 - f3),
        "3eps*phi_5=2epst*phi_3": c.rel(3 * eps * c.phi(5), 2 * et * c.phi(3)),
        "phi=a1*sum(f)/2": _closed_form(c),
    }


def _ids_33(c: _Ctx) -> dict[str, float]:
    eps, et = c.spec.eps, c.spec.eps_tilde
    d = c.f(6) - c.f(3)
    return {
        "phi_1=phi_2=phi_4=phi_5=0": _zero(c, 1, 2, 4, 5),
        "phi_3_from_blocks": _block_formula(c, 3, 1.5 * eps, (4, 6), (1, 3), d),
        "phi_6_from_blocks": _block_formula(c, 6, 1.5 * et, (4, 6), (1, 3), d),
        "epst*phi_3=eps*phi_6": c.rel(et * c.phi(3), eps * c.phi(6)),
        "phi=a1*sum(f)/2": _closed_form(c),
    }


def _ids_411(c: _Ctx) -> dict[str, float]:
    eps = c.spec.eps
    f4 = c.f(4)
    out = {"phi_1=phi_2=phi_3=0": _zero(c, 1, 2, 3)}
    for s, t in ((5, 6), (6, 5)):
        P = 0.5 * (c.ratio(t, t) - c.ratio(s, s)) / (c.f(t) - c.f(s))
        out[f"phi_{s}=f{s}'P_{s}{t}"] = c.rel(c.phi(s), c.fd(s)[1] * P)
    for t in (5, 6):
        fp = c.fd(t)[1]
        out[f"phi_{t}_from_block"] = _block_formula(c, t, 0.5 * fp, (t, t), (1, 4), c.f(t) - f4)
        out[f"phi_4_from_root{t}"] = _block_formula(c, 4, 2 * eps, (t, t), (1, 4), c.f(t) - f4)
        out[f"d{t}b_{t}{t}"] = _d_btt(c, t)
        out[f"f{t}'d{t}phi_{t}=f{t}''phi_{t}"] = _second_order(c, t)
        out[f"4eps*phi_{t}=f{t}'phi_4"] = c.rel(4 * eps * c.phi(t), fp * c.phi(4))
    out["phi=a1*sum(f)/2"] = _closed_form(c)
    return out


def _ids_51(c: _Ctx) -> dict[str, float]:
    eps = c.spec.eps
    f5, f6 = c.f(5), c.f(6)
    fp6 = c.fd(6)[1]
    lhs = c.db[5, 5, 5] / c.g[5, 5]
    a = -5 * fp6 / (f5 - f6) * c.ratio(6, 6)
    return {
        "phi_1=phi_2=phi_3=phi_4=0": _zero(c, 1, 2, 3, 4),
        "phi_6_from_block": _block_formula(c, 6, 0.5 * fp6, (6, 6), (1, 5), f6 - f5),
        "phi_5_from_root6": _block_formula(c, 5, 2.5 * eps, (6, 6), (1, 5), f6 - f5),
        "d6b_66": c.rel(lhs, a + 4 * c.phi(6), a, 4 * c.phi(6)),
        "f6'd6phi_6=f6''phi_6": _second_order(c, 6),
        "5eps*phi_6=f6'phi_5": c.rel(5 * eps * c.phi(6), fp6 * c.phi(5)),
        "phi=a1*sum(f)/2": _closed_form(c),
    }


_IDENTITIES: dict[str, Callable[[_Ctx], dict[str, float]]] = {
    "T2211": _ids_2211,
    "T321": _ids_321,
    "T33": _ids_33,
    "T411": _ids_411,
    "T51": _ids_51,
}


def proof_relation_checks(
    spec: HSpaceSpec, sol: CanonicalSolution, p: Sequence[float], m: MetricField | None = None
) -> dict[str, float]:
    m = m if m is not None else metric_at(spec, p)
    return _IDENTITIES[spec.tag](_Ctx(spec, sol, m))


def residual_report(spec: HSpaceSpec, p: Sequence[float], a1: float = 1.0) -> ResidualReport:
    m, sol = build_solution(spec, p, a1)
    geom = geometry_at(m)
    van = vanishing_components(spec, sol, geom)
    van.update(plain_partial_checks(spec, sol))
    return ResidualReport(
        point=tuple(float(v) for v in m.point),
        eisenhart_max=eisenhart_residual(spec, sol, p, geom),
        integrability_max=integrability_residual(spec, sol, p, geom),
        vanishing_max=max(van.values()) if van else 0.0,
        proof_ids_max=proof_relation_checks(spec, sol, p, m),
    )


# --- calibration -----------------------------------------------------------


def calibrate_variants(
    specs: dict[str, HSpaceSpec], points: dict[str, list], tol: float = 1e-8
) -> dict[str, dict]:
    """Pick, per type, the formula reading whose canonical solution solves the Eisenhart equation.

    Returns ``{tag: {"selected": name | None, "residuals": {name: worst}}}``.
    """
    out = {}
    for tag, spec in specs.items():
        residuals = {}
        for variant in VARIANTS[tag]:
            worst = 0.0
            for p in points[tag]:
                try:
                    m, sol = build_solution(spec, p, variant=variant)
                    worst = max(worst, eisenhart_residual(spec, sol, p, geometry_at(m)))
                except (OrientationError, ArithmeticError, ValueError):
                    worst = float("inf")
            residuals[variant] = worst
        passing = [v for v, r in residuals.items() if r <= tol]
        out[tag] = {"selected": passing[0] if len(passing) == 1 else None, "residuals": residuals}
    return out


def calibrate_orientation(spec: HSpaceSpec, p: Sequence[float]) -> dict[str, bool]:
    """Which nilpotent shift orientations make g B symmetric at ``p``."""
    m = metric_at(spec, p)
    ok = {}
    for orientation in ("upper", "lower"):
        try:
            canonical_b(m, jordan_operator(spec, p, orientation))
            ok[orientation] = True
        except OrientationError:
            ok[orientation] = False
    return ok


def calibrate_riemann_sign(spec: HSpaceSpec, points: list, tol: float = 1e-7) -> dict:
    worst = {}
    for sign in (1, -1):
        w = 0.0
        for p in points:
            m, sol = build_solution(spec, p)
            w = max(w, integrability_residual(spec, sol, p, geometry_at(m), sign=sign))
        worst[sign] = w
    passing = [s for s, w in worst.items() if w <= tol]
    return {"selected": passing[0] if len(passing) == 1 else None, "residuals": worst}
