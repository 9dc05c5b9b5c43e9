"""Levi-Civita connection, curvature and covariant derivatives at a point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .jets import Jet2, JetMatrix
from .metrics import MetricField

# Global Riemann sign.  +1 is the convention R^i_jkl = d_k G^i_jl - d_l G^i_jk + ...;
# calibrated against the integrability conditions (see solution.calibrate_riemann_sign).
RIEMANN_SIGN = 1


class DegeneratePlane(ValueError):
    pass


@dataclass(frozen=True)
class Christoffel:
    gamma: np.ndarray  # gamma[i, j, k] = Gamma^i_jk
    dgamma: np.ndarray  # dgamma[i, j, k, l] = d_l Gamma^i_jk


@dataclass(frozen=True)
class RiemannTensor:
    r_updown: np.ndarray  # R^i_jkl
    r_low: np.ndarray  # R_ijkl = g_im R^m_jkl


def christoffel(m: MetricField) -> Christoffel:
    gam, dgam = _kernels.christoffel(m.g_inv.val, m.g_inv.grad, m.g.grad, m.g.hess)
    return Christoffel(gam, dgam)


def riemann(c: Christoffel, m: MetricField, sign: int | None = None) -> RiemannTensor:
    s = RIEMANN_SIGN if sign is None else sign
    r = _kernels.riemann(c.gamma, c.dgamma)
    if s != 1:
        r = s * r
    low = np.einsum("im,mjkl->ijkl", m.g.val, r)
    return RiemannTensor(r, low)


def covariant_derivative_2tensor(b: JetMatrix, c: Christoffel) -> np.ndarray:
    """``out[i, j, k] = b_{ij;k}`` for a symmetric 2-tensor given as jets."""
    return _kernels.cov_deriv(b.val, b.grad, c.gamma)


def covariant_hessian_scalar(phi: Jet2, c: Christoffel) -> np.ndarray:
    h = phi.hess - np.einsum("mij,m->ij", c.gamma, phi.grad)
    return 0.5 * (h + h.T)


def riemann_symmetry_residuals(r: RiemannTensor) -> dict[str, float]:
    """Antisymmetries, pair symmetry and first Bianchi identity, relative to max |R|."""
    low = r.r_low
    scale = max(float(np.abs(low).max()), 1e-300)
    up = r.r_updown
    bianchi = up + up.transpose(0, 2, 3, 1) + up.transpose(0, 3, 1, 2)
    return {
        "antisym_first_pair": float(np.abs(low + low.transpose(1, 0, 2, 3)).max()) / scale,
        "antisym_last_pair": float(np.abs(low + low.transpose(0, 1, 3, 2)).max()) / scale,
        "pair_symmetry": float(np.abs(low - low.transpose(2, 3, 0, 1)).max()) / scale,
        "first_bianchi": float(np.abs(bianchi).max()) / max(float(np.abs(up).max()), 1e-300),
    }


def metric_compatibility(m: MetricField, c: Christoffel) -> float:
    """max |g_{ij;k}| relative to the largest term in its expansion."""
    nab = covariant_derivative_2tensor(m.g, c)
    t1 = np.abs(m.g.grad).max()
    t2 = np.abs(np.einsum("mik,mj->ijk", c.gamma, m.g.val)).max()
    return float(np.abs(nab).max() / max(t1, t2, 1e-300))


def sectional_curvature(r: RiemannTensor, m: MetricField, u, v, rel_tol: float = 1e-8) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = m.g.val
    guu, gvv, guv = u @ g @ u, v @ g @ v, u @ g @ v
    denom = guu * gvv - guv * guv
    ref = abs(guu * gvv) + guv * guv
    if not abs(denom) > rel_tol * max(ref, 1e-300):
        raise DegeneratePlane(f"plane is null or degenerate (|Q|={abs(denom):.3g})")
    num = np.einsum("ijkl,i,j,k,l->", r.r_low, u, v, u, v)
    return float(num / denom)


@dataclass(frozen=True)
class Geometry:
    """Everything the residual checks need at one point."""

    metric: MetricField
    christoffel: Christoffel
    riemann: RiemannTensor


def geometry_at(m: MetricField, sign: int | None = None) -> Geometry:
    c = christoffel(m)
    return Geometry(m, c, riemann(c, m, sign))
