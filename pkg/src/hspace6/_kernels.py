"""Fixed-size tensor kernels in two interchangeable backends.

Every kernel exists as a pure-numpy version (``*_np``) and a numba version
(``*_nb``).  The dispatch names without suffix pick the numba path unless the
environment variable ``HSPACE6_NUMBA`` is ``0`` or numba cannot be imported.
Index conventions (all 0-based):

    dg[i, j, k]       = d_k g_ij
    ddg[i, j, k, l]   = d_k d_l g_ij
    gam[i, j, k]      = Gamma^i_jk
    dgam[i, j, k, l]  = d_l Gamma^i_jk
    riem[i, j, k, l]  = R^i_jkl = d_k Gamma^i_jl - d_l Gamma^i_jk
                                  + Gamma^i_km Gamma^m_jl - Gamma^i_lm Gamma^m_jk
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_env = os.environ.get("HSPACE6_NUMBA", "1").strip().lower()
USE_NUMBA = HAVE_NUMBA and _env not in ("0", "false", "no", "off")


def inverse_jet_np(val, grad, hess):
    inv = np.linalg.inv(val)
    igrad = -np.einsum("ia,abk,bj->ijk", inv, grad, inv)
    # d_k d_l (g^-1) = g^-1 (dk g g^-1 dl g + dl g g^-1 dk g - dk dl g) g^-1
    t = np.einsum("abk,bc,cdl->adkl", grad, inv, grad)
    inner = t + t.transpose(0, 1, 3, 2) - hess
    ihess = np.einsum("ia,adkl,dj->ijkl", inv, inner, inv)
    return inv, igrad, ihess


def christoffel_np(ginv, dginv, dg, ddg):
    # lowered symbol: low[l, j, k] = 1/2 (d_j g_lk + d_k g_jl - d_l g_jk)
    low = 0.5 * (dg.transpose(0, 2, 1) + dg.transpose(1, 0, 2) - dg.transpose(2, 0, 1))
    dlow = 0.5 * (ddg.transpose(0, 2, 1, 3) + ddg.transpose(1, 0, 2, 3) - ddg.transpose(2, 0, 1, 3))
    gam = np.einsum("il,ljk->ijk", ginv, low)
    dgam = np.einsum("ilm,ljk->ijkm", dginv, low) + np.einsum("il,ljkm->ijkm", ginv, dlow)
    return gam, dgam


def riemann_np(gam, dgam):
    return (
        dgam.transpose(0, 1, 3, 2)
        - dgam
        + np.einsum("ikm,mjl->ijkl", gam, gam)
        - np.einsum("ilm,mjk->ijkl", gam, gam)
    )


def cov_deriv_np(bval, bgrad, gam):
    """b_{ij;k} = d_k b_ij - Gamma^m_ik b_mj - Gamma^m_jk b_im."""
    return bgrad - np.einsum("mik,mj->ijk", gam, bval) - np.einsum("mjk,im->ijk", gam, bval)


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def inverse_jet_nb(val, grad, hess):
        n = val.shape[0]
        inv = np.linalg.inv(val)
        igrad = np.zeros((n, n, n))
        # a_k = inv @ dk g, used for both orders
        ak = np.zeros((n, n, n))
        for k in range(n):
            for i in range(n):
                for b in range(n):
                    s = 0.0
                    for a in range(n):
                        s += inv[i, a] * grad[a, b, k]
                    ak[i, b, k] = s
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for b in range(n):
                        s += ak[i, b, k] * inv[b, j]
                    igrad[i, j, k] = -s
        ihess = np.zeros((n, n, n, n))
        tmp = np.zeros((n, n))
        for k in range(n):
            for l in range(k, n):
                # inner = dk g inv dl g + dl g inv dk g - dkdl g; result inv inner inv
                for i in range(n):
                    for d in range(n):
                        s = -hess[i, d, k, l]
                        for c in range(n):
                            s += ak[c, d, l] * grad[i, c, k] + ak[c, d, k] * grad[i, c, l]
                        tmp[i, d] = s
                for i in range(n):
                    for j in range(n):
                        s = 0.0
                        for a in range(n):
                            ia = inv[i, a]
                            if ia == 0.0:
                                continue
                            t = 0.0
                            for d in range(n):
                                t += tmp[a, d] * inv[d, j]
                            s += ia * t
                        ihess[i, j, k, l] = s
                        ihess[i, j, l, k] = s
        return inv, igrad, ihess

    @njit(cache=True, nogil=True)
    def christoffel_nb(ginv, dginv, dg, ddg):
        n = ginv.shape[0]
        low = np.zeros((n, n, n))
        dlow = np.zeros((n, n, n, n))
        for l in range(n):
            for j in range(n):
                for k in range(j, n):
                    v = 0.5 * (dg[l, k, j] + dg[j, l, k] - dg[j, k, l])
                    low[l, j, k] = v
                    low[l, k, j] = v
                    for m in range(n):
                        w = 0.5 * (ddg[l, k, j, m] + ddg[j, l, k, m] - ddg[j, k, l, m])
                        dlow[l, j, k, m] = w
                        dlow[l, k, j, m] = w
        gam = np.zeros((n, n, n))
        dgam = np.zeros((n, n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    s = 0.0
                    for l in range(n):
                        s += ginv[i, l] * low[l, j, k]
                    gam[i, j, k] = s
                    gam[i, k, j] = s
                    for m in range(n):
                        t = 0.0
                        for l in range(n):
                            t += dginv[i, l, m] * low[l, j, k] + ginv[i, l] * dlow[l, j, k, m]
                        dgam[i, j, k, m] = t
                        dgam[i, k, j, m] = t
        return gam, dgam

    @njit(cache=True, nogil=True)
    def riemann_nb(gam, dgam):
        n = gam.shape[0]
        r = np.zeros((n, n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(k + 1, n):
                        s = dgam[i, j, l, k] - dgam[i, j, k, l]
                        for m in range(n):
                            s += gam[i, k, m] * gam[m, j, l] - gam[i, l, m] * gam[m, j, k]
                        r[i, j, k, l] = s
                        r[i, j, l, k] = -s
        return r

    @njit(cache=True, nogil=True)
    def cov_deriv_nb(bval, bgrad, gam):
        n = bval.shape[0]
        out = np.empty((n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    s = bgrad[i, j, k]
                    for m in range(n):
                        s -= gam[m, i, k] * bval[m, j] + gam[m, j, k] * bval[i, m]
                    out[i, j, k] = s
        return out


_NUMPY = {
    "inverse_jet": inverse_jet_np,
    "christoffel": christoffel_np,
    "riemann": riemann_np,
    "cov_deriv": cov_deriv_np,
}
_NUMBA = (
    {
        "inverse_jet": inverse_jet_nb,
        "christoffel": christoffel_nb,
        "riemann": riemann_nb,
        "cov_deriv": cov_deriv_nb,
    }
    if HAVE_NUMBA
    else _NUMPY
)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def set_backend(name: str) -> None:
    """Switch kernels at runtime (tests and benchmarks)."""
    global USE_NUMBA
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not available")
    USE_NUMBA = name == "numba"


def _table():
    return _NUMBA if USE_NUMBA else _NUMPY


def inverse_jet(val, grad, hess):
    return _table()["inverse_jet"](
        np.ascontiguousarray(val), np.ascontiguousarray(grad), np.ascontiguousarray(hess)
    )


def christoffel(ginv, dginv, dg, ddg):
    return _table()["christoffel"](
        np.ascontiguousarray(ginv),
        np.ascontiguousarray(dginv),
        np.ascontiguousarray(dg),
        np.ascontiguousarray(ddg),
    )


def riemann(gam, dgam):
    return _table()["riemann"](np.ascontiguousarray(gam), np.ascontiguousarray(dgam))


def cov_deriv(bval, bgrad, gam):
    return _table()["cov_deriv"](
        np.ascontiguousarray(bval), np.ascontiguousarray(bgrad), np.ascontiguousarray(gam)
    )
