import numpy as np
import pytest

from conftest import constant_spec, generic_spec, points_for
from hspace6 import _kernels
from hspace6.jets import DIM, Jet2, JetMatrix, ParamFn, coordinates, fd_arrays
from hspace6.metrics import metric_at, metric_field
from hspace6.solution import build_solution
from hspace6.tensors import (
    DegeneratePlane,
    christoffel,
    covariant_derivative_2tensor,
    covariant_hessian_scalar,
    geometry_at,
    metric_compatibility,
    riemann,
    riemann_symmetry_residuals,
    sectional_curvature,
)


def flat_metric(p):
    g = np.diag([1.0, 1.0, -1.0, -1.0, -1.0, -1.0])
    return metric_field(g.tolist(), p)


def conformal_sphere(p, k):
    """delta / (1 + k|x|^2/4)^2: constant sectional curvature k."""
    x = coordinates(p)
    r2 = sum((xi * xi for xi in x), Jet2(0.0))
    c = (1.0 + r2 * (k / 4.0)) ** -2
    rows = [[c if i == j else 0.0 for j in range(DIM)] for i in range(DIM)]
    return metric_field(rows, p)


def test_flat_metric_has_no_connection_or_curvature():
    m = flat_metric(np.ones(DIM))
    c = christoffel(m)
    assert not c.gamma.any() and not c.dgamma.any()
    assert not riemann(c, m).r_updown.any()


def test_constant_fixture_has_no_connection():
    spec = constant_spec("T33").with_(theta=ParamFn.const(1.0), omega=ParamFn.const(2.0))
    m = metric_at(spec, np.full(DIM, 1.5))
    c = christoffel(m)
    assert not c.gamma.any() and not c.dgamma.any()


def test_toy_diagonal_christoffel():
    p = np.array([1.7, 1, 1, 1, 1, 1])
    x = coordinates(p)
    rows = [[0.0] * DIM for _ in range(DIM)]
    rows[0][0] = x[0] * x[0]
    for i in range(1, DIM):
        rows[i][i] = 1.0
    c = christoffel(metric_field(rows, p))
    assert c.gamma[0, 0, 0] == pytest.approx(1 / 1.7, rel=1e-14)
    assert np.count_nonzero(c.gamma) == 1


def test_dgamma_matches_fd_of_gamma():
    spec = generic_spec("T51")
    p = points_for(spec)[0]
    c = christoffel(metric_at(spec, p))
    _, grad, _ = fd_arrays(lambda q: christoffel(metric_at(spec, q)).gamma, p)
    assert np.abs(c.dgamma - grad).max() <= 1e-5 * np.abs(grad).max()


def test_sphere_curvature_matches_closed_form(rng):
    k = 0.7
    p = rng.uniform(-0.5, 0.5, DIM)
    m = conformal_sphere(p, k)
    r = geometry_at(m).riemann
    g = m.g.val
    expected = k * (np.einsum("ik,jl->ijkl", g, g) - np.einsum("il,jk->ijkl", g, g))
    assert np.abs(r.r_low - expected).max() <= 1e-12 * np.abs(expected).max()
    for _ in range(20):
        u, v = rng.normal(size=DIM), rng.normal(size=DIM)
        assert sectional_curvature(r, m, u, v) == pytest.approx(k, rel=1e-12)


def test_riemann_sign_parameter_flips_tensor():
    spec = generic_spec("T2211")
    m = metric_at(spec, points_for(spec)[0])
    c = christoffel(m)
    assert np.array_equal(riemann(c, m, -1).r_updown, -riemann(c, m, 1).r_updown)


def test_symmetries_and_compatibility(tag):
    spec = generic_spec(tag)
    for p in points_for(spec):
        geom = geometry_at(metric_at(spec, p))
        assert metric_compatibility(geom.metric, geom.christoffel) <= 1e-12
        assert max(riemann_symmetry_residuals(geom.riemann).values()) <= 1e-10


def test_constant_curvature_fixture_fits_single_k(rng):
    spec = constant_spec("T33")
    for p in points_for(spec, count=3):
        m = metric_at(spec, p)
        r = geometry_at(m).riemann
        u, v = rng.normal(size=DIM), rng.normal(size=DIM)
        k = sectional_curvature(r, m, u, v)
        g = m.g.val
        model = k * (np.einsum("ik,jl->ijkl", g, g) - np.einsum("il,jk->ijkl", g, g))
        assert np.abs(r.r_low - model).max() <= 1e-8


def test_sectional_curvature_flat_and_degenerate(rng):
    m = flat_metric(np.ones(DIM))
    r = geometry_at(m).riemann
    u, v = rng.normal(size=DIM), rng.normal(size=DIM)
    assert sectional_curvature(r, m, u, v) == 0.0
    with pytest.raises(DegeneratePlane):
        sectional_curvature(r, m, u, u)
    # null plane in the indefinite metric
    e = np.eye(DIM)
    with pytest.raises(DegeneratePlane):
        sectional_curvature(r, m, e[0] + e[2], e[1])


def test_covariant_derivative_of_metric_vanishes(tag):
    spec = generic_spec(tag)
    m = metric_at(spec, points_for(spec)[1])
    nab = covariant_derivative_2tensor(m.g, christoffel(m))
    assert np.abs(nab).max() <= 1e-12 * np.abs(m.g.grad).max()


def test_constant_tensor_on_flat_metric():
    m = flat_metric(np.ones(DIM))
    b = JetMatrix.from_entries(np.arange(36.0).reshape(DIM, DIM).tolist())
    assert not covariant_derivative_2tensor(b, christoffel(m)).any()


def test_covariant_derivative_of_b_against_fd(tag):
    spec = generic_spec(tag)
    p = points_for(spec)[2]
    m, sol = build_solution(spec, p)
    c = christoffel(m)
    _, db_fd, _ = fd_arrays(lambda q: build_solution(spec, q)[1].b.val, p)
    expected = db_fd - np.einsum("mik,mj->ijk", c.gamma, sol.b.val) - np.einsum("mjk,im->ijk", c.gamma, sol.b.val)
    got = covariant_derivative_2tensor(sol.b, c)
    assert np.abs(got - expected).max() <= 1e-6 * np.abs(db_fd).max()


def test_covariant_hessian_basic():
    m = flat_metric(np.ones(DIM))
    c = christoffel(m)
    assert not covariant_hessian_scalar(Jet2(3.0), c).any()
    x = coordinates(np.full(DIM, 1.3))
    h = covariant_hessian_scalar(x[0] * x[1], c)
    expected = np.zeros((DIM, DIM))
    expected[0, 1] = expected[1, 0] = 1.0
    assert np.array_equal(h, expected)


def test_covariant_hessian_against_fd(tag):
    spec = generic_spec(tag)
    p = points_for(spec)[3]
    m, sol = build_solution(spec, p)
    c = christoffel(m)
    _, dgrad, _ = fd_arrays(lambda q: build_solution(spec, q)[1].phi.grad, p)
    expected = 0.5 * (dgrad + dgrad.T) - np.einsum("mij,m->ij", c.gamma, sol.phi.grad)
    got = covariant_hessian_scalar(sol.phi, c)
    scale = max(np.abs(dgrad).max(), np.abs(expected).max(), 1e-12)
    assert np.abs(got - expected).max() <= 1e-6 * scale


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
def test_backends_agree(tag):
    spec = generic_spec(tag)
    p = points_for(spec)[4]
    m = metric_at(spec, p)
    args = (m.g.val, m.g.grad, m.g.hess)
    for a, b in zip(_kernels.inverse_jet_np(*args), _kernels.inverse_jet_nb(*args)):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(a).max())
    gam_np = _kernels.christoffel_np(m.g_inv.val, m.g_inv.grad, m.g.grad, m.g.hess)
    gam_nb = _kernels.christoffel_nb(m.g_inv.val, m.g_inv.grad, m.g.grad, m.g.hess)
    for a, b in zip(gam_np, gam_nb):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13 * np.abs(a).max())
    r_np = _kernels.riemann_np(*gam_np)
    r_nb = _kernels.riemann_nb(*gam_np)
    assert np.allclose(r_np, r_nb, rtol=1e-12, atol=1e-13 * np.abs(r_np).max())
    b = m.g.val * 2.0
    cd_np = _kernels.cov_deriv_np(b, m.g.grad, gam_np[0])
    cd_nb = _kernels.cov_deriv_nb(b, m.g.grad, gam_np[0])
    assert np.allclose(cd_np, cd_nb, rtol=1e-12, atol=1e-13 * np.abs(cd_np).max())


def test_set_backend_switches_dispatch():
    before = _kernels.backend()
    try:
        _kernels.set_backend("numpy")
        assert _kernels.backend() == "numpy"
        with pytest.raises(ValueError):
            _kernels.set_backend("fortran")
    finally:
        _kernels.set_backend(before)
