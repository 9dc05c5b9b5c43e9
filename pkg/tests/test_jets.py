import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hspace6.jets import (
    DIM,
    Jet2,
    JetMatrix,
    ParamFn,
    PoleError,
    coordinates,
    eval_param_fn,
    fd_oracle,
    jet_arith,
    seed_coordinate,
)

coord = st.floats(min_value=0.5, max_value=2.0, allow_nan=False)
points = st.lists(coord, min_size=DIM, max_size=DIM).map(np.array)


def rel_err(jet, ref):
    scale = max(abs(ref.val), np.abs(ref.grad).max(), np.abs(ref.hess).max(), 1e-12)
    return max(
        abs(jet.val - ref.val), np.abs(jet.grad - ref.grad).max(), np.abs(jet.hess - ref.hess).max()
    ) / scale


def test_seed_coordinate():
    j = seed_coordinate((1, 2, 3, 4, 5, 6), 3)
    assert j.val == 3
    assert np.array_equal(j.grad, np.eye(DIM)[2])
    assert not j.hess.any()
    j = seed_coordinate(np.zeros(DIM), 1)
    assert j.val == 0 and j.grad[0] == 1
    assert np.count_nonzero(seed_coordinate(np.ones(DIM), 6).grad) == 1


@pytest.mark.parametrize("axis", [0, 7])
def test_seed_coordinate_rejects_bad_axis(axis):
    with pytest.raises(ValueError):
        seed_coordinate(np.ones(DIM), axis)


def test_product_rule_cross_term():
    x = coordinates((2.0, 3.0, 1, 1, 1, 1))
    j = jet_arith("mul", x[0], x[1])
    assert j.val == 6.0
    expected = np.zeros((DIM, DIM))
    expected[0, 1] = expected[1, 0] = 1.0
    assert np.array_equal(j.hess, expected)


def test_division_by_self_is_one():
    x = coordinates((1.3, 0.7, 2.0, 1.1, 0.4, 1.9))
    j = x[0] * x[1] + x[2] ** 2
    q = jet_arith("div", j, j)
    assert q.val == pytest.approx(1.0, abs=1e-15)
    assert np.abs(q.grad).max() < 1e-14
    assert np.abs(q.hess).max() < 1e-13


def test_division_by_zero_raises_pole():
    x = coordinates(np.ones(DIM))
    with pytest.raises(PoleError):
        x[0] / (x[1] - 1.0)


def test_pow_negative_at_zero_raises():
    x = coordinates(np.zeros(DIM))
    with pytest.raises(PoleError):
        x[0] ** -2


def _composite(x):
    return (x[0] * x[1] - 3 * x[2] ** 2) / (1 + x[3] ** 2) + x[4] ** 3 * x[5] - 2 / x[5]


@given(points)
@settings(max_examples=40, deadline=None)
def test_polynomial_composite_matches_fd(p):
    jet = _composite(coordinates(p))
    ref = fd_oracle(lambda q: _composite(q), p)
    assert rel_err(jet, ref) <= 1e-6


@given(points, st.sampled_from(["add", "sub", "mul", "div"]))
@settings(max_examples=40, deadline=None)
def test_binary_ops_match_fd(p, op):
    def field(q):
        x = coordinates(q)
        a = x[0] * x[1] + x[2]
        b = x[3] ** 2 + x[4] * x[5] + 0.5
        return jet_arith(op, a, b)

    jet = field(p)
    ref = fd_oracle(lambda q: field(q).val, p)
    assert rel_err(jet, ref) <= 1e-6


@given(points, st.integers(min_value=-3, max_value=4))
@settings(max_examples=30, deadline=None)
def test_integer_power_matches_fd(p, n):
    jet = jet_arith("pow_int", coordinates(p)[1] + coordinates(p)[2], n)
    ref = fd_oracle(lambda q: (q[1] + q[2]) ** n, p)
    assert rel_err(jet, ref) <= 1e-6


@given(points, points, points)
@settings(max_examples=30, deadline=None)
def test_ring_laws(p, q, r):
    x = coordinates(p)
    a = x[0] * q[0] + x[1] * q[1]
    b = x[2] * r[2] - x[3]
    c = x[4] * x[5] + q[2]
    assert ((a + b) * c).allclose(a * c + b * c, rtol=1e-12, atol=1e-12)
    assert (a * b).allclose(b * a, rtol=0)
    assert ((a * b) * c).allclose(a * (b * c), rtol=1e-12, atol=1e-12)
    assert (a - a).allclose(Jet2(0.0), atol=0)
    assert jet_arith("neg", jet_arith("neg", a)).allclose(a, rtol=0)


def test_param_fn_polynomial_square():
    x5 = seed_coordinate((1, 1, 1, 1, 3.0, 1), 5)
    j = eval_param_fn(ParamFn.polynomial(0, 0, 1), x5)
    assert j.val == 9.0
    assert np.array_equal(j.grad, 6.0 * np.eye(DIM)[4])
    expected = np.zeros((DIM, DIM))
    expected[4, 4] = 2.0
    assert np.array_equal(j.hess, expected)


def test_param_fn_constant_has_no_derivatives():
    j = eval_param_fn(ParamFn.const(2.5), seed_coordinate(np.ones(DIM), 2))
    assert j.val == 2.5
    assert not j.grad.any() and not j.hess.any()


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=0.5, max_value=2))
@settings(max_examples=30, deadline=None)
def test_param_fn_sine_matches_fd(t, w):
    f = ParamFn.sinusoid(1.5, w, 0.3, -0.2)
    p = np.array([1.0, t, 1.0, 1.0, 1.0, 1.0])
    jet = eval_param_fn(f, seed_coordinate(p, 2))
    ref = fd_oracle(lambda q: f(q[1]), p)
    assert rel_err(jet, ref) <= 1e-6


@pytest.mark.parametrize(
    "fn",
    [ParamFn.polynomial(1.0, -2.0, 0.5), ParamFn.const(-3.0), ParamFn.sinusoid(0.5, 2.0, 0.1, 1.0)],
)
def test_param_fn_roundtrip(fn):
    assert ParamFn.from_dict(fn.to_dict()) == fn


def test_param_fn_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ParamFn.from_dict({"kind": "spline"})


def test_fd_oracle_simple_fields(rng):
    p = rng.uniform(0.5, 2.0, DIM)
    j = fd_oracle(lambda q: 4.0, p)
    assert np.abs(j.grad).max() < 1e-10 and np.abs(j.hess).max() < 1e-10
    j = fd_oracle(lambda q: float(np.sum(q**2)), p)
    assert np.abs(j.hess - 2 * np.eye(DIM)).max() < 1e-5
    x = coordinates(p)
    assert rel_err(x[0] * x[1], fd_oracle(lambda q: q[0] * q[1], p)) <= 1e-6


def test_fd_oracle_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        fd_oracle(lambda q: 1.0, np.ones(DIM), h=0.0)


def test_jet_matrix_matmul_matches_fd(rng):
    p = rng.uniform(1.0, 2.0, DIM)

    def build(q):
        x = coordinates(q)
        a = [[x[(i + j) % DIM] * x[i] + float(i == j) for j in range(DIM)] for i in range(DIM)]
        b = [[x[j] ** 2 - x[(i * j) % DIM] for j in range(DIM)] for i in range(DIM)]
        return JetMatrix.from_entries(a).matmul(JetMatrix.from_entries(b))

    prod = build(p)
    for i, j in [(0, 0), (1, 4), (5, 2), (3, 3)]:
        ref = fd_oracle(lambda q: build(q).val[i, j], p)
        assert rel_err(prod.entry(i, j), ref) <= 1e-6
