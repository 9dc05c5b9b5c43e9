"""Order-2 jets in six coordinates.

A :class:`Jet2` carries a scalar together with its gradient and Hessian at a
point, and propagates them exactly through arithmetic.  Matrices of jets are
stored as stacked arrays in :class:`JetMatrix` so the tensor kernels can work
on plain ndarrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DIM = 6

# |value| below this is treated as a pole when dividing
POLE_TOL = 1e-300


class PoleError(ArithmeticError):
    """Division by a jet whose value vanishes."""

    def __init__(self, message: str, point: Sequence[float] | None = None):
        self.point = None if point is None else tuple(float(x) for x in point)
        if self.point is not None:
            message = f"{message} at point {self.point}"
        super().__init__(message)


def as_point(x: Sequence[float]) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (DIM,):
        raise ValueError(f"a point needs {DIM} coordinates, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


class Jet2:
    """Value, gradient and symmetric Hessian of a scalar field at a point."""

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val: float, grad: np.ndarray | None = None, hess: np.ndarray | None = None):
        self.val = float(val)
        self.grad = np.zeros(DIM) if grad is None else np.asarray(grad, dtype=float)
        self.hess = np.zeros((DIM, DIM)) if hess is None else np.asarray(hess, dtype=float)

    @classmethod
    def constant(cls, c: float) -> Jet2:
        return cls(c)

    def __repr__(self) -> str:
        return f"Jet2(val={self.val!r}, grad={self.grad.tolist()!r})"

    @property
    def is_finite(self) -> bool:
        return bool(math.isfinite(self.val) and np.all(np.isfinite(self.grad)) and np.all(np.isfinite(self.hess)))

    def _lift(self, other) -> Jet2:
        if isinstance(other, Jet2):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet2(float(other))
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return Jet2(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return Jet2(self.val - o.val, self.grad - o.grad, self.hess - o.hess)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return o - self

    def __neg__(self) -> Jet2:
        return Jet2(-self.val, -self.grad, -self.hess)

    def __pos__(self) -> Jet2:
        return self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = float(other)
            return Jet2(c * self.val, c * self.grad, c * self.hess)
        if not isinstance(other, Jet2):
            return NotImplemented
        outer = np.outer(self.grad, other.grad)
        return Jet2(
            self.val * other.val,
            self.grad * other.val + self.val * other.grad,
            self.hess * other.val + self.val * other.hess + outer + outer.T,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> Jet2:
        v = self.val
        if not abs(v) > POLE_TOL:
            raise PoleError(f"division by a jet with value {v!r}")
        inv = 1.0 / v
        return Jet2(
            inv,
            -self.grad * inv * inv,
            -self.hess * inv * inv + 2.0 * np.outer(self.grad, self.grad) * inv ** 3,
        )

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            if not abs(float(other)) > POLE_TOL:
                raise PoleError(f"division by constant {other!r}")
            return self * (1.0 / float(other))
        if not isinstance(other, Jet2):
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return o * self.reciprocal()

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            return NotImplemented
        n = int(n)
        if n == 0:
            return Jet2(1.0)
        if n < 0:
            return self.reciprocal() ** (-n)
        v = self.val
        d1 = n * v ** (n - 1)
        d2 = n * (n - 1) * v ** (n - 2) if n >= 2 else 0.0
        return Jet2(v ** n, d1 * self.grad, d1 * self.hess + d2 * np.outer(self.grad, self.grad))

    def compose(self, f: float, df: float, d2f: float) -> Jet2:
        """Apply a univariate function given its value and first two derivatives at ``self.val``."""
        return Jet2(f, df * self.grad, d2f * np.outer(self.grad, self.grad) + df * self.hess)

    def scaled(self, c: float) -> Jet2:
        return self * float(c)

    def allclose(self, other: Jet2, rtol: float = 1e-12, atol: float = 0.0) -> bool:
        return bool(
            np.isclose(self.val, other.val, rtol=rtol, atol=atol)
            and np.allclose(self.grad, other.grad, rtol=rtol, atol=atol)
            and np.allclose(self.hess, other.hess, rtol=rtol, atol=atol)
        )


def seed_coordinate(p: Sequence[float], axis: int) -> Jet2:
    """Jet of the coordinate function ``x^axis`` (1-based) at ``p``."""
    if not isinstance(axis, (int, np.integer)) or not 1 <= axis <= DIM:
        raise ValueError(f"axis must be in 1..{DIM}, got {axis!r}")
    p = as_point(p)
    grad = np.zeros(DIM)
    grad[axis - 1] = 1.0
    return Jet2(p[axis - 1], grad)


def coordinates(p: Sequence[float]) -> list[Jet2]:
    """All six coordinate jets at ``p``; ``coordinates(p)[0]`` is x^1."""
    return [seed_coordinate(p, k) for k in range(1, DIM + 1)]


_ARITH = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow_int": lambda a, b: a ** b,
    "neg": lambda a, b: -a,
}


def jet_arith(op: str, a: Jet2, b: Jet2 | int | None = None) -> Jet2:
    """Functional form of the jet operators (``op`` in add, sub, mul, div, pow_int, neg)."""
    try:
        fn = _ARITH[op]
    except KeyError:
        raise ValueError(f"unknown jet operation {op!r}") from None
    if op == "pow_int" and not isinstance(b, (int, np.integer)):
        raise TypeError("pow_int needs an integer exponent")
    return fn(a, b)


@dataclass(frozen=True)
class ParamFn:
    """A univariate parameter function: polynomial, sinusoid or constant.

    ``coeffs`` are in increasing degree for polynomials.  A sinusoid is
    ``amplitude * sin(frequency * t + phase) + offset``.
    """

    kind: str
    coeffs: tuple[float, ...] = ()
    amplitude: float = 0.0
    frequency: float = 1.0
    phase: float = 0.0
    offset: float = 0.0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "sinusoid", "constant"):
            raise ValueError(f"unknown parameter function kind {self.kind!r}")
        if self.kind == "polynomial":
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def polynomial(cls, *coeffs: float) -> ParamFn:
        return cls("polynomial", coeffs=tuple(coeffs))

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float = 1.0, phase: float = 0.0, offset: float = 0.0) -> ParamFn:
        return cls("sinusoid", amplitude=amplitude, frequency=frequency, phase=phase, offset=offset)

    @classmethod
    def const(cls, value: float) -> ParamFn:
        return cls("constant", value=value)

    def derivs(self, t: float) -> tuple[float, float, float]:
        """``(f(t), f'(t), f''(t))``."""
        if self.kind == "constant":
            return float(self.value), 0.0, 0.0
        if self.kind == "sinusoid":
            arg = self.frequency * t + self.phase
            s, c = math.sin(arg), math.cos(arg)
            w = self.frequency
            return (self.amplitude * s + self.offset, self.amplitude * w * c, -self.amplitude * w * w * s)
        c = self.coeffs
        if not c:
            return 0.0, 0.0, 0.0
        f = np.polynomial.polynomial.polyval(t, c)
        d1 = np.polynomial.polynomial.polyder(c, 1)
        d2 = np.polynomial.polynomial.polyder(c, 2)
        return (
            float(f),
            float(np.polynomial.polynomial.polyval(t, d1)) if len(d1) else 0.0,
            float(np.polynomial.polynomial.polyval(t, d2)) if len(d2) else 0.0,
        )

    def __call__(self, t: float) -> float:
        return self.derivs(t)[0]

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "sinusoid":
            return self.amplitude == 0.0 or self.frequency == 0.0
        return all(c == 0.0 for c in self.coeffs[1:])

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.coeffs)}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {
            "kind": "sinusoid",
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ParamFn:
        if not isinstance(d, dict) or "kind" not in d:
            raise ValueError("parameter function must be an object with a 'kind'")
        kind = d["kind"]
        if kind == "polynomial":
            coeffs = d.get("coeffs")
            if not isinstance(coeffs, list) or not all(isinstance(c, (int, float)) for c in coeffs):
                raise ValueError("polynomial needs a numeric 'coeffs' list")
            return cls.polynomial(*coeffs)
        if kind == "constant":
            return cls.const(float(d.get("value", 0.0)))
        if kind == "sinusoid":
            return cls.sinusoid(
                float(d.get("amplitude", 1.0)),
                float(d.get("frequency", 1.0)),
                float(d.get("phase", 0.0)),
                float(d.get("offset", 0.0)),
            )
        raise ValueError(f"unknown parameter function kind {kind!r}")


def eval_param_fn(f: ParamFn, t: Jet2) -> Jet2:
    return t.compose(*f.derivs(t.val))


def fd_oracle(field: Callable[[np.ndarray], float], p: Sequence[float], h: float = 1e-4) -> Jet2:
    """Central-difference gradient and Hessian of a scalar field.

    Independent of the jet arithmetic; used as a derivative oracle in tests.
    """
    val, grad, hess = fd_arrays(lambda x: np.asarray(field(x), dtype=float), p, h)
    return Jet2(float(val), grad, hess)


def fd_arrays(field: Callable[[np.ndarray], np.ndarray], p: Sequence[float], h: float = 1e-4):
    """Central differences for an array-valued field.

    Returns ``(val, grad, hess)`` with derivative axes appended last.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    p = as_point(p)
    e = np.eye(DIM) * h

    def ev(x):
        try:
            return np.asarray(field(x), dtype=float)
        except PoleError as exc:
            raise PoleError("finite-difference stencil hit a pole", x) from exc

    f0 = ev(p)
    plus = [ev(p + e[i]) for i in range(DIM)]
    minus = [ev(p - e[i]) for i in range(DIM)]
    grad = np.stack([(plus[i] - minus[i]) / (2 * h) for i in range(DIM)], axis=-1)
    hess = np.empty(f0.shape + (DIM, DIM))
    for i in range(DIM):
        hess[..., i, i] = (plus[i] - 2 * f0 + minus[i]) / (h * h)
        for j in range(i + 1, DIM):
            pp = ev(p + e[i] + e[j])
            pm = ev(p + e[i] - e[j])
            mp = ev(p - e[i] + e[j])
            mm = ev(p - e[i] - e[j])
            hess[..., i, j] = hess[..., j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return f0, grad, hess


@dataclass
class JetMatrix:
    """A 6x6 matrix of jets as stacked arrays.

    ``val[i, j]``, ``grad[i, j, k] = d_k m_ij``, ``hess[i, j, k, l] = d_k d_l m_ij``.
    """

    val: np.ndarray
    grad: np.ndarray
    hess: np.ndarray = field(repr=False)

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[Jet2 | float]]) -> JetMatrix:
        val = np.zeros((DIM, DIM))
        grad = np.zeros((DIM, DIM, DIM))
        hess = np.zeros((DIM, DIM, DIM, DIM))
        for i in range(DIM):
            for j in range(DIM):
                e = entries[i][j]
                if isinstance(e, Jet2):
                    val[i, j], grad[i, j], hess[i, j] = e.val, e.grad, e.hess
                else:
                    val[i, j] = float(e)
        return cls(val, grad, hess)

    @classmethod
    def zeros(cls) -> JetMatrix:
        return cls(np.zeros((DIM, DIM)), np.zeros((DIM, DIM, DIM)), np.zeros((DIM, DIM, DIM, DIM)))

    def entry(self, i: int, j: int) -> Jet2:
        """0-based entry as a :class:`Jet2`."""
        return Jet2(self.val[i, j], self.grad[i, j].copy(), self.hess[i, j].copy())

    def transpose(self) -> JetMatrix:
        return JetMatrix(self.val.swapaxes(0, 1), self.grad.swapaxes(0, 1), self.hess.swapaxes(0, 1))

    def __add__(self, other: JetMatrix) -> JetMatrix:
        return JetMatrix(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    def scale(self, s: Jet2 | float) -> JetMatrix:
        if not isinstance(s, Jet2):
            c = float(s)
            return JetMatrix(c * self.val, c * self.grad, c * self.hess)
        v, g, H = s.val, s.grad, s.hess
        return JetMatrix(
            v * self.val,
            v * self.grad + self.val[..., None] * g,
            v * self.hess
            + self.val[..., None, None] * H
            + self.grad[..., :, None] * g[None, None, None, :]
            + g[None, None, :, None] * self.grad[..., None, :],
        )

    def matmul(self, other: JetMatrix) -> JetMatrix:
        """Product with full order-2 propagation."""
        a, b = self, other
        val = a.val @ b.val
        grad = np.einsum("imk,mj->ijk", a.grad, b.val) + np.einsum("im,mjk->ijk", a.val, b.grad)
        hess = (
            np.einsum("imkl,mj->ijkl", a.hess, b.val)
            + np.einsum("im,mjkl->ijkl", a.val, b.hess)
            + np.einsum("imk,mjl->ijkl", a.grad, b.grad)
            + np.einsum("iml,mjk->ijkl", a.grad, b.grad)
        )
        return JetMatrix(val, grad, hess)

    def is_symmetric(self, rtol: float = 0.0) -> bool:
        scale = max(np.max(np.abs(self.val)), 1e-300)
        d = np.max(np.abs(self.val - self.val.T))
        return bool(d <= rtol * scale)
