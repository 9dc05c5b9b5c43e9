"""The five canonical rigid 6-dimensional h-space metrics.

Each type is described by its Jordan blocks (coordinates sharing one
eigenvalue) plus simple roots.  Metrics are assembled entry by entry as
:class:`~hspace6.jets.Jet2` values, so every component carries exact first and
second partials.

A few published line elements are ambiguous as printed.  Those entries are
built from a table of candidate readings (:data:`VARIANTS`); the active
reading per type is :data:`SELECTED_VARIANTS`, chosen once by the Eisenhart
residual of the canonical solution (see
:func:`hspace6.solution.calibrate_variants`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .jets import DIM, Jet2, JetMatrix, ParamFn, PoleError, as_point, coordinates, eval_param_fn, fd_arrays


class SpecError(ValueError):
    """Invalid h-space parameterization."""


class EpsConstraintError(SpecError):
    pass


class NonzeroAError(SpecError):
    pass


class SignError(SpecError):
    pass


class SamplingExhausted(RuntimeError):
    def __init__(self, message: str, constraint: str):
        super().__init__(message)
        self.constraint = constraint


class DegeneracyError(ValueError):
    """Singular metric, degenerate signature or ill-conditioned matrix."""


@dataclass(frozen=True)
class Block:
    coords: tuple[int, ...]  # 1-based coordinates
    role: str  # "eps" or "eps_tilde" block, or "simple"


@dataclass(frozen=True)
class HSpaceType:
    tag: str
    blocks: tuple[Block, ...]
    sign_indices: tuple[int, ...]
    has_eps_tilde: bool
    theta_arg: int
    omega_arg: int | None

    @property
    def simple_roots(self) -> tuple[int, ...]:
        return tuple(b.coords[0] for b in self.blocks if b.role == "simple")

    @property
    def jordan_blocks(self) -> tuple[Block, ...]:
        return tuple(b for b in self.blocks if b.role != "simple")

    def block_of(self, i: int) -> Block:
        for b in self.blocks:
            if i in b.coords:
                return b
        raise IndexError(i)


def _blk(coords, role):
    return Block(tuple(coords), role)


TYPES: dict[str, HSpaceType] = {
    "T2211": HSpaceType(
        "T2211",
        (_blk((1, 2), "eps"), _blk((3, 4), "eps_tilde"), _blk((5,), "simple"), _blk((6,), "simple")),
        (2, 4, 5, 6),
        True,
        2,
        4,
    ),
    "T321": HSpaceType(
        "T321",
        (_blk((1, 2, 3), "eps"), _blk((4, 5), "eps_tilde"), _blk((6,), "simple")),
        (3, 5, 6),
        True,
        3,
        5,
    ),
    "T33": HSpaceType("T33", (_blk((1, 2, 3), "eps"), _blk((4, 5, 6), "eps_tilde")), (3, 6), True, 3, 6),
    "T411": HSpaceType(
        "T411", (_blk((1, 2, 3, 4), "eps"), _blk((5,), "simple"), _blk((6,), "simple")), (4, 5, 6), False, 4, None
    ),
    "T51": HSpaceType("T51", (_blk((1, 2, 3, 4, 5), "eps"), _blk((6,), "simple")), (5, 6), False, 5, None),
}

# candidate readings of ambiguous printed entries; first entry is the literal text
VARIANTS: dict[str, tuple[str, ...]] = {
    "T2211": ("standard",),
    "T321": ("g66_literal", "g66_product"),
    "T33": ("atilde_x4", "atilde_x5"),
    "T411": ("extra_in_braces", "extra_outside", "extra_reconstructed"),
    "T51": ("standard",),
}

# frozen outcome of calibrate_variants(); asserted by the test suite
SELECTED_VARIANTS: dict[str, str] = {
    "T2211": "standard",
    "T321": "g66_product",
    "T33": "atilde_x5",
    "T411": "extra_reconstructed",
    "T51": "standard",
}


@dataclass(frozen=True)
class HSpaceSpec:
    type: HSpaceType
    eps: int
    eps_tilde: int | None = None
    a: float | None = None
    signs: dict[int, int] = field(default_factory=dict)
    theta: ParamFn = ParamFn.const(1.0)
    omega: ParamFn | None = None
    f_simple: dict[int, ParamFn] = field(default_factory=dict)
    relax_eps_constraint: bool = False

    @property
    def tag(self) -> str:
        return self.type.tag

    def sign(self, i: int) -> int:
        return int(self.signs.get(i, 1))

    def with_(self, **kw) -> HSpaceSpec:
        return replace(self, **kw)


def make_spec(tag: str, **kw) -> HSpaceSpec:
    try:
        t = TYPES[tag]
    except KeyError:
        raise SpecError(f"unknown h-space type {tag!r}") from None
    return HSpaceSpec(type=t, **kw)


def validate_spec(spec: HSpaceSpec) -> HSpaceSpec:
    t = spec.type
    if spec.eps not in (0, 1):
        raise SpecError(f"eps must be 0 or 1, got {spec.eps!r}")
    if t.has_eps_tilde:
        if spec.eps_tilde not in (0, 1):
            raise SpecError(f"eps_tilde must be 0 or 1, got {spec.eps_tilde!r}")
        if spec.omega is None:
            raise SpecError(f"{t.tag} needs an omega parameter function")
        if not spec.relax_eps_constraint and spec.eps == spec.eps_tilde:
            raise EpsConstraintError("ε ≠ ε̃ violated (set relax_eps_constraint to allow it)")
        if spec.eps_tilde == 0 and (spec.a is None or spec.a == 0):
            raise NonzeroAError("a must be nonzero when eps_tilde = 0")
    for i in t.sign_indices:
        if spec.signs.get(i, 1) not in (1, -1):
            raise SignError(f"sign e{i} must be +1 or -1, got {spec.signs[i]!r}")
    extra = set(spec.signs) - set(t.sign_indices)
    if extra:
        raise SignError(f"{t.tag} has no signs {sorted(extra)}")
    missing = set(t.simple_roots) - set(spec.f_simple)
    if missing:
        raise SpecError(f"{t.tag} needs parameter functions for simple roots {sorted(missing)}")
    return spec


def eigenvalue_functions(spec: HSpaceSpec, p: Sequence[float]) -> list[Jet2]:
    """Jets of f_1..f_6 at ``p`` (list index 0 is f_1)."""
    x = coordinates(p)
    out: list[Jet2 | None] = [None] * DIM
    for blk in spec.type.blocks:
        last = blk.coords[-1]
        if blk.role == "simple":
            f = eval_param_fn(spec.f_simple[last], x[last - 1])
        elif blk.role == "eps":
            f = spec.eps * x[last - 1]
        else:
            f = spec.eps_tilde * x[last - 1] + (spec.a or 0.0)
        for c in blk.coords:
            out[c - 1] = f
    return out  # type: ignore[return-value]


def block_amplitudes(spec: HSpaceSpec, p: Sequence[float], variant: str | None = None) -> list[Jet2]:
    """The functions A (and Ã) attached to each Jordan block, in block order.

    For a block on coordinates c1..cn: A = eps * x^{c(n-1)} + theta(x^{cn}).
    """
    variant = variant or SELECTED_VARIANTS[spec.tag]
    x = coordinates(p)
    out = []
    for blk in spec.type.jordan_blocks:
        c = blk.coords
        if blk.role == "eps":
            out.append(spec.eps * x[c[-2] - 1] + eval_param_fn(spec.theta, x[c[-1] - 1]))
        else:
            lin = c[-2]
            if spec.tag == "T33" and variant == "atilde_x4":
                lin = 4
            out.append(spec.eps_tilde * x[lin - 1] + eval_param_fn(spec.omega, x[c[-1] - 1]))
    return out


def _simple_diag(spec, fs, s) -> Jet2:
    prod = Jet2(1.0)
    for i in range(1, DIM + 1):
        if i != s:
            prod = prod * (fs[i - 1] - fs[s - 1])
    return spec.sign(s) * prod


def _entries_2211(spec, x, fs, amps, variant):
    f2, f4, f5, f6 = fs[1], fs[3], fs[4], fs[5]
    A, At = amps
    s1 = 2 / (f4 - f2) + 1 / (f5 - f2) + 1 / (f6 - f2)
    s2 = 2 / (f2 - f4) + 1 / (f5 - f4) + 1 / (f6 - f4)
    c1 = spec.sign(2) * (f4 - f2) ** 2 * (f5 - f2) * (f6 - f2)
    c2 = spec.sign(4) * (f2 - f4) ** 2 * (f5 - f4) * (f6 - f4)
    return {
        (1, 2): c1 * A,
        (2, 2): -(c1 * A * A * s1),
        (3, 4): c2 * At,
        (4, 4): -(c2 * At * At * s2),
        (5, 5): _simple_diag(spec, fs, 5),
        (6, 6): _simple_diag(spec, fs, 6),
    }


def _three_block(c, A, ex1, s1, s2, sign_s1):
    """Braced 3-block: (dx_b)^2 + 4A dx_a dx_c + 2(ex1 -/+ 2A s1) dx_b dx_c + (...)(dx_c)^2."""
    k = sign_s1
    return {
        "bb": c,
        "ac": c * (2 * A),
        "bc": c * (ex1 + k * 2 * A * s1),
        "cc": c * (ex1 * ex1 + k * 4 * ex1 * A * s1 + 4 * A * A * s2),
    }


def _entries_321(spec, x, fs, amps, variant):
    eps = spec.eps
    f3, f5, f6 = fs[2], fs[4], fs[5]
    A, At = amps
    s1 = 1 / (f6 - f3) + 2 / (f5 - f3)
    s2 = (f6 - f3) ** -2 + 2 * (f5 - f3) ** -2
    s3 = (s1 * s1 - s2) * 0.5
    s4 = 3 / (f3 - f5) + 1 / (f6 - f5)
    c1 = spec.sign(3) * (f5 - f3) ** 2 * (f6 - f3)
    b = _three_block(c1, A, eps * x[0], s1, s3, -1)
    c2 = spec.sign(5) * (f3 - f5) ** 3 * (f6 - f5)
    if variant == "g66_literal":
        g66 = spec.sign(6) * (f5 - f6) ** 2 * (f5 - f6) ** 3
    else:
        g66 = spec.sign(6) * (f3 - f6) ** 3 * (f5 - f6) ** 2
    return {
        (2, 2): b["bb"],
        (1, 3): b["ac"],
        (2, 3): b["bc"],
        (3, 3): b["cc"],
        (4, 5): c2 * At,
        (5, 5): -(c2 * s4 * At * At),
        (6, 6): g66,
    }


def _entries_33(spec, x, fs, amps, variant):
    f3, f6 = fs[2], fs[5]
    A, At = amps
    s1 = 3 / (f6 - f3)
    s2 = 3 * (f6 - f3) ** -2
    b1 = _three_block(spec.sign(3) * (f6 - f3) ** 3, A, spec.eps * x[0], s1, s2, -1)
    b2 = _three_block(spec.sign(6) * (f3 - f6) ** 3, At, spec.eps_tilde * x[3], s1, s2, +1)
    return {
        (2, 2): b1["bb"],
        (1, 3): b1["ac"],
        (2, 3): b1["bc"],
        (3, 3): b1["cc"],
        (5, 5): b2["bb"],
        (4, 6): b2["ac"],
        (5, 6): b2["bc"],
        (6, 6): b2["cc"],
    }


def _entries_411(spec, x, fs, amps, variant):
    eps = spec.eps
    f4, f5, f6 = fs[3], fs[4], fs[5]
    (A,) = amps
    x1, x2 = x[0], x[1]
    s1 = 1 / (f5 - f4) + 1 / (f6 - f4)
    c = spec.sign(4) * (f5 - f4) * (f6 - f4)
    ex2 = eps * x2
    g34 = x1 * eps - 2 * ex2 * s1
    g44 = 4 * (ex2 * ex2 * s1 + eps * eps * x1 * x2 - 1.5 * eps * x1 * A * s1)
    ent = {
        (1, 4): c * (3 * A),
        (2, 3): c,
        (2, 4): c * (2 * ex2 - 3 * A * s1),
        (3, 3): -(c * s1),
    }
    if variant == "extra_in_braces":
        ent[(3, 4)] = c * (g34 + 1.5 * A)
        ent[(4, 4)] = c * (g44 + 12 * ex2 * A)
    elif variant == "extra_outside":
        ent[(3, 4)] = c * g34 + 1.5 * A
        ent[(4, 4)] = c * g44 + 12 * ex2 * A
    else:
        s2 = 1 / ((f5 - f4) * (f6 - f4))
        ent[(3, 4)] = c * (g34 + 3 * A * s2)
        ent[(4, 4)] = c * (
            4 * (-(ex2 * ex2 * s1) + eps * eps * x1 * x2 - 1.5 * eps * x1 * A * s1) + 12 * ex2 * A * s2
        )
    ent[(5, 5)] = _simple_diag(spec, fs, 5)
    ent[(6, 6)] = _simple_diag(spec, fs, 6)
    return ent


def _entries_51(spec, x, fs, amps, variant):
    eps = spec.eps
    f5, f6 = fs[4], fs[5]
    (A,) = amps
    e1, e2, e3 = eps * x[0], eps * x[1], eps * x[2]
    s1 = 1 / (f6 - f5)
    c = spec.sign(5) * (f6 - f5)
    return {
        (1, 5): c * (4 * A),
        (2, 4): c,
        (2, 5): c * (3 * e3 - 4 * A * s1),
        (3, 3): c,
        (3, 4): -(c * s1),
        (3, 5): c * (2 * e2 - 3 * e3 * s1),
        (4, 5): c * (e1 - 2 * e2 * s1),
        (5, 5): c * (4 * (1.5 * e1 * e3 + e2 * e2 - 2 * e1 * A * s1 - 3 * e2 * e3 * s1)),
        (6, 6): spec.sign(6) * (f5 - f6) ** 5,
    }


_BUILDERS = {
    "T2211": _entries_2211,
    "T321": _entries_321,
    "T33": _entries_33,
    "T411": _entries_411,
    "T51": _entries_51,
}


def metric_entries(spec: HSpaceSpec, p: Sequence[float], variant: str | None = None) -> dict[tuple[int, int], Jet2]:
    """Nonzero upper-triangle entries ``(i, j) -> g_ij`` (1-based, i <= j)."""
    variant = variant or SELECTED_VARIANTS[spec.tag]
    if variant not in VARIANTS[spec.tag]:
        raise ValueError(f"{spec.tag} has no formula variant {variant!r}")
    p = as_point(p)
    x = coordinates(p)
    try:
        fs = eigenvalue_functions(spec, p)
        amps = block_amplitudes(spec, p, variant)
        ent = _BUILDERS[spec.tag](spec, x, fs, amps, variant)
    except PoleError as exc:
        raise PoleError(f"metric {spec.tag} is singular", p) from exc
    out = {}
    for (i, j), v in ent.items():
        if not isinstance(v, Jet2):
            v = Jet2(float(v))
        out[(min(i, j), max(i, j))] = v
    return out


def zero_pattern(spec: HSpaceSpec) -> tuple[tuple[int, int], ...]:
    """Index pairs (1-based, i <= j) whose metric component vanishes identically."""
    nonzero = _STRUCTURAL_NONZERO[spec.tag]
    return tuple((i, j) for i in range(1, DIM + 1) for j in range(i, DIM + 1) if (i, j) not in nonzero)


_STRUCTURAL_NONZERO = {
    "T2211": {(1, 2), (2, 2), (3, 4), (4, 4), (5, 5), (6, 6)},
    "T321": {(2, 2), (1, 3), (2, 3), (3, 3), (4, 5), (5, 5), (6, 6)},
    "T33": {(2, 2), (1, 3), (2, 3), (3, 3), (5, 5), (4, 6), (5, 6), (6, 6)},
    "T411": {(1, 4), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4), (5, 5), (6, 6)},
    "T51": {(1, 5), (2, 4), (2, 5), (3, 3), (3, 4), (3, 5), (4, 5), (5, 5), (6, 6)},
}


def metric_value(spec: HSpaceSpec, p: Sequence[float], variant: str | None = None) -> np.ndarray:
    """Value-level metric matrix (no derivative bookkeeping needed by callers)."""
    g = np.zeros((DIM, DIM))
    for (i, j), v in metric_entries(spec, p, variant).items():
        g[i - 1, j - 1] = g[j - 1, i - 1] = v.val
    return g


# condition-number cap for inverting jet matrices
COND_CAP = 1e13


def invert_jet_matrix(m: JetMatrix, cond_cap: float = COND_CAP) -> JetMatrix:
    if not np.all(np.isfinite(m.val)):
        raise DegeneracyError("matrix has non-finite entries")
    cond = np.linalg.cond(m.val)
    if not np.isfinite(cond) or cond > cond_cap:
        raise DegeneracyError(f"matrix is singular or ill-conditioned (cond={cond:.3g})")
    val, grad, hess = _kernels.inverse_jet(m.val, m.grad, m.hess)
    return JetMatrix(val, grad, hess)


@dataclass(frozen=True)
class MetricField:
    g: JetMatrix
    g_inv: JetMatrix
    point: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.g.val


def metric_field(rows: Sequence[Sequence[Jet2 | float]], p: Sequence[float]) -> MetricField:
    """MetricField from a full 6x6 grid of jets (any metric, not only canonical ones)."""
    p = as_point(p)
    g = JetMatrix.from_entries(rows)
    if not np.all(np.isfinite(g.val)):
        raise PoleError("metric is not finite", p)
    try:
        g_inv = invert_jet_matrix(g)
    except DegeneracyError as exc:
        raise DegeneracyError(f"{exc} at point {tuple(float(x) for x in p)}") from exc
    return MetricField(g, g_inv, p)


def metric_at(spec: HSpaceSpec, p: Sequence[float], variant: str | None = None) -> MetricField:
    p = as_point(p)
    ent = metric_entries(spec, p, variant)
    rows: list[list[Jet2 | float]] = [[0.0] * DIM for _ in range(DIM)]
    for (i, j), v in ent.items():
        rows[i - 1][j - 1] = v
        rows[j - 1][i - 1] = v
    return metric_field(rows, p)


def check_signature(g_value: np.ndarray, rel_tol: float = 1e-10) -> tuple[int, int]:
    g = np.asarray(g_value, dtype=float)
    if g.shape[0] != g.shape[1] or not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise ValueError("signature needs a symmetric matrix")
    w = np.linalg.eigvalsh(g)
    tol = rel_tol * max(np.linalg.norm(g, 2), np.finfo(float).tiny)
    if np.any(np.abs(w) <= tol):
        raise DegeneracyError(f"near-zero eigenvalue {w[np.argmin(np.abs(w))]:.3g}")
    return int(np.sum(w > 0)), int(np.sum(w < 0))


@dataclass(frozen=True)
class SamplerConfig:
    box: tuple[tuple[float, float], ...] = ((1.0, 2.0),) * DIM
    count: int = 100
    seed: int = 0
    margin: float = 0.1
    max_draws: int | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sampler count must be >= 1")
        if not self.margin > 0:
            raise ValueError("sampler margin must be positive")
        if len(self.box) != DIM or any(len(b) != 2 or not b[0] <= b[1] for b in self.box):
            raise ValueError(f"sampler box needs {DIM} (low, high) pairs with low <= high")

    @property
    def draw_cap(self) -> int:
        return self.max_draws if self.max_draws is not None else max(2000, 200 * self.count)


def admissibility(spec: HSpaceSpec, p: Sequence[float]) -> dict[str, float]:
    """Margins of every singular factor at ``p``; the point is admissible when all exceed delta."""
    fs = eigenvalue_functions(spec, p)
    out: dict[str, float] = {}
    blocks = spec.type.blocks
    for a in range(len(blocks)):
        for b in range(a + 1, len(blocks)):
            i, j = blocks[a].coords[0], blocks[b].coords[0]
            out[f"|f{i}-f{j}|"] = abs(fs[i - 1].val - fs[j - 1].val)
    names = ("|A|", "|Ã|")
    for name, amp in zip(names, block_amplitudes(spec, p)):
        out[name] = abs(amp.val)
    if min(out.values()) > 0:
        try:
            out["|det g|"] = abs(float(np.linalg.det(metric_value(spec, p))))
        except PoleError:
            out["|det g|"] = 0.0
    else:
        out["|det g|"] = 0.0
    return out


def sample_points(spec: HSpaceSpec, cfg: SamplerConfig) -> list[np.ndarray]:
    """Deterministic admissible points drawn uniformly from ``cfg.box``."""
    validate_spec(spec)
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.box], dtype=float)
    hi = np.array([b[1] for b in cfg.box], dtype=float)
    points: list[np.ndarray] = []
    failures: dict[str, int] = {}
    draws = 0
    while len(points) < cfg.count:
        if draws >= cfg.draw_cap:
            worst = max(failures, key=failures.get) if failures else "unknown"
            raise SamplingExhausted(
                f"found {len(points)} of {cfg.count} admissible points in {draws} draws; "
                f"tightest constraint {worst} (< {cfg.margin})",
                worst,
            )
        draws += 1
        p = lo + (hi - lo) * rng.random(DIM)
        margins = admissibility(spec, p)
        bad = [k for k, v in margins.items() if not v >= cfg.margin]
        if bad:
            for k in bad:
                failures[k] = failures.get(k, 0) + 1
            continue
        points.append(p)
    return points


def iter_metric_fields(spec: HSpaceSpec, points: Iterable[Sequence[float]]):
    for p in points:
        yield metric_at(spec, p)


def fd_metric_discrepancy(spec: HSpaceSpec, p: Sequence[float], h: float = 1e-4) -> float:
    """Worst relative gap between the metric jets and central differences of the value map.

    Each entry is normalized by the largest magnitude among its own value,
    gradient and Hessian components.
    """
    m = metric_at(spec, p)
    val, grad, hess = fd_arrays(lambda x: metric_value(spec, x), p, h)
    worst = 0.0
    for i in range(DIM):
        for j in range(i, DIM):
            scale = max(abs(m.g.val[i, j]), np.abs(m.g.grad[i, j]).max(), np.abs(m.g.hess[i, j]).max())
            if scale == 0.0:
                gap = max(abs(val[i, j]), np.abs(grad[i, j]).max(), np.abs(hess[i, j]).max())
                if gap > 0.0:
                    return float("inf")
                continue
            gap = max(np.abs(m.g.grad[i, j] - grad[i, j]).max(), np.abs(m.g.hess[i, j] - hess[i, j]).max())
            worst = max(worst, float(gap / scale))
    return worst
