"""JSON run configuration: parsing, validation and shipped fixtures."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .jets import DIM, ParamFn
from .metrics import TYPES, HSpaceSpec, SamplerConfig, validate_spec

SUITES = ("metric", "tensors", "eisenhart", "integrability", "vanishing", "proof_ids", "curvature")

DEFAULT_TOLERANCES = {
    "metric": 1e-6,
    "tensors": 1e-10,
    "eisenhart": 1e-8,
    "integrability": 1e-7,
    "vanishing": 1e-9,
    "proof_ids": 1e-8,
    "curvature": 1e-8,
}

_TOP_KEYS = {
    "type", "eps", "eps_tilde", "a", "signs", "theta", "omega", "f",
    "relax_eps_constraint", "sampler", "a1", "suites", "tolerances",
    "riemann_sign", "planes_per_point", "name",
}
_SAMPLER_KEYS = {"box", "count", "seed", "margin", "max_draws"}


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    spec: HSpaceSpec
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    suites: tuple[str, ...] = SUITES
    a1: float = 1.0
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    riemann_sign: int | None = None
    planes_per_point: int = 10
    name: str = ""
    source: dict = field(default_factory=dict)


def _num(d: dict, key: str, where: str = "") -> float:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field '{where}{key}' must be a number")
    return float(v)


def _paramfn(d, name: str) -> ParamFn:
    try:
        return ParamFn.from_dict(d)
    except ValueError as exc:
        raise ConfigError(f"field '{name}': {exc}") from None


def spec_from_dict(d: dict) -> HSpaceSpec:
    tag = d.get("type")
    if tag not in TYPES:
        raise ConfigError(f"field 'type' must be one of {sorted(TYPES)}, got {tag!r}")
    t = TYPES[tag]
    for key in ("eps", "eps_tilde"):
        if key in d and d[key] not in (0, 1):
            raise ConfigError(f"field '{key}' must be 0 or 1")
    if "eps" not in d:
        raise ConfigError("field 'eps' is required")
    if t.has_eps_tilde and "eps_tilde" not in d:
        raise ConfigError("field 'eps_tilde' is required for this type")
    signs_raw = d.get("signs", {})
    if not isinstance(signs_raw, dict):
        raise ConfigError("field 'signs' must be an object")
    try:
        signs = {int(k): int(v) for k, v in signs_raw.items()}
    except (TypeError, ValueError):
        raise ConfigError("field 'signs' must map indices to +1/-1") from None
    f_raw = d.get("f", {})
    if not isinstance(f_raw, dict):
        raise ConfigError("field 'f' must be an object")
    f_simple = {int(k): _paramfn(v, f"f.{k}") for k, v in f_raw.items()}
    a = _num(d, "a") if d.get("a") is not None else None
    spec = HSpaceSpec(
        type=t,
        eps=int(d["eps"]),
        eps_tilde=int(d["eps_tilde"]) if t.has_eps_tilde else None,
        a=a,
        signs=signs,
        theta=_paramfn(d["theta"], "theta") if "theta" in d else ParamFn.const(1.0),
        omega=_paramfn(d["omega"], "omega") if "omega" in d else None,
        f_simple=f_simple,
        relax_eps_constraint=bool(d.get("relax_eps_constraint", False)),
    )
    return validate_spec(spec)


def spec_to_dict(spec: HSpaceSpec) -> dict:
    out = {
        "type": spec.tag,
        "eps": spec.eps,
        "signs": {str(k): v for k, v in sorted(spec.signs.items())},
        "theta": spec.theta.to_dict(),
        "f": {str(k): v.to_dict() for k, v in sorted(spec.f_simple.items())},
        "relax_eps_constraint": spec.relax_eps_constraint,
    }
    if spec.type.has_eps_tilde:
        out["eps_tilde"] = spec.eps_tilde
        out["omega"] = spec.omega.to_dict() if spec.omega else None
    if spec.a is not None:
        out["a"] = spec.a
    return out


def _sampler(d: dict) -> SamplerConfig:
    if not isinstance(d, dict):
        raise ConfigError("field 'sampler' must be an object")
    unknown = set(d) - _SAMPLER_KEYS
    if unknown:
        raise ConfigError(f"field 'sampler.{sorted(unknown)[0]}' is not recognised")
    kw = {}
    if "box" in d:
        box = d["box"]
        if not (isinstance(box, list) and len(box) == DIM and all(isinstance(b, list) and len(b) == 2 for b in box)):
            raise ConfigError(f"field 'sampler.box' must be {DIM} [low, high] pairs")
        kw["box"] = tuple((float(lo), float(hi)) for lo, hi in box)
    for key in ("count", "seed", "max_draws"):
        if key in d:
            if isinstance(d[key], bool) or not isinstance(d[key], int):
                raise ConfigError(f"field 'sampler.{key}' must be an integer")
            kw[key] = d[key]
    if "margin" in d:
        kw["margin"] = _num(d, "margin", "sampler.")
    try:
        return SamplerConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"field 'sampler': {exc}") from None


def config_from_dict(d: dict, name: str = "") -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"field '{sorted(unknown)[0]}' is not recognised")
    spec = spec_from_dict(d)
    suites = tuple(d.get("suites", SUITES))
    if not suites:
        raise ConfigError("field 'suites' must select at least one suite")
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise ConfigError(f"field 'suites' has unknown suite {bad[0]!r}")
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in d.get("tolerances", {}).items():
        if k not in SUITES:
            raise ConfigError(f"field 'tolerances.{k}' is not a suite")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"field 'tolerances.{k}' must be a positive number")
        tol[k] = float(v)
    sign = d.get("riemann_sign")
    if sign not in (None, 1, -1):
        raise ConfigError("field 'riemann_sign' must be +1 or -1")
    planes = d.get("planes_per_point", 10)
    if isinstance(planes, bool) or not isinstance(planes, int) or planes < 1:
        raise ConfigError("field 'planes_per_point' must be a positive integer")
    return RunConfig(
        spec=spec,
        sampler=_sampler(d.get("sampler", {})),
        suites=tuple(dict.fromkeys(suites)),
        a1=_num(d, "a1") if "a1" in d else 1.0,
        tolerances=tol,
        riemann_sign=sign,
        planes_per_point=planes,
        name=str(d.get("name", name)),
        source=d,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(d, name=path.stem)


def fixture_names() -> list[str]:
    root = resources.files("hspace6") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def fixture_path(name: str) -> Path:
    p = resources.files("hspace6") / "fixtures" / f"{name}.json"
    if not p.is_file():
        raise ConfigError(f"no shipped fixture named {name!r}")
    return Path(str(p))


def load_fixture(name: str) -> RunConfig:
    return load_config(fixture_path(name))
