"""Experiment configuration: strict JSON schema, lossless round-trips,
and construction of the configured dynamical objects.

Unknown keys are rejected everywhere, all tolerances must be positive, and
budgets are capped at documented maxima so a config cannot silently request
an unbounded run.  Defaults are echoed into every output summary.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .anosov import make_anosov
from .errors import ConfigError
from .fiber import (ConstantFamily, FieldBump, IdentityMap, LewowiczFamily,
                    LewowiczMap, RotationFamily, ScalarField, SkewProduct,
                    TranslationMap, VectorField)
from .torus import BumpProfile, wrap

SCENARIOS = ("certify", "holonomy", "classify", "destroy", "ergodic", "pbb", "sweep")

MAX_BUDGETS = {
    "ergodic.n": 10_000_000,
    "classify.n_seeds": 10_000,
    "classify.K": 100_000,
    "classify.word_length": 200,
    "pbb.instances": 10_000,
    "grid_n": 512,
}


def _check_keys(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _freeze(value):
    """Canonicalize sequences to nested tuples so round-trips compare equal."""
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def _freeze_fields(obj):
    for f in dataclasses.fields(obj):
        val = getattr(obj, f.name)
        if isinstance(val, (list, tuple)):
            object.__setattr__(obj, f.name, _freeze(val))


def _from_dict(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(d, names, where)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in d:
            val = d[f.name]
            sub = _SUBCONFIG.get((cls, f.name))
            kwargs[f.name] = _from_dict(sub, val, f"{where}.{f.name}") if sub else val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


@dataclass(frozen=True)
class BaseConfig:
    matrix: tuple = ((2, 1), (1, 1))
    power: int = 1

    def __post_init__(self):
        _freeze_fields(self)
        if not (1 <= int(self.power) <= 8):
            raise ValueError("base power must be in 1..8")


@dataclass(frozen=True)
class BumpSpec:
    """One parameter-field bump: amplitude * psi(dist(x, center))."""

    center: tuple = (0.5, 0.5)
    inner: float = 0.08
    outer: float = 0.2
    amplitude: tuple = (1.0,)   # 1-tuple for scalar fields, 2-tuple for vector

    def __post_init__(self):
        _freeze_fields(self)


@dataclass(frozen=True)
class FamilyConfig:
    kind: str = "identity"      # identity|translation|lewowicz_constant|rotation_field|lewowicz_field
    vector: tuple = (0.0, 0.0)
    c: float = 2.0
    base_value: tuple = (0.0,)
    bumps: tuple = ()

    def __post_init__(self):
        _freeze_fields(self)
        kinds = ("identity", "translation", "lewowicz_constant",
                 "rotation_field", "lewowicz_field")
        if self.kind not in kinds:
            raise ValueError(f"family kind must be one of {kinds}")


@dataclass(frozen=True)
class QuadConfig:
    x: tuple = (0.0, 0.0)
    search_radius: float = 0.2
    max_denominator: int = 10
    n_check: int = 50

    def __post_init__(self):
        _freeze_fields(self)


@dataclass(frozen=True)
class ToleranceConfig:
    holonomy_tol: float = 1e-10
    fixed_point_tol: float = 1e-8
    scan_tol: float = 1e-6

    def __post_init__(self):
        for name in ("holonomy_tol", "fixed_point_tol", "scan_tol"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ClassifyConfig:
    n_seeds: int = 100
    K: int = 2000
    word_length: int = 24
    seed_region_center: tuple = (0.5, 0.5)
    seed_region_half: tuple = (0.45, 0.45)

    def __post_init__(self):
        _freeze_fields(self)
        if not (1 <= self.n_seeds <= MAX_BUDGETS["classify.n_seeds"]):
            raise ValueError("n_seeds out of budget")
        if not (1 <= self.K <= MAX_BUDGETS["classify.K"]):
            raise ValueError("K out of budget")
        if not (1 <= self.word_length <= MAX_BUDGETS["classify.word_length"]):
            raise ValueError("word_length out of budget")


@dataclass(frozen=True)
class DestroyConfig:
    epsilon: float = 0.05
    scan_grid_n: int = 32
    rng_seed: int = 0

    def __post_init__(self):
        if not (0 < self.scan_grid_n <= MAX_BUDGETS["grid_n"]):
            raise ValueError("scan_grid_n out of budget")


@dataclass(frozen=True)
class ErgodicConfig:
    observable: str = "fiber_cos"
    n: int = 100_000
    m_ics: int = 50

    def __post_init__(self):
        if not (1 <= self.n <= MAX_BUDGETS["ergodic.n"]):
            raise ValueError("ergodic n out of budget")
        if not (2 <= self.m_ics <= 10_000):
            raise ValueError("m_ics out of budget")


@dataclass(frozen=True)
class PbbConfig:
    instances: int = 100
    epsilon: str = "1/16"
    max_jumps: int = 20
    denominator: int = 48

    def __post_init__(self):
        if not (1 <= self.instances <= MAX_BUDGETS["pbb.instances"]):
            raise ValueError("instances out of budget")
        Fraction(self.epsilon)  # must parse exactly


@dataclass(frozen=True)
class SweepConfig:
    c_values: tuple = ("1/2", "1", "3/2", "3", "49/10", "5", "51/10")
    grid_n: int = 16

    def __post_init__(self):
        _freeze_fields(self)


@dataclass(frozen=True)
class HolonomyConfig:
    leaf_offset: float = 0.15
    kind: str = "stable"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "certify"
    seed: int = 0
    threads: int | None = None
    out_dir: str = "results"
    base: BaseConfig = field(default_factory=BaseConfig)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    quad: QuadConfig = field(default_factory=QuadConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    destroy: DestroyConfig = field(default_factory=DestroyConfig)
    ergodic: ErgodicConfig = field(default_factory=ErgodicConfig)
    pbb: PbbConfig = field(default_factory=PbbConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    holonomy: HolonomyConfig = field(default_factory=HolonomyConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def convert(obj):
            if dataclasses.is_dataclass(obj):
                return {f.name: convert(getattr(obj, f.name))
                        for f in dataclasses.fields(obj)}
            if isinstance(obj, (list, tuple)):
                return [convert(x) for x in obj]
            return obj

        return convert(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _from_dict(cls, d, "config")

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)


_SUBCONFIG = {
    (ExperimentConfig, "base"): BaseConfig,
    (ExperimentConfig, "family"): FamilyConfig,
    (ExperimentConfig, "quad"): QuadConfig,
    (ExperimentConfig, "tolerances"): ToleranceConfig,
    (ExperimentConfig, "classify"): ClassifyConfig,
    (ExperimentConfig, "destroy"): DestroyConfig,
    (ExperimentConfig, "ergodic"): ErgodicConfig,
    (ExperimentConfig, "pbb"): PbbConfig,
    (ExperimentConfig, "sweep"): SweepConfig,
    (ExperimentConfig, "holonomy"): HolonomyConfig,
}


# ---------------------------------------------------------------------------
# constructing dynamical objects from a config

def _tuplify(seq, n, where):
    vals = tuple(float(x) for x in seq)
    if len(vals) != n:
        raise ConfigError(f"{where} must have {n} entries")
    return vals


def build_field_bumps(specs, vector: bool):
    out = []
    for i, s in enumerate(specs):
        spec = _from_dict(BumpSpec, s, f"bump[{i}]") if isinstance(s, dict) else s
        amp = tuple(float(a) for a in spec.amplitude)
        if vector and len(amp) != 2:
            raise ConfigError(f"bump[{i}] amplitude must be a 2-vector")
        if not vector and len(amp) != 1:
            raise ConfigError(f"bump[{i}] amplitude must be a 1-tuple scalar")
        out.append(FieldBump(center=wrap(_tuplify(spec.center, 2, "bump center")),
                             profile=BumpProfile(float(spec.inner), float(spec.outer)),
                             amplitude=amp))
    return tuple(out)


def build_family(cfg: FamilyConfig):
    if cfg.kind == "identity":
        return ConstantFamily(IdentityMap())
    if cfg.kind == "translation":
        return ConstantFamily(TranslationMap(_tuplify(cfg.vector, 2, "family.vector")))
    if cfg.kind == "lewowicz_constant":
        return ConstantFamily(LewowiczMap(float(cfg.c)))
    if cfg.kind == "rotation_field":
        base = _tuplify(cfg.base_value, 2, "family.base_value") \
            if len(cfg.base_value) == 2 else (0.0, 0.0)
        return RotationFamily(VectorField(base, build_field_bumps(cfg.bumps, vector=True)))
    if cfg.kind == "lewowicz_field":
        base = float(cfg.base_value[0]) if cfg.base_value else 0.0
        return LewowiczFamily(ScalarField(base, build_field_bumps(cfg.bumps, vector=False)))
    raise ConfigError(f"unsupported family kind {cfg.kind!r}")


def build_skew_product(config: ExperimentConfig) -> SkewProduct:
    matrix = np.asarray(config.base.matrix, dtype=np.int64)
    powered = np.linalg.matrix_power(matrix, int(config.base.power))
    return SkewProduct(base=make_anosov(powered), family=build_family(config.family))
