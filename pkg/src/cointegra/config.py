"""Run configuration: JSON in, validated models out, and builders for the numeric types.

Unknown keys are rejected everywhere.  Matrices are nested lists of numbers.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from .errors import ConfigError
from .levy import DiscreteJumps, GaussianJumps, LevyModel
from .mcarma import MCARMASpec
from .measure import MatExpDensity, SampledDensity, SignedMatrixMeasure
from .var_oracle import VARSpec

Matrix = list[list[float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AtomConfig(_Strict):
    t: float = Field(ge=0)
    A: Matrix


class NoDensity(_Strict):
    kind: Literal["none"]


class MatExpConfig(_Strict):
    kind: Literal["matexp"]
    H: Matrix
    F: Matrix
    G: Matrix


class SampledConfig(_Strict):
    kind: Literal["sampled"]
    step: PositiveFloat
    values: list[Matrix]
    tail_bound: tuple[float, float]


DensityConfig = Annotated[Union[NoDensity, MatExpConfig, SampledConfig], Field(discriminator="kind")]


class MeasureConfig(_Strict):
    dim: PositiveInt
    atoms: list[AtomConfig] = []
    density: DensityConfig | None = None
    decay_rate: PositiveFloat | None = None


class MCARMAConfig(_Strict):
    dim: PositiveInt
    p: PositiveInt
    P: list[Matrix]
    Q: list[Matrix] = []


class VARConfig(_Strict):
    dim: PositiveInt
    p: PositiveInt
    Gamma: list[Matrix]
    Sigma_eps: Matrix | None = None


class ModelConfig(_Strict):
    measure: MeasureConfig | None = None
    mcarma: MCARMAConfig | None = None
    var: VARConfig | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [k for k in ("measure", "mcarma", "var") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"model needs exactly one of measure, mcarma, var (got {given or 'none'})")
        return self


class GaussianJumpConfig(_Strict):
    kind: Literal["gaussian"]
    mean: list[float]
    cov: Matrix


class DiscreteJumpConfig(_Strict):
    kind: Literal["discrete"]
    values: list[list[float]]
    probs: list[float]


class LevyConfig(_Strict):
    drift: list[float] | None = None
    gaussian_cov: Matrix | None = None
    jump_rate: float = Field(default=0.0, ge=0)
    jumps: Annotated[Union[GaussianJumpConfig, DiscreteJumpConfig], Field(discriminator="kind")] | None = None


class TaskConfig(_Strict):
    step: PositiveFloat | None = None
    horizon: PositiveFloat | None = None
    paths: PositiveInt = 100
    t_max: PositiveFloat = 50.0
    burn: PositiveFloat | None = None
    seed: int | None = Field(default=None, ge=0, lt=2**64)
    xi: list[float] | None = None
    directions: list[list[float]] = []
    z_samples: list[tuple[float, float]] = [(0.5, 0.0), (1.0, 0.0), (2.0, 0.0), (1.0, 3.0)]
    tol: PositiveFloat | None = None
    rank_tol: PositiveFloat = 1e-8
    lag_cap: PositiveInt | None = None
    var_length: PositiveInt = 1000
    ecf_pairs: PositiveInt = 100
    levy: LevyConfig = LevyConfig()


class OutputConfig(_Strict):
    dir: str = "out"
    format: Literal["json", "text"] = "json"


class RunConfig(_Strict):
    model: ModelConfig
    task: TaskConfig = TaskConfig()
    output: OutputConfig = OutputConfig()


def _describe(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_describe(exc)}") from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


# -- builders ---------------------------------------------------------------------


def _arr(x, where: str, shape=None) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if shape is not None and a.shape != shape:
        raise ConfigError(f"{where}: expected shape {shape}, got {a.shape}")
    return a


def build_measure(cfg: MeasureConfig) -> SignedMatrixMeasure:
    n = cfg.dim
    atoms = tuple((a.t, _arr(a.A, f"model.measure.atoms[{i}].A", (n, n))) for i, a in enumerate(cfg.atoms))
    d = cfg.density
    density = None
    try:
        if isinstance(d, MatExpConfig):
            density = MatExpDensity(_arr(d.H, "H"), _arr(d.F, "F"), _arr(d.G, "G"))
        elif isinstance(d, SampledConfig):
            density = SampledDensity(d.step, _arr(d.values, "values"), d.tail_bound)
        return SignedMatrixMeasure(n, atoms, density, cfg.decay_rate)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model.measure: {exc}") from exc


def build_mcarma(cfg: MCARMAConfig) -> MCARMASpec:
    try:
        return MCARMASpec(cfg.dim, cfg.p, tuple(cfg.P), tuple(cfg.Q))
    except ValueError as exc:
        raise ConfigError(f"model.mcarma: {exc}") from exc


def build_var(cfg: VARConfig) -> VARSpec:
    try:
        return VARSpec(cfg.dim, cfg.p, tuple(cfg.Gamma), cfg.Sigma_eps)
    except ValueError as exc:
        raise ConfigError(f"model.var: {exc}") from exc


def build_levy(cfg: LevyConfig, dim: int) -> LevyModel:
    jumps = None
    if isinstance(cfg.jumps, GaussianJumpConfig):
        jumps = GaussianJumps(np.asarray(cfg.jumps.mean), np.asarray(cfg.jumps.cov))
    elif isinstance(cfg.jumps, DiscreteJumpConfig):
        jumps = DiscreteJumps(np.asarray(cfg.jumps.values), np.asarray(cfg.jumps.probs))
    try:
        return LevyModel(dim, cfg.drift, cfg.gaussian_cov, cfg.jump_rate, jumps)
    except ValueError as exc:
        raise ConfigError(f"task.levy: {exc}") from exc


def measure_to_config(measure: SignedMatrixMeasure) -> dict:
    """Inverse of :func:`build_measure` (JSON-ready)."""
    out = {
        "dim": measure.dim,
        "atoms": [{"t": t, "A": A.tolist()} for t, A in measure.atoms],
        "decay_rate": measure.decay_rate,
    }
    d = measure.density
    if isinstance(d, MatExpDensity):
        out["density"] = {"kind": "matexp", "H": d.H.tolist(), "F": d.F.tolist(), "G": d.G.tolist()}
    elif isinstance(d, SampledDensity):
        out["density"] = {
            "kind": "sampled",
            "step": d.step,
            "values": d.values.tolist(),
            "tail_bound": list(d.tail_bound),
        }
    else:
        out["density"] = {"kind": "none"}
    return out
