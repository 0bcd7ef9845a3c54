__all__ = [
    "LabConfig", "ExperimentConfig", "QueueModelConfig", "SgldModelConfig", "LinearModelConfig", "OracleModelConfig",
    "IidEnvConfig", "FiniteMarkovEnvConfig", "MovingAverageEnvConfig", "InterArrivalConfig", "PhiConfig",
    "DriftProbe", "load_config", "parse_config", "resolve_seed", "resolve_output", "SEED_VARIABLE", "DEFAULT_OUTPUT",
]

import os
from typing import Annotated, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mcrelab.interface import ConfigException

SEED_VARIABLE = "MCRE_LAB_SEED"
DEFAULT_OUTPUT = "./mcre-out"
SEED_LIMIT = 2 ** 64

State = Union[int, float, List[float]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class IidEnvConfig(_Section):
    kind: Literal["iid"]
    values: List[float]
    probabilities: Optional[List[float]] = None


class FiniteMarkovEnvConfig(_Section):
    kind: Literal["finite_markov"]
    transition: List[List[float]]
    values: Optional[List[float]] = None


class UniformInnovationConfig(_Section):
    low: float = -1.0
    high: float = 1.0


class MovingAverageEnvConfig(_Section):
    """
    Either explicit coefficients a_{-L..L} or geometric weights a_i = decay^|i|.
    """
    kind: Literal["moving_average"]
    coefficients: Optional[List[float]] = None
    decay: Optional[float] = None
    lag: int = Field(50, ge=0)
    innovation: UniformInnovationConfig = UniformInnovationConfig()

    @model_validator(mode="after")
    def _one_source(self):
        if (self.coefficients is None) == (self.decay is None):
            raise ValueError("give exactly one of coefficients and decay")
        return self


EnvironmentConfig = Annotated[Union[IidEnvConfig, FiniteMarkovEnvConfig, MovingAverageEnvConfig],
                              Field(discriminator="kind")]


class InterArrivalConfig(_Section):
    kind: Literal["exponential", "shifted_uniform", "deterministic"]
    rate: Optional[float] = None
    shift: Optional[float] = None
    width: Optional[float] = None
    value: Optional[float] = None

    def params(self):
        return {k: v for k, v in (("rate", self.rate), ("shift", self.shift), ("width", self.width),
                                  ("value", self.value)) if v is not None}


class QueueModelConfig(_Section):
    kind: Literal["queue"]
    interarrival: InterArrivalConfig
    M: float = Field(gt=0)
    alpha_grid: List[float] = [0.25, 0.5, 1.0, 1.5, 2.0]
    alpha_horizon: int = Field(20, ge=1)
    theta: float = 0.5
    coupling: Literal["synchronous", "split"] = "synchronous"


class SgldModelConfig(_Section):
    """
    Quadratic gradient Delta(y) theta + g(y) with Delta(y) = delta_offset + delta_scale y and
    g(y) = g_offset + g_scale y, or the logistic gradient with ridge rho.
    """
    kind: Literal["sgld"]
    step_size: float = Field(gt=0)
    gradient: Literal["quadratic", "logistic"] = "quadratic"
    dimension: int = Field(1, ge=1)
    delta_offset: float = 0.0
    delta_scale: float = 1.0
    g_offset: float = 0.0
    g_scale: float = 0.0
    rho: float = 1.0
    growth: Optional[List[float]] = Field(None, min_length=3, max_length=3)
    theta_probes: List[float] = [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0]
    theta: float = 0.5


class LinearModelConfig(_Section):
    """
    A(y), B(y) indexed by the environment value (0..m-1 unless values are given);
    B defaults to the identity.
    """
    kind: Literal["linear"]
    A: List[List[List[float]]]
    B: Optional[List[List[List[float]]]] = None
    values: Optional[List[float]] = None
    block_length: int = Field(1, ge=1)
    innovation_scale: float = Field(1.0, gt=0)


class OracleModelConfig(_Section):
    """
    Q(y) per environment state; the environment must be finite_markov.
    """
    kind: Literal["oracle"]
    matrices: List[List[List[float]]]
    coupling: Literal["synchronous", "split"] = "synchronous"


ModelConfig = Annotated[Union[QueueModelConfig, SgldModelConfig, LinearModelConfig, OracleModelConfig],
                        Field(discriminator="kind")]


class PhiConfig(_Section):
    """
    Bounded functional of the first state coordinate.
    """
    kind: Literal["min", "indicator", "constant", "clip"] = "min"
    cap: float = 1.0
    state: int = 0
    value: float = 0.0
    bound: Optional[float] = None


class DriftProbe(_Section):
    y: Union[float, List[float]]
    x: State


class ExperimentConfig(_Section):
    reps: int = Field(2000, ge=1)
    tolerance: float = Field(3.0, gt=0)
    n_grid: List[int] = [0, 10, 20, 50, 100, 150, 200]
    gamma_grid: List[int] = [10, 50, 100]
    smallness_grid: List[int] = [1, 2, 5, 10, 20, 50, 100]
    probes: Optional[List[DriftProbe]] = None
    starts: List[State] = [0, 10]
    visit_window: int = Field(1000, ge=1)
    visit_reps: int = Field(200, ge=1)
    tv_threshold: Optional[float] = None
    rate_saturation: Optional[float] = 2.0
    phi: PhiConfig = PhiConfig()
    phi_probes: Optional[List[State]] = None
    orders: List[float] = [2.0]
    lln_grid: List[int] = [1000, 4000, 16000]
    lln_reps: int = Field(200, ge=1)
    reference_steps: int = Field(1000000, ge=1)
    reference_chains: int = Field(1, ge=1)
    contract_steps: int = Field(40, ge=1)
    contract_reps: int = Field(100, ge=1)
    oracle_grid: List[int] = [0, 1, 2, 5, 10, 20, 50, 100, 200]


class LabConfig(_Section):
    seed: Optional[int] = Field(None, ge=0, lt=SEED_LIMIT)
    output: Optional[str] = None
    model: ModelConfig
    environment: EnvironmentConfig
    experiment: ExperimentConfig = ExperimentConfig()


def _node_mark(root, loc):
    """
    Mark of the deepest YAML node reached by a pydantic error location; location
    entries that are not keys (union tags) are skipped.
    """
    node, mark = root, getattr(root, "start_mark", None)
    for entry in loc:
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                if key.value == str(entry):
                    node, mark = value, key.start_mark
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(entry, int) and entry < len(node.value):
            node = node.value[entry]
            mark = node.start_mark
    return mark


def parse_config(text, source="<config>"):
    """
    :type text: str
    :rtype: LabConfig
    :raises: ConfigException with line and column on syntax and schema errors
    """
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        raise ConfigException("{}: {}".format(source, e.problem),
                              mark.line + 1 if mark else None, mark.column + 1 if mark else None)
    if not isinstance(data, dict):
        raise ConfigException("{}: the config must be a mapping".format(source))
    try:
        return LabConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(error["loc"])
        mark = _node_mark(root, loc)
        path = ".".join(str(p) for p in loc)
        raise ConfigException("{}: {}".format(source, error["msg"]),
                              mark.line + 1 if mark else None, mark.column + 1 if mark else None, path)


def load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigException("cannot read config {}: {}".format(path, e.strerror))
    return parse_config(text, path)


def resolve_seed(cli_seed, config):
    """
    --seed, then the config seed, then MCRE_LAB_SEED, then 0.
    """
    if cli_seed is not None:
        seed = cli_seed
    elif config.seed is not None:
        seed = config.seed
    else:
        raw = os.environ.get(SEED_VARIABLE)
        if raw is None:
            return 0
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigException("{} must be an integer, got '{}'".format(SEED_VARIABLE, raw))
    if not 0 <= seed < SEED_LIMIT:
        raise ConfigException("seed must be a 64-bit unsigned integer, got {}".format(seed))
    return seed


def resolve_output(cli_out, config):
    return cli_out or config.output or DEFAULT_OUTPUT
