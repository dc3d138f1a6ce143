import itertools
import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.config.settings import ConformityKind, MethodName
from src.core.exceptions import ConfigError
from src.core.synthetic import GeneratorSpec
from src.learners import LearnerSpec

BOOTSTRAP_METHODS = (MethodName.PIVOT_BOOTSTRAP, MethodName.PERCENTILE_BOOTSTRAP, MethodName.BOOTSTRAP_CONFORMAL)
CONFORMAL_METHODS = (
    MethodName.SPLIT_CONFORMAL,
    MethodName.CROSS_CONFORMAL,
    MethodName.BOOTSTRAP_CONFORMAL,
    MethodName.FULL_CONFORMAL,
)

_MEASURE_SUFFIX = {
    ConformityKind.ABSOLUTE_RESIDUAL: '',
    ConformityKind.KDE_NEG_LOG_DENSITY: '-kde',
}


class CsvSource(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    path: str
    target_column: Union[int, str]
    header: bool = True


class DatasetSource(BaseModel):
    """Either a CSV file or a synthetic generator."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    name: Optional[str] = None
    csv: Optional[CsvSource] = None
    generator: Optional[GeneratorSpec] = None

    @model_validator(mode='after')
    def _exactly_one(self) -> 'DatasetSource':
        if (self.csv is None) == (self.generator is None):
            raise ValueError("dataset needs exactly one of 'csv' or 'generator'")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.csv is not None:
            return Path(self.csv.path).stem
        return f"synthetic-{self.generator.kind.value}"


class MethodSpec(BaseModel):
    """One row of the method table: a PI method and its execution parameters."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    name: MethodName
    B: Optional[int] = Field(default=None, ge=2)
    K: Optional[int] = Field(default=None, ge=2)
    measure: ConformityKind = ConformityKind.ABSOLUTE_RESIDUAL
    grid_size: Optional[int] = Field(default=None, ge=2)
    bandwidth: Optional[Union[float, List[float]]] = None

    @model_validator(mode='after')
    def _check_parameters(self) -> 'MethodSpec':
        if self.name in BOOTSTRAP_METHODS and self.B is None:
            raise ValueError(f"method {self.name.value} needs B")
        if self.name is MethodName.CROSS_CONFORMAL and self.K is None:
            raise ValueError("method cross-conformal needs K")
        if self.name not in CONFORMAL_METHODS and self.measure is not ConformityKind.ABSOLUTE_RESIDUAL:
            raise ValueError(f"method {self.name.value} takes no conformity measure")
        return self

    @property
    def label(self) -> str:
        label = self.name.value
        if self.name is MethodName.CROSS_CONFORMAL:
            label += f"-K{self.K}"
        elif self.name in BOOTSTRAP_METHODS:
            label += f"-B{self.B}"
        return label + _MEASURE_SUFFIX[self.measure]


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    M: Optional[int] = Field(default=None, ge=2)
    half_width: Union[float, Literal['AUTO']] = 'AUTO'

    @model_validator(mode='after')
    def _positive_width(self) -> 'GridConfig':
        if self.half_width != 'AUTO' and not self.half_width > 0:
            raise ValueError("grid half_width must be positive or 'AUTO'")
        return self


class ConditionalConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    edges: List[float] = Field(min_length=1)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    dataset: DatasetSource
    learner: LearnerSpec
    methods: List[MethodSpec] = Field(min_length=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    test_count: int = Field(default=100, ge=1)
    replicates: int = Field(default=10, ge=1)
    grid: GridConfig = GridConfig()
    seed: int = 0
    output_dir: str = 'results'
    conditional: Optional[ConditionalConfig] = None
    export_p_values: bool = False
    inclusive_p_values: bool = False

    @model_validator(mode='after')
    def _unique_labels(self) -> 'ExperimentConfig':
        labels = [m.label for m in self.methods]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"duplicate method descriptors: {duplicates}")
        return self


def _field_names(block_type: Type[BaseModel]) -> Dict[str, str]:
    """Accepted sweep keys (field names and aliases) mapped to field names."""
    names = {}
    for name, info in block_type.model_fields.items():
        names[name] = name
        if info.alias:
            names[info.alias] = name
    return names


class SweepConfig(ExperimentConfig):
    """Experiment repeated over the Cartesian product of learner hyperparameter levels."""

    sweep: Dict[str, List[Any]]
    cv_folds: Optional[int] = Field(default=None, ge=2)

    @model_validator(mode='after')
    def _check_sweep(self) -> 'SweepConfig':
        if not self.sweep or any(len(levels) == 0 for levels in self.sweep.values()):
            raise ValueError("sweep grid must name at least one parameter with at least one level")
        block = getattr(self.learner, self.learner.kind.value)
        unknown = sorted(set(self.sweep) - _field_names(type(block)).keys())
        if unknown:
            raise ValueError(f"unknown {self.learner.kind.value} parameters in sweep: {unknown}")
        return self

    def design_points(self) -> List[LearnerSpec]:
        """One LearnerSpec per combination of levels, in Cartesian-product order."""
        kind = self.learner.kind.value
        block = getattr(self.learner, kind)
        fields = _field_names(type(block))
        names = [fields[name] for name in self.sweep]
        points = []
        for levels in itertools.product(*self.sweep.values()):
            updated = type(block).model_validate({**block.model_dump(), **dict(zip(names, levels))})
            points.append(self.learner.model_copy(update={kind: updated}))
        return points


ConfigT = TypeVar('ConfigT', bound=BaseModel)


def load_config(path: Union[str, Path], model: Type[ConfigT]) -> ConfigT:
    """Read and validate a JSON configuration file, raising ConfigError on any problem."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration in {path}:\n{e}") from e
