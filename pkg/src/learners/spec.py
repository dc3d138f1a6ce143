from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.settings import Activation, LearnerKind

DESIGN_LAYERS = (1, 2, 3)
DESIGN_NODES = (5, 10, 25, 50, 75, 100)


class RidgeParams(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default=0.0, ge=0.0, alias='lambda')


class KnnParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=5, ge=1)


class MlpParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    layers: int = Field(default=2, ge=1)
    nodes_per_layer: int = Field(default=50, ge=1)
    activation: Activation = Activation.RELU
    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    seed: int = 0

    def in_design_space(self) -> bool:
        """Whether the architecture is one of the benchmark design points."""
        return self.layers in DESIGN_LAYERS and self.nodes_per_layer in DESIGN_NODES


class LearnerSpec(BaseModel):
    """
    Learning algorithm L: a kind plus exactly one populated parameter block.

    Serializes to the JSON block used by the CLI, e.g.
    {"kind": "ridge", "ridge": {"lambda": 0.1}}.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: LearnerKind
    ridge: Optional[RidgeParams] = None
    knn: Optional[KnnParams] = None
    mlp: Optional[MlpParams] = None
    standardize: Optional[bool] = None

    @model_validator(mode='after')
    def _check_blocks(self) -> 'LearnerSpec':
        populated = [name for name in ('ridge', 'knn', 'mlp') if getattr(self, name) is not None]
        if populated != [self.kind.value]:
            raise ValueError(
                f"learner of kind {self.kind.value!r} needs exactly its own parameter block, got {populated}"
            )
        return self

    @classmethod
    def ridge_spec(cls, lambda_: float = 0.0) -> 'LearnerSpec':
        return cls(kind=LearnerKind.RIDGE, ridge=RidgeParams(lambda_=lambda_))

    @classmethod
    def knn_spec(cls, k: int) -> 'LearnerSpec':
        return cls(kind=LearnerKind.KNN, knn=KnnParams(k=k))

    @classmethod
    def mlp_spec(cls, **params) -> 'LearnerSpec':
        return cls(kind=LearnerKind.MLP, mlp=MlpParams(**params))

    @property
    def uses_standardization(self) -> bool:
        if self.standardize is not None:
            return self.standardize
        return self.kind in (LearnerKind.MLP, LearnerKind.KNN)

    @property
    def seed(self) -> Optional[int]:
        return self.mlp.seed if self.mlp is not None else None

    def reseeded(self, seed: int) -> 'LearnerSpec':
        """Copy with a new training seed; deterministic learners are returned unchanged."""
        if self.mlp is None:
            return self
        return self.model_copy(update={'mlp': self.mlp.model_copy(update={'seed': seed})})

    def label(self) -> str:
        if self.kind is LearnerKind.RIDGE:
            return f"ridge-lambda{self.ridge.lambda_:g}"
        if self.kind is LearnerKind.KNN:
            return f"knn-k{self.knn.k}"
        return f"mlp-{self.mlp.layers}x{self.mlp.nodes_per_layer}-{self.mlp.activation.value}"

    def to_json_block(self) -> dict:
        return self.model_dump(mode='json', by_alias=True, exclude_none=True)
