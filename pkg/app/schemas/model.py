"""
Run configuration and HTTP payloads.

Every model forbids unknown keys, so a misspelt option fails validation
before any data is read.
"""

import json
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.design import DesignSpec
from ..core.exceptions import SpecError
from ..core.likelihood import Dataset
from ..core.links import parse_links
from ..core.structure import ModelSpec
from ..services.fitter import FitOptions


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpecConfig(StrictModel):
    family: str = Field(..., description="baseline, cumulative, adjacent, continuation or a two-group family")
    J: int = Field(..., ge=2, description="Number of response categories")
    k: Optional[int] = Field(default=None, description="Baseline group size of a two-group family")
    s: Optional[int] = Field(default=None, description="Shared category of a two-group family")
    links: Optional[List[str]] = Field(
        default=None,
        description="J-1 link names, or a single name used for every category; logit when omitted"
    )

    def to_spec(self) -> ModelSpec:
        links = None
        if self.links is not None:
            names = self.links * (self.J - 1) if len(self.links) == 1 else self.links
            links = parse_links(names)
        return ModelSpec.create(self.J, self.family, links, k=self.k, s=self.s)


class ConstraintConfig(StrictModel):
    term: str = Field(..., description="Term whose coefficients are merged, e.g. 'x' or 'x^2'")
    categories: List[int] = Field(..., min_length=2, description="1-based categories sharing the coefficient")


class DesignSpecConfig(StrictModel):
    structure: Literal["po", "npo", "ppo", "mixture"] = "npo"
    covariates: Optional[List[str]] = Field(
        default=None, description="Covariates in setting order; the dataset's covariates when omitted"
    )
    per_category: Optional[List[List[str]]] = Field(
        default=None,
        description="Term lists h_j, one per category or a single list for all; intercept-only when omitted"
    )
    common: List[str] = Field(default_factory=list, description="Terms shared by every category")
    constraints: List[ConstraintConfig] = Field(default_factory=list)

    def to_design(self, J: int, covariates: Sequence[str] = ()) -> DesignSpec:
        names = list(self.covariates) if self.covariates is not None else list(covariates)
        per = self.per_category
        if per is not None and len(per) == 1 and J > 2:
            per = per * (J - 1)
        return DesignSpec.create(
            J,
            names,
            self.structure,
            per_category=per,
            common=self.common,
            constraints=[(c.term, c.categories) for c in self.constraints],
        )


class FitOptionsConfig(StrictModel):
    tolerance: Optional[float] = Field(default=None, gt=0.0)
    backtrack_factor: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    eigen_floor: Optional[float] = Field(default=None, gt=0.0)
    max_iter: Optional[int] = Field(default=None, ge=1)
    max_backtrack: Optional[int] = Field(default=None, ge=1)

    def to_options(self) -> FitOptions:
        return FitOptions.from_settings(**self.model_dump())


class DropTermConfig(StrictModel):
    category: int = Field(..., ge=1)
    term: str


class SelectConfig(StrictModel):
    mode: Literal["mixture", "links", "two-group"] = "mixture"
    candidate_links: List[str] = Field(default_factory=list, description="Link names tried in links mode")
    criterion: Optional[Literal["aic", "bic"]] = Field(
        default=None, description="Ranking criterion; AIC for mixture and two-group, BIC for links by default"
    )


class SimulateConfig(StrictModel):
    theta: Optional[List[float]] = None
    result_file: Optional[str] = Field(default=None, description="result.kv of an earlier fit supplying theta")
    settings: Optional[List[List[float]]] = Field(
        default=None, description="Covariate settings; those of the dataset when omitted"
    )
    n: Union[int, List[int]] = Field(default=100, description="Observations per setting")
    output: str = Field(default="simulated.csv", description="File name under the output directory")

    @model_validator(mode='after')
    def validate_source(self):
        if (self.theta is None) == (self.result_file is None):
            raise ValueError("simulate needs exactly one of theta and result_file")
        return self


class BootstrapConfig(StrictModel):
    B: int = Field(default=1000, ge=1)


class CrossValidationConfig(StrictModel):
    k: int = Field(default=5, ge=2)
    repeats: int = Field(default=1, ge=1)


class RunConfig(StrictModel):
    data: Optional[str] = Field(default=None, description="CSV path, relative to the config file")
    format: Literal["summarized", "raw"] = "summarized"
    categories: Optional[List[str]] = Field(default=None, description="Declared category labels, in file order")
    covariates: Optional[List[str]] = Field(default=None, description="Covariate columns of raw input")
    working_order: Optional[List[str]] = Field(
        default=None, description="Category labels in the order the model uses"
    )
    model: ModelSpecConfig
    design: DesignSpecConfig = Field(default_factory=DesignSpecConfig)
    fit: FitOptionsConfig = Field(default_factory=FitOptionsConfig)
    drop: List[DropTermConfig] = Field(
        default_factory=list, description="Coefficient slots removed for a reduced-model comparison"
    )
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    jobs: Optional[int] = Field(default=None, ge=1)
    select: Optional[SelectConfig] = None
    simulate: Optional[SimulateConfig] = None
    bootstrap: Optional[BootstrapConfig] = None
    cv: Optional[CrossValidationConfig] = None

    @model_validator(mode='after')
    def validate_categories(self):
        if self.working_order is not None and self.categories is None:
            raise ValueError("working_order needs the declared categories")
        if self.categories is not None and len(self.categories) != self.model.J:
            raise ValueError(f"{len(self.categories)} categories declared for J={self.model.J}")
        return self

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Load and validate a JSON run configuration

        Relative data and result_file paths are resolved against the config file directory.

        Raises:
            SpecError: If the file is unreadable or fails validation
        """
        source = Path(path)
        try:
            config = cls.model_validate(json.loads(source.read_text(encoding="utf-8")))
        except OSError as e:
            raise SpecError(f"Cannot read config {source}: {str(e)}")
        except json.JSONDecodeError as e:
            raise SpecError(f"Config {source} is not valid JSON: {str(e)}")
        except ValidationError as e:
            raise SpecError(f"Invalid config {source}: {str(e)}")
        if config.data is not None and not Path(config.data).is_absolute():
            config = config.model_copy(update={"data": str(source.parent / config.data)})
        sim = config.simulate
        if sim is not None and sim.result_file is not None and not Path(sim.result_file).is_absolute():
            sim = sim.model_copy(update={"result_file": str(source.parent / sim.result_file)})
            config = config.model_copy(update={"simulate": sim})
        return config


class DataPayload(StrictModel):
    covariates: List[str] = Field(default_factory=list)
    x: List[List[float]]
    y: List[List[int]]

    def to_dataset(self) -> Dataset:
        x = np.asarray(self.x, dtype=float).reshape(len(self.y), len(self.covariates))
        return Dataset(x, np.asarray(self.y, dtype=np.int64), tuple(self.covariates))


class FitRequest(StrictModel):
    model: ModelSpecConfig
    design: DesignSpecConfig = Field(default_factory=DesignSpecConfig)
    fit: FitOptionsConfig = Field(default_factory=FitOptionsConfig)
    data: DataPayload
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)


class CoefficientOut(BaseModel):
    label: str
    estimate: float
    std_error: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None


class FitResponse(BaseModel):
    status: str
    model: str
    links: List[str]
    converged: bool
    iterations: int
    loglik: float
    aic: float
    bic: float
    coefficients: List[CoefficientOut]
    fitted: List[List[float]]
    diagnostics: List[str]


class FeasibilityRequest(StrictModel):
    model: ModelSpecConfig
    design: DesignSpecConfig = Field(default_factory=DesignSpecConfig)
    theta: List[float]
    settings: List[List[float]]
    generic: bool = False


class SettingFailure(BaseModel):
    setting: int
    cause: str


class FeasibilityResponse(BaseModel):
    feasible: bool
    failures: List[SettingFailure]


class SimulateRequest(StrictModel):
    model: ModelSpecConfig
    design: DesignSpecConfig = Field(default_factory=DesignSpecConfig)
    theta: List[float]
    settings: List[List[float]]
    n: Union[int, List[int]] = 100
    seed: int = Field(..., ge=0, lt=2**64)


class SimulateResponse(BaseModel):
    covariates: List[str]
    x: List[List[float]]
    y: List[List[int]]
