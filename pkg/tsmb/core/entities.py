"""Core entities and common types for tsmb."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from tsmb.exceptions import TsmbError
from tsmb.models.hmm import CovarianceType


class Family(str, Enum):
    HMM = "hmm"
    FCM = "fcm"

    @property
    def higher_is_better(self) -> bool:
        # HMM scores are log-likelihoods, FCM scores are prediction errors
        return self is Family.HMM


class Granularity(str, Enum):
    PER_CLASS = "1c"
    PER_SERIES = "nn"


@dataclass(frozen=True)
class SchemeId:
    """One of the four classification schemes, e.g. ``hmm-1c`` or ``fcm-nn``."""

    family: Family
    granularity: Granularity

    def __str__(self) -> str:
        return f"{self.family.value}-{self.granularity.value}"

    @property
    def title(self) -> str:
        return f"{self.family.value.upper()} {self.granularity.value.upper()}"

    @classmethod
    def parse(cls, text: str | SchemeId) -> SchemeId:
        if isinstance(text, SchemeId):
            return text
        key = str(text).strip().lower().replace("_", "-").replace(" ", "-")
        for scheme in SCHEMES:
            if str(scheme) == key:
                return scheme
        names = ", ".join(str(s) for s in SCHEMES)
        raise ValueError(f"unknown scheme {text!r} (choose from {names})")


SCHEMES: tuple[SchemeId, ...] = (
    SchemeId(Family.HMM, Granularity.PER_CLASS),
    SchemeId(Family.HMM, Granularity.PER_SERIES),
    SchemeId(Family.FCM, Granularity.PER_CLASS),
    SchemeId(Family.FCM, Granularity.PER_SERIES),
)


class HmmHyperparams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_states: int = Field(ge=1)
    cov_type: CovarianceType = CovarianceType.DIAGONAL

    @property
    def family(self) -> Family:
        return Family.HMM

    @property
    def size(self) -> int:
        return self.n_states

    @property
    def sort_key(self) -> tuple[int, int]:
        # smaller models first, then spherical < diagonal < full
        return (self.n_states, self.cov_type.rank)

    @property
    def label(self) -> str:
        return f"{self.n_states} {self.cov_type.short}"


class FcmHyperparams(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_concepts: int = Field(ge=2)

    @property
    def family(self) -> Family:
        return Family.FCM

    @property
    def size(self) -> int:
        return self.n_concepts

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.n_concepts, 0)

    @property
    def label(self) -> str:
        return str(self.n_concepts)


Hyperparams = HmmHyperparams | FcmHyperparams


def hyperparams_from_dict(family: Family | str, data: dict[str, Any]) -> Hyperparams:
    if Family(family) is Family.HMM:
        return HmmHyperparams(**data)
    return FcmHyperparams(**data)


def check_hyperparams(scheme: SchemeId, hyperparams: Hyperparams) -> None:
    if hyperparams.family is not scheme.family:
        raise TsmbError(f"{hyperparams.label!r} are not {scheme.family.value} hyperparameters")


@dataclass(frozen=True)
class Owner:
    """Who a bank model belongs to: a class (1C) or a training series (NN).

    ``index`` is the class position among the sorted classes for 1C and the
    training-series position for NN.
    """

    label: str
    index: int


# ----------------------------------------------------------------------
# Report records
# ----------------------------------------------------------------------


class CvRow(BaseModel):
    """Cross-validation result of one grid point."""

    hyperparams: dict[str, Any]
    label: str
    fold_accuracies: list[float]
    fold_failures: list[int]
    mean_accuracy: float


class TimingRecord(BaseModel):
    """Wall-clock time and optimiser iterations of one model training."""

    scheme: str
    size: int
    seconds: float
    iterations: int


class EvalReport(BaseModel):
    """Benchmark outcome of one scheme on one dataset."""

    dataset: str
    n_classes: int
    scheme: str
    cv: list[CvRow] = Field(default_factory=list)
    chosen: dict[str, Any] = Field(default_factory=dict)
    chosen_label: str = ""
    test_accuracy: float = 0.0
    test_accuracy_min: float = 0.0
    test_accuracy_max: float = 0.0
    reruns: int = 1
    test_failures: int = 0
    timings: list[TimingRecord] = Field(default_factory=list, exclude=True)
