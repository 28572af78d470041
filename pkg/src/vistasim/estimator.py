"""Aggregation of accepted reports into a gradient estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .workers import RoundReports

SUPPORTED_KINDS = ("mean",)


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str = "mean"

    def __post_init__(self):
        if self.kind not in SUPPORTED_KINDS:
            raise ConfigurationError(f"unsupported estimator kind '{self.kind}'")


def estimate(spec: EstimatorSpec, reports: RoundReports) -> np.ndarray:
    """Aggregate the round's reports; kind='mean' is the plain average.

    The indirection exists so alternative aggregators can be added without
    touching the controller.
    """
    y = reports.reports
    if y.shape[0] == 0:
        raise ContractViolation("cannot estimate from an empty report set")
    return y.mean(axis=0)
