"""Parameter transfer between phenotype tasks.

A transfer fit starts the target-task optimization at the parameters learned
on a source task (warm start) and may hold named blocks fixed. The default
plan freezes the input-to-hidden layer, so the target task only relearns the
hidden-to-output map on top of the source representation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import EnnConfig, ModelParams
from .optimize import FreezeSpec, OptimReport, init_params, minimize

__all__ = ["FreezeSpec", "TransferPlan", "fit_source", "transfer_fit"]


@dataclass(frozen=True)
class TransferPlan:
    """How parameters move from a source phenotype to a target phenotype.

    With reuse_as_warm_start False the target starts from a fresh random
    initialization instead of the source parameters; combined with an empty
    FreezeSpec that reduces the fit to ordinary from-scratch training.
    """

    source_phenotype: str
    target_phenotype: str
    freeze: FreezeSpec = field(default_factory=FreezeSpec.first_layer)
    reuse_as_warm_start: bool = True

    def __post_init__(self):
        if not self.source_phenotype or not self.target_phenotype:
            raise ConfigError("transfer plan needs source and target phenotype names")
        if self.source_phenotype == self.target_phenotype:
            raise ConfigError("source and target phenotypes must differ")


def fit_source(cfg: EnnConfig, X, y_source) -> OptimReport:
    """Ordinary fit on the source task; the starting point for a transfer."""
    return minimize(cfg, X, y_source)


def transfer_fit(cfg: EnnConfig, X, y_target, source_params: ModelParams,
                 plan: TransferPlan) -> OptimReport:
    """Fit the target task according to the plan.

    cfg governs the target-side optimization (tau, penalty, activations,
    stopping). The source model fixes the architecture, so cfg.hidden_units
    must match it.
    """
    if source_params.q != cfg.hidden_units:
        raise ConfigError(
            f"source model has {source_params.q} hidden units but the target "
            f"config asks for {cfg.hidden_units}")
    if plan.reuse_as_warm_start:
        start = source_params
    else:
        start = init_params(int(np.asarray(X).shape[1]), cfg)
    return minimize(cfg, X, y_target, init=start, freeze=plan.freeze)
