"""Frontier ordering: quality estimates for partial phrases and priorities.

A phrase whose only remaining nonterminal is the sum continuation can be
scored early: treating that continuation as one more free coefficient gives
a sentence whose fitted NMSE is a pessimistic bound, because any further
terms come with their own scale coefficients and can only improve the fit.
All other phrases inherit the estimate of the phrase they were derived
from.  Lower priority values are expanded first; the length bonus breaks
plateaus in favor of longer (more finished) phrases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, TYPE_CHECKING

from .expr import CONST, Kind, Nt, Phrase
from .fitting import FitConfig, FittedModel, fit

if TYPE_CHECKING:
    from .datasets import Dataset

__all__ = [
    "EstimateSource", "QualityEstimate", "PriorityParams",
    "completion_sentence", "estimate_quality", "priority",
]


class EstimateSource(Enum):
    EVALUATED_HERE = "evaluated-here"
    INHERITED = "inherited"


@dataclass(frozen=True)
class QualityEstimate:
    nmse: float
    source: EstimateSource


@dataclass(frozen=True)
class PriorityParams:
    weight_w: float = 0.05
    length_max: int = 1


def completion_sentence(p: Phrase) -> Phrase | None:
    """The sentence obtained by treating a sole trailing sum continuation
    as a coefficient, or None if the phrase has any other open structure."""
    nts = [(i, s) for i, s in enumerate(p.symbols) if s.kind == Kind.NT]
    if len(nts) != 1 or nts[0][1].code != Nt.EXPR:
        return None
    i = nts[0][0]
    return Phrase(p.symbols[:i] + (CONST,) + p.symbols[i + 1:], p.depth)


def estimate_quality(p: Phrase, data: "Dataset",
                     parent_estimate: QualityEstimate | None,
                     cfg: FitConfig = FitConfig(), seed: int = 1,
                     fit_fn: Callable[[Phrase], FittedModel] | None = None
                     ) -> QualityEstimate:
    """Estimated NMSE for a partial phrase.

    Phrases with a single open sum continuation are fitted as sentences
    (worst-sentinel on fit failure); everything else carries its parent's
    estimate forward.  `fit_fn` lets callers inject a caching fitter.
    """
    completed = completion_sentence(p)
    if completed is not None:
        model = fit_fn(completed) if fit_fn is not None else fit(
            completed, data, cfg, seed)
        value = math.inf if model.failed else model.train_nmse
        return QualityEstimate(value, EstimateSource.EVALUATED_HERE)
    if parent_estimate is None:
        raise ValueError("phrase has open structure but no parent estimate")
    return QualityEstimate(parent_estimate.nmse, EstimateSource.INHERITED)


def priority(p: Phrase, estimate: QualityEstimate, params: PriorityParams) -> float:
    """Expansion priority: estimated NMSE minus a bonus for phrase length.

    Lower is expanded earlier.  The bonus is weight_w * len / length_max;
    length_max is a greedy estimate, so the ratio may exceed 1 for unusually
    long phrases, which only strengthens their bonus.
    """
    if params.length_max < 1:
        raise ValueError("length_max must be >= 1")
    return estimate.nmse - params.weight_w * len(p) / params.length_max
