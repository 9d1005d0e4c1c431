"""Best-first exhaustive search over the expression grammar.

The frontier is a priority queue of partial phrases.  Each step pops the
phrase with the lowest priority (FIFO on ties), rewrites its leftmost
nonterminal with every production, and filters the results: over-budget
phrases are discarded, phrases whose digest was already seen are rejected,
new sentences are fitted and compared against the incumbent, and new
partial phrases are pushed with their estimated quality.  With a fixed seed
the whole trajectory, including the improvement log, is reproducible.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable

from .canon import hash_phrase
from .datasets import Dataset
from .expr import CONST, Phrase, count_variable_refs, render_infix
from .fitting import FitConfig, FittedModel, fit, with_test_nmse
from .grammar import Grammar, build_default_grammar, estimate_max_length, expansions
from .heuristic import (
    EstimateSource, PriorityParams, QualityEstimate, completion_sentence,
    estimate_quality, priority,
)

__all__ = [
    "SearchConfig", "SearchCounters", "ImprovementRecord", "SearchState",
    "SearchReport", "run", "step",
]


@dataclass(frozen=True)
class SearchConfig:
    max_variable_refs: int = 20
    max_evaluated_sentences: int = 200_000
    weight_w: float = 0.05
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int = 1
    target_train_nmse: float | None = 1e-8
    time_limit_s: float | None = None
    open_cap: int | None = None


@dataclass
class SearchCounters:
    expansions: int = 0
    derived: int = 0
    discarded_over_limit: int = 0
    rejected_duplicates: int = 0
    evaluated_sentences: int = 0
    estimate_fits: int = 0
    fit_cache_hits: int = 0
    open_peak: int = 0


@dataclass(frozen=True)
class ImprovementRecord:
    evaluated: int
    elapsed_ms: float
    expression: str
    coefficients: tuple[float, ...]
    train_nmse: float
    test_nmse: float


@dataclass
class SearchState:
    grammar: Grammar
    open_phrases: list[tuple[float, int, Phrase, QualityEstimate]]
    seen: set[int]
    best: FittedModel
    counters: SearchCounters
    improvements: list[ImprovementRecord]
    params: PriorityParams
    push_counter: int = 0
    started_at: float = 0.0
    stop_reason: str | None = None
    fit_cache: dict[int, FittedModel] = field(default_factory=dict)
    trace: Callable[[Phrase], None] | None = None


@dataclass(frozen=True)
class SearchReport:
    best: FittedModel
    counters: SearchCounters
    improvements: tuple[ImprovementRecord, ...]
    elapsed_s: float
    stop_reason: str
    config: SearchConfig
    feature_names: tuple[str, ...]
    length_max: int


def _cached_fit(state: SearchState, data: Dataset, cfg: SearchConfig,
                sentence: Phrase, digest: int | None = None,
                for_estimate: bool = False) -> FittedModel:
    if digest is None:
        digest = hash_phrase(sentence)
    model = state.fit_cache.get(digest)
    if model is not None:
        state.counters.fit_cache_hits += 1
        return model
    model = fit(sentence, data, cfg.fit, cfg.seed)
    state.fit_cache[digest] = model
    if for_estimate:
        state.counters.estimate_fits += 1
    return model


def _record_improvement(state: SearchState, model: FittedModel) -> None:
    elapsed_ms = (time.perf_counter() - state.started_at) * 1000.0
    state.improvements.append(ImprovementRecord(
        evaluated=state.counters.evaluated_sentences,
        elapsed_ms=elapsed_ms,
        expression=render_infix(model.sentence, state.grammar.feature_names),
        coefficients=model.coefficients,
        train_nmse=model.train_nmse,
        test_nmse=model.test_nmse,
    ))


def _push(state: SearchState, p: Phrase, estimate: QualityEstimate) -> None:
    prio = priority(p, estimate, state.params)
    heapq.heappush(state.open_phrases, (prio, state.push_counter, p, estimate))
    state.push_counter += 1
    state.counters.open_peak = max(state.counters.open_peak, len(state.open_phrases))


def _prune_open(state: SearchState, cap: int) -> None:
    # keep the `cap` best entries; rebuilding preserves the tie order
    # because the push counters travel with the entries
    entries = heapq.nsmallest(cap, state.open_phrases)
    state.open_phrases = entries
    heapq.heapify(state.open_phrases)


def initial_state(data: Dataset, cfg: SearchConfig) -> SearchState:
    """Frontier holding the start phrase, incumbent set to the constant model."""
    grammar = build_default_grammar(data.feature_names)
    length_max = estimate_max_length(grammar, cfg.max_variable_refs)
    params = PriorityParams(cfg.weight_w, length_max)
    constant = Phrase((CONST,))
    constant_model = fit(constant, data, cfg.fit, cfg.seed)
    state = SearchState(
        grammar=grammar, open_phrases=[], seen=set(),
        best=with_test_nmse(constant_model, data),
        counters=SearchCounters(), improvements=[], params=params,
        started_at=time.perf_counter(),
    )
    state.fit_cache[hash_phrase(constant)] = constant_model
    _record_improvement(state, state.best)

    start = grammar.start_phrase()
    digest = hash_phrase(start)
    state.seen.add(digest)
    estimate = estimate_quality(
        start, data, None, cfg.fit, cfg.seed,
        fit_fn=lambda s: _cached_fit(state, data, cfg, s, for_estimate=True))
    _push(state, start, estimate)
    return state


def step(state: SearchState, grammar: Grammar, data: Dataset,
         cfg: SearchConfig) -> SearchState:
    """Expand the lowest-priority phrase once; see `run` for the loop."""
    if not state.open_phrases:
        state.stop_reason = "frontier exhausted"
        return state
    _prio, _tick, phrase, estimate = heapq.heappop(state.open_phrases)
    if state.trace is not None:
        state.trace(phrase)
    state.counters.expansions += 1
    for child in expansions(grammar, phrase):
        state.counters.derived += 1
        if count_variable_refs(child) > cfg.max_variable_refs:
            state.counters.discarded_over_limit += 1
            continue
        digest = hash_phrase(child)
        if digest in state.seen:
            state.counters.rejected_duplicates += 1
            continue
        state.seen.add(digest)
        if child.is_sentence:
            model = _cached_fit(state, data, cfg, child, digest=digest)
            state.counters.evaluated_sentences += 1
            if not model.failed and model.train_nmse < state.best.train_nmse:
                state.best = with_test_nmse(model, data)
                _record_improvement(state, state.best)
                if (cfg.target_train_nmse is not None
                        and model.train_nmse < cfg.target_train_nmse):
                    state.stop_reason = "target train NMSE reached"
                    return state
            if state.counters.evaluated_sentences >= cfg.max_evaluated_sentences:
                state.stop_reason = "sentence budget exhausted"
                return state
        else:
            child_estimate = estimate_quality(
                child, data, estimate, cfg.fit, cfg.seed,
                fit_fn=lambda s: _cached_fit(state, data, cfg, s,
                                             for_estimate=True))
            _push(state, child, child_estimate)
    if cfg.open_cap is not None and len(state.open_phrases) > cfg.open_cap * 2:
        _prune_open(state, cfg.open_cap)
    return state


def run(data: Dataset, cfg: SearchConfig = SearchConfig()) -> SearchReport:
    """Search the expression space for `data` under the configured limits.

    Stops when the frontier is empty, the sentence budget is spent, the
    target train NMSE is reached, or the optional wall-clock limit passes
    (the last makes results timing-dependent and is off by default).
    """
    state = initial_state(data, cfg)
    while state.stop_reason is None:
        if (cfg.time_limit_s is not None
                and time.perf_counter() - state.started_at > cfg.time_limit_s):
            state.stop_reason = "time limit reached"
            break
        step(state, state.grammar, data, cfg)
    elapsed = time.perf_counter() - state.started_at
    return SearchReport(
        best=state.best, counters=state.counters,
        improvements=tuple(state.improvements), elapsed_s=elapsed,
        stop_reason=state.stop_reason, config=cfg,
        feature_names=state.grammar.feature_names,
        length_max=state.params.length_max,
    )
