"""Bounded enumeration of the expression space, for statistics and checks.

Tree mode expands every phrase it derives and therefore revisits semantic
duplicates; graph mode prunes with the same digest set the search uses.
Comparing the two shows how much work deduplication saves.  Both modes are
exhaustive within the variable budget, so keep the limits small.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .canon import hash_phrase
from .expr import Phrase, count_variable_refs
from .grammar import Grammar, expansions

__all__ = ["SpaceStats", "tree_census", "graph_census", "space_stats"]

# expanding beyond this many derivations means the limits are far outside
# the intended diagnostic scale
_DEFAULT_CAP = 5_000_000


@dataclass(frozen=True)
class SpaceStats:
    max_var_refs: int
    n_features: int
    derivations: int
    sentences: int
    distinct_sentences: int
    distinct_canonical: int
    graph_derived: int
    graph_rejected: int
    graph_sentences: int

    @property
    def rejection_ratio(self) -> float:
        if self.graph_derived == 0:
            return 0.0
        return self.graph_rejected / self.graph_derived


def tree_census(g: Grammar, max_var_refs: int, cap: int = _DEFAULT_CAP
                ) -> tuple[int, list[Phrase]]:
    """Exhaustive expansion without deduplication.

    Returns the number of in-budget derivation steps and every sentence
    reached (duplicates included).  Raises RuntimeError past `cap` steps.
    """
    queue: deque[Phrase] = deque([g.start_phrase()])
    derivations = 0
    sentences: list[Phrase] = []
    while queue:
        phrase = queue.popleft()
        for child in expansions(g, phrase):
            if count_variable_refs(child) > max_var_refs:
                continue
            derivations += 1
            if derivations > cap:
                raise RuntimeError(
                    f"enumeration exceeded {cap} derivations; lower the limits")
            if child.is_sentence:
                sentences.append(child)
            else:
                queue.append(child)
    return derivations, sentences


def graph_census(g: Grammar, max_var_refs: int, cap: int = _DEFAULT_CAP
                 ) -> tuple[int, int, list[Phrase]]:
    """Exhaustive expansion with digest deduplication, mirroring the search.

    Returns (derived, rejected_duplicates, distinct sentences in first-seen
    order).
    """
    start = g.start_phrase()
    queue: deque[Phrase] = deque([start])
    seen = {hash_phrase(start)}
    derived = 0
    rejected = 0
    sentences: list[Phrase] = []
    while queue:
        phrase = queue.popleft()
        for child in expansions(g, phrase):
            if count_variable_refs(child) > max_var_refs:
                continue
            derived += 1
            if derived > cap:
                raise RuntimeError(
                    f"enumeration exceeded {cap} derivations; lower the limits")
            digest = hash_phrase(child)
            if digest in seen:
                rejected += 1
                continue
            seen.add(digest)
            if child.is_sentence:
                sentences.append(child)
            else:
                queue.append(child)
    return derived, rejected, sentences


def space_stats(g: Grammar, max_var_refs: int, cap: int = _DEFAULT_CAP
                ) -> SpaceStats:
    derivations, raw_sentences = tree_census(g, max_var_refs, cap)
    distinct_raw = len({s.symbols for s in raw_sentences})
    distinct_canonical = len({hash_phrase(s) for s in raw_sentences})
    derived, rejected, graph_sentences = graph_census(g, max_var_refs, cap)
    return SpaceStats(
        max_var_refs=max_var_refs, n_features=len(g.feature_names),
        derivations=derivations, sentences=len(raw_sentences),
        distinct_sentences=distinct_raw, distinct_canonical=distinct_canonical,
        graph_derived=derived, graph_rejected=rejected,
        graph_sentences=len(graph_sentences),
    )
