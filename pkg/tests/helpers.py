"""Engine-side conveniences shared by the test modules.

Unlike `oracle`, these helpers build on the package itself: seeded random
derivation walks for property tests and small tree constructors for
writing expected structures by hand.
"""
from __future__ import annotations

import numpy as np

from enumsr.expr import (
    ADD, CBRT, CONST, EXP, Fn, INV, Kind, LOG, MUL, Node, Phrase, SIN, SQRT,
    Symbol, count_variable_refs, var,
)
from enumsr.grammar import Grammar, expansions
from enumsr.search import SearchConfig

_TOKEN_SYMBOLS = {
    "+": ADD, "*": MUL, "inv": INV, "exp": EXP, "log": LOG,
    "sin": SIN, "sqrt": SQRT, "cbrt": CBRT, "c": CONST,
}


def phrase_from_tokens(tokens) -> Phrase:
    """Oracle token tuple -> engine phrase (both are prefix order)."""
    symbols = []
    for tok in tokens:
        sym = _TOKEN_SYMBOLS.get(tok)
        if sym is None:
            if not (tok.startswith("x") and tok[1:].isdigit()):
                raise ValueError(f"unknown oracle token {tok!r}")
            sym = var(int(tok[1:]))
        symbols.append(sym)
    return Phrase(tuple(symbols))


def shuffled_equivalent(node: Node, rng: np.random.Generator) -> Node:
    """Recursively permute commutative children; flattens same-operator
    chains first so the permutation crosses nesting boundaries, then
    rebuilds right-nested binary nodes."""
    sym = node.symbol
    if sym.kind == Kind.FUNC and sym.code in (Fn.ADD, Fn.MUL):
        flat: list[Node] = []
        _flatten_same_op(node, sym.code, flat)
        children = [shuffled_equivalent(c, rng) for c in flat]
        children = [children[i] for i in rng.permutation(len(children))]
        out = children[-1]
        for ch in reversed(children[:-1]):
            out = Node(sym, (ch, out))
        return out
    return Node(sym, tuple(shuffled_equivalent(c, rng) for c in node.children),
                node.slot)


def _flatten_same_op(node: Node, code: int, out: list[Node]) -> None:
    for c in node.children:
        if c.symbol.kind == Kind.FUNC and c.symbol.code == code:
            _flatten_same_op(c, code, out)
        else:
            out.append(c)


def random_phrase(grammar: Grammar, rng: np.random.Generator,
                  max_refs: int, stop_probability: float = 0.15) -> Phrase:
    """A random leftmost derivation walk, stopped early with the given
    probability, so both sentences and open phrases come out."""
    phrase = grammar.start_phrase()
    while True:
        children = [c for c in expansions(grammar, phrase)
                    if count_variable_refs(c) <= max_refs]
        if not children:
            return phrase
        phrase = children[rng.integers(len(children))]
        if phrase.is_sentence or rng.random() < stop_probability:
            return phrase


def random_sentence(grammar: Grammar, rng: np.random.Generator,
                    max_refs: int) -> Phrase:
    while True:
        p = random_phrase(grammar, rng, max_refs, stop_probability=0.0)
        if p.is_sentence:
            return p


def const() -> Node:
    return Node(CONST)


def leaf(i: int) -> Node:
    return Node(var(i))


def add(*children: Node) -> Node:
    out = children[-1]
    for ch in reversed(children[:-1]):
        out = Node(ADD, (ch, out))
    return out


def mul(*children: Node) -> Node:
    out = children[-1]
    for ch in reversed(children[:-1]):
        out = Node(MUL, (ch, out))
    return out


def fn(symbol: Symbol, *children: Node) -> Node:
    return Node(symbol, tuple(children))


def quick_config(**overrides) -> SearchConfig:
    base = dict(max_variable_refs=2, max_evaluated_sentences=500, seed=1)
    base.update(overrides)
    return SearchConfig(**base)


def pessimism_pairs(grammar: Grammar, data, n_pairs: int,
                    max_refs: int = 10) -> list:
    """(estimate, fitted model) pairs exactly as the search materializes
    them: breadth-first expansion from the start phrase, each phrase
    carrying the quality estimate of its nearest trailing-sum ancestor,
    each newly derived sentence fitted once and paired with the estimate
    it inherited.  Deterministic: no randomness beyond the fitter's own
    seeded restarts.
    """
    from collections import deque

    from enumsr.canon import hash_phrase
    from enumsr.fitting import fit
    from enumsr.heuristic import estimate_quality

    start = grammar.start_phrase()
    queue = deque([(start, estimate_quality(start, data, None))])
    seen = {hash_phrase(start)}
    pairs = []
    while queue and len(pairs) < n_pairs:
        phrase, estimate = queue.popleft()
        for child in expansions(grammar, phrase):
            if count_variable_refs(child) > max_refs:
                continue
            digest = hash_phrase(child)
            if digest in seen:
                continue
            seen.add(digest)
            if child.is_sentence:
                pairs.append((estimate.nmse, fit(child, data)))
                if len(pairs) >= n_pairs:
                    break
            else:
                queue.append((child, estimate_quality(child, data, estimate)))
    return pairs
