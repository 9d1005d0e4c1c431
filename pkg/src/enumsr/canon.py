"""Canonical minimal forms and 64-bit semantic digests.

Two sentences that differ only in coefficient values, summand order, factor
order, or redundant structure (duplicate summands, products of exp factors
with the same argument shape) receive the same digest, so the search can
reject semantic duplicates before fitting.  Digests are computed bottom-up
from fixed per-symbol seeds with a splitmix-style mixer; no Python `hash()`
is involved, so values are stable across runs and platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

from .expr import Fn, Kind, Node, Phrase, Symbol, parse

__all__ = [
    "CanonNode", "canonicalize", "fold", "simplify", "hash_phrase",
    "structural_digest", "digest_hex",
]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _avalanche(x: int) -> int:
    """splitmix64 finalizer; decorrelates related inputs."""
    x &= _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def _combine(h: int, value: int) -> int:
    return _avalanche(h ^ ((value + _GOLDEN + ((h << 6) & _MASK) + (h >> 2)) & _MASK))


# Kind tags keep the seed spaces for coefficient slots, variables, functions
# and nonterminals disjoint.  All coefficient slots share one seed: the
# digest treats every slot as the same opaque "some coefficient" token.
_SEED_CONST = _avalanche(0x5EED_0001)


def _symbol_seed(sym: Symbol) -> int:
    if sym.kind == Kind.CONST:
        return _SEED_CONST
    return _avalanche(((sym.kind + 2) << 32) | (sym.code & 0xFFFFFFFF))


def _rank(sym: Symbol) -> tuple[int, int]:
    """Sort rank: constants < variables (by index) < functions (by operator
    order) < nonterminals."""
    if sym.kind == Kind.CONST:
        return (0, 0)
    if sym.kind == Kind.VAR:
        return (1, sym.code)
    if sym.kind == Kind.FUNC:
        return (2, sym.code)
    return (3, sym.code)


def digest_hex(digest: int) -> str:
    return f"{digest:016x}"


@dataclass(frozen=True, slots=True)
class CanonNode:
    """Node of a canonical tree: children folded, simplified, and sorted;
    digest covers the whole subtree."""
    symbol: Symbol
    children: tuple["CanonNode", ...]
    digest: int


def _digest_of(sym: Symbol, children: tuple[CanonNode, ...]) -> int:
    h = _symbol_seed(sym)
    for c in children:
        h = _combine(h, c.digest)
    return h


def _sort_key(c: CanonNode) -> tuple[tuple[int, int], int]:
    return (_rank(c.symbol), c.digest)


def _dedup_add(children: list[CanonNode]) -> list[CanonNode]:
    # identical summands differ only in coefficient values, so one suffices
    seen: set[int] = set()
    out = []
    for c in children:
        if c.digest in seen:
            continue
        seen.add(c.digest)
        out.append(c)
    return out


def _dedup_mul(children: list[CanonNode]) -> list[CanonNode]:
    # exp factors with equal argument shape merge (their rate coefficients
    # add), and repeated coefficient slots collapse into one; everything
    # else (x*x, sin*sin, ...) is a genuine power and stays
    seen_exp: set[int] = set()
    have_const = False
    out = []
    for c in children:
        if c.symbol.kind == Kind.CONST:
            if have_const:
                continue
            have_const = True
        elif c.symbol.kind == Kind.FUNC and c.symbol.code == Fn.EXP:
            if c.digest in seen_exp:
                continue
            seen_exp.add(c.digest)
        out.append(c)
    return out


def _canon(node: Node) -> CanonNode:
    sym = node.symbol
    if sym.kind == Kind.NT:
        raise ValueError("cannot canonicalize a phrase with nonterminals")
    children = [_canon(c) for c in node.children]
    if sym.kind == Kind.FUNC and sym.code in (Fn.ADD, Fn.MUL):
        flat: list[CanonNode] = []
        for c in children:
            if c.symbol.kind == Kind.FUNC and c.symbol.code == sym.code:
                flat.extend(c.children)
            else:
                flat.append(c)
        flat = _dedup_add(flat) if sym.code == Fn.ADD else _dedup_mul(flat)
        if len(flat) == 1:
            return flat[0]
        flat.sort(key=_sort_key)
        kids = tuple(flat)
        return CanonNode(sym, kids, _digest_of(sym, kids))
    kids = tuple(children)
    return CanonNode(sym, kids, _digest_of(sym, kids))


def canonicalize(t: Node) -> CanonNode:
    """Canonical form of a sentence tree.

    Bottom-up: nested sums and products are folded flat, duplicate summands
    and mergeable factors are removed, commutative children are sorted by
    (rank, digest).  Child canonicalization before parent folding makes one
    pass reach the fixpoint; idempotence is covered by tests.
    """
    return _canon(t)


def canon_to_node(c: CanonNode) -> Node:
    """Plain tree view of a canonical tree (slots renumbered left to right)."""
    counter = [0]

    def walk(n: CanonNode) -> Node:
        if n.symbol.kind == Kind.CONST:
            node = Node(n.symbol, (), counter[0])
            counter[0] += 1
            return node
        return Node(n.symbol, tuple(walk(c) for c in n.children))

    return walk(c)


def fold(t: Node) -> Node:
    """Flatten nested sums under sums and products under products into
    n-ary nodes, leaving everything else untouched."""
    children = [fold(c) for c in t.children]
    sym = t.symbol
    if sym.kind == Kind.FUNC and sym.code in (Fn.ADD, Fn.MUL):
        flat: list[Node] = []
        for c in children:
            if c.symbol.kind == Kind.FUNC and c.symbol.code == sym.code:
                flat.extend(c.children)
            else:
                flat.append(c)
        return Node(sym, tuple(flat))
    return Node(sym, tuple(children), t.slot)


def simplify(t: Node) -> Node:
    """Remove redundant children of folded sums and products.

    Summands with equal digest collapse to one, as do exp factors with
    equal digest and repeated coefficient slots inside a product; a node
    left with a single child is replaced by that child.  Comparison uses
    canonical digests, so textual child order does not matter.
    """
    children = [simplify(c) for c in t.children]
    sym = t.symbol
    if sym.kind == Kind.FUNC and sym.code in (Fn.ADD, Fn.MUL):
        keyed = [(c, _canon(c).digest) for c in children]
        kept: list[Node] = []
        seen: set[int] = set()
        have_const = False
        for c, digest in keyed:
            if sym.code == Fn.ADD:
                if digest in seen:
                    continue
                seen.add(digest)
            else:
                if c.symbol.kind == Kind.CONST:
                    if have_const:
                        continue
                    have_const = True
                elif c.symbol.kind == Kind.FUNC and c.symbol.code == Fn.EXP:
                    if digest in seen:
                        continue
                    seen.add(digest)
            kept.append(c)
        if len(kept) == 1:
            return kept[0]
        return Node(sym, tuple(kept))
    return Node(sym, tuple(children), t.slot)


def structural_digest(t: Node) -> int:
    """Digest of a tree as written, without folding or simplification.

    Children of commutative nodes are still sorted, so phrases that differ
    only in the order of finished operands collide on purpose.  Nonterminal
    leaves are allowed.
    """
    sym = t.symbol
    if not t.children:
        return _symbol_seed(sym)
    digests = [(_rank(c.symbol), structural_digest(c)) for c in t.children]
    if sym.is_commutative:
        digests.sort()
    h = _symbol_seed(sym)
    for _, d in digests:
        h = _combine(h, d)
    return h


def hash_phrase(p: Phrase) -> int:
    """64-bit digest of a phrase.

    Sentences are canonicalized first, so semantically equal sentences
    collide; unfinished phrases are hashed structurally (their trees are
    incomplete, only commutative child order is normalized).
    """
    if not p.symbols:
        return _symbol_seed(Symbol(Kind.NT, 0)) ^ _GOLDEN
    tree = parse(p)
    if p.is_sentence:
        return canonicalize(tree).digest
    return structural_digest(tree)
