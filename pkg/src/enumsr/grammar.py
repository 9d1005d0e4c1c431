"""Restricted expression grammar and leftmost derivation.

The grammar generates rational polynomials: a sum of coefficient-scaled
terms plus a constant.  Each term is a product of factors that may repeat
(variables, log, exp, sin) and factors that appear at most once per term
(inverse, square root, cube root).  Function arguments are kept shallow:
log/sin/sqrt/cbrt take affine combinations of variable products, exp takes a
scaled variable product, and the inverse takes a sum whose terms may use all
other factors but never another inverse.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .expr import (
    ADD, CBRT, CONST, EXP, INV, Kind, LOG, MUL, Nt, Phrase, SIN, SQRT, Symbol,
    count_variable_refs, nt, var,
)

__all__ = [
    "Production", "Grammar", "GrammarError", "build_default_grammar",
    "leftmost_nonterminal", "derive", "expansions", "estimate_max_length",
]


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class Production:
    lhs: Nt
    rhs: tuple[Symbol, ...]

    @property
    def n_nonterminals(self) -> int:
        return sum(1 for s in self.rhs if s.kind == Kind.NT)

    @property
    def var_refs(self) -> int:
        return count_variable_refs(self.rhs)


@dataclass(frozen=True)
class Grammar:
    feature_names: tuple[str, ...]
    productions: dict[Nt, tuple[Production, ...]]
    start: Nt = Nt.EXPR

    def start_phrase(self) -> Phrase:
        return Phrase((nt(self.start),), depth=0)

    def rules(self, kind: Nt) -> tuple[Production, ...]:
        return self.productions[kind]


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED_NAMES = {"exp", "log", "sin", "sqrt", "cbrt"}


def build_default_grammar(feature_names: Sequence[str]) -> Grammar:
    """Grammar over the given feature names, one VarFactor rule per feature.

    Names must be unique identifiers and must not collide with function
    names or the c<k> coefficient spelling used by the text form.
    """
    names = tuple(feature_names)
    if not names:
        raise GrammarError("at least one feature is required")
    if len(set(names)) != len(names):
        raise GrammarError(f"duplicate feature names in {names}")
    for name in names:
        if not _NAME_RE.match(name):
            raise GrammarError(f"feature name {name!r} is not an identifier")
        if name in _RESERVED_NAMES:
            raise GrammarError(f"feature name {name!r} collides with a function")
        if len(name) > 1 and name[0] == "c" and name[1:].isdigit():
            raise GrammarError(f"feature name {name!r} collides with coefficient text")

    E, T, RF = nt(Nt.EXPR), nt(Nt.TERM), nt(Nt.RECURRING_FACTORS)
    VF, LF, EF, SF = (nt(Nt.VAR_FACTOR), nt(Nt.LOG_FACTOR),
                      nt(Nt.EXP_FACTOR), nt(Nt.SIN_FACTOR))
    OTF, IF, SQF, CBF = (nt(Nt.ONE_TIME_FACTORS), nt(Nt.INV_FACTOR),
                         nt(Nt.SQRT_FACTOR), nt(Nt.CBRT_FACTOR))
    SE, ST, IE, IT = (nt(Nt.SIMPLE_EXPR), nt(Nt.SIMPLE_TERM),
                      nt(Nt.INV_EXPR), nt(Nt.INV_TERM))

    table: dict[Nt, tuple[tuple[Symbol, ...], ...]] = {
        Nt.EXPR: (
            (ADD, MUL, CONST, T, E),            # const*Term + Expr
            (ADD, MUL, CONST, T, CONST),        # const*Term + const
        ),
        Nt.TERM: (
            (MUL, RF, T),
            (RF,),
            (OTF,),
        ),
        Nt.RECURRING_FACTORS: ((VF,), (LF,), (EF,), (SF,)),
        Nt.VAR_FACTOR: tuple((var(i),) for i in range(len(names))),
        Nt.LOG_FACTOR: ((LOG, SE),),
        Nt.EXP_FACTOR: ((EXP, MUL, CONST, ST),),
        Nt.SIN_FACTOR: ((SIN, SE),),
        Nt.ONE_TIME_FACTORS: (
            (MUL, IF, MUL, SQF, CBF),
            (MUL, IF, SQF),
            (MUL, IF, CBF),
            (MUL, SQF, CBF),
            (IF,),
            (SQF,),
            (CBF,),
        ),
        Nt.INV_FACTOR: ((INV, IE),),
        Nt.SQRT_FACTOR: ((SQRT, SE),),
        Nt.CBRT_FACTOR: ((CBRT, SE),),
        Nt.SIMPLE_EXPR: (
            (ADD, MUL, CONST, ST, SE),
            (ADD, MUL, CONST, ST, CONST),
        ),
        Nt.SIMPLE_TERM: (
            (MUL, VF, ST),
            (VF,),
        ),
        Nt.INV_EXPR: (
            (ADD, MUL, CONST, IT, IE),
            (ADD, MUL, CONST, IT, CONST),
        ),
        # products under an inverse: no nested inverse, sqrt/cbrt once
        Nt.INV_TERM: (
            (MUL, RF, IT),
            (MUL, RF, MUL, SQF, CBF),
            (MUL, RF, SQF),
            (MUL, RF, CBF),
            (MUL, SQF, CBF),
            (RF,),
            (SQF,),
            (CBF,),
        ),
    }
    productions = {
        kind: tuple(Production(kind, rhs) for rhs in alternatives)
        for kind, alternatives in table.items()
    }
    return Grammar(names, productions)


def leftmost_nonterminal(p: Phrase) -> tuple[int, Nt] | None:
    """Position and kind of the leftmost nonterminal, or None for sentences."""
    for i, sym in enumerate(p.symbols):
        if sym.kind == Kind.NT:
            return i, Nt(sym.code)
    return None


def derive(p: Phrase, prod: Production) -> Phrase:
    """Replace the leftmost nonterminal of `p` with the production's rhs."""
    found = leftmost_nonterminal(p)
    if found is None:
        raise GrammarError("cannot derive from a sentence")
    pos, kind = found
    if kind != prod.lhs:
        raise GrammarError(
            f"leftmost nonterminal is {kind.name}, production rewrites {prod.lhs.name}")
    symbols = p.symbols[:pos] + prod.rhs + p.symbols[pos + 1:]
    return Phrase(symbols, p.depth + 1)


def expansions(g: Grammar, p: Phrase) -> list[Phrase]:
    """All phrases obtained by rewriting the leftmost nonterminal, in rule
    declaration order.  Empty for sentences."""
    found = leftmost_nonterminal(p)
    if found is None:
        return []
    _, kind = found
    return [derive(p, prod) for prod in g.rules(kind)]


def estimate_max_length(g: Grammar, max_var_refs: int) -> int:
    """Greedy estimate of the longest phrase reachable within the variable
    budget.

    Repeatedly expands the leftmost nonterminal with the longest admissible
    production (ties: fewest nonterminals, then fewest variable references,
    then declaration order); a production is admissible if the derived
    phrase stays within `max_var_refs`.  The estimate is deliberately cheap
    and may undershoot the true maximum; the priority weight tolerates that.
    """
    if max_var_refs < 1:
        raise GrammarError(f"max_var_refs must be >= 1, got {max_var_refs}")
    seq: list[Symbol] = [nt(g.start)]
    blocked: set[int] = set()   # positions whose nonterminal cannot expand
    while True:
        pos = next((i for i, s in enumerate(seq)
                    if s.kind == Kind.NT and i not in blocked), None)
        if pos is None:
            break
        refs = count_variable_refs(seq)
        best: Production | None = None
        best_key: tuple[int, int, int] | None = None
        for prod in g.rules(Nt(seq[pos].code)):
            if refs - 1 + prod.var_refs > max_var_refs:
                continue
            key = (-len(prod.rhs), prod.n_nonterminals, prod.var_refs)
            if best_key is None or key < best_key:
                best, best_key = prod, key
        if best is None:
            blocked.add(pos)
            continue
        seq[pos:pos + 1] = list(best.rhs)
        blocked = {i if i < pos else i + len(best.rhs) - 1 for i in blocked}
    return len(seq)
