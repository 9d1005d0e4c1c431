"""Expression representation: symbols, phrases, trees, evaluation, rendering.

A phrase is a prefix-ordered symbol sequence.  Nonterminal symbols act as
arity-0 leaves, so every phrase parses into a tree and replacing the leftmost
nonterminal is a positional splice on the sequence.  Phrases without
nonterminals are called sentences; their coefficient slots are numbered left
to right when the tree is built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "Kind", "Fn", "Nt", "Symbol", "Phrase", "Node", "Program",
    "CONST", "ADD", "MUL", "INV", "EXP", "LOG", "SIN", "SQRT", "CBRT",
    "var", "nt", "count_variable_refs", "parse", "to_phrase", "compile_tree",
    "run_program", "evaluate", "render_infix", "render_fitted", "parse_infix",
]


class Kind(IntEnum):
    CONST = 0       # coefficient slot, value fitted later
    VAR = 1
    FUNC = 2
    NT = 3          # nonterminal


class Fn(IntEnum):
    """Function symbols; declaration order fixes the sort rank of operators."""
    ADD = 0
    MUL = 1
    INV = 2
    EXP = 3
    LOG = 4
    SIN = 5
    SQRT = 6
    CBRT = 7


class Nt(IntEnum):
    EXPR = 0
    TERM = 1
    RECURRING_FACTORS = 2
    VAR_FACTOR = 3
    LOG_FACTOR = 4
    EXP_FACTOR = 5
    SIN_FACTOR = 6
    ONE_TIME_FACTORS = 7
    INV_FACTOR = 8
    SQRT_FACTOR = 9
    CBRT_FACTOR = 10
    SIMPLE_EXPR = 11
    SIMPLE_TERM = 12
    INV_EXPR = 13
    INV_TERM = 14


_FN_ARITY = (2, 2, 1, 1, 1, 1, 1, 1)
_FN_LABEL = ("+", "*", "1/", "exp", "log", "sin", "sqrt", "cbrt")
_NT_LABEL = (
    "Expr", "Term", "RecurringFactors", "VarFactor", "LogFactor", "ExpFactor",
    "SinFactor", "OneTimeFactors", "InvFactor", "SqrtFactor", "CbrtFactor",
    "SimpleExpr", "SimpleTerm", "InvExpr", "InvTerm",
)
_NT_BY_LABEL = {name: Nt(i) for i, name in enumerate(_NT_LABEL)}
COMMUTATIVE = (Fn.ADD, Fn.MUL)


@dataclass(frozen=True, slots=True)
class Symbol:
    kind: Kind
    code: int = 0

    @property
    def arity(self) -> int:
        if self.kind == Kind.FUNC:
            return _FN_ARITY[self.code]
        return 0

    @property
    def is_nonterminal(self) -> bool:
        return self.kind == Kind.NT

    @property
    def is_variable(self) -> bool:
        return self.kind == Kind.VAR

    @property
    def is_commutative(self) -> bool:
        return self.kind == Kind.FUNC and Fn(self.code) in COMMUTATIVE

    def __repr__(self) -> str:
        if self.kind == Kind.CONST:
            return "Sym(const)"
        if self.kind == Kind.VAR:
            return f"Sym(x{self.code})"
        if self.kind == Kind.FUNC:
            return f"Sym({Fn(self.code).name.lower()})"
        return f"Sym(<{_NT_LABEL[self.code]}>)"


CONST = Symbol(Kind.CONST)
ADD = Symbol(Kind.FUNC, Fn.ADD)
MUL = Symbol(Kind.FUNC, Fn.MUL)
INV = Symbol(Kind.FUNC, Fn.INV)
EXP = Symbol(Kind.FUNC, Fn.EXP)
LOG = Symbol(Kind.FUNC, Fn.LOG)
SIN = Symbol(Kind.FUNC, Fn.SIN)
SQRT = Symbol(Kind.FUNC, Fn.SQRT)
CBRT = Symbol(Kind.FUNC, Fn.CBRT)

_VAR_CACHE: dict[int, Symbol] = {}
_NT_CACHE = {k: Symbol(Kind.NT, k) for k in Nt}


def var(index: int) -> Symbol:
    """Variable symbol for feature column `index`."""
    sym = _VAR_CACHE.get(index)
    if sym is None:
        if index < 0:
            raise ValueError(f"variable index must be >= 0, got {index}")
        sym = _VAR_CACHE.setdefault(index, Symbol(Kind.VAR, index))
    return sym


def nt(kind: Nt) -> Symbol:
    return _NT_CACHE[kind]


def nt_label(kind: Nt) -> str:
    return _NT_LABEL[kind]


@dataclass(frozen=True, slots=True)
class Phrase:
    """Prefix-ordered symbol sequence plus its derivation depth.

    Equality and hashing consider the symbols only; depth is bookkeeping
    (number of derivation steps from the start phrase).
    """
    symbols: tuple[Symbol, ...]
    depth: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self.symbols)

    @property
    def is_sentence(self) -> bool:
        return all(s.kind != Kind.NT for s in self.symbols)


def count_variable_refs(p: Phrase | Sequence[Symbol]) -> int:
    """Number of variable symbols plus nonterminal symbols in the phrase.

    Each nonterminal eventually derives at least one variable, so it counts
    as one pending reference; `x*x` counts 2, `log(x) + x` counts 2.
    """
    symbols = p.symbols if isinstance(p, Phrase) else p
    return sum(1 for s in symbols if s.kind in (Kind.VAR, Kind.NT))


@dataclass(frozen=True, slots=True)
class Node:
    """Expression tree node.  Coefficient slots carry their left-to-right
    index in `slot`; all other nodes use slot -1."""
    symbol: Symbol
    children: tuple["Node", ...] = ()
    slot: int = -1


def parse(p: Phrase) -> Node:
    """Build the tree for a phrase.  Nonterminals become leaves.

    Raises ValueError for empty or malformed sequences (too few or extra
    symbols for the declared arities).
    """
    symbols = p.symbols
    if not symbols:
        raise ValueError("cannot parse an empty phrase")
    pos = 0
    n_slots = 0

    def build() -> Node:
        nonlocal pos, n_slots
        if pos >= len(symbols):
            raise ValueError(f"phrase ends early at position {pos}")
        sym = symbols[pos]
        pos += 1
        if sym.kind == Kind.CONST:
            node = Node(sym, (), n_slots)
            n_slots += 1
            return node
        if sym.arity == 0:
            return Node(sym)
        children = tuple(build() for _ in range(sym.arity))
        return Node(sym, children)

    root = build()
    if pos != len(symbols):
        raise ValueError(f"trailing symbols after position {pos}")
    return root


def to_phrase(t: Node, depth: int = 0) -> Phrase:
    """Preorder symbol sequence of a tree (inverse of `parse` for binary
    trees; n-ary nodes flatten into repeated binary applications)."""
    out: list[Symbol] = []

    def walk(n: Node) -> None:
        if n.symbol.kind == Kind.FUNC and len(n.children) > n.symbol.arity:
            # n-ary Add/Mul: emit as a right-nested chain of binary nodes
            for c in n.children[:-1]:
                out.append(n.symbol)
                walk(c)
            walk(n.children[-1])
            return
        out.append(n.symbol)
        for c in n.children:
            walk(c)

    walk(t)
    return Phrase(tuple(out), depth)


def count_slots(t: Node) -> int:
    total = 1 if t.symbol.kind == Kind.CONST else 0
    for c in t.children:
        total += count_slots(c)
    return total


# ---------------------------------------------------------------------------
# Evaluation.  Sentences compile to a postorder instruction list executed on
# numpy arrays; coefficients may be a batch (one row per restart).

_OP_CONST = 0
_OP_VAR = 1
_OP_FUNC = 2


@dataclass(frozen=True)
class Program:
    """Postorder instruction list for one sentence tree."""
    instructions: tuple[tuple[int, int, int], ...]  # (opcode, operand, arity)
    n_slots: int


def compile_tree(t: Node) -> Program:
    instrs: list[tuple[int, int, int]] = []
    n_slots = 0

    def walk(n: Node) -> None:
        nonlocal n_slots
        sym = n.symbol
        if sym.kind == Kind.CONST:
            instrs.append((_OP_CONST, n.slot, 0))
            n_slots = max(n_slots, n.slot + 1)
        elif sym.kind == Kind.VAR:
            instrs.append((_OP_VAR, sym.code, 0))
        elif sym.kind == Kind.FUNC:
            for c in n.children:
                walk(c)
            instrs.append((_OP_FUNC, sym.code, len(n.children)))
        else:
            raise ValueError("cannot compile a phrase with nonterminals")

    walk(t)
    return Program(tuple(instrs), n_slots)


def _apply_fn(code: int, args: list[np.ndarray]) -> np.ndarray:
    if code == Fn.ADD:
        out = args[0]
        for a in args[1:]:
            out = out + a
        return out
    if code == Fn.MUL:
        out = args[0]
        for a in args[1:]:
            out = out * a
        return out
    a = args[0]
    if code == Fn.INV:
        return np.divide(1.0, a)
    if code == Fn.EXP:
        return np.exp(a)
    if code == Fn.LOG:
        return np.log(a)
    if code == Fn.SIN:
        return np.sin(a)
    if code == Fn.SQRT:
        return np.sqrt(a)
    # sign-preserving real cube root
    return np.cbrt(a)


def run_program(prog: Program, coeffs: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Evaluate a compiled sentence.

    coeffs has shape (R, k) for R independent coefficient vectors, X has
    shape (n, d).  Returns predictions of shape (R, n).  Domain errors
    surface as non-finite entries, never as exceptions.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    R = coeffs.shape[0]
    n = X.shape[0]
    stack: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for opcode, operand, arity in prog.instructions:
            if opcode == _OP_CONST:
                stack.append(coeffs[:, operand:operand + 1])
            elif opcode == _OP_VAR:
                stack.append(X[:, operand][None, :])
            else:
                args = stack[len(stack) - arity:]
                del stack[len(stack) - arity:]
                stack.append(_apply_fn(operand, args))
    out = stack.pop()
    return np.broadcast_to(out, (R, n)).astype(np.float64, copy=False)


def evaluate(t: Node, coefficients: Sequence[float], row: Sequence[float]) -> float:
    """Evaluate a sentence tree on one data row.

    Returns the value; a non-finite result (nan/inf) marks an evaluation
    failure and is returned as such rather than raised.
    """
    prog = compile_tree(t)
    if len(coefficients) != prog.n_slots:
        raise ValueError(
            f"expected {prog.n_slots} coefficients, got {len(coefficients)}")
    X = np.asarray(row, dtype=np.float64).reshape(1, -1)
    out = run_program(prog, np.asarray(coefficients, dtype=np.float64).reshape(1, -1), X)
    return float(out[0, 0])


# ---------------------------------------------------------------------------
# Rendering and text parsing.
#
# Infix text is deterministic and lossless: `+` and `*` associate to the
# right (matching the nesting the grammar produces), so parentheses appear
# only where the tree deviates from right-nesting.

EMPTY_PHRASE_TEXT = "<empty>"


def _default_name(i: int) -> str:
    return f"x{i}"


def _fmt_const(slot: int, coeffs: Sequence[float] | None, precision: int) -> str:
    if coeffs is None:
        return f"c{slot}"
    return f"{coeffs[slot]:.{precision}g}"


def _render(n: Node, names: Sequence[str] | None,
            coeffs: Sequence[float] | None, precision: int) -> str:
    sym = n.symbol
    if sym.kind == Kind.CONST:
        return _fmt_const(n.slot, coeffs, precision)
    if sym.kind == Kind.VAR:
        return names[sym.code] if names is not None else _default_name(sym.code)
    if sym.kind == Kind.NT:
        return f"<{_NT_LABEL[sym.code]}>"
    code = Fn(sym.code)
    parts = [_render(c, names, coeffs, precision) for c in n.children]
    if code == Fn.ADD:
        rendered = []
        for c, text in zip(n.children, parts):
            last = c is n.children[-1]
            if c.symbol.kind == Kind.FUNC and c.symbol.code == Fn.ADD and not last:
                text = f"({text})"
            rendered.append(text)
        return " + ".join(rendered)
    if code == Fn.MUL:
        rendered = []
        for c, text in zip(n.children, parts):
            last = c is n.children[-1]
            wrap = False
            if c.symbol.kind == Kind.FUNC:
                if c.symbol.code == Fn.ADD:
                    wrap = True
                elif c.symbol.code == Fn.MUL and not last:
                    wrap = True
            if wrap:
                text = f"({text})"
            rendered.append(text)
        return "*".join(rendered)
    if code == Fn.INV:
        return f"1/({parts[0]})"
    return f"{_FN_LABEL[code]}({parts[0]})"


def render_infix(p: Phrase, feature_names: Sequence[str] | None = None) -> str:
    """Deterministic infix text for a phrase; `<empty>` for the empty phrase.

    Coefficient slots print as c0, c1, ... in left-to-right order and
    nonterminals as `<Name>`.
    """
    if not p.symbols:
        return EMPTY_PHRASE_TEXT
    return _render(parse(p), feature_names, None, 17)


def render_tree(t: Node, feature_names: Sequence[str] | None = None) -> str:
    return _render(t, feature_names, None, 17)


def render_fitted(p: Phrase, coefficients: Sequence[float],
                  feature_names: Sequence[str] | None = None,
                  precision: int = 8) -> str:
    """Infix text with fitted coefficient values substituted for the slots."""
    if not p.symbols:
        return EMPTY_PHRASE_TEXT
    return _render(parse(p), feature_names, coefficients, precision)


_FUNC_TOKENS = {"exp": EXP, "log": LOG, "sin": SIN, "sqrt": SQRT, "cbrt": CBRT}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str | None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        if self.pos >= len(self.text):
            return None
        return self.text[self.pos]

    def error(self, message: str) -> ValueError:
        return ValueError(f"parse error at position {self.pos}: {message}")

    def expect(self, char: str) -> None:
        c = self.peek()
        if c != char:
            raise self.error(f"expected {char!r}, found {c!r}")
        self.pos += 1

    def ident(self) -> str:
        c = self.peek()
        if c is None or not (c.isalpha() or c == "_"):
            raise self.error(f"expected identifier, found {c!r}")
        start = self.pos
        while self.pos < len(self.text) and (
                self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start:self.pos]


def parse_infix(text: str, feature_names: Sequence[str] | None = None) -> Phrase:
    """Parse rendered infix text back into a phrase.

    Accepts the `render_infix` language: coefficient slots `c<k>`, variable
    names, `<Nonterminal>` leaves, `+`, `*`, `1/(...)` and the unary
    functions.  `+` and `*` associate to the right.
    """
    if text.strip() == EMPTY_PHRASE_TEXT:
        return Phrase(())
    names = list(feature_names) if feature_names is not None else None
    lx = _Lexer(text)

    def parse_sum() -> list[Symbol]:
        left = parse_product()
        if lx.peek() == "+":
            lx.pos += 1
            return [ADD] + left + parse_sum()
        return left

    def parse_product() -> list[Symbol]:
        left = parse_atom()
        if lx.peek() == "*":
            lx.pos += 1
            return [MUL] + left + parse_product()
        return left

    def parse_atom() -> list[Symbol]:
        c = lx.peek()
        if c == "(":
            lx.pos += 1
            inner = parse_sum()
            lx.expect(")")
            return inner
        if c == "<":
            lx.pos += 1
            name = lx.ident()
            lx.expect(">")
            if name not in _NT_BY_LABEL:
                raise lx.error(f"unknown nonterminal <{name}>")
            return [nt(_NT_BY_LABEL[name])]
        if c == "1":
            lx.pos += 1
            lx.expect("/")
            lx.expect("(")
            inner = parse_sum()
            lx.expect(")")
            return [INV] + inner
        name = lx.ident()
        if name in _FUNC_TOKENS and lx.peek() == "(":
            lx.pos += 1
            inner = parse_sum()
            lx.expect(")")
            return [_FUNC_TOKENS[name]] + inner
        if len(name) > 1 and name[0] == "c" and name[1:].isdigit() and (
                names is None or name not in names):
            return [CONST]
        if names is not None:
            if name not in names:
                raise lx.error(f"unknown variable {name!r}")
            return [var(names.index(name))]
        if name[0] == "x" and name[1:].isdigit():
            return [var(int(name[1:]))]
        raise lx.error(f"unknown variable {name!r}")

    symbols = parse_sum()
    if lx.peek() is not None:
        raise lx.error("trailing input")
    return Phrase(tuple(symbols))
