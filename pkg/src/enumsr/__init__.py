"""Deterministic symbolic regression by exhaustive grammar enumeration.

The engine enumerates a restricted grammar of rational polynomials,
deduplicates semantically equal candidates through canonicalizing expression
hashing, orders the frontier with a fit-based quality heuristic, and tunes
coefficients with a damped least-squares optimizer.  Identical seeds give
identical results.
"""
from .expr import (
    Fn, Kind, Node, Nt, Phrase, Symbol, count_variable_refs, evaluate, parse,
    parse_infix, render_fitted, render_infix,
)
from .grammar import (
    Grammar, GrammarError, Production, build_default_grammar, derive,
    estimate_max_length, expansions, leftmost_nonterminal,
)
from .canon import CanonNode, canonicalize, fold, hash_phrase, simplify
from .fitting import FitConfig, FittedModel, fit, jacobian, nmse, with_test_nmse
from .heuristic import PriorityParams, QualityEstimate, estimate_quality, priority
from .search import SearchConfig, SearchReport, SearchState, run, step
from .datasets import Dataset, DatasetError, benchmark_ids, generate, load_csv

__version__ = "0.1.0"

__all__ = [
    "Fn", "Kind", "Node", "Nt", "Phrase", "Symbol",
    "count_variable_refs", "evaluate", "parse", "parse_infix",
    "render_fitted", "render_infix",
    "Grammar", "GrammarError", "Production", "build_default_grammar",
    "derive", "estimate_max_length", "expansions", "leftmost_nonterminal",
    "CanonNode", "canonicalize", "fold", "hash_phrase", "simplify",
    "FitConfig", "FittedModel", "fit", "jacobian", "nmse", "with_test_nmse",
    "PriorityParams", "QualityEstimate", "estimate_quality", "priority",
    "SearchConfig", "SearchReport", "SearchState", "run", "step",
    "Dataset", "DatasetError", "benchmark_ids", "generate", "load_csv",
    "__version__",
]
