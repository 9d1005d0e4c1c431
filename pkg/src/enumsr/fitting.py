"""Coefficient fitting: NMSE scoring and damped least-squares optimization.

Each sentence is fitted by Levenberg-Marquardt from several random starting
points.  All restarts run batched: coefficient vectors form the rows of one
matrix, the forward pass and the reverse-mode Jacobian are evaluated for
every restart at once, and the damping factors evolve per restart.  The
randomness of the starting points derives from the run seed mixed with the
sentence digest, so a sentence is fitted identically no matter when the
search encounters it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, TYPE_CHECKING

import numpy as np

from .canon import canonicalize, hash_phrase
from .expr import (
    Fn, Kind, Node, Phrase, Program, _OP_CONST, _OP_FUNC, _OP_VAR,
    _apply_fn, compile_tree, parse, run_program,
)

if TYPE_CHECKING:
    from .datasets import Dataset

__all__ = ["FitConfig", "FittedModel", "nmse", "fit", "jacobian",
           "with_test_nmse"]

# stream tag separating fit randomness from other seeded streams
_FIT_STREAM = 0xF17


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 100
    restarts: int = 10
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e12
    grad_tol: float = 1e-12
    step_tol: float = 1e-14
    sse_rel_tol: float = 1e-12
    penalty_residual: float = 1e6


@dataclass(frozen=True)
class FittedModel:
    sentence: Phrase
    coefficients: tuple[float, ...]
    train_nmse: float
    test_nmse: float
    failed: bool
    restart_nmses: tuple[float, ...] = ()


def nmse(predictions: Sequence[float], targets: Sequence[float]) -> float:
    """Mean squared error divided by the population variance of the targets.

    0 is a perfect fit and 1 the quality of predicting the target mean;
    values above 1 are worse than the mean model.
    """
    pred = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if pred.shape != y.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {y.shape}")
    if y.size == 0:
        raise ValueError("cannot score an empty target vector")
    variance = float(np.var(y))
    if variance == 0.0:
        raise ValueError("targets have zero variance")
    return float(np.mean((pred - y) ** 2)) / variance


def _forward_all(prog: Program, coeffs: np.ndarray, X: np.ndarray
                 ) -> list[np.ndarray]:
    """Forward pass keeping every node value (needed for the reverse pass).

    Returns one array per instruction; shapes broadcast to at most (R, n).
    """
    values: list[np.ndarray] = []
    stack: list[int] = []
    with np.errstate(all="ignore"):
        for i, (opcode, operand, arity) in enumerate(prog.instructions):
            if opcode == _OP_CONST:
                values.append(coeffs[:, operand:operand + 1])
            elif opcode == _OP_VAR:
                values.append(X[:, operand][None, :])
            else:
                args = [values[j] for j in stack[len(stack) - arity:]]
                del stack[len(stack) - arity:]
                values.append(_apply_fn(operand, args))
            stack.append(i)
    return values


def _child_indices(prog: Program) -> list[tuple[int, ...]]:
    """Instruction indices of each node's children, by postorder position."""
    children: list[tuple[int, ...]] = []
    stack: list[int] = []
    for i, (opcode, _operand, arity) in enumerate(prog.instructions):
        if opcode == _OP_FUNC:
            kids = tuple(stack[len(stack) - arity:])
            del stack[len(stack) - arity:]
            children.append(kids)
        else:
            children.append(())
        stack.append(i)
    return children


def _forward_backward(prog: Program, coeffs: np.ndarray, X: np.ndarray,
                      children: list[tuple[int, ...]] | None = None
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Predictions (R, n) and Jacobian (R, n, k) of the model output with
    respect to each coefficient slot.

    The expression is a tree, so reverse mode reduces to one adjoint per
    node: adjoint(child) = adjoint(node) * d node/d child, and the Jacobian
    column of a slot is the adjoint of its leaf.
    """
    R = coeffs.shape[0]
    n = X.shape[0]
    k = prog.n_slots
    values = _forward_all(prog, coeffs, X)
    if children is None:
        children = _child_indices(prog)
    root = len(prog.instructions) - 1
    pred = np.broadcast_to(values[root], (R, n)).astype(np.float64, copy=True)

    adjoint: list[np.ndarray | None] = [None] * len(prog.instructions)
    adjoint[root] = np.ones((1, 1))
    J = np.zeros((R, n, k))
    with np.errstate(all="ignore"):
        for i in range(root, -1, -1):
            adj = adjoint[i]
            if adj is None:
                continue
            opcode, operand, _arity = prog.instructions[i]
            if opcode == _OP_CONST:
                J[:, :, operand] = adj
                continue
            if opcode == _OP_VAR:
                continue
            kids = children[i]
            v = [values[j] for j in kids]
            if operand == Fn.ADD:
                for j in kids:
                    adjoint[j] = adj
            elif operand == Fn.MUL:
                # d(prod)/d child = product of the siblings
                for idx, j in enumerate(kids):
                    sib = adj
                    for other, vo in enumerate(v):
                        if other != idx:
                            sib = sib * vo
                    adjoint[j] = sib
            elif operand == Fn.INV:
                adjoint[kids[0]] = adj * (-values[i] * values[i])
            elif operand == Fn.EXP:
                adjoint[kids[0]] = adj * values[i]
            elif operand == Fn.LOG:
                adjoint[kids[0]] = adj / v[0]
            elif operand == Fn.SIN:
                adjoint[kids[0]] = adj * np.cos(v[0])
            elif operand == Fn.SQRT:
                adjoint[kids[0]] = adj / (2.0 * values[i])
            else:  # CBRT: d cbrt(a)/da = 1 / (3 cbrt(a)^2)
                adjoint[kids[0]] = adj / (3.0 * values[i] * values[i])
    return pred, J


def jacobian(sentence: Phrase, coefficients: Sequence[float], data: "Dataset"
             ) -> np.ndarray:
    """Partial derivatives of the residual vector with respect to each
    coefficient on the training rows, shape (n_train, k).

    Rows where the model output is non-finite come back as nan and are the
    caller's responsibility to exclude.
    """
    tree = parse(sentence)
    prog = compile_tree(tree)
    if len(coefficients) != prog.n_slots:
        raise ValueError(
            f"expected {prog.n_slots} coefficients, got {len(coefficients)}")
    c = np.asarray(coefficients, dtype=np.float64).reshape(1, -1)
    pred, J = _forward_backward(prog, c, data.X_train)
    J = J[0]
    bad = ~np.isfinite(pred[0])
    if bad.any():
        J[bad, :] = np.nan
    return J


def _lm_batched(prog: Program, inits: np.ndarray, X: np.ndarray,
                y: np.ndarray, cfg: FitConfig) -> np.ndarray:
    """Run one damped least-squares descent per row of `inits`; returns the
    final coefficient matrix.

    Rows of the residual where the model is non-finite contribute a fixed
    penalty with zero gradient, which steers the descent back toward the
    feasible region without aborting the iteration.  The linearization is
    only refreshed after an accepted step; a rejected step changes nothing
    but the damping factor, so the cached gradient and Gauss-Newton matrix
    stay valid.  A restart retires when its gradient or step vanishes, its
    damping factor exceeds `lambda_max`, or an accepted step no longer
    reduces the squared error by a relative `sse_rel_tol`.
    """
    R, k = inits.shape
    coeffs = inits.copy()
    lam = np.full(R, cfg.lambda_init)
    active = np.ones(R, dtype=bool)
    eye = np.eye(k)
    children = _child_indices(prog)

    def penalized(pred: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        bad = ~np.isfinite(pred)
        res = np.where(bad, cfg.penalty_residual, pred - y[None, :])
        return res, bad

    stale = True
    g = H = sse = None
    with np.errstate(all="ignore"):
        for _ in range(cfg.max_iterations):
            if not active.any():
                break
            if stale:
                pred, J = _forward_backward(prog, coeffs, X, children)
                _res, bad = penalized(pred)
                np.nan_to_num(J, copy=False, nan=0.0, posinf=0.0, neginf=0.0)
                J[bad] = 0.0
                g = np.einsum("rnk,rn->rk", J, _res)
                H = np.matmul(J.transpose(0, 2, 1), J)
                sse = np.sum(_res * _res, axis=1)
                active &= ~(np.max(np.abs(g), axis=1) < cfg.grad_tol)
                if not active.any():
                    break
                stale = False
            A = H + lam[:, None, None] * eye[None, :, :]
            try:
                step = np.linalg.solve(A, -g[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError:
                step = np.full((R, k), np.nan)
                for r in range(R):
                    try:
                        step[r] = np.linalg.solve(A[r], -g[r])
                    except np.linalg.LinAlgError:
                        step[r] = np.linalg.lstsq(A[r], -g[r], rcond=None)[0]
            step = np.nan_to_num(step, nan=0.0, posinf=0.0, neginf=0.0)
            trial = coeffs + step
            trial_pred = run_program(prog, trial, X)
            trial_res, _ = penalized(trial_pred)
            trial_sse = np.sum(trial_res * trial_res, axis=1)
            accept = active & (trial_sse < sse)
            if accept.any():
                plateau = accept & (sse - trial_sse
                                    <= cfg.sse_rel_tol * trial_sse)
                coeffs = np.where(accept[:, None], trial, coeffs)
                active &= ~plateau
                stale = True
            lam = np.where(accept, lam / cfg.lambda_down, lam)
            lam = np.where(active & ~accept, lam * cfg.lambda_up, lam)
            step_done = np.linalg.norm(step, axis=1) < cfg.step_tol
            active &= ~(step_done | (lam > cfg.lambda_max))
    return coeffs


def _is_bare_constant(tree: Node) -> bool:
    return tree.symbol.kind == Kind.CONST and not tree.children


def fit(sentence: Phrase, data: "Dataset", cfg: FitConfig = FitConfig(),
        seed: int = 1, compute_test: bool = False) -> FittedModel:
    """Fit the sentence's coefficients on the training rows.

    Runs `cfg.restarts` independent optimizations from standard-normal
    starting points and returns the restart with the lowest training NMSE
    (first one on ties).  A restart whose final model is non-finite on any
    training row scores +inf; if every restart fails the model is flagged
    failed.  The bare constant sentence is fitted in closed form as the
    target mean.

    Test NMSE is reporting-only and can be large to evaluate (grid test
    sets), so it is skipped unless `compute_test` is set; `with_test_nmse`
    fills it in afterwards.
    """
    if not sentence.is_sentence:
        raise ValueError("can only fit sentences (no nonterminals)")
    tree = parse(sentence)
    prog = compile_tree(tree)
    if prog.n_slots == 0:
        raise ValueError("sentence has no coefficient slots")
    y = data.y_train
    variance = float(np.var(y))
    if variance == 0.0:
        raise ValueError("training targets have zero variance")

    if _is_bare_constant(tree):
        mean = float(np.mean(y))
        train = nmse(np.full(y.shape, mean), y)
        test = _test_nmse(prog, (mean,), data) if compute_test else math.nan
        return FittedModel(sentence, (mean,), train, test, False, (train,))

    digest = hash_phrase(sentence)
    rng = np.random.default_rng(np.random.SeedSequence([_FIT_STREAM, seed, digest]))
    inits = rng.standard_normal((cfg.restarts, prog.n_slots))
    coeffs = _lm_batched(prog, inits, data.X_train, y, cfg)

    pred = run_program(prog, coeffs, data.X_train)
    finite = np.isfinite(pred).all(axis=1)
    mse = np.mean((pred - y[None, :]) ** 2, axis=1)
    scores = np.where(finite, mse / variance, np.inf)
    best = int(np.argmin(scores))
    restart_nmses = tuple(float(s) for s in scores)
    if not finite[best]:
        return FittedModel(sentence, tuple(coeffs[best]), math.inf, math.inf,
                           True, restart_nmses)
    winner = tuple(float(c) for c in coeffs[best])
    test = _test_nmse(prog, winner, data) if compute_test else math.nan
    return FittedModel(sentence, winner, float(scores[best]), test,
                       False, restart_nmses)


def with_test_nmse(model: FittedModel, data: "Dataset") -> FittedModel:
    """Copy of `model` with the test NMSE evaluated (nan without test rows)."""
    if model.failed:
        return model
    prog = compile_tree(parse(model.sentence))
    return replace(model, test_nmse=_test_nmse(prog, model.coefficients, data))


def _test_nmse(prog: Program, coefficients: tuple[float, ...], data: "Dataset"
               ) -> float:
    if data.X_test is None or len(data.y_test) == 0:
        return math.nan
    pred = run_program(prog, np.asarray(coefficients).reshape(1, -1), data.X_test)[0]
    if not np.isfinite(pred).all():
        return math.inf
    variance = float(np.var(data.y_test))
    if variance == 0.0:
        return math.nan
    return float(np.mean((pred - data.y_test) ** 2)) / variance
