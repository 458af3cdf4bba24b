"""Prefix-bounded orderings of finite vector families.

Given zero-sum vectors of norm at most one in ``R^d``, there is an
ordering (keeping the first vector first) whose running prefix sums all
stay within a dimension-dependent constant ``C_d``.  This module provides

* a configurable schedule of constants (default ``C_d = d + 1``),
* a greedy-with-backtracking search realizing the bound,
* an anchored variant for families whose sum is a nonzero vector ``b``
  (bound ``rho * C_d + ||b||``), and
* an exhaustive oracle for small instances, used by the test suite to
  confirm the search never reports a worse ordering than the true optimum.

The search is deterministic: candidates are ranked by the norm the prefix
would have after appending them, with ties broken by lowest input
position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, PreconditionError, SearchError, SizeLimitError

#: Instances at or below this size get the full backtracking search;
#: larger ones use the plain greedy descent (identical choices, no undo).
_BACKTRACK_LIMIT = 512

#: Default cap on candidate expansions inside the backtracking search.
_NODE_CAP = 250_000

BRUTE_FORCE_LIMIT = 10


@dataclass(frozen=True)
class ConstantSchedule:
    """Nondecreasing confinement constants indexed by dimension.

    ``values`` overrides the leading dimensions (``values[0]`` is the
    constant for d=1); past the overrides the default rule ``C_d = d + 1``
    applies, clamped so the sequence never decreases.
    """

    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        prev = 0.0
        for i, v in enumerate(self.values):
            v = float(v)
            if not math.isfinite(v) or v < 1.0:
                raise InputError(f"schedule entry {i} must be finite and >= 1")
            if v < prev:
                raise InputError("schedule must be nondecreasing")
            prev = v

    def value_at(self, dim: int) -> float:
        if dim < 1:
            raise InputError(f"dimension must be >= 1, got {dim}")
        if dim <= len(self.values):
            return float(self.values[dim - 1])
        base = float(dim + 1)
        if self.values:
            return max(base, float(self.values[-1]))
        return base


DEFAULT_SCHEDULE = ConstantSchedule()


def published_constant(dim: int, schedule: ConstantSchedule | None = None) -> float:
    """The confinement constant for ``dim``, from the active schedule."""
    return (schedule or DEFAULT_SCHEDULE).value_at(dim)


@dataclass(frozen=True)
class ConfinementResult:
    """An ordering plus the prefix bound it was checked against."""

    permutation: tuple[int, ...]
    max_prefix_norm: float
    bound_used: float


def _as_matrix(vectors) -> np.ndarray:
    vs = np.asarray(vectors, dtype=np.float64)
    if vs.ndim == 1:
        vs = vs[:, None]
    if vs.ndim != 2 or vs.shape[0] == 0 or vs.shape[1] == 0:
        raise InputError("expected a nonempty list of equal-length vectors")
    if not np.all(np.isfinite(vs)):
        raise InputError("vectors must be finite")
    return vs


def prefix_norms(vectors, order) -> np.ndarray:
    """Norms of the running sums of ``vectors`` taken in ``order``."""
    vs = _as_matrix(vectors)
    sums = np.cumsum(vs[np.asarray(order, dtype=np.intp)], axis=0)
    return np.linalg.norm(sums, axis=1)


def _greedy_descent(vs: np.ndarray, threshold: float, order: list[int],
                    prefix: np.ndarray, used: np.ndarray) -> list[int]:
    n = vs.shape[0]
    positions = np.arange(n)
    while len(order) < n:
        cand = positions[~used]
        norms = np.linalg.norm(prefix[None, :] + vs[cand], axis=1)
        feasible = norms <= threshold
        if not feasible.any():
            raise SearchError(
                "greedy ordering hit a dead end below the requested bound")
        norms = norms[feasible]
        cand = cand[feasible]
        best = norms.min()
        pick = int(cand[norms == best].min())
        order.append(pick)
        used[pick] = True
        prefix = prefix + vs[pick]
    return order


def _backtracking_order(vs: np.ndarray, threshold: float, order: list[int],
                        prefix: np.ndarray, used: np.ndarray,
                        node_cap: int) -> list[int]:
    n = vs.shape[0]
    positions = np.arange(n)

    def candidates(pref: np.ndarray, used_now: np.ndarray) -> list[int]:
        cand = positions[~used_now]
        norms = np.linalg.norm(pref[None, :] + vs[cand], axis=1)
        keep = norms <= threshold
        cand, norms = cand[keep], norms[keep]
        ranked = np.lexsort((cand, norms))
        return [int(c) for c in cand[ranked]]

    def mask_of(used_now: np.ndarray) -> int:
        mask = 0
        for i in np.flatnonzero(used_now):
            mask |= 1 << int(i)
        return mask

    failed: set[int] = set()
    stack: list[tuple[np.ndarray, list[int], int]] = [
        (prefix, candidates(prefix, used), 0)]
    nodes = 0
    while stack:
        pref, cands, next_at = stack[-1]
        if len(order) == n:
            return order
        advanced = False
        while next_at < len(cands):
            pick = cands[next_at]
            next_at += 1
            nodes += 1
            if nodes > node_cap:
                raise SearchError(
                    f"ordering search exceeded {node_cap} expansions")
            used[pick] = True
            if mask_of(used) in failed:
                used[pick] = False
                continue
            stack[-1] = (pref, cands, next_at)
            order.append(pick)
            new_pref = pref + vs[pick]
            if len(order) == n:
                return order
            stack.append((new_pref, candidates(new_pref, used), 0))
            advanced = True
            break
        if not advanced:
            failed.add(mask_of(used))
            stack.pop()
            if order:
                undone = order.pop()
                used[undone] = False
    raise SearchError("no ordering satisfies the requested prefix bound")


def order_with_threshold(vectors, threshold: float, fix_first: bool = True,
                         offset=None, node_cap: int = _NODE_CAP) -> list[int]:
    """Order all vectors so every running prefix (plus ``offset``) has norm
    at most ``threshold``.

    Greedy choice with full backtracking for small inputs; pure greedy for
    large ones.  Raises SearchError when no ordering within the bound is
    found.
    """
    vs = _as_matrix(vectors)
    n, d = vs.shape
    prefix = (np.zeros(d) if offset is None
              else np.asarray(offset, dtype=np.float64).copy())
    if prefix.shape != (d,):
        raise InputError("offset dimension mismatch")
    order: list[int] = []
    used = np.zeros(n, dtype=bool)
    if fix_first:
        prefix = prefix + vs[0]
        if np.linalg.norm(prefix) > threshold:
            raise SearchError("the fixed first vector already exceeds the bound")
        order.append(0)
        used[0] = True
    if n > _BACKTRACK_LIMIT:
        return _greedy_descent(vs, threshold, order, prefix, used)
    return _backtracking_order(vs, threshold, order, prefix, used, node_cap)


def confine_zero_sum(vectors, tol: float = 1e-9,
                     schedule: ConstantSchedule | None = None) -> ConfinementResult:
    """Order zero-sum vectors of norm <= 1 so every prefix stays within C_d.

    The input position 0 is kept first.  Preconditions (vector norms at
    most ``1 + tol``, total sum within ``tol`` of zero) are enforced.
    """
    vs = _as_matrix(vectors)
    n, d = vs.shape
    if tol < 0.0:
        raise InputError("tol must be nonnegative")
    norms = np.linalg.norm(vs, axis=1)
    worst = int(norms.argmax())
    if norms[worst] > 1.0 + tol:
        raise PreconditionError(
            f"vector {worst} has norm {norms[worst]!r}, above 1 + tol")
    resid = float(np.linalg.norm(vs.sum(axis=0)))
    if resid > tol:
        raise PreconditionError(
            f"vectors sum to a vector of norm {resid!r}, above tol={tol!r}")
    bound = published_constant(d, schedule) + tol
    order = order_with_threshold(vs, bound, fix_first=True)
    reached = float(prefix_norms(vs, order).max())
    if reached > bound:
        raise SearchError("ordering exceeded its own bound; this is a bug")
    return ConfinementResult(tuple(order), reached, bound)


def confine_with_anchor(vectors, b, rho: float, tol: float = 1e-9,
                        schedule: ConstantSchedule | None = None) -> ConfinementResult:
    """Order vectors summing to ``b`` (norms <= rho, ||b|| <= rho) so every
    prefix stays within ``rho * C_d + ||b||``.

    Works by appending ``-b``, rescaling to unit norms, running
    confine_zero_sum, and deleting the appended row: prefixes before the
    deleted row are unchanged and later ones shift by exactly ``b``, which
    is where the ``+ ||b||`` in the bound comes from.
    """
    vs = _as_matrix(vectors)
    n, d = vs.shape
    rho = float(rho)
    if not (math.isfinite(rho) and rho > 0.0):
        raise InputError(f"rho must be positive, got {rho!r}")
    if tol < 0.0:
        raise InputError("tol must be nonnegative")
    anchor = np.asarray(b, dtype=np.float64).reshape(-1)
    if anchor.shape != (d,):
        raise InputError("anchor dimension mismatch")
    inner_tol = tol / (2.0 * max(1.0, rho))
    norms = np.linalg.norm(vs, axis=1)
    worst = int(norms.argmax())
    if norms[worst] > rho * (1.0 + inner_tol):
        raise PreconditionError(
            f"vector {worst} has norm {norms[worst]!r}, above rho={rho!r}")
    anchor_norm = float(np.linalg.norm(anchor))
    if anchor_norm > rho * (1.0 + inner_tol):
        raise PreconditionError(
            f"anchor norm {anchor_norm!r} exceeds rho={rho!r}")
    resid = float(np.linalg.norm(vs.sum(axis=0) - anchor))
    if resid > rho * inner_tol:
        raise PreconditionError(
            f"vectors sum to {resid!r} away from the anchor, above tolerance")
    augmented = np.vstack([vs, -anchor[None, :]]) / rho
    inner = confine_zero_sum(augmented, tol=inner_tol, schedule=schedule)
    order = [i for i in inner.permutation if i != n]
    reached = float(prefix_norms(vs, order).max())
    bound = rho * published_constant(d, schedule) + anchor_norm + rho * inner_tol
    if reached > bound:
        raise SearchError("anchored ordering exceeded its bound; this is a bug")
    return ConfinementResult(tuple(order), reached, bound)


def brute_force_confine(vectors) -> tuple[tuple[int, ...], float]:
    """Exhaustively minimize the max prefix norm over all orderings that
    keep position 0 first.  Only for small inputs (n <= 10)."""
    vs = _as_matrix(vectors)
    n = vs.shape[0]
    if n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(
            f"exhaustive search is limited to {BRUTE_FORCE_LIMIT} vectors, got {n}")
    base = vs[0]
    base_norm = float(np.linalg.norm(base))
    best_order: tuple[int, ...] = (0,) + tuple(range(1, n))
    best_value = math.inf
    rest = list(range(1, n))

    def walk(prefix: np.ndarray, cur_max: float,
             chosen: list[int], remaining: list[int]) -> None:
        nonlocal best_order, best_value
        if cur_max >= best_value:
            return
        if not remaining:
            best_order = (0,) + tuple(chosen)
            best_value = cur_max
            return
        for k, pos in enumerate(remaining):
            new_prefix = prefix + vs[pos]
            new_max = max(cur_max, float(np.linalg.norm(new_prefix)))
            chosen.append(pos)
            walk(new_prefix, new_max, chosen, remaining[:k] + remaining[k + 1:])
            chosen.pop()

    walk(base, base_norm, [], rest)
    return best_order, best_value
