"""Which sum vectors are attainable: kernel directions, their complement,
and limits of dependent series.

For a finite family of series, the coefficient vectors whose linear
combination is absolutely convergent form a linear space (the kernel
directions here).  Rearranging with one shared permutation can move the
sum vector exactly within the orthogonal complement of that space, so the
attainable set is the classical-sum vector plus that complement.

Specs declare their structure, so the kernel has an exact description:
reduce every spec to its dyadic sign-pattern components; a combination is
absolutely convergent precisely when the pattern components cancel.  That
turns kernel computation into exact rational linear algebra over the
pattern matrix.  A numerical growth test cross-checks the declared
structure and raises DisagreementError instead of silently trusting
either side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DisagreementError, InputError
from .series import (FamilyVector, SeriesSpec, classical_sum, composite,
                     reduce_spec, term_array)

#: Default index count for the numerical growth cross-check.
DEFAULT_TRUNCATION = 1 << 16

#: Growth threshold: absolute partial sums at or above threshold * ln(N)
#: count against membership (the value is unbounded evidence).
DEFAULT_GROWTH_THRESHOLD = 0.5

_RATIO_BOUNDED = 1.05
_RATIO_DIVERGENT = 1.5
_CHUNK = 1 << 15


@dataclass(frozen=True)
class CoefficientVector:
    """Sparse real coefficient vector with finite support."""

    support: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.values):
            raise InputError("support and values must have the same length")
        if len(set(self.support)) != len(self.support):
            raise InputError("support entries must be distinct")
        if any(i < 0 for i in self.support):
            raise InputError("support entries must be nonnegative")
        if any(v == 0.0 or not math.isfinite(v) for v in self.values):
            raise InputError("values must be nonzero and finite on the support")

    @staticmethod
    def from_dense(coeffs: Sequence[float]) -> "CoefficientVector":
        pairs = [(i, float(v)) for i, v in enumerate(coeffs) if v != 0.0]
        return CoefficientVector(tuple(i for i, _ in pairs),
                                 tuple(v for _, v in pairs))

    def as_array(self, dim: int) -> np.ndarray:
        out = np.zeros(dim, dtype=np.float64)
        for i, v in zip(self.support, self.values):
            if i >= dim:
                raise InputError(f"support index {i} outside dimension {dim}")
            out[i] = v
        return out

    def dot(self, xs: Sequence[float]) -> float:
        total = 0.0
        for i, v in zip(self.support, self.values):
            if i >= len(xs):
                raise InputError(f"support index {i} outside the given vector")
            total += v * float(xs[i])
        return total


# ---------------------------------------------------------------------------
# Exact pattern algebra
# ---------------------------------------------------------------------------

def _pattern_vector(spec: SeriesSpec) -> dict[tuple[int, float], Fraction]:
    return {(lv, p): Fraction(c) for lv, p, c in reduce_spec(spec).patterns}


def _pattern_matrix(fam: FamilyVector, dim: int):
    keys = sorted({k for spec in fam.specs[:dim]
                   for k in _pattern_vector(spec)})
    columns = [_pattern_vector(spec) for spec in fam.specs[:dim]]
    matrix = [[columns[j].get(k, Fraction(0)) for j in range(dim)]
              for k in keys]
    return keys, matrix


def _nullspace(matrix: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    rows = [row[:] for row in matrix]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot_row = next((i for i in range(r, len(rows)) if rows[i][c] != 0),
                         None)
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    basis: list[list[Fraction]] = []
    for free in (c for c in range(ncols) if c not in pivots):
        vec = [Fraction(0)] * ncols
        vec[free] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -rows[i][free]
        basis.append(vec)
    return basis


def _normalize_exact(vec: list[Fraction]) -> list[Fraction]:
    denom_lcm = 1
    for x in vec:
        if x != 0:
            denom_lcm = denom_lcm * x.denominator // math.gcd(
                denom_lcm, x.denominator)
    ints = [int(x * denom_lcm) for x in vec]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    lead = next((x for x in ints if x != 0), 1)
    if lead < 0:
        ints = [-x for x in ints]
    return [Fraction(x) for x in ints]


# ---------------------------------------------------------------------------
# Numerical growth cross-check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthStats:
    """Absolute partial sums of one coefficient combination."""

    abs_sum: float
    half_sum: float
    ratio: float
    truncation: int

    def verdict(self, threshold: float = DEFAULT_GROWTH_THRESHOLD) -> str:
        """Classify the growth evidence; authority stays with declared
        structure, so anything short of a clear signal is inconclusive."""
        if self.ratio >= _RATIO_DIVERGENT:
            return "divergent"
        if (self.ratio <= _RATIO_BOUNDED
                and self.abs_sum < threshold * math.log(self.truncation)):
            return "member"
        return "inconclusive"


def growth_statistics(fam: FamilyVector, coeffs: Sequence[float],
                      truncation: int = DEFAULT_TRUNCATION) -> GrowthStats:
    """Sum |<coeffs, a_m>| over m < truncation, recording the halfway value."""
    if truncation < 4:
        raise InputError("truncation too small for a meaningful growth test")
    dim = len(coeffs)
    half = truncation // 2
    totals = [0.0, 0.0]
    for part, (lo, hi) in enumerate(((0, half), (half, truncation))):
        acc = 0.0
        for start in range(lo, hi, _CHUNK):
            ms = np.arange(start, min(start + _CHUNK, hi), dtype=np.int64)
            combo = np.zeros(ms.shape, dtype=np.float64)
            for c, spec in zip(coeffs, fam.specs[:dim]):
                if c != 0.0:
                    combo += c * term_array(spec, ms)
            acc += float(np.abs(combo).sum())
        totals[part] = acc
    half_sum = totals[0]
    abs_sum = totals[0] + totals[1]
    if half_sum > 0.0:
        ratio = abs_sum / half_sum
    else:
        ratio = 1.0 if abs_sum == 0.0 else math.inf
    return GrowthStats(abs_sum, half_sum, ratio, truncation)


# ---------------------------------------------------------------------------
# Kernel and complement
# ---------------------------------------------------------------------------

def k_space_basis(fam: FamilyVector, dim: int | None = None,
                  truncation: int = DEFAULT_TRUNCATION,
                  threshold: float = DEFAULT_GROWTH_THRESHOLD
                  ) -> list[CoefficientVector]:
    """Exact basis of the absolutely-convergent-combination space.

    Derived from declared spec structure (pattern cancellation); the
    numerical growth test runs as a cross-check on every basis vector and
    every coordinate direction, and a conclusive conflict raises
    DisagreementError.
    """
    dim = len(fam) if dim is None else dim
    if not 1 <= dim <= len(fam):
        raise InputError(f"dimension {dim} outside the family")
    _, matrix = _pattern_matrix(fam, dim)
    basis_exact = [_normalize_exact(v) for v in _nullspace(matrix, dim)]
    basis = [CoefficientVector.from_dense([float(x) for x in vec])
             for vec in basis_exact]
    for cv in basis:
        stats = growth_statistics(fam, cv.as_array(dim), truncation)
        if stats.verdict(threshold) == "divergent":
            raise DisagreementError(
                f"declared kernel vector {cv.values} tests divergent "
                f"(abs sum {stats.abs_sum:.6g} at N={truncation})")
    span_rows = basis_exact
    for i in range(dim):
        unit = [Fraction(1 if j == i else 0) for j in range(dim)]
        declared_member = _in_exact_span(span_rows, unit, dim)
        stats = growth_statistics(
            fam, [1.0 if j == i else 0.0 for j in range(dim)], truncation)
        verdict = stats.verdict(threshold)
        if declared_member and verdict == "divergent":
            raise DisagreementError(
                f"series {i} is declared absolutely convergent but its "
                f"absolute sums grow past the threshold")
        if not declared_member and verdict == "member":
            raise DisagreementError(
                f"series {i} is declared conditionally convergent but its "
                f"absolute sums test bounded")
    return basis


def _in_exact_span(rows: list[list[Fraction]], vec: list[Fraction],
                   ncols: int) -> bool:
    work = [row[:] for row in rows]
    pivots: list[tuple[int, int]] = []
    r = 0
    for c in range(ncols):
        pivot_row = next((i for i in range(r, len(work)) if work[i][c] != 0),
                         None)
        if pivot_row is None:
            continue
        work[r], work[pivot_row] = work[pivot_row], work[r]
        pv = work[r][c]
        work[r] = [x / pv for x in work[r]]
        for i in range(len(work)):
            if i != r and work[i][c] != 0:
                f = work[i][c]
                work[i] = [a - f * b for a, b in zip(work[i], work[r])]
        pivots.append((r, c))
        r += 1
        if r == len(work):
            break
    target = vec[:]
    for row_at, c in pivots:
        if target[c] != 0:
            f = target[c]
            target = [t - f * x for t, x in zip(target, work[row_at])]
    return all(t == 0 for t in target)


def r_space(k_basis: Sequence[CoefficientVector], dim: int) -> list[np.ndarray]:
    """Orthonormal basis of the complement of the kernel directions."""
    if dim < 1:
        raise InputError("dimension must be at least 1")
    if not k_basis:
        return [np.eye(dim)[i] for i in range(dim)]
    rows = np.vstack([cv.as_array(dim) for cv in k_basis])
    _, svals, vh = np.linalg.svd(rows)
    cutoff = svals[0] * max(rows.shape) * np.finfo(np.float64).eps
    rank = int((svals > cutoff).sum())
    return [vh[i].copy() for i in range(rank, dim)]


def membership_check(xbar: Sequence[float],
                     k_basis: Sequence[CoefficientVector],
                     tol: float) -> bool:
    """True when the deviation vector is orthogonal to every kernel
    generator within ``tol``."""
    if tol < 0.0:
        raise InputError("tol must be nonnegative")
    return all(abs(cv.dot(xbar)) <= tol for cv in k_basis)


# ---------------------------------------------------------------------------
# Dependency decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DependencyStructure:
    """Independent core plus exact relations governing the dependents.

    For each dependent index j, ``coefficients[j]`` lists pairs (k, w)
    over earlier independent indices such that ``sum_k w * a^k + a^j`` is
    absolutely convergent with sum ``abs_sums[j]``.
    """

    independent_set: tuple[int, ...]
    coefficients: Mapping[int, tuple[tuple[int, float], ...]]
    abs_sums: Mapping[int, float]

    def dependents(self) -> tuple[int, ...]:
        return tuple(sorted(self.coefficients))

    def relation_spec(self, fam: FamilyVector, j: int) -> SeriesSpec:
        """The absolutely convergent combination witnessing dependent j."""
        if j not in self.coefficients:
            raise InputError(f"series {j} is not a dependent")
        terms = [(w, fam[k]) for k, w in self.coefficients[j]]
        terms.append((1.0, fam[j]))
        return composite(terms)


def dependency_decompose(fam: FamilyVector,
                         precision: float = 1e-9) -> DependencyStructure:
    """Split a family into independent generators and dependent series.

    Works greedily in spec order: a series whose pattern components are
    spanned by earlier independents becomes a dependent, with exact
    rational relation coefficients and a numerically summed constant.
    """
    independents: list[int] = []
    lead_keys: list[tuple[int, float]] = []
    rref_rows: list[dict[tuple[int, float], Fraction]] = []
    transforms: list[dict[int, Fraction]] = []
    coefficients: dict[int, tuple[tuple[int, float], ...]] = {}
    abs_sums: dict[int, float] = {}
    for j, spec in enumerate(fam.specs):
        residue = _pattern_vector(spec)
        combo: dict[int, Fraction] = {j: Fraction(1)}
        for r, lk in enumerate(lead_keys):
            f = residue.get(lk)
            if not f:
                continue
            for key, val in rref_rows[r].items():
                new = residue.get(key, Fraction(0)) - f * val
                if new:
                    residue[key] = new
                else:
                    residue.pop(key, None)
            for k, val in transforms[r].items():
                new = combo.get(k, Fraction(0)) - f * val
                if new:
                    combo[k] = new
                else:
                    combo.pop(k, None)
        if residue:
            lk = min(residue)
            pv = residue[lk]
            lead_keys.append(lk)
            rref_rows.append({k: v / pv for k, v in residue.items()})
            transforms.append({k: v / pv for k, v in combo.items()})
            independents.append(j)
        else:
            relation = tuple(sorted((k, float(v)) for k, v in combo.items()
                                    if k != j and v != 0))
            coefficients[j] = relation
            witness = composite([(w, fam[k]) for k, w in relation]
                                + [(1.0, fam[j])])
            abs_sums[j] = classical_sum(witness, precision)
    return DependencyStructure(tuple(independents), coefficients, abs_sums)


def predicted_dependent_limit(struct: DependencyStructure,
                              achieved: Mapping[int, float], j: int) -> float:
    """Rearranged-sum limit of dependent series j implied by the limits the
    independent core achieved: ``c_j - sum_k w_k * achieved[k]``."""
    if j not in struct.coefficients:
        raise InputError(f"series {j} is not a dependent")
    total = struct.abs_sums[j]
    for k, w in struct.coefficients[j]:
        if k not in achieved:
            raise InputError(f"no achieved sum supplied for independent {k}")
        total -= w * achieved[k]
    return total


# ---------------------------------------------------------------------------
# The attainable-sum description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineSumRange:
    """Classical-sum offset plus the deviation directions reachable by
    rearrangement."""

    offset: tuple[float, ...]
    subspace_basis: tuple[tuple[float, ...], ...]


def sum_range(fam: FamilyVector, dim: int | None = None,
              precision: float = 1e-6,
              truncation: int = DEFAULT_TRUNCATION,
              threshold: float = DEFAULT_GROWTH_THRESHOLD) -> AffineSumRange:
    """Build the attainable-sum description for the leading dimensions."""
    dim = len(fam) if dim is None else dim
    offset = tuple(classical_sum(spec, precision) for spec in fam.specs[:dim])
    basis = r_space(k_space_basis(fam, dim, truncation, threshold), dim)
    return AffineSumRange(offset, tuple(tuple(float(x) for x in row)
                                        for row in basis))
