"""Finitely described real series: terms, partial sums, tail bounds.

Four spec kinds cover everything the rest of the package consumes:

* ``rademacher_harmonic(level i, exponent p)``:
  ``a_m = (-1)**floor(m / 2**i) / (m + 1)**p`` with ``p`` in ``(0, 1]``.
  The sign is constant on dyadic blocks of length ``2**i`` and distinct
  levels give jointly independent sign patterns.
* ``power_alternating(exponent p)``: ``a_m = (-1)**m / (m + 1)**p``.
* ``abs_power(exponent q, scale)``: ``a_m = scale / (m + 1)**q`` with
  ``q > 1`` (absolutely convergent), optionally carrying a dyadic sign
  pattern of its own.
* ``composite``: a finite linear combination of other specs plus an
  optional absolutely convergent perturbation.

Specs are immutable, hashable and safe to share.  Every spec reduces to a
canonical finite set of ``(level, exponent)`` sign-pattern components plus
absolutely convergent leftovers; that reduction drives convergence
classification, tail bounds and classical summation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import BudgetExhaustedError, InputError

KIND_RADEMACHER = "rademacher_harmonic"
KIND_ALTERNATING = "power_alternating"
KIND_ABS_POWER = "abs_power"
KIND_COMPOSITE = "composite"

_KINDS = (KIND_RADEMACHER, KIND_ALTERNATING, KIND_ABS_POWER, KIND_COMPOSITE)

#: Default cap on term evaluations inside classical_sum.
DEFAULT_TERM_BUDGET = 50_000_000

_CHUNK = 1 << 18


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SeriesSpec:
    """Immutable description of one real series.

    Use the factory helpers (:func:`rademacher_harmonic`,
    :func:`power_alternating`, :func:`abs_power`, :func:`composite`)
    rather than the raw constructor; the constructor validates whichever
    fields its ``kind`` requires and rejects the rest.
    """

    kind: str
    level: int | None = None
    exponent: float | None = None
    scale: float = 1.0
    sign_level: int | None = None
    combo: tuple[tuple[float, "SeriesSpec"], ...] = ()
    perturbation: Union["SeriesSpec", None] = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise InputError(f"unknown series kind {self.kind!r}")
        if self.kind == KIND_RADEMACHER:
            self._check_level_field()
            self._check_conditional_exponent()
            self._forbid(sign_level=self.sign_level, combo=self.combo,
                         perturbation=self.perturbation)
        elif self.kind == KIND_ALTERNATING:
            if self.level is not None:
                raise InputError("power_alternating takes no level")
            self._check_conditional_exponent()
            self._forbid(sign_level=self.sign_level, combo=self.combo,
                         perturbation=self.perturbation)
        elif self.kind == KIND_ABS_POWER:
            if self.level is not None:
                raise InputError("abs_power uses sign_level, not level")
            if self.exponent is None or not float(self.exponent) > 1.0:
                raise InputError(
                    "abs_power exponent must exceed 1 for absolute convergence, "
                    f"got {self.exponent!r}")
            _require_finite("scale", self.scale)
            if self.sign_level is not None and (
                    not isinstance(self.sign_level, int) or self.sign_level < 0):
                raise InputError(f"sign_level must be a nonnegative int, got "
                                 f"{self.sign_level!r}")
            self._forbid(combo=self.combo, perturbation=self.perturbation)
        else:  # composite
            if not self.combo and self.perturbation is None:
                raise InputError("composite needs terms or a perturbation")
            for entry in self.combo:
                if len(entry) != 2:
                    raise InputError("composite terms are (coefficient, spec) pairs")
                coeff, ref = entry
                _require_finite("coefficient", coeff)
                if not isinstance(ref, SeriesSpec):
                    raise InputError("composite term reference must be a SeriesSpec")
            if self.perturbation is not None:
                if not isinstance(self.perturbation, SeriesSpec):
                    raise InputError("perturbation must be a SeriesSpec")
                if reduce_spec(self.perturbation).patterns:
                    raise InputError(
                        "perturbation must be absolutely convergent")

    def _check_level_field(self) -> None:
        if not isinstance(self.level, int) or self.level < 0:
            raise InputError(f"level must be a nonnegative int, got {self.level!r}")

    def _check_conditional_exponent(self) -> None:
        if self.exponent is None:
            raise InputError("exponent is required")
        p = float(self.exponent)
        if not (0.0 < p <= 1.0):
            raise InputError(
                f"exponent must lie in (0, 1] for conditional convergence, got {p!r}")

    def _forbid(self, **fields: object) -> None:
        for name, value in fields.items():
            empty = () if name == "combo" else None
            if value != empty:
                raise InputError(f"{self.kind} does not accept {name}")


def rademacher_harmonic(level: int, exponent: float = 1.0) -> SeriesSpec:
    """Sign pattern ``(-1)**floor(m / 2**level)`` on magnitudes ``1/(m+1)**p``."""
    return SeriesSpec(KIND_RADEMACHER, level=level, exponent=float(exponent))


def power_alternating(exponent: float = 1.0) -> SeriesSpec:
    """Plain alternating series ``(-1)**m / (m+1)**p``."""
    return SeriesSpec(KIND_ALTERNATING, exponent=float(exponent))


def abs_power(exponent: float, scale: float = 1.0,
              sign_level: int | None = None) -> SeriesSpec:
    """Absolutely convergent power series ``scale / (m+1)**q``, ``q > 1``."""
    return SeriesSpec(KIND_ABS_POWER, exponent=float(exponent),
                      scale=float(scale), sign_level=sign_level)


def composite(terms: Sequence[tuple[float, SeriesSpec]],
              perturbation: SeriesSpec | None = None) -> SeriesSpec:
    """Finite linear combination of specs plus an optional absolutely
    convergent perturbation."""
    combo = tuple((float(c), ref) for c, ref in terms)
    return SeriesSpec(KIND_COMPOSITE, combo=combo, perturbation=perturbation)


# ---------------------------------------------------------------------------
# Term evaluation
# ---------------------------------------------------------------------------

def term(spec: SeriesSpec, m: int) -> float:
    """Value of the series at index ``m`` (indices start at 0)."""
    if m < 0:
        raise InputError(f"index must be nonnegative, got {m}")
    if spec.kind == KIND_RADEMACHER:
        sign = -1.0 if (m >> spec.level) & 1 else 1.0
        return sign * (m + 1.0) ** -spec.exponent
    if spec.kind == KIND_ALTERNATING:
        sign = -1.0 if m & 1 else 1.0
        return sign * (m + 1.0) ** -spec.exponent
    if spec.kind == KIND_ABS_POWER:
        value = spec.scale * (m + 1.0) ** -spec.exponent
        if spec.sign_level is not None and (m >> spec.sign_level) & 1:
            value = -value
        return value
    total = 0.0
    for coeff, ref in spec.combo:
        total += coeff * term(ref, m)
    if spec.perturbation is not None:
        total += term(spec.perturbation, m)
    return total


def term_array(spec: SeriesSpec, ms: np.ndarray) -> np.ndarray:
    """Vectorized :func:`term`.

    Matches the scalar path bit for bit when the exponent is an integer;
    fractional exponents may differ by one rounding step because numpy
    and libm round ``pow`` differently.
    """
    ms = np.asarray(ms, dtype=np.int64)
    if ms.size and int(ms.min()) < 0:
        raise InputError("indices must be nonnegative")
    if spec.kind == KIND_RADEMACHER:
        signs = 1.0 - 2.0 * ((ms >> spec.level) & 1)
        return signs * (ms + 1.0) ** -spec.exponent
    if spec.kind == KIND_ALTERNATING:
        signs = 1.0 - 2.0 * (ms & 1)
        return signs * (ms + 1.0) ** -spec.exponent
    if spec.kind == KIND_ABS_POWER:
        values = spec.scale * (ms + 1.0) ** -spec.exponent
        if spec.sign_level is not None:
            values = values * (1.0 - 2.0 * ((ms >> spec.sign_level) & 1))
        return values
    total = np.zeros(ms.shape, dtype=np.float64)
    for coeff, ref in spec.combo:
        total += coeff * term_array(ref, ms)
    if spec.perturbation is not None:
        total += term_array(spec.perturbation, ms)
    return total


@dataclass(frozen=True)
class FamilyVector:
    """Ordered finite family of series, addressed by coordinate."""

    specs: tuple[SeriesSpec, ...]

    def __post_init__(self) -> None:
        if not self.specs:
            raise InputError("family must contain at least one series")
        for spec in self.specs:
            if not isinstance(spec, SeriesSpec):
                raise InputError("family entries must be SeriesSpec values")

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[SeriesSpec]:
        return iter(self.specs)

    def __getitem__(self, i: int) -> SeriesSpec:
        return self.specs[i]

    def prefix(self, d: int) -> "FamilyVector":
        if not 1 <= d <= len(self.specs):
            raise InputError(f"cannot take the first {d} of {len(self.specs)} series")
        return FamilyVector(self.specs[:d])


def family(*specs: SeriesSpec) -> FamilyVector:
    return FamilyVector(tuple(specs))


def vector_term(fam: FamilyVector, m: int, d: int | None = None) -> np.ndarray:
    """The d-dimensional term vector ``(a^0_m, ..., a^{d-1}_m)``."""
    d = len(fam) if d is None else d
    return np.array([term(spec, m) for spec in fam.specs[:d]], dtype=np.float64)


def vector_terms(fam: FamilyVector, ms: Sequence[int],
                 d: int | None = None) -> np.ndarray:
    """Rows of term vectors for each index in ``ms`` (shape ``len(ms) x d``)."""
    d = len(fam) if d is None else d
    ms = np.asarray(ms, dtype=np.int64)
    if ms.size == 0:
        return np.zeros((0, d), dtype=np.float64)
    return np.column_stack([term_array(spec, ms) for spec in fam.specs[:d]])


# ---------------------------------------------------------------------------
# Partial sums
# ---------------------------------------------------------------------------

def _check_indices(indices: Sequence[int]) -> list[int]:
    idx = [int(i) for i in indices]
    if any(i < 0 for i in idx):
        raise InputError("indices must be nonnegative")
    if len(set(idx)) != len(idx):
        raise InputError("duplicate index in partial sum")
    return idx


def partial_sum(spec: SeriesSpec, indices: Sequence[int]) -> float:
    """Exactly rounded sum of the terms at the given distinct indices.

    Uses compensated summation, so the value does not depend on the order
    in which indices are listed.
    """
    idx = _check_indices(indices)
    return math.fsum(term(spec, m) for m in idx)


def partial_sum_vector(fam: FamilyVector, indices: Sequence[int],
                       d: int | None = None) -> np.ndarray:
    """Coordinatewise :func:`partial_sum` over the first ``d`` series."""
    d = len(fam) if d is None else d
    idx = _check_indices(indices)
    return np.array([partial_sum(spec, idx) for spec in fam.specs[:d]])


# ---------------------------------------------------------------------------
# Tail bounds
# ---------------------------------------------------------------------------

def _tail_spec(spec: SeriesSpec, m: int) -> float:
    if spec.kind in (KIND_RADEMACHER, KIND_ALTERNATING):
        return (m + 1.0) ** -spec.exponent
    if spec.kind == KIND_ABS_POWER:
        return abs(spec.scale) * (m + 1.0) ** -spec.exponent
    bound = 0.0
    for coeff, ref in spec.combo:
        bound += abs(coeff) * _tail_spec(ref, m)
    if spec.perturbation is not None:
        bound += _tail_spec(spec.perturbation, m)
    return bound


def tail_sup_bound(obj: SeriesSpec | FamilyVector, m: int,
                   d: int | None = None) -> float:
    """Upper bound on every term (norm) at indices ``>= m``.

    Nonincreasing in ``m`` and tending to zero.  For a family the bound
    covers the Euclidean norm of the d-dimensional term vector.
    """
    if m < 0:
        raise InputError("tail start index must be nonnegative")
    if isinstance(obj, SeriesSpec):
        return _tail_spec(obj, m)
    d = len(obj) if d is None else d
    return math.sqrt(math.fsum(_tail_spec(spec, m) ** 2
                               for spec in obj.specs[:d]))


@dataclass(frozen=True)
class TailBound:
    """Reusable tail-bound callable for one spec or family slice."""

    source: SeriesSpec | FamilyVector
    dim: int | None = None

    def bound_at(self, m: int) -> float:
        return tail_sup_bound(self.source, m, self.dim)


# ---------------------------------------------------------------------------
# Canonical reduction to sign-pattern components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatternReduction:
    """Canonical form: signed harmonic components plus absolute leftovers.

    ``patterns`` maps each ``(level, exponent)`` sign-pattern component to
    its accumulated coefficient; ``absolute`` lists ``(coefficient, spec)``
    pairs of absolutely convergent parts in encounter order.
    """

    patterns: tuple[tuple[int, float, float], ...]
    absolute: tuple[tuple[float, SeriesSpec], ...]

    def pattern_coefficient(self, level: int, exponent: float) -> float:
        for lv, p, c in self.patterns:
            if lv == level and p == exponent:
                return c
        return 0.0


def _reduce(spec: SeriesSpec, scale: float,
            patterns: dict[tuple[int, float], float],
            absolute: list[tuple[float, SeriesSpec]]) -> None:
    if spec.kind == KIND_RADEMACHER:
        key = (spec.level, spec.exponent)
        patterns[key] = patterns.get(key, 0.0) + scale
    elif spec.kind == KIND_ALTERNATING:
        key = (0, spec.exponent)
        patterns[key] = patterns.get(key, 0.0) + scale
    elif spec.kind == KIND_ABS_POWER:
        absolute.append((scale, spec))
    else:
        for coeff, ref in spec.combo:
            _reduce(ref, scale * coeff, patterns, absolute)
        if spec.perturbation is not None:
            _reduce(spec.perturbation, scale, patterns, absolute)


@lru_cache(maxsize=None)
def reduce_spec(spec: SeriesSpec) -> PatternReduction:
    """Reduce a spec to its canonical sign-pattern components."""
    patterns: dict[tuple[int, float], float] = {}
    absolute: list[tuple[float, SeriesSpec]] = []
    _reduce(spec, 1.0, patterns, absolute)
    kept = tuple(sorted((lv, p, c) for (lv, p), c in patterns.items() if c != 0.0))
    return PatternReduction(kept, tuple(absolute))


def is_conditionally_convergent(spec: SeriesSpec) -> bool:
    """True when a nonzero sign-pattern component survives reduction."""
    return bool(reduce_spec(spec).patterns)


# ---------------------------------------------------------------------------
# Classical summation
# ---------------------------------------------------------------------------

class _BudgetTracker:
    __slots__ = ("remaining",)

    def __init__(self, budget: int):
        self.remaining = int(budget)

    def spend(self, n: int) -> None:
        self.remaining -= n
        if self.remaining < 0:
            raise BudgetExhaustedError(
                "classical summation exceeded its term budget before "
                "reaching the requested precision")


def _block_magnitudes(level: int, exponent: float, first: int,
                      count: int) -> np.ndarray:
    """Magnitudes of ``count`` consecutive sign blocks starting at block
    ``first``: each is the sum of ``2**level`` plain power terms."""
    block_len = 1 << level
    offsets = np.arange(block_len, dtype=np.float64)
    js = np.arange(first, first + count, dtype=np.float64)
    return ((js[:, None] * block_len + offsets[None, :] + 1.0)
            ** -exponent).sum(axis=1)


# How many blocks to sum directly before handing the rest to the Euler
# transform.  Large enough that the transformed tail is far inside its
# fast-convergence regime, small enough to keep term budgets low.
_DIRECT_BLOCK_CAP = 4096


def _euler_block_tail(level: int, exponent: float, start: int, tol: float,
                      tracker: _BudgetTracker) -> float:
    """Euler-transformed value of ``sum_{j>=start} (-1)**j * B_j``.

    Block magnitudes are completely monotone in the block number, so the
    forward differences ``D_k = (-delta)**k B`` at ``start`` are positive
    and decrease in k.  The transform rewrites the tail as
    ``sum_k D_k / 2**(k+1)``; cutting that series after the K-th term
    leaves at most ``D_{K+1} / 2**(K+1)``, which the last added term
    already dominates, hence the stopping rule.
    """
    block_len = 1 << level
    lead = -1.0 if start & 1 else 1.0
    diagonal: list[float] = []
    total = 0.0
    k = 0
    while True:
        tracker.spend(block_len)
        value = float(_block_magnitudes(level, exponent, start + k, 1)[0])
        updated = [value]
        for entry in diagonal:
            updated.append(entry - updated[-1])
        diagonal = updated
        contribution = diagonal[k] / 2.0 ** (k + 1)
        total += contribution
        if contribution <= tol:
            return lead * total
        k += 1


def _alternating_block_sum(level: int, exponent: float, tol: float,
                           tracker: _BudgetTracker) -> float:
    """Sum a sign-pattern harmonic series by grouping full sign blocks.

    Block magnitudes decrease, so the block series alternates and plain
    truncation errs by at most the first omitted block.  That rule alone
    would need about ``tol**(-1/exponent)`` blocks, so after a bounded
    direct stretch the remaining tail is closed with the Euler transform
    instead.
    """
    block_len = 1 << level
    chunk_blocks = max(1, _CHUNK // block_len)
    total = 0.0
    j = 0
    while j < _DIRECT_BLOCK_CAP:
        count = min(chunk_blocks, _DIRECT_BLOCK_CAP - j)
        tracker.spend(count * block_len)
        magnitudes = _block_magnitudes(level, exponent, j, count)
        signs = 1.0 - 2.0 * (np.arange(j, j + count) & 1)
        below = np.nonzero(magnitudes <= tol)[0]
        if below.size:
            stop = int(below[0])
            return total + float(np.dot(signs[:stop], magnitudes[:stop]))
        total += float(np.dot(signs, magnitudes))
        j += count
    return total + _euler_block_tail(level, exponent, j, tol, tracker)


def _abs_power_partial(spec: SeriesSpec, tol: float,
                       tracker: _BudgetTracker) -> float:
    """Sum an abs_power spec to within ``tol``.

    Signed specs alternate in blocks and reuse the block summation.  For
    unsigned ones, direct summation alone would need ``tol**(1/(1-q))``
    terms, so the tail past the cutoff is replaced by the expansion
    ``a**(1-q)/(q-1) + a**-q/2 + q*a**(-q-1)/12`` whose error stays
    below ``q(q+1)(q+2) * a**(-q-3) / 720``; that bound picks the cutoff.
    """
    q = spec.exponent
    scale_mag = abs(spec.scale)
    if scale_mag == 0.0:
        return 0.0
    if spec.sign_level is not None:
        block = _alternating_block_sum(spec.sign_level, q, tol / scale_mag,
                                       tracker)
        return spec.scale * block
    error_coeff = scale_mag * q * (q + 1.0) * (q + 2.0) / 720.0
    count = max(16, int(math.ceil((error_coeff / tol) ** (1.0 / (q + 3.0)))))
    tracker.spend(count)
    total = 0.0
    for start in range(0, count, _CHUNK):
        ms = np.arange(start, min(start + _CHUNK, count), dtype=np.int64)
        total += float(term_array(spec, ms).sum())
    a = float(count + 1)
    tail = (a ** (1.0 - q) / (q - 1.0) + 0.5 * a ** -q
            + q / 12.0 * a ** (-q - 1.0))
    return total + spec.scale * tail


def classical_sum(spec: SeriesSpec, precision: float,
                  term_budget: int = DEFAULT_TERM_BUDGET) -> float:
    """Value of the convergent series to within ``precision``.

    The spec is reduced to sign-pattern components plus absolute parts;
    the precision budget is split evenly across them, each component is
    summed with its own truncation-error control, and the pieces are
    recombined linearly.
    """
    if not precision > 0.0:
        raise InputError(f"precision must be positive, got {precision!r}")
    reduction = reduce_spec(spec)
    parts = len(reduction.patterns) + len(reduction.absolute)
    if parts == 0:
        return 0.0
    share = precision / parts
    tracker = _BudgetTracker(term_budget)
    total = 0.0
    for level, exponent, coeff in reduction.patterns:
        total += coeff * _alternating_block_sum(level, exponent,
                                                share / abs(coeff), tracker)
    for coeff, part in reduction.absolute:
        if coeff == 0.0:
            continue
        total += coeff * _abs_power_partial(part, share / abs(coeff), tracker)
    return total


# ---------------------------------------------------------------------------
# Divergence witnesses
# ---------------------------------------------------------------------------

def _signed_part_sum(spec: SeriesSpec, n: int, want_positive: bool) -> float:
    total = 0.0
    for start in range(0, n, _CHUNK):
        ms = np.arange(start, min(start + _CHUNK, n), dtype=np.int64)
        values = term_array(spec, ms)
        if want_positive:
            total += float(values[values > 0.0].sum())
        else:
            total += float(-values[values < 0.0].sum())
    return total


def positive_part_sum(spec: SeriesSpec, n: int) -> float:
    """Sum of the positive terms among the first ``n``."""
    return _signed_part_sum(spec, n, True)


def negative_part_sum(spec: SeriesSpec, n: int) -> float:
    """Sum of the magnitudes of the negative terms among the first ``n``."""
    return _signed_part_sum(spec, n, False)
