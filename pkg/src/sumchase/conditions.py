"""Descending chains of certified rearrangement states.

A *condition* bundles a finite injection prefix, the number of leading
series it controls, and an exact rational tolerance: the prefix's partial
sums sit within ``eps`` of the targets on the active dimensions, and
every unused index has a term vector smaller than ``eps / C_d``.  One
condition refines another when it extends the injection, activates at
least as many dimensions, keeps every appended block prefix (measured in
the older dimensions) under ``2 * eps``, and shrinks the tolerance fast
enough that ``2 * delta + ||block sum|| <= 2 * eps``.

The extension step adds one dimension per round: pick a reduced tolerance
``eta`` with certified room over the unused-term ceiling, pick a rational
``delta`` below ``1/n``, append every uncovered index below a cutoff
chosen from the tail envelope, draw extra indices lane by lane to land
the sums within ``delta``, and order the whole appended block so its
running prefixes stay small.  The chase steers every target coordinate
from the first round, not just the certified ones: once the small
indices are spent, moving a coordinate by a fixed amount with harmonic
tail terms costs exponentially many indices, so deferring a coordinate
until its round would blow the budget.  Every claim is rechecked with
measured quantities before the new condition is accepted; if a check
fails, ``delta`` is halved and the attempt repeats.

All tolerances are exact fractions.  Floating-point norms enter
comparisons only through a fixed slack margin, so a certified inequality
survives recomputation by an independent checker.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .confinement import ConstantSchedule, DEFAULT_SCHEDULE, order_with_threshold
from .errors import (BudgetExhaustedError, InfeasibleEtaError, InputError,
                     PreconditionError, SearchError)
from .rearrange import (PrefixPlan, complementary_boosts, lane_modulus,
                        order_block_lanes, plan_from_injection,
                        select_block_indices, widest_lane_dim)
from .series import FamilyVector, partial_sum_vector, tail_sup_bound, vector_terms

#: Margin subtracted from every strict certified comparison, absorbing
#: float rounding in the measured quantity.
SLACK = 1e-9

_SLACK_FRACTION = Fraction(1, 10 ** 9)

#: Unused indices below ``len(injection) + TAIL_CUTOFF_SPAN`` are checked
#: term by term; beyond that the monotone tail envelope takes over.
TAIL_CUTOFF_SPAN = 10_000

_ETA_STEPS = 20
_DELTA_RETRIES = 5
_TOPUP_ROUNDS = 6

def certified_lt(value: float, bound: Fraction) -> bool:
    """Strict float-below-rational comparison with the slack margin."""
    return Fraction(value) + _SLACK_FRACTION < bound


def certified_le(value: float, extra: Fraction, bound: Fraction) -> bool:
    """Certified ``extra + value <= bound``.

    A value that is exactly zero is an empty sum, which needs no slack;
    that keeps reflexive comparisons exact.
    """
    if value == 0.0:
        return extra <= bound
    return extra + Fraction(value) + _SLACK_FRACTION <= bound


@dataclass(frozen=True)
class Condition:
    """Injection prefix, active dimension count, exact tolerance."""

    injection: tuple[int, ...]
    dim: int
    eps: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "injection",
                           tuple(int(i) for i in self.injection))
        if not isinstance(self.dim, int) or self.dim < 1:
            raise InputError(f"dimension must be a positive int, got {self.dim!r}")
        eps = Fraction(self.eps)
        if eps <= 0:
            raise InputError(f"tolerance must be positive, got {eps}")
        object.__setattr__(self, "eps", eps)


@dataclass(frozen=True)
class BulletCheck:
    """One checked inequality with the quantities that went into it."""

    name: str
    ok: bool
    value: float
    bound: float
    note: str = ""


@dataclass(frozen=True)
class ConditionReport:
    ok: bool
    bullets: tuple[BulletCheck, ...]

    def bullet(self, name: str) -> BulletCheck:
        for b in self.bullets:
            if b.name == name:
                return b
        raise KeyError(name)

    def first_failure(self) -> str | None:
        for b in self.bullets:
            if not b.ok:
                return b.name
        return None


LinkReport = ConditionReport


def _targets_tuple(targets) -> tuple[float, ...]:
    out = tuple(float(x) for x in targets)
    if not out:
        raise InputError("at least one target is required")
    for x in out:
        if not math.isfinite(x):
            raise InputError(f"targets must be finite, got {x!r}")
    return out


def is_condition(cond: Condition, fam: FamilyVector, targets,
                 cutoff: int | None = None,
                 schedule: ConstantSchedule | None = None) -> ConditionReport:
    """Check the five defining requirements, returning per-bullet evidence.

    The unused-term requirement is discharged exactly below ``cutoff``
    (default ``len(injection) + 10_000``) and by the tail envelope above.
    """
    schedule = schedule or DEFAULT_SCHEDULE
    targets_t = _targets_tuple(targets)
    bullets: list[BulletCheck] = []
    inj = cond.injection
    dup_free = len(set(inj)) == len(inj) and all(i >= 0 for i in inj)
    bullets.append(BulletCheck("injective", dup_free,
                               float(len(inj) - len(set(inj))), 0.0))
    dims_ok = 1 <= cond.dim <= len(fam) and cond.dim <= len(targets_t)
    bullets.append(BulletCheck("dimension", dims_ok, float(cond.dim),
                               float(min(len(fam), len(targets_t)))))
    bullets.append(BulletCheck("tolerance", cond.eps > 0,
                               float(cond.eps), 0.0))
    if not (dup_free and dims_ok):
        return ConditionReport(False, tuple(bullets))
    d = cond.dim
    sums = partial_sum_vector(fam, inj, d)
    deviation = float(np.linalg.norm(sums - np.array(targets_t[:d])))
    bullets.append(BulletCheck("deviation", certified_lt(deviation, cond.eps),
                               deviation, float(cond.eps)))
    cutoff = len(inj) + TAIL_CUTOFF_SPAN if cutoff is None else int(cutoff)
    ceiling = cond.eps / Fraction(schedule.value_at(d))
    unused = np.setdiff1d(np.arange(cutoff, dtype=np.int64),
                          np.array(inj, dtype=np.int64))
    if unused.size:
        below_max = float(np.linalg.norm(vector_terms(fam, unused, d),
                                         axis=1).max())
    else:
        below_max = 0.0
    beyond = tail_sup_bound(fam, cutoff, d)
    tail_ok = (certified_lt(below_max, ceiling) if below_max > 0.0 else True) \
        and certified_lt(beyond, ceiling)
    bullets.append(BulletCheck("tail-small", tail_ok,
                               max(below_max, beyond), float(ceiling),
                               note=f"cutoff={cutoff}"))
    return ConditionReport(all(b.ok for b in bullets), tuple(bullets))


def leq(lower: Condition, upper: Condition, fam: FamilyVector,
        schedule: ConstantSchedule | None = None) -> LinkReport:
    """Check the four refinement requirements of ``lower <= upper``.

    Both arguments are assumed to be valid conditions; validity itself is
    is_condition's job.
    """
    del schedule  # the refinement bullets do not involve the constants
    bullets: list[BulletCheck] = []
    k = len(upper.injection)
    extends = lower.injection[:k] == upper.injection
    bullets.append(BulletCheck("extends", extends, float(len(lower.injection)),
                               float(k)))
    bullets.append(BulletCheck("dimensions", lower.dim >= upper.dim,
                               float(lower.dim), float(upper.dim)))
    d = upper.dim
    two_eps = 2 * upper.eps
    block = lower.injection[k:] if extends else ()
    if block:
        running = np.cumsum(vector_terms(fam, block, d), axis=0)
        prefix_max = float(np.linalg.norm(running, axis=1).max())
        block_norm = float(np.linalg.norm(
            partial_sum_vector(fam, block, d)))
    else:
        prefix_max = 0.0
        block_norm = 0.0
    bullets.append(BulletCheck(
        "block-prefixes",
        certified_lt(prefix_max, two_eps) if prefix_max > 0.0 else 0 < two_eps,
        prefix_max, float(two_eps)))
    bullets.append(BulletCheck(
        "tolerance-step", certified_le(block_norm, 2 * lower.eps, two_eps),
        block_norm, float(two_eps),
        note=f"two_delta={2 * lower.eps}"))
    return ConditionReport(all(b.ok for b in bullets), tuple(bullets))


# ---------------------------------------------------------------------------
# The extension step
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtendDetail:
    """An accepted extension plus the evidence that justified it."""

    condition: Condition
    link: LinkReport
    check: ConditionReport
    appended: int


def _smallest_cover_cutoff(fam: FamilyVector, dim: int, bound: float,
                           floor: int) -> int:
    lo, hi = 0, 1
    while tail_sup_bound(fam, hi, dim) >= bound:
        hi *= 2
        if hi > 1 << 40:
            raise SearchError("tail envelope never drops below the cover bound")
    while lo < hi:
        mid = (lo + hi) // 2
        if tail_sup_bound(fam, mid, dim) < bound:
            hi = mid
        else:
            lo = mid + 1
    return max(lo, floor)


def _block_offset(fam: FamilyVector, injection: Sequence[int], start: int,
                  dim: int) -> np.ndarray:
    block = list(injection[start:])
    if not block:
        return np.zeros(dim)
    return np.cumsum(vector_terms(fam, block, dim), axis=0)[-1]


def _ordered_append(fam: FamilyVector, picks: list[int], dim_old: int,
                    offset, threshold: float, relaxed: float,
                    modulus: int | None) -> list[int] | None:
    """Order a block so its running sums in the old dimensions stay small.

    The residue-class pass handles blocks of any size; the quadratic
    confinement search is a fallback for small blocks without lane
    structure.  None means no ordering stayed under even the relaxed
    threshold, which sends the caller back with a smaller tolerance.
    """
    if not picks:
        return []
    if modulus is not None:
        for limit in (threshold, relaxed):
            ordered = order_block_lanes(fam, picks, dim_old, limit,
                                        offset=offset, modulus=modulus)
            if ordered is not None:
                return ordered
    if len(picks) <= 4096:
        vectors = vector_terms(fam, picks, dim_old)
        try:
            order = order_with_threshold(
                vectors, relaxed, fix_first=False,
                offset=np.asarray(offset, dtype=np.float64))
            return [picks[i] for i in order]
        except SearchError:
            return None
    return None


def _attempt_extension(cond: Condition, n: int, fam: FamilyVector,
                       targets: tuple[float, ...], eta: Fraction,
                       delta: Fraction, schedule: ConstantSchedule,
                       rng: random.Random, budget: int, full_dim: int,
                       modulus: int | None
                       ) -> tuple[ExtendDetail | None, int]:
    d = cond.dim
    new_dim = d + 1
    goal_full = np.array(targets[:full_dim])
    cover_bound = float(delta / Fraction(schedule.value_at(new_dim))) / 4.0
    m_cov = _smallest_cover_cutoff(fam, new_dim, cover_bound, floor=n)
    used = set(cond.injection)
    cover = [m for m in range(m_cov) if m not in used]
    used.update(cover)
    base_full = partial_sum_vector(fam, cond.injection, full_dim)
    cover_full = partial_sum_vector(fam, cover, full_dim)
    residual = goal_full - base_full - cover_full
    # Steering every coordinate now keeps the next round's residual at
    # tolerance scale; solving it later, when only far tail indices remain
    # unused, would take exponentially many terms.
    lane_tol = float(delta) / (4.0 * (2 ** full_dim) * math.sqrt(full_dim))
    picks = select_block_indices(fam, full_dim, residual, used, lane_tol,
                                 scan_cap=math.inf)
    block = cover + picks
    appended = len(block)
    if appended > budget:
        raise BudgetExhaustedError(
            f"extension block of {appended} indices exceeds the remaining "
            f"budget of {budget}",
            best=plan_from_injection(fam, cond.injection, targets[:d], d))
    block_sum_old = partial_sum_vector(fam, block, d)
    threshold = float(eta) + float(np.linalg.norm(block_sum_old)) + 1e-6
    relaxed = float(2 * cond.eps) * 0.98
    ordered = _ordered_append(fam, block, d, [0.0] * d, threshold, relaxed,
                              modulus)
    if ordered is None:
        return None, appended
    injection = list(cond.injection) + ordered
    boosts: dict[tuple[int, ...], float] = {}
    for _ in range(_TOPUP_ROUNDS):
        sums_full = partial_sum_vector(fam, injection, full_dim)
        dev_full = float(np.linalg.norm(goal_full - sums_full))
        dev_active = float(np.linalg.norm(
            np.array(targets[:new_dim]) - sums_full[:new_dim]))
        if certified_lt(dev_active, delta) and dev_full < float(delta):
            break
        residual = goal_full - sums_full
        extra = select_block_indices(fam, full_dim, residual, used,
                                     lane_tol / 2.0, boosts=boosts,
                                     scan_cap=math.inf)
        boosts = {}
        if not extra:
            scale = max(dev_full, float(delta)) * 0.5
            boosts = complementary_boosts(fam, full_dim, scale, rng)
            continue
        appended += len(extra)
        if appended > budget:
            raise BudgetExhaustedError(
                "top-up blocks exceeded the remaining budget",
                best=plan_from_injection(fam, injection, targets[:new_dim],
                                         new_dim))
        offset = _block_offset(fam, injection, len(cond.injection), d)
        ordered = _ordered_append(fam, extra, d, offset, threshold, relaxed,
                                  modulus)
        if ordered is None:
            return None, appended
        injection.extend(ordered)
    candidate = Condition(tuple(injection), new_dim, delta)
    check = is_condition(candidate, fam, targets, schedule=schedule)
    link = leq(candidate, cond, fam)
    if check.ok and link.ok:
        return ExtendDetail(candidate, link, check, appended), appended
    return None, appended


def extend_detail(cond: Condition, n: int, fam: FamilyVector, targets,
                  seed: int = 0, budget: int = 10 ** 7,
                  schedule: ConstantSchedule | None = None) -> ExtendDetail:
    """One refinement round: activate dimension ``d + 1``, cover all indices
    below ``n``, and certify a tolerance below ``1/n``.

    Returns the new condition together with the refinement evidence.
    """
    schedule = schedule or DEFAULT_SCHEDULE
    targets_t = _targets_tuple(targets)
    if n < 0:
        raise InputError("coverage bound must be nonnegative")
    new_dim = cond.dim + 1
    if len(fam) < new_dim or len(targets_t) < new_dim:
        raise InputError(
            f"extension to dimension {new_dim} needs that many series and targets")
    base_check = is_condition(cond, fam, targets_t, schedule=schedule)
    if not base_check.ok:
        raise PreconditionError(
            f"input condition fails its {base_check.first_failure()} check")
    tail_ceiling = base_check.bullet("tail-small").value
    deviation = base_check.bullet("deviation").value
    c_d = Fraction(schedule.value_at(cond.dim))
    eta: Fraction | None = None
    for t in range(1, _ETA_STEPS + 1):
        candidate = cond.eps * (1 - Fraction(1, 2 ** t))
        if Fraction(tail_ceiling) + _SLACK_FRACTION < candidate / c_d:
            eta = candidate
            break
    if eta is None:
        raise InfeasibleEtaError(
            "no reduced tolerance clears the unused-term ceiling; the input "
            "condition's tail margin is too thin")
    choices = [(cond.eps - eta) / 2, (cond.eps - Fraction(deviation)) / 4]
    if n >= 1:
        choices.append(Fraction(1, n))
    delta = min(choices)
    # round down to a short dyadic so certificates stay readable
    grid = Fraction(1, 1 << 40)
    floored = (delta // grid) * grid
    if floored > 0:
        delta = floored
    scope = widest_lane_dim(fam, new_dim, min(len(fam), len(targets_t)))
    full_dim = scope if scope is not None else new_dim
    modulus = lane_modulus(fam, full_dim)
    rng = random.Random(seed)
    budget_left = budget
    for _ in range(_DELTA_RETRIES):
        detail, spent = _attempt_extension(cond, n, fam, targets_t, eta,
                                           delta, schedule, rng, budget_left,
                                           full_dim, modulus)
        budget_left -= spent
        if detail is not None:
            return detail
        delta = delta / 2
    raise SearchError(
        f"extension from dimension {cond.dim} failed {_DELTA_RETRIES} "
        f"tolerance reductions in a row")


def extend(cond: Condition, n: int, fam: FamilyVector, targets,
           seed: int = 0, budget: int = 10 ** 7,
           schedule: ConstantSchedule | None = None) -> Condition:
    """Refine ``cond`` by one dimension; see extend_detail for the evidence."""
    return extend_detail(cond, n, fam, targets, seed, budget, schedule).condition


# ---------------------------------------------------------------------------
# The chain driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateChain:
    """A descending sequence of conditions with per-step evidence."""

    conditions: tuple[Condition, ...]
    checks: tuple[LinkReport, ...]
    condition_reports: tuple[ConditionReport, ...]

    def final(self) -> Condition:
        return self.conditions[-1]


def initial_condition(fam: FamilyVector, targets,
                      schedule: ConstantSchedule | None = None) -> Condition:
    """The empty-prefix starting state: a tolerance comfortably above both
    the first target and the first series' largest term."""
    schedule = schedule or DEFAULT_SCHEDULE
    targets_t = _targets_tuple(targets)
    c1 = schedule.value_at(1)
    base = max(abs(targets_t[0]), c1 * tail_sup_bound(fam, 0, 1))
    eps0 = Fraction(math.ceil(base * 1024), 1024) + 1
    return Condition((), 1, eps0)


def run(fam: FamilyVector, targets, rounds: int, seed: int = 0,
        budget: int = 10 ** 7,
        schedule: ConstantSchedule | None = None
        ) -> tuple[CertificateChain, PrefixPlan]:
    """Drive ``rounds`` extension steps from the initial condition.

    After round ``r`` the active dimension is ``r + 1``, the tolerance is
    below ``1/r``, and indices ``0..r-1`` appear in both the domain and
    the range of the injection.  Returns the full chain and the final
    injection as a plan.
    """
    schedule = schedule or DEFAULT_SCHEDULE
    targets_t = _targets_tuple(targets)
    if rounds < 0:
        raise InputError("rounds must be nonnegative")
    if len(fam) < rounds + 1 or len(targets_t) < rounds + 1:
        raise InputError(
            f"{rounds} rounds need {rounds + 1} series and targets")
    cond = initial_condition(fam, targets_t, schedule)
    report = is_condition(cond, fam, targets_t, schedule=schedule)
    if not report.ok:
        raise SearchError(
            f"initial condition fails its {report.first_failure()} check")
    conditions = [cond]
    links: list[LinkReport] = []
    reports = [report]
    rng = random.Random(seed)
    budget_left = budget
    for r in range(1, rounds + 1):
        round_seed = rng.getrandbits(32)
        try:
            detail = extend_detail(conditions[-1], r, fam, targets_t,
                                   seed=round_seed, budget=budget_left,
                                   schedule=schedule)
        except BudgetExhaustedError as exc:
            partial = CertificateChain(tuple(conditions), tuple(links),
                                       tuple(reports))
            raise BudgetExhaustedError(
                f"round {r}: {exc}", best=partial) from exc
        budget_left -= detail.appended
        conditions.append(detail.condition)
        links.append(detail.link)
        reports.append(detail.check)
    chain = CertificateChain(tuple(conditions), tuple(links), tuple(reports))
    final = chain.final()
    plan = plan_from_injection(fam, final.injection, targets_t[:final.dim],
                               final.dim)
    return chain, plan
