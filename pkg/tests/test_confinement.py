"""Prefix-norm confinement: schedules, orderings, and the oracle."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sumchase import (ConstantSchedule, InputError, SearchError,
                      SizeLimitError, brute_force_confine, confine_with_anchor,
                      confine_zero_sum, order_with_threshold, prefix_norms,
                      published_constant)


def zero_sum_instance(seed: int, n: int, d: int) -> np.ndarray:
    """Seeded vectors with zero total and norms at most one."""
    rng = np.random.default_rng(seed)
    vs = rng.uniform(-1.0, 1.0, size=(n - 1, d))
    vs = np.vstack([vs, -vs.sum(axis=0)])
    top = np.linalg.norm(vs, axis=1).max()
    if top > 1.0:
        vs /= top
    return vs


def test_default_schedule_is_dimension_plus_one():
    for d in range(1, 6):
        assert published_constant(d) == d + 1


def test_schedule_overrides_and_never_decreases():
    sched = ConstantSchedule((5.0, 5.5))
    assert sched.value_at(1) == 5.0
    assert sched.value_at(2) == 5.5
    # past the overrides the default applies, clamped upward
    assert sched.value_at(3) == max(4.0, 5.5)
    assert sched.value_at(9) == 10.0


def test_schedule_rejects_nonsense():
    with pytest.raises(InputError):
        ConstantSchedule((0.0,))
    with pytest.raises(InputError):
        published_constant(0)


def test_opposite_pair_is_confined_trivially():
    vs = np.array([[0.8, 0.0], [-0.8, 0.0]])
    result = confine_zero_sum(vs)
    assert sorted(result.permutation) == [0, 1]
    assert result.permutation[0] == 0
    assert result.max_prefix_norm == pytest.approx(0.8)
    # the reported ceiling is the constant plus the precondition tolerance
    assert result.bound_used == pytest.approx(published_constant(2), abs=1e-8)
    assert result.max_prefix_norm <= result.bound_used


def test_prefix_norms_recomputes_running_sums():
    vs = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    norms = prefix_norms(vs, (0, 1, 2))
    assert norms[0] == 1.0
    assert norms[1] == pytest.approx(np.sqrt(2.0))
    assert norms[2] == pytest.approx(0.0)


def test_zero_sum_preconditions_are_enforced():
    with pytest.raises(InputError):
        confine_zero_sum(np.array([[2.0], [-2.0]]))  # norms above one
    with pytest.raises(InputError):
        confine_zero_sum(np.array([[0.5], [0.1]]))  # sum not zero


def test_confinement_beats_bound_on_seeded_batch():
    for seed in range(40):
        n = 2 + seed % 7
        d = 1 + seed % 3
        vs = zero_sum_instance(seed, n, d)
        result = confine_zero_sum(vs)
        assert result.max_prefix_norm <= published_constant(d) + 1e-12
        recomputed = prefix_norms(vs, result.permutation).max()
        assert result.max_prefix_norm == pytest.approx(recomputed, abs=1e-12)


def test_greedy_never_beats_the_exhaustive_oracle():
    for seed in (1, 2, 3, 11, 12):
        vs = zero_sum_instance(seed, 6, 2)
        result = confine_zero_sum(vs)
        _, optimum = brute_force_confine(vs)
        assert result.max_prefix_norm >= optimum - 1e-12


def test_exhaustive_oracle_refuses_large_inputs():
    vs = zero_sum_instance(0, 12, 2)
    with pytest.raises(SizeLimitError):
        brute_force_confine(vs)


def test_anchored_prefixes_stay_under_the_shifted_bound():
    rng = np.random.default_rng(42)
    for rho in (0.5, 1.0, 2.0):
        raw = rng.uniform(-1.0, 1.0, size=(7, 2))
        b = raw.sum(axis=0)
        scale = min(rho / np.linalg.norm(raw, axis=1).max(),
                    rho / max(np.linalg.norm(b), 1e-9)) * 0.99
        vs = raw * scale
        b = b * scale
        result = confine_with_anchor(vs, b, rho)
        bound = rho * published_constant(2) + np.linalg.norm(b) + 1e-9
        assert prefix_norms(vs, result.permutation).max() <= bound


def test_anchored_rejects_oversized_vectors():
    vs = np.array([[1.5, 0.0], [0.0, 0.1]])
    with pytest.raises(InputError):
        confine_with_anchor(vs, vs.sum(axis=0), rho=1.0)


def test_order_with_threshold_reports_impossible_bounds():
    vs = np.array([[1.0], [1.0], [-2.0]])
    with pytest.raises(SearchError):
        order_with_threshold(vs, 0.5)


def test_order_with_threshold_respects_offset():
    vs = np.array([[0.5], [-0.5]])
    order = order_with_threshold(vs, 0.6, fix_first=False,
                                 offset=np.array([0.4]))
    # starting at +0.4, the negative step must come first
    assert order[0] == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6),
       st.integers(min_value=2, max_value=8),
       st.integers(min_value=1, max_value=3))
def test_confinement_contract_on_random_instances(seed, n, d):
    vs = zero_sum_instance(seed, n, d)
    result = confine_zero_sum(vs)
    assert sorted(result.permutation) == list(range(n))
    assert result.permutation[0] == 0
    assert result.max_prefix_norm <= published_constant(d) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_custom_schedule_is_honored_when_loose(seed):
    vs = zero_sum_instance(seed, 5, 2)
    sched = ConstantSchedule((6.0, 6.0))
    result = confine_zero_sum(vs, schedule=sched)
    assert result.bound_used == pytest.approx(6.0, abs=1e-8)
    assert result.max_prefix_norm <= result.bound_used
