import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pica.core import z_normalize
from pica.sampler import (
    CurriculumConfig,
    allocate_counts,
    quality_gate,
    sample_curriculum,
    sample_uniform,
    schedule_alpha,
    target_ratios,
)


def test_schedule_points():
    assert schedule_alpha(0.0) == 0.0
    assert schedule_alpha(1.0) == pytest.approx(0.6667, abs=1e-4)
    assert schedule_alpha(0.5) == pytest.approx(0.3333, abs=1e-4)
    with pytest.raises(ValueError):
        schedule_alpha(1.5)


def test_target_ratio_examples():
    np.testing.assert_allclose(target_ratios((0.33, 0.33, 0.33), 0.0), (1 / 3, 1 / 3, 1 / 3), atol=1e-4)
    np.testing.assert_allclose(target_ratios((0.33, 0.33, 0.33), 2 / 3), (0.0, 0.2487, 0.7513), atol=1e-3)
    assert target_ratios((1.0, 0.0, 0.0), 1.0)[2] == pytest.approx(1.0)


def test_config_validation():
    CurriculumConfig()  # default two-decimal ratios are accepted
    for bad in (dict(base_ratios=(0.5, 0.5, 0.5)), dict(p_q=1.0), dict(delta=-1), dict(K=0), dict(M_s=0),
                dict(within_tier="best"), dict(base_ratios=(0.5, 0.5))):
        with pytest.raises(ValueError):
            CurriculumConfig(**bad)


def test_full_coverage_two_per_tier():
    h = np.arange(6, dtype=float)
    cfg = CurriculumConfig(base_ratios=(1 / 3, 1 / 3, 1 / 3), M_s=6, p_q=0.0)
    out = sample_curriculum(h, np.zeros(6), 0.0, cfg, seed=0)
    assert sorted(out.selected.tolist()) == list(range(6))
    assert out.per_tier_counts == (2, 2, 2)


def test_end_of_schedule_target_counts():
    h = np.arange(6, dtype=float)
    cfg = CurriculumConfig(base_ratios=(1 / 3, 1 / 3, 1 / 3), M_s=6, p_q=0.0)
    out = sample_curriculum(h, np.zeros(6), 1.0, cfg, seed=0)
    assert out.target_counts == (0, 1, 4)
    # the hard tier only has 2 members, so the remainder spills to medium
    assert out.per_tier_counts == (0, 2, 2)


def test_unpenalized_members_always_chosen_first():
    # 12 regions -> 4 per tier; in the hard tier two members have the lowest q
    h = np.arange(12, dtype=float)
    q = np.ones(12)
    q[[8, 9]] = -5.0
    cfg = CurriculumConfig(base_ratios=(0.0, 0.0, 1.0), M_s=2, p_q=0.5, delta=100.0, schedule=lambda r: 0.0)
    for seed in range(200):
        out = sample_curriculum(h, q, 0.0, cfg, seed=seed)
        assert sorted(out.selected.tolist()) == [10, 11]
        assert out.penalized[[8, 9]].all()


def test_allocate_counts_remainder_to_hardest():
    assert allocate_counts(10, (0.34, 0.33, 0.33), (10, 10, 10)) == [3, 3, 4]
    assert allocate_counts(10, (0.34, 0.33, 0.33), (10, 10, 3)) == [3, 4, 3]


def test_only_k3_supported():
    with pytest.raises(ValueError):
        sample_curriculum(np.arange(8.0), np.zeros(8), 0.0, CurriculumConfig(K=2), seed=0)


def test_length_mismatch():
    with pytest.raises(ValueError):
        sample_curriculum(np.arange(8.0), np.zeros(7), 0.0, CurriculumConfig(), seed=0)


def test_uniform_sampler():
    sel = sample_uniform(50, 20, seed=1)
    assert len(set(sel.tolist())) == 20 and sel.max() < 50
    assert np.array_equal(sel, sample_uniform(50, 20, seed=1))
    assert len(sample_uniform(5, 20, seed=1)) == 5


instances = st.tuples(
    st.integers(3, 80),  # n
    st.integers(0, 2**31 - 1),  # data seed
    st.floats(0.0, 1.0),  # rho
    st.integers(1, 64),  # M_s
    st.sampled_from([0.0, 0.05, 0.2, 0.5]),  # p_q
    st.sampled_from(["random", "q_ranked"]),
    st.booleans(),  # discrete ties
)


def _draw(n, data_seed, ties):
    r = np.random.default_rng(data_seed)
    if ties:
        return r.integers(0, 3, n).astype(float), r.integers(0, 3, n).astype(float)
    return r.standard_normal(n), r.standard_normal(n)


@settings(max_examples=1000, deadline=None)
@given(instances)
def test_sampler_properties(inst):
    n, data_seed, rho, M_s, p_q, within, ties = inst
    h, q = _draw(n, data_seed, ties)
    cfg = CurriculumConfig(M_s=M_s, p_q=p_q, within_tier=within)
    out = sample_curriculum(h, q, rho, cfg, seed=data_seed)
    sel = out.selected

    # budget and uniqueness; a tier smaller than its count contributes its whole pool
    pools = [int(np.sum(out.tiers == t)) for t in (3, 2, 1)]
    counts = allocate_counts(M_s, out.ratios_used, pools)
    assert len(sel) == sum(min(c, p) for c, p in zip(counts, pools)) <= M_s
    if all(p >= c for c, p in zip(out.target_counts, pools)):
        assert len(sel) == min(M_s, n)
    assert len(set(sel.tolist())) == len(sel)
    assert sum(out.per_tier_counts) == len(sel)
    assert abs(sum(out.ratios_used) - 1.0) < 1e-12

    # determinism
    again = sample_curriculum(h, q, rho, cfg, seed=data_seed)
    assert np.array_equal(sel, again.selected)

    # tier ordering: tier 1 holds the highest normalized h (up to edge ties)
    h_hat = z_normalize(h)
    for t in (1, 2):
        upper, lower = h_hat[out.tiers == t], h_hat[out.tiers == t + 1]
        if len(upper) and len(lower):
            assert upper.min() >= lower.max()

    # quality gate: within each tier, penalized members are selected only after all unpenalized ones
    q_hat = z_normalize(q)
    for t in (1, 2, 3):
        members = np.flatnonzero(out.tiers == t)
        chosen = np.intersect1d(members, sel)
        flagged = members[out.penalized[members]]
        if len(np.intersect1d(flagged, chosen)):
            assert set(members[~out.penalized[members]].tolist()) <= set(chosen.tolist())
        if len(flagged):
            cut = np.quantile(q_hat[members], p_q)
            assert np.all(q_hat[flagged] < cut)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ratio_schedule_monotone(r1, r2):
    lo, hi = sorted((r1, r2))
    e0, _, h0 = target_ratios((0.33, 0.33, 0.33), schedule_alpha(lo))
    e1, _, h1 = target_ratios((0.33, 0.33, 0.33), schedule_alpha(hi))
    assert e1 <= e0 + 1e-12 and h1 >= h0 - 1e-12


def test_quality_gate_disabled_when_p_q_zero():
    assert not quality_gate(np.arange(9.0), np.repeat([1, 2, 3], 3), 3, 0.0).any()
