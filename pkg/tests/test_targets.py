"""Alternative targets: calibration sets, test-only ranks, top-k candidates."""

import numpy as np
import pytest

from rankcp import (
    DimensionMismatch,
    Envelope,
    InvalidInput,
    RankSet,
    calibration_sets,
    fit_quantile_envelope,
    mc_guarantee_slack,
    naive_envelope,
    ranks_within,
    simulate_sorted_ranks,
    test_only_set as to_test_only_set,
    topk_candidates,
)


def test_calibration_sets_naive():
    env = naive_envelope(4, 3)
    sets = calibration_sets(env, [2, 4, 1, 3])
    assert [(s.lo, s.hi) for s in sets] == [(2, 5), (4, 7), (1, 4), (3, 6)]
    assert all(s.kind == "full" for s in sets)


def test_calibration_sets_degenerate_m_zero():
    env = naive_envelope(3, 0)
    sets = calibration_sets(env, [3, 1, 2])
    assert [(s.lo, s.hi) for s in sets] == [(3, 3), (1, 1), (2, 2)]


def test_calibration_sets_dimension_check():
    with pytest.raises(DimensionMismatch):
        calibration_sets(naive_envelope(4, 3), [1, 2, 3])


def test_calibration_sets_simultaneous_coverage():
    n, m, delta = 30, 60, 0.1
    env = fit_quantile_envelope(simulate_sorted_ranks(n, m, 5000, seed=31), delta)
    rng = np.random.default_rng(32)
    hits = 0
    reps = 2000
    for _ in range(reps):
        truth = rng.normal(size=n + m)
        pooled = ranks_within(truth)
        sets = calibration_sets(env, ranks_within(truth[:n]))
        hits += all(
            s.contains(int(pooled[i])) for i, s in enumerate(sets)
        )
    freq = hits / reps
    slack = mc_guarantee_slack(n, env.mc_meta.K)
    se = np.sqrt(delta * (1 - delta) / reps)
    assert freq >= 1 - delta - slack - 3 * se


def test_test_only_set_hand_example():
    env = Envelope(
        n=3, m=4, delta=0.1, kind="quantile",
        lower=np.array([1, 2, 4]), upper=np.array([2, 4, 6]),
    )
    full = RankSet(item="t1", lo=2, hi=5, kind="full")
    out = to_test_only_set(full, env)
    # N+ = #{upper <= 2} = 1, N- = #{lower <= 5} = 3 -> raw [-1, 4] -> [1, 4]
    assert (out.lo, out.hi, out.kind) == (1, 4, "test_only")


def test_test_only_set_saturation():
    env = naive_envelope(5, 7)
    full = RankSet(item="t1", lo=1, hi=12, kind="full")
    out = to_test_only_set(full, env)
    assert (out.lo, out.hi) == (1, 7)


def test_test_only_set_requires_full_kind():
    env = naive_envelope(3, 4)
    with pytest.raises(InvalidInput):
        to_test_only_set(RankSet(item="x", lo=1, hi=2, kind="test_only"), env)


def test_test_only_preserves_coverage_exhaustively():
    # whenever the envelope covers and the full set covers the pooled rank,
    # the derived set covers the rank among test items
    rng = np.random.default_rng(33)
    checked = 0
    for _ in range(400):
        total = int(rng.integers(4, 21))
        n = int(rng.integers(2, total))
        m = total - n
        env = fit_quantile_envelope(
            simulate_sorted_ranks(n, m, 500, seed=int(rng.integers(10**6))), 0.2
        )
        truth = rng.normal(size=total)
        pooled = ranks_within(truth)
        calib_ranks = ranks_within(truth[:n])
        lo, hi = env.bounds_for_ranks(calib_ranks)
        if not np.all((pooled[:n] >= lo) & (pooled[:n] <= hi)):
            continue
        test_ranks = ranks_within(truth[n:])
        for j in range(m):
            r_ct = int(pooled[n + j])
            a = max(1, r_ct - int(rng.integers(0, 4)))
            b = min(total, r_ct + int(rng.integers(0, 4)))
            full = RankSet(item=f"t{j}", lo=a, hi=b, kind="full")
            derived = to_test_only_set(full, env)
            assert derived.contains(int(test_ranks[j]))
            checked += 1
    assert checked > 100


def test_topk_candidates():
    sets = [
        RankSet(item="a", lo=1, hi=3),
        RankSet(item="b", lo=4, hi=9),
        RankSet(item="c", lo=2, hi=2),
        RankSet(item="d", lo=7, hi=12),
    ]
    assert topk_candidates(sets, 3) == {"a", "c"}
    assert topk_candidates(sets, 0) == set()
    # saturated sets select everything
    wide = [RankSet(item=i, lo=1, hi=12) for i in "abcd"]
    assert topk_candidates(wide, 1) == set("abcd")
    # disjoint singletons select exactly k_top items
    singles = [RankSet(item=str(i), lo=i, hi=i) for i in range(1, 9)]
    assert topk_candidates(singles, 5) == {"1", "2", "3", "4", "5"}


def test_topk_monotone_nested():
    rng = np.random.default_rng(34)
    sets = []
    for i in range(40):
        lo = int(rng.integers(1, 50))
        sets.append(RankSet(item=f"t{i}", lo=lo, hi=int(rng.integers(lo, 60))))
    previous = set()
    for k_top in range(0, 61):
        current = topk_candidates(sets, k_top)
        assert previous <= current
        previous = current


def test_topk_rejects_test_only_sets():
    with pytest.raises(InvalidInput):
        topk_candidates([RankSet(item="x", lo=1, hi=2, kind="test_only")], 2)
