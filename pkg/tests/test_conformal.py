"""Scores, proxies, thresholds, prediction sets, and FCP calibration."""

import numpy as np
import pytest

from rankcp import (
    EmptyPredictionSet,
    InfeasibleLevel,
    InsufficientSample,
    InvalidInput,
    ProxyScores,
    RankOutOfRange,
    RankingProblem,
    Threshold,
    calibrate,
    fcp_calibrated_k,
    fcp_calibration,
    naive_envelope,
    predict_set_ra,
    predict_set_va,
    predict_sets,
    proxy_score_ra,
    proxy_score_va,
    proxy_scores,
    score_ra,
    score_va,
    scores_at,
    select_k,
    simulate_sorted_ranks,
    fit_quantile_envelope,
)


def test_score_ra_examples():
    assert score_ra(7, 10) == 3
    assert score_ra(5, 5) == 0
    assert score_ra(1, 100) == 99


def test_score_va_examples():
    assert score_va(3, 0.4, [0.1, 0.4, 0.9]) == pytest.approx(0.5)
    values = [0.3, 0.7, 0.1]
    assert score_va(2, 0.3, values) == 0.0  # own rank, own value
    with pytest.raises(RankOutOfRange):
        score_va(4, 0.4, values)


def test_score_va_matches_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        values = rng.normal(size=int(rng.integers(2, 30)))
        r = int(rng.integers(1, values.size + 1))
        v = float(rng.normal())
        assert score_va(r, v, values) == pytest.approx(
            abs(sorted(values)[r - 1] - v)
        )


def test_proxy_score_ra_examples():
    assert proxy_score_ra(3, 9, 4) == 5  # max(1, 5)
    assert proxy_score_ra(6, 6, 2) == score_ra(6, 2)
    with pytest.raises(InvalidInput):
        proxy_score_ra(5, 3, 1)


def test_proxy_score_ra_matches_grid():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        total = int(rng.integers(2, 200))
        lo = int(rng.integers(1, total + 1))
        hi = int(rng.integers(lo, total + 1))
        pred = int(rng.integers(1, total + 1))
        brute = max(score_ra(r, pred) for r in range(lo, hi + 1))
        assert proxy_score_ra(lo, hi, pred) == brute


def test_proxy_score_va_examples():
    values = [0.1, 0.25, 0.45, 0.5, 0.65, 0.8]
    assert proxy_score_va(2, 5, 0.5, values) == pytest.approx(0.25)
    assert proxy_score_va(3, 3, 0.5, values) == score_va(3, 0.5, values)


def test_proxy_score_va_matches_grid():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        values = rng.normal(size=int(rng.integers(2, 60)))
        lo = int(rng.integers(1, values.size + 1))
        hi = int(rng.integers(lo, values.size + 1))
        v = float(rng.normal())
        brute = max(score_va(r, v, values) for r in range(lo, hi + 1))
        assert proxy_score_va(lo, hi, v, values) == brute


def test_select_k_examples():
    assert select_k(0.1, 0.02, 99) == 92
    assert select_k(0.1, 0.0, 9) == 9
    with pytest.raises(InfeasibleLevel):
        select_k(0.05, 0.02, 10)  # ceil(0.97 * 11) = 11 > 10
    with pytest.raises(InvalidInput):
        select_k(0.1, 0.2, 100)  # delta must stay below alpha


def test_calibrate_examples():
    env = naive_envelope(3, 2)
    proxy = ProxyScores(scores=np.array([3.0, 1.0, 2.0]), mode="RA", envelope=env)
    assert calibrate(proxy, 2).value == 2.0
    assert calibrate(proxy, 3).value == 3.0
    with pytest.raises(RankOutOfRange):
        calibrate(proxy, 4)
    rng = np.random.default_rng(3)
    scores = rng.normal(size=17)
    proxy = ProxyScores(scores=scores, mode="RA", envelope=naive_envelope(17, 2))
    for k in (1, 5, 17):
        assert calibrate(proxy, k).value == sorted(scores)[k - 1]


def test_predict_set_ra_examples():
    thr = Threshold(k=1, value=2.5)
    assert (lambda s: (s.lo, s.hi))(predict_set_ra(10, thr, 100)) == (8, 12)
    zero = Threshold(k=1, value=0.0)
    assert (lambda s: (s.lo, s.hi))(predict_set_ra(10, zero, 100)) == (10, 10)
    wide = Threshold(k=1, value=5.0)
    assert (lambda s: (s.lo, s.hi))(predict_set_ra(2, wide, 100)) == (1, 7)


def test_predict_set_va_examples():
    values = [0.1, 0.25, 0.45, 0.5, 0.65, 0.8]
    s = predict_set_va(0.5, Threshold(k=1, value=0.2), values)
    assert (s.lo, s.hi) == (3, 5)
    # brute-force membership over all six ranks
    member = [r for r in range(1, 7) if score_va(r, 0.5, values) <= 0.2]
    assert list(range(s.lo, s.hi + 1)) == member

    sat = predict_set_va(0.5, Threshold(k=1, value=10.0), values)
    assert (sat.lo, sat.hi) == (1, 6)

    own = predict_set_va(0.45, Threshold(k=1, value=0.0), values)
    assert (own.lo, own.hi) == (3, 3)

    with pytest.raises(EmptyPredictionSet):
        predict_set_va(5.0, Threshold(k=1, value=0.1), values)


def _random_problem(rng, mode, total_max=50, with_truth=True):
    total = int(rng.integers(4, total_max + 1))
    n = int(rng.integers(2, total - 1))
    m = total - n
    truth = rng.normal(size=total)
    if mode == "RA":
        outputs = np.argsort(np.argsort(truth + rng.normal(size=total))) + 1
    else:
        outputs = truth + 0.5 * rng.normal(size=total)
    calib_ranks = np.argsort(np.argsort(truth[:n])) + 1
    return RankingProblem(
        n=n, m=m, calib_ranks=calib_ranks, ranker_mode=mode,
        ranker_outputs=outputs, truth=truth if with_truth else None,
    )


def test_sets_equal_sublevel_sets():
    rng = np.random.default_rng(4)
    for _ in range(300):
        mode = "RA" if rng.random() < 0.5 else "VA"
        problem = _random_problem(rng, mode)
        env = naive_envelope(problem.n, problem.m)
        proxy = proxy_scores(problem, env)
        k = int(rng.integers(1, problem.n + 1))
        thr = calibrate(proxy, k)
        sets = predict_sets(problem, thr)
        ordered = np.sort(problem.ranker_outputs)
        for j, s in enumerate(sets):
            out = problem.test_outputs[j]
            if mode == "RA":
                member = [
                    r for r in range(1, problem.total + 1)
                    if score_ra(r, int(out)) <= thr.value
                ]
            else:
                member = [
                    r for r in range(1, problem.total + 1)
                    if abs(ordered[r - 1] - out) <= thr.value
                ]
            assert list(range(s.lo, s.hi + 1)) == member


def test_va_reduces_to_ra():
    # feeding the predicted ranks as values makes the two scores coincide
    rng = np.random.default_rng(5)
    total = 30
    all_values = np.arange(1, total + 1, dtype=float)
    for _ in range(200):
        r = int(rng.integers(1, total + 1))
        pred = int(rng.integers(1, total + 1))
        assert score_va(r, float(pred), all_values) == score_ra(r, pred)
    for _ in range(50):
        pred = int(rng.integers(1, total + 1))
        thr = Threshold(k=1, value=float(np.round(rng.uniform(0, 10), 1)))
        a = predict_set_ra(pred, thr, total)
        b = predict_set_va(float(pred), thr, all_values)
        assert (a.lo, a.hi) == (b.lo, b.hi)


def test_proxy_dominates_true_scores():
    rng = np.random.default_rng(6)
    for _ in range(100):
        mode = "RA" if rng.random() < 0.5 else "VA"
        problem = _random_problem(rng, mode)
        pooled = np.argsort(np.argsort(problem.truth)) + 1
        true_scores = scores_at(problem, pooled[: problem.n])
        env = naive_envelope(problem.n, problem.m)  # always covers
        proxy = proxy_scores(problem, env)
        assert np.all(proxy.scores >= true_scores - 1e-12)
        for k in range(1, problem.n + 1):
            assert (
                np.partition(proxy.scores, k - 1)[k - 1]
                >= np.partition(true_scores, k - 1)[k - 1] - 1e-12
            )


def test_proxy_dominance_under_fitted_envelope_coverage():
    rng = np.random.default_rng(7)
    sims = simulate_sorted_ranks(10, 15, 2000, seed=17)
    env = fit_quantile_envelope(sims, 0.1)
    hits = 0
    for _ in range(200):
        problem = _random_problem(rng, "RA", total_max=25)
        if (problem.n, problem.m) != (10, 15):
            continue
        pooled = np.argsort(np.argsort(problem.truth)) + 1
        lo, hi = env.bounds_for_ranks(problem.calib_ranks)
        covered = np.all((pooled[:10] >= lo) & (pooled[:10] <= hi))
        if not covered:
            continue
        hits += 1
        true_scores = scores_at(problem, pooled[:10])
        assert np.all(proxy_scores(problem, env).scores >= true_scores - 1e-12)
    assert hits > 0


def test_fcp_calibration_two_item_enumeration():
    # n = m = 1: the only p-value is 1/2 or 1, each with probability 1/2,
    # so the 0.25-quantile settles at 1/2 and k = 1.
    cal = fcp_calibration(0.0, 0.25, 0.1, n=1, m=1, K=4000, seed=1)
    assert cal.t_hat == pytest.approx(0.5)
    assert cal.k == 1


def test_fcp_calibration_vs_marginal_k():
    n = m = 200
    k_fcp = fcp_calibrated_k(0.1, 0.25, 0.02, n, m, K=10_000, seed=9)
    k_marginal = int(np.ceil((1 - 0.1) * (n + 1)))
    assert k_fcp >= k_marginal
    # stricter exceedance budgets can only raise the index
    k_strict = fcp_calibrated_k(0.1, 0.05, 0.02, n, m, K=10_000, seed=9)
    assert k_strict >= k_fcp


def test_fcp_calibration_determinism_and_errors():
    args = dict(alpha_bar=0.1, beta_bar=0.25, delta=0.02, n=50, m=80, K=2000)
    a = fcp_calibration(seed=3, **args)
    b = fcp_calibration(seed=3, **args)
    assert (a.k, a.t_hat) == (b.k, b.t_hat)
    c = fcp_calibration(seed=3, workers=4, **args)
    assert (a.k, a.t_hat) == (c.k, c.t_hat)
    with pytest.raises(InsufficientSample):
        fcp_calibration(0.1, 0.25, 0.02, 10, 10, K=3, seed=0)
    with pytest.raises(InvalidInput):
        fcp_calibration(0.1, 1.5, 0.02, 10, 10, K=100, seed=0)
