"""Conformity scores, proxy scores, thresholds, and rank prediction sets.

The conformity score of an item at a candidate pooled rank ``r`` measures the
ranker's error there:

* RA mode (ranker emits ranks): ``|r - predicted_rank|``.
* VA mode (ranker emits values): ``|value_at_rank(r, outputs) - output|``,
  the gap between the item's output and the output it would need to sit at
  rank ``r``.

True scores of calibration items are not computable (their pooled ranks are
unknown), so each is replaced by its *proxy*: the maximum score over the
item's envelope interval, attained at the interval edges for both score
families.  Calibrating on the k-th smallest proxy score with
``k = ceil((1 - alpha + delta)(n + 1))`` yields marginally valid sets at level
``1 - alpha`` whenever the envelope holds at level ``1 - delta``.

:func:`fcp_calibrated_k` instead picks ``k`` so that the false coverage
proportion over the m test items stays below ``alpha_bar`` with probability at
least ``1 - beta_bar - delta``.  It exploits that the vector of conformal
p-values of test scores among calibration scores follows a universal
distribution, simulated from uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envelope import Envelope
from .errors import (
    DimensionMismatch,
    EmptyPredictionSet,
    InfeasibleLevel,
    InsufficientSample,
    InvalidInput,
    RankOutOfRange,
)
from .ranks import RA, ItemId, RankingProblem, check_no_ties
from .streams import CHUNK, chunk_stream, run_chunks

MARGINAL = "marginal"
FCP_CONTROLLED = "fcp_controlled"

# Paper-default levels: miscoverage alpha, FCP exceedance budget beta,
# envelope level delta.
DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.25
DEFAULT_DELTA = 0.02


@dataclass
class ProxyScores:
    """Computable upper bounds on the calibration items' conformity scores.

    ``scores[i]`` dominates the true score of calibration item ``i`` whenever
    the envelope covers that item's pooled rank.
    """

    scores: np.ndarray
    mode: str
    envelope: Envelope

    @property
    def n(self) -> int:
        return self.scores.size


@dataclass
class FcpCalibration:
    """Result of the simulated FCP threshold selection."""

    k: int
    t_hat: float
    alpha_bar: float
    beta_bar: float
    delta: float
    K: int
    seed: int


@dataclass
class Threshold:
    """Calibrated score threshold: the k-th smallest proxy score."""

    k: int
    value: float
    alpha: float | None = None
    delta: float | None = None
    fcp_mode: str = MARGINAL
    fcp_meta: FcpCalibration | None = None


@dataclass(frozen=True)
class RankSet:
    """Integer interval prediction set ``[lo, hi]`` for one item's rank.

    ``kind`` is ``"full"`` (rank among all n+m items) or ``"test_only"``
    (rank among the m test items).
    """

    item: ItemId
    lo: int
    hi: int
    kind: str = "full"

    def __post_init__(self):
        if self.kind not in ("full", "test_only"):
            raise InvalidInput(f"unknown set kind {self.kind!r}")
        if not 1 <= self.lo <= self.hi:
            raise InvalidInput(f"need 1 <= lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def contains(self, r: int) -> bool:
        return self.lo <= r <= self.hi


def score_ra(r: int, predicted_rank: int) -> float:
    """Residual score in RA mode: ``|r - predicted_rank|``."""
    if r < 1 or predicted_rank < 1:
        raise InvalidInput("ranks must be >= 1")
    return float(abs(int(r) - int(predicted_rank)))


def score_va(r: int, value: float, all_values) -> float:
    """Value-gap score in VA mode: ``|value_at_rank(r, all_values) - value|``."""
    arr = np.asarray(all_values, dtype=float)
    if not 1 <= int(r) <= arr.size:
        raise RankOutOfRange(f"rank {r} outside [1, {arr.size}]")
    check_no_ties(arr, "all_values")
    return float(abs(np.partition(arr, int(r) - 1)[int(r) - 1] - float(value)))


def proxy_score_ra(lo: int, hi: int, predicted_rank: int) -> float:
    """Max RA score over ``r in [lo, hi]``; attained at an interval edge."""
    if lo > hi:
        raise InvalidInput(f"need lo <= hi, got [{lo}, {hi}]")
    return max(score_ra(lo, predicted_rank), score_ra(hi, predicted_rank))


def proxy_score_va(lo: int, hi: int, value: float, all_values) -> float:
    """Max VA score over ``r in [lo, hi]``.

    The gap is decreasing then increasing as ``r`` sweeps past the value's own
    position, so the maximum sits at an edge.
    """
    arr = np.asarray(all_values, dtype=float)
    if not 1 <= int(lo) <= int(hi) <= arr.size:
        raise RankOutOfRange(f"need 1 <= lo <= hi <= {arr.size}, got [{lo}, {hi}]")
    check_no_ties(arr, "all_values")
    ordered = np.sort(arr)
    value = float(value)
    return float(
        max(abs(ordered[int(lo) - 1] - value), abs(ordered[int(hi) - 1] - value))
    )


def scores_at(problem: RankingProblem, calib_ranks_at) -> np.ndarray:
    """Score of each calibration item evaluated at a given pooled rank.

    Used with the true pooled ranks for the oracle baseline; proxy scores use
    :func:`proxy_scores` instead.
    """
    ranks = np.asarray(calib_ranks_at, dtype=np.int64)
    if ranks.shape != (problem.n,):
        raise DimensionMismatch("need one rank per calibration item")
    if ranks.min() < 1 or ranks.max() > problem.total:
        raise RankOutOfRange("pooled ranks outside [1, n+m]")
    if problem.ranker_mode == RA:
        return np.abs(ranks - problem.calib_outputs).astype(float)
    ordered = np.sort(problem.ranker_outputs)
    return np.abs(ordered[ranks - 1] - problem.calib_outputs)


def proxy_scores(problem: RankingProblem, env: Envelope) -> ProxyScores:
    """Proxy score of every calibration item under an envelope.

    RA: ``max(|lower - predicted|, |upper - predicted|)``;
    VA: the larger value gap at the two envelope edges.
    """
    if (env.n, env.m) != (problem.n, problem.m):
        raise DimensionMismatch(
            f"envelope is ({env.n}, {env.m}) but problem is ({problem.n}, {problem.m})"
        )
    lo, hi = env.bounds_for_ranks(problem.calib_ranks)
    if problem.ranker_mode == RA:
        pred = problem.calib_outputs
        scores = np.maximum(np.abs(lo - pred), np.abs(hi - pred)).astype(float)
    else:
        ordered = np.sort(problem.ranker_outputs)
        out = problem.calib_outputs
        scores = np.maximum(np.abs(ordered[lo - 1] - out), np.abs(ordered[hi - 1] - out))
    return ProxyScores(scores=scores, mode=problem.ranker_mode, envelope=env)


def select_k(alpha: float, delta: float, n: int) -> int:
    """Calibration index ``k = ceil((1 - alpha + delta)(n + 1))``.

    ``delta = 0`` recovers plain split calibration (used by the oracle
    baseline and the naive envelope).  Raises :class:`InfeasibleLevel` when
    ``k > n``: there is no finite k-th order statistic among n scores, so the
    requested levels need a larger calibration set.
    """
    if not 0.0 <= delta < alpha < 1.0:
        raise InvalidInput(f"need 0 <= delta < alpha < 1, got alpha={alpha}, delta={delta}")
    if n < 1:
        raise InvalidInput("need n >= 1")
    k = int(math.ceil((1.0 - alpha + delta) * (n + 1) - 1e-9))
    if k > n:
        raise InfeasibleLevel(
            f"k={k} exceeds n={n} for alpha={alpha}, delta={delta}; "
            "increase n or alpha (the exact set would be the trivial [1, n+m])"
        )
    return max(1, k)


def calibrate(
    proxy: ProxyScores,
    k: int,
    alpha: float | None = None,
    fcp_mode: str = MARGINAL,
    fcp_meta: FcpCalibration | None = None,
) -> Threshold:
    """Threshold at the k-th smallest proxy score (ties counted with multiplicity)."""
    n = proxy.n
    if not 1 <= k <= n:
        raise RankOutOfRange(f"k={k} outside [1, {n}]")
    value = float(np.partition(proxy.scores, k - 1)[k - 1])
    return Threshold(
        k=int(k), value=value, alpha=alpha, delta=proxy.envelope.delta,
        fcp_mode=fcp_mode, fcp_meta=fcp_meta,
    )


def predict_set_ra(
    predicted_rank: int, thr: Threshold, n_plus_m: int, item: ItemId = ""
) -> RankSet:
    """RA prediction set: integers within ``thr.value`` of the predicted rank.

    Equals ``[ceil(pred - s), floor(pred + s)]`` clipped to ``[1, n+m]`` and is
    exactly ``{r : |r - pred| <= s}`` there.
    """
    if not 1 <= predicted_rank <= n_plus_m:
        raise RankOutOfRange(f"predicted rank {predicted_rank} outside [1, {n_plus_m}]")
    if thr.value < 0:
        raise InvalidInput("threshold must be nonnegative")
    reach = int(math.floor(thr.value))
    lo = max(1, int(predicted_rank) - reach)
    hi = min(n_plus_m, int(predicted_rank) + reach)
    return RankSet(item=item, lo=lo, hi=hi, kind="full")


def predict_set_va(
    value: float, thr: Threshold, all_values, item: ItemId = ""
) -> RankSet:
    """VA prediction set: ranks whose required value lies within ``thr.value``.

    Constructed directly from the membership predicate
    ``{r : |value_at_rank(r) - value| <= s}`` (a contiguous run of ranks), so
    the set is exactly the sublevel set.  The closed form
    ``[rank_of(value - s), rank_of(value + s)]`` can overshoot by one rank on
    the left when no value sits exactly at distance ``s``; tests reconcile the
    two.  Width adapts to the local density of ``all_values`` around
    ``value``.
    """
    arr = np.asarray(all_values, dtype=float)
    check_no_ties(arr, "all_values")
    if thr.value < 0:
        raise InvalidInput("threshold must be nonnegative")
    ordered = np.sort(arr)
    hit = np.flatnonzero(np.abs(ordered - float(value)) <= thr.value)
    if hit.size == 0:
        raise EmptyPredictionSet(
            "no rank within threshold; value lies outside all_values by more than s"
        )
    return RankSet(item=item, lo=int(hit[0]) + 1, hi=int(hit[-1]) + 1, kind="full")


def predict_sets(problem: RankingProblem, thr: Threshold) -> list[RankSet]:
    """Prediction sets for all test items of a problem (vectorized)."""
    total = problem.total
    ids = problem.test_ids
    if problem.ranker_mode == RA:
        return [
            predict_set_ra(int(pred), thr, total, item=ids[j])
            for j, pred in enumerate(problem.test_outputs)
        ]
    ordered = np.sort(problem.ranker_outputs)
    gaps_ok = np.abs(ordered[None, :] - problem.test_outputs[:, None]) <= thr.value
    if not np.all(gaps_ok.any(axis=1)):
        raise EmptyPredictionSet("a test item has no rank within the threshold")
    lo = gaps_ok.argmax(axis=1) + 1
    hi = total - gaps_ok[:, ::-1].argmax(axis=1)
    return [
        RankSet(item=ids[j], lo=int(lo[j]), hi=int(hi[j]), kind="full")
        for j in range(problem.m)
    ]


def fcp_calibration(
    alpha_bar: float,
    beta_bar: float,
    delta: float,
    n: int,
    m: int,
    K: int,
    seed: int,
    workers: int | None = None,
) -> FcpCalibration:
    """Simulate the FCP-controlling calibration index.

    Draws ``K`` replicates of the universal conformal p-value vector (each
    test p-value is ``(1 + #{calibration >= test}) / (n + 1)``, simulated
    from ``n + m`` uniforms), takes the ``(floor(m alpha_bar) + 1)``-th
    smallest p-value of each replicate, and sets ``t_hat`` to the empirical
    ``beta_bar``-quantile (order statistic at index ``ceil(beta_bar K)``) of
    those ``K`` values.  The returned index is
    ``k = ceil((n + 1)(1 - t_hat))`` clipped to ``[1, n]``, computed in exact
    integer arithmetic.

    Combined with an envelope at level ``1 - delta``, the resulting sets keep
    the false coverage proportion at most ``alpha_bar`` with probability at
    least ``1 - beta_bar - delta``.
    """
    if not 0.0 <= alpha_bar < 1.0:
        raise InvalidInput(f"alpha_bar={alpha_bar} outside [0, 1)")
    if not 0.0 < beta_bar < 1.0:
        raise InvalidInput(f"beta_bar={beta_bar} outside (0, 1)")
    if not 0.0 <= delta < 1.0:
        raise InvalidInput(f"delta={delta} outside [0, 1)")
    if n < 1 or m < 1 or K < 1:
        raise InvalidInput("need n, m, K >= 1")
    if K < 1.0 / beta_bar:
        raise InsufficientSample(
            f"K={K} replicates cannot resolve beta_bar={beta_bar}; need K >= 1/beta_bar"
        )

    a = int(math.floor(m * alpha_bar + 1e-9)) + 1
    j0 = m - a  # the a-th smallest p-value belongs to the a-th largest score
    total = n + m
    order_stats = np.empty(K, dtype=np.int64)

    def fill(c: int) -> None:
        lo = c * CHUNK
        hi = min(K, lo + CHUNK)
        gen = chunk_stream(seed, c, "fcp-pvalues", n, m)
        u = gen.random((hi - lo, total))
        order = np.argsort(u, axis=1)
        # pos[j] = pooled sorted position (0-based) of the j-th smallest of
        # the m test uniforms; pos[j] - j counts calibration uniforms below.
        pos = np.nonzero(order >= n)[1].reshape(hi - lo, m)
        order_stats[lo:hi] = 1 + n - (pos[:, j0] - j0)

    run_chunks(math.ceil(K / CHUNK), fill, workers)

    idx = max(1, min(K, int(math.ceil(beta_bar * K - 1e-9))))
    t_num = int(np.partition(order_stats, idx - 1)[idx - 1])
    k = min(n, max(1, n + 1 - t_num))
    return FcpCalibration(
        k=k, t_hat=t_num / (n + 1), alpha_bar=alpha_bar, beta_bar=beta_bar,
        delta=delta, K=K, seed=seed,
    )


def fcp_calibrated_k(
    alpha_bar: float,
    beta_bar: float,
    delta: float,
    n: int,
    m: int,
    K: int,
    seed: int,
    workers: int | None = None,
) -> int:
    """Calibration index from :func:`fcp_calibration` (index only)."""
    return fcp_calibration(alpha_bar, beta_bar, delta, n, m, K, seed, workers).k
