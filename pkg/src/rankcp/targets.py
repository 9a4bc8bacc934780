"""Alternative prediction targets derived from full-rank sets.

Three targets beyond the pooled rank of a test item:

* calibration items: the envelope intervals themselves are simultaneous
  prediction sets (zero false coverage with probability ``1 - delta``);
* a test item's rank among the test items only, obtained by subtracting
  counts of calibration envelopes below the full-set edges;
* membership in the top ``k_top`` of the pooled ranking, by selecting every
  test item whose set meets ``[1, k_top]``.
"""

from __future__ import annotations

import numpy as np

from .conformal import RankSet
from .envelope import Envelope
from .errors import DimensionMismatch, InvalidInput
from .ranks import ItemId


def calibration_sets(
    env: Envelope, calib_ranks, ids: list[ItemId] | None = None
) -> list[RankSet]:
    """Envelope interval of each calibration item, as full-rank sets.

    All ``n`` sets cover their items' pooled ranks simultaneously with
    probability at least ``1 - delta`` (minus Monte-Carlo slack).
    """
    ranks = np.asarray(calib_ranks, dtype=np.int64)
    if ranks.shape != (env.n,):
        raise DimensionMismatch(f"need {env.n} calibration ranks, got {ranks.shape}")
    lo, hi = env.bounds_for_ranks(ranks)
    if ids is None:
        ids = [f"c{i}" for i in range(1, env.n + 1)]
    elif len(ids) != env.n:
        raise DimensionMismatch("ids must match the number of calibration items")
    return [
        RankSet(item=ids[i], lo=int(lo[i]), hi=int(hi[i]), kind="full")
        for i in range(env.n)
    ]


def test_only_set(rank_set: RankSet, env: Envelope) -> RankSet:
    """Convert a full-rank set for a test item into a test-only rank set.

    With ``a, b`` the full-set edges, subtract the number of calibration items
    guaranteed below: ``[a - N_minus, b - N_plus]`` where
    ``N_plus = #{r : upper[r] <= a}`` and ``N_minus = #{r : lower[r] <= b}``,
    clipped to ``[1, m]`` (the true test-only rank always lies there, so
    clipping cannot lose it).  Marginally valid at the same level as the full
    set whenever the envelope holds.
    """
    if rank_set.kind != "full":
        raise InvalidInput("test_only_set expects a full-rank set")
    a, b = rank_set.lo, rank_set.hi
    n_plus = int(np.count_nonzero(env.upper <= a))
    n_minus = int(np.count_nonzero(env.lower <= b))
    raw_lo, raw_hi = a - n_minus, b - n_plus
    assert raw_lo <= raw_hi, "N- >= N+ guarantees a nonempty raw interval"
    lo = max(1, raw_lo)
    hi = min(env.m, raw_hi)
    assert lo <= hi, "test-only set empty after clipping to [1, m]"
    return RankSet(item=rank_set.item, lo=lo, hi=hi, kind="test_only")


def topk_candidates(sets: list[RankSet], k_top: int) -> set[ItemId]:
    """Test items whose full-rank set meets ``[1, k_top]``.

    The output overlaps the true top ``k_top`` by at least
    ``k_top - alpha * m`` in expectation, and is monotone (nested) in
    ``k_top``.
    """
    if k_top < 0:
        raise InvalidInput("k_top must be nonnegative")
    if any(s.kind != "full" for s in sets):
        raise InvalidInput("topk_candidates expects full-rank sets")
    return {s.item for s in sets if s.lo <= k_top}
