"""Rank arithmetic and the ranking-problem data model.

Ranks are 1-based and count equality: the rank of ``y`` in a bag ``D`` is
``#{z in D : y >= z}``.  This is the wire convention used by every module in
the package.  A strict total order (no exact duplicates) is required wherever
ranks must be invertible; ties raise :class:`TiesDetected` instead of being
jittered silently, and :func:`break_ties` offers a deterministic opt-in
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidInput,
    RankOutOfRange,
    TiesDetected,
)
from .streams import stream

ItemId = str

RA = "RA"
VA = "VA"


def _as_float_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInput(f"{name} must be one-dimensional")
    return arr


def has_ties(values) -> bool:
    """True if the vector contains an exact duplicate."""
    arr = np.asarray(values).ravel()
    return np.unique(arr).size < arr.size


def check_no_ties(values, name: str = "values") -> None:
    """Raise :class:`TiesDetected` if the vector has exact duplicates."""
    if has_ties(values):
        raise TiesDetected(f"{name} contain exact duplicates; see break_ties")


def rank_of(y: float, bag) -> int:
    """Rank of ``y`` in a bag: the number of elements ``z`` with ``y >= z``.

    Ranges over ``[0, len(bag)]``; membership implies a rank of at least 1.
    """
    arr = _as_float_vector(bag, "bag")
    if arr.size == 0:
        raise InvalidInput("bag must be nonempty")
    return int(np.count_nonzero(float(y) >= arr))


def value_at_rank(r: int, bag) -> float:
    """The element of rank ``r`` (the r-th smallest) in a tie-free bag.

    Inverse of :func:`rank_of`: ``rank_of(value_at_rank(r, bag), bag) == r``.
    """
    arr = _as_float_vector(bag, "bag")
    if not 1 <= int(r) <= arr.size:
        raise RankOutOfRange(f"rank {r} outside [1, {arr.size}]")
    check_no_ties(arr, "bag")
    return float(np.partition(arr, int(r) - 1)[int(r) - 1])


def ranks_within(values) -> np.ndarray:
    """Rank of each element within its own tie-free vector.

    Returns a permutation of ``1..len(values)`` as int64.
    """
    arr = _as_float_vector(values, "values")
    check_no_ties(arr, "values")
    ranks = np.empty(arr.size, dtype=np.int64)
    ranks[np.argsort(arr)] = np.arange(1, arr.size + 1)
    return ranks


def break_ties(values, seed: int) -> np.ndarray:
    """Deterministic opt-in tie resolution.

    Adds ``i * eps`` to each element, where ``eps`` is the smallest positive
    gap divided by ``2 * len(values)`` and ``i`` runs over a seeded random
    permutation of offsets.  The order of non-tied values is preserved
    exactly; tied groups are ordered by the permutation.  Returns a tie-free
    copy and never mutates the input.
    """
    arr = _as_float_vector(values, "values").copy()
    distinct = np.unique(arr)
    gap = float(np.diff(distinct).min()) if distinct.size > 1 else 1.0
    eps = gap / (2 * arr.size)
    offsets = stream(seed, "tie-break").permutation(arr.size)
    return arr + eps * offsets


@dataclass(frozen=True)
class RankTriple:
    """Ranks of one item within the calibration / test / pooled values.

    ``r_c`` is ``None`` for test items.  For calibration items the identity
    ``r_ct == r_c + r_t`` holds by construction of counting ranks.
    """

    r_c: int | None
    r_t: int
    r_ct: int


def split_ranks(truth, n: int) -> list[RankTriple]:
    """Per-item rank triples for a pooled tie-free truth vector split at ``n``.

    The first ``n`` entries are calibration items (``r_c`` set, ``r_t`` in
    ``0..m``); the rest are test items (``r_c`` is ``None``, ``r_t`` in
    ``1..m``).
    """
    arr = _as_float_vector(truth, "truth")
    check_no_ties(arr, "truth")
    if not 0 <= n <= arr.size:
        raise InvalidInput(f"n={n} outside [0, {arr.size}]")
    pooled = ranks_within(arr)
    calib, test = arr[:n], arr[n:]
    triples: list[RankTriple] = []
    for i in range(arr.size):
        r_ct = int(pooled[i])
        if i < n:
            r_c = int(np.count_nonzero(arr[i] >= calib))
            triples.append(RankTriple(r_c, r_ct - r_c, r_ct))
        else:
            r_t = int(np.count_nonzero(arr[i] >= test)) if test.size else 0
            triples.append(RankTriple(None, r_t, r_ct))
    return triples


def _default_ids(n: int, m: int) -> list[ItemId]:
    return [f"c{i}" for i in range(1, n + 1)] + [f"t{j}" for j in range(1, m + 1)]


@dataclass
class RankingProblem:
    """Calibration relative ranks, test items, and black-box ranker outputs.

    ``calib_ranks`` must be a permutation of ``1..n``.  In RA mode the ranker
    outputs are predicted pooled ranks (integers in ``[1, n+m]``, repeats
    allowed); in VA mode they are real scores whose order induces the
    predicted ranking (ties rejected, same policy as for ``truth``).
    ``truth`` is optional and used for evaluation only.
    """

    n: int
    m: int
    calib_ranks: np.ndarray
    ranker_mode: str
    ranker_outputs: np.ndarray
    truth: np.ndarray | None = None
    ids: list[ItemId] | None = None

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise InvalidInput("need n >= 1 and m >= 0")
        total = self.n + self.m
        ranks = np.asarray(self.calib_ranks, dtype=np.int64)
        if ranks.shape != (self.n,) or not np.array_equal(
            np.sort(ranks), np.arange(1, self.n + 1)
        ):
            raise InvalidInput("calib_ranks must be a permutation of 1..n")
        self.calib_ranks = ranks

        if self.ranker_mode not in (RA, VA):
            raise InvalidInput(f"ranker_mode must be {RA!r} or {VA!r}")
        outputs = np.asarray(self.ranker_outputs)
        if outputs.shape != (total,):
            raise DimensionMismatch(
                f"ranker_outputs must have length n+m={total}, got {outputs.shape}"
            )
        if self.ranker_mode == RA:
            as_float = outputs.astype(float)
            if not np.all(as_float == np.round(as_float)):
                raise InvalidInput("RA ranker outputs must be integers")
            as_int = as_float.astype(np.int64)
            if as_int.min() < 1 or as_int.max() > total:
                raise InvalidInput(f"RA ranker outputs must lie in [1, {total}]")
            self.ranker_outputs = as_int
        else:
            as_float = outputs.astype(float)
            check_no_ties(as_float, "VA ranker outputs")
            self.ranker_outputs = as_float

        if self.truth is not None:
            t = _as_float_vector(self.truth, "truth")
            if t.shape != (total,):
                raise DimensionMismatch(f"truth must have length n+m={total}")
            check_no_ties(t, "truth")
            self.truth = t

        if self.ids is not None:
            if len(self.ids) != total:
                raise DimensionMismatch("ids must have length n+m")
            if len(set(self.ids)) != total:
                raise InvalidInput("ids must be unique")

    @property
    def total(self) -> int:
        return self.n + self.m

    @property
    def item_ids(self) -> list[ItemId]:
        return list(self.ids) if self.ids is not None else _default_ids(self.n, self.m)

    @property
    def calib_ids(self) -> list[ItemId]:
        return self.item_ids[: self.n]

    @property
    def test_ids(self) -> list[ItemId]:
        return self.item_ids[self.n :]

    @property
    def calib_outputs(self) -> np.ndarray:
        return self.ranker_outputs[: self.n]

    @property
    def test_outputs(self) -> np.ndarray:
        return self.ranker_outputs[self.n :]
