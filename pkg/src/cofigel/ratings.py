"""Binary-rating collaborative filtering over a shared user-item matrix.

Every device carries its own :class:`RatingMatrix`. Entries are either rated
(an observed binary rating with the time it was made), predicted (unrated but
reachable through item-item cosine similarity) or unpredictable. Matrices are
merged whenever two devices meet, so the engine is built around cheap
incremental union of rated entries plus a version-cached derivation of
everything else (similarities, ranks, top-k labels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

RATED = "rated"
PREDICTED = "predicted"
UNPREDICTABLE = "unpredictable"

POSITIVE = "positive"
NEGATIVE = "negative"

_GROW = 16


@dataclass(frozen=True)
class RatingEntry:
    value: int | None
    status: str
    timestamp: float | None = None


@dataclass(frozen=True)
class PredictionResult:
    user: object
    item: object
    rank: float
    label: str


@dataclass
class DerivedState:
    """Bulk view of everything derivable from the rated entries.

    Arrays are indexed by the row/column maps; they are snapshots and stay
    valid even if the matrix mutates afterwards.
    """

    version: int
    k: int
    user_index: dict
    item_index: dict
    values: np.ndarray       # int8, -1 unrated / 0 negative / 1 positive
    sim: np.ndarray          # float64 items x items
    ranks: np.ndarray        # float64 users x items
    predictable: np.ndarray  # uint8 users x items
    npos: np.ndarray         # int64 positive raters per item (observed r+)
    labels: np.ndarray       # uint8 users x items, predicted positive
    gplus: np.ndarray        # int64 predicted positives per item

    def positive_or_rated_rows(self, col):
        """Row indices of users rated or predicted positive for a column."""
        mask = (self.labels[:, col] == 1) | (self.values[:, col] == 1)
        return np.flatnonzero(mask)


class RatingMatrix:
    """User x item binary ratings with derived prediction state.

    The rated entries are the only authoritative content; predicted and
    unpredictable statuses are recomputed from them on demand. A rated entry
    is never displaced by a prediction. User and item ids must be sortable
    (ints in practice); item-id order breaks ranking ties deterministically.
    """

    def __init__(self, users=(), items=()):
        self._user_index: dict = {}
        self._item_index: dict = {}
        self._user_ids: list = []
        self._item_ids: list = []
        self._values = np.full((_GROW, _GROW), -1, dtype=np.int8)
        self._rated: dict = {}  # (user, item) -> (value, timestamp)
        self._version = 0
        self._base_cache = None
        self._full_cache = None
        self._tie_cache = None
        for u in users:
            self.ensure_user(u)
        for i in items:
            self.ensure_item(i)

    # -- universe ----------------------------------------------------------

    @property
    def users(self):
        return list(self._user_ids)

    @property
    def items(self):
        return list(self._item_ids)

    @property
    def version(self):
        return self._version

    @property
    def n_rated(self):
        return len(self._rated)

    def ensure_user(self, user):
        if user in self._user_index:
            return self._user_index[user]
        row = len(self._user_ids)
        if row >= self._values.shape[0]:
            self._grow(rows=True)
        self._user_index[user] = row
        self._user_ids.append(user)
        self._version += 1
        return row

    def ensure_item(self, item):
        if item in self._item_index:
            return self._item_index[item]
        col = len(self._item_ids)
        if col >= self._values.shape[1]:
            self._grow(rows=False)
        self._item_index[item] = col
        self._item_ids.append(item)
        self._version += 1
        return col

    def _grow(self, rows):
        shape = list(self._values.shape)
        shape[0 if rows else 1] *= 2
        fresh = np.full(shape, -1, dtype=np.int8)
        fresh[: self._values.shape[0], : self._values.shape[1]] = self._values
        self._values = fresh

    # -- rated entries ------------------------------------------------------

    def is_rated(self, user, item):
        return (user, item) in self._rated

    def rated_entries(self):
        """Iterate (user, item, value, timestamp) over rated entries."""
        for (u, i), (v, ts) in self._rated.items():
            yield u, i, v, ts

    def value(self, user, item):
        entry = self._rated.get((user, item))
        return None if entry is None else entry[0]

    def status(self, user, item):
        if (user, item) in self._rated:
            return RATED
        row = self._user_index[user]
        col = self._item_index[item]
        base = self._base()
        return PREDICTED if base.predictable[row, col] else UNPREDICTABLE

    def entry(self, user, item):
        stored = self._rated.get((user, item))
        if stored is not None:
            return RatingEntry(stored[0], RATED, stored[1])
        return RatingEntry(None, self.status(user, item))

    def _set_rated(self, user, item, value, timestamp):
        row = self.ensure_user(user)
        col = self.ensure_item(item)
        self._rated[(user, item)] = (int(value), float(timestamp))
        self._values[row, col] = int(value)
        self._version += 1

    def copy(self):
        dup = RatingMatrix(self._user_ids, self._item_ids)
        for (u, i), (v, ts) in self._rated.items():
            dup._set_rated(u, i, v, ts)
        return dup

    def merge_from(self, other: "RatingMatrix") -> bool:
        """Union the other matrix's rated entries into this one.

        Rated beats unrated. Two rated entries for the same pair keep the
        one with the earlier timestamp (value 0 on an exact timestamp tie),
        so merging is commutative, associative and idempotent.

        Returns True when anything changed.
        """
        changed = False
        for u in other._user_ids:
            if u not in self._user_index:
                self.ensure_user(u)
                changed = True
        for i in other._item_ids:
            if i not in self._item_index:
                self.ensure_item(i)
                changed = True
        for (u, i), (v, ts) in other._rated.items():
            mine = self._rated.get((u, i))
            if mine is None or (ts, v) < (mine[1], mine[0]):
                self._set_rated(u, i, v, ts)
                changed = True
        return changed

    # -- derived state ------------------------------------------------------

    def _trimmed_values(self):
        n_u, n_i = len(self._user_ids), len(self._item_ids)
        return np.ascontiguousarray(self._values[:n_u, :n_i])

    def _tie_order(self):
        if self._tie_cache is not None and self._tie_cache[0] == len(self._item_ids):
            return self._tie_cache[1]
        order = np.empty(len(self._item_ids), dtype=np.int64)
        by_id = sorted(range(len(self._item_ids)), key=lambda c: self._item_ids[c])
        for pos, col in enumerate(by_id):
            order[col] = pos
        self._tie_cache = (len(self._item_ids), order)
        return order

    def _base(self):
        if self._base_cache is not None and self._base_cache[0] == self._version:
            return self._base_cache[1]
        values = self._trimmed_values()
        sim, ranks, predictable, npos = kernels.base_derive(values)
        base = _Base(values, sim, ranks, predictable, npos)
        self._base_cache = (self._version, base)
        return base

    def derived_state(self, k: int) -> DerivedState:
        """Snapshot of all derived arrays for top-k classification with k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        key = (self._version, k)
        if self._full_cache is not None and self._full_cache[0] == key:
            return self._full_cache[1]
        base = self._base()
        labels, gplus = kernels.label_derive(
            base.ranks, base.predictable, k, self._tie_order()
        )
        state = DerivedState(
            version=self._version,
            k=k,
            user_index=dict(self._user_index),
            item_index=dict(self._item_index),
            values=base.values,
            sim=base.sim,
            ranks=base.ranks,
            predictable=base.predictable,
            npos=base.npos,
            labels=labels,
            gplus=gplus,
        )
        self._full_cache = (key, state)
        return state


@dataclass
class _Base:
    values: np.ndarray
    sim: np.ndarray
    ranks: np.ndarray
    predictable: np.ndarray
    npos: np.ndarray


# -- operations --------------------------------------------------------------


def similarity(matrix: RatingMatrix, i, j) -> float:
    """Cosine similarity between two items over binary ratings.

    Unrated and negative entries contribute zero. Returns 0.0 when either
    item has no positive rater. Unknown item ids raise KeyError: the caller
    passed an id the matrix has never seen.
    """
    ci = matrix._item_index[i]
    cj = matrix._item_index[j]
    return float(matrix._base().sim[ci, cj])


def rank(matrix: RatingMatrix, user, item):
    """Sum of similarities between ``item`` and the user's positive items.

    Returns None (the unpredictable marker) when the user has no positive
    ratings or no co-rating path reaches the item. Raises ValueError for a
    pair that is already rated: ranks only exist for unrated pairs.
    """
    if matrix.is_rated(user, item):
        raise ValueError(f"({user!r}, {item!r}) is already rated")
    row = matrix._user_index[user]
    col = matrix._item_index[item]
    base = matrix._base()
    if not base.predictable[row, col]:
        return None
    return float(base.ranks[row, col])


def predict_user(matrix: RatingMatrix, user, k: int) -> list[PredictionResult]:
    """All predictable unrated items for a user, top-k labelled positive.

    Results are ordered by descending rank, item id ascending on ties. Rated
    items never appear; an empty list means nothing is predictable.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if user not in matrix._user_index:
        raise KeyError(user)
    state = matrix.derived_state(k)
    row = state.user_index[user]
    cols = np.flatnonzero(state.predictable[row])
    results = []
    for col in cols:
        item = matrix._item_ids[col]
        label = POSITIVE if state.labels[row, col] else NEGATIVE
        results.append(PredictionResult(user, item, float(state.ranks[row, col]), label))
    # Same ordering key the labeller used, so the positive block is a prefix.
    results.sort(key=lambda r: (-round(r.rank, kernels.RANK_DECIMALS), r.item))
    return results


def coverage_gain(matrix: RatingMatrix, user, item) -> int:
    """Rated-plus-newly-predictable pairs gained if (user, item) were rated 1.

    Counts the hypothetical rating itself plus every other user whose entry
    for the same item would flip from unpredictable to predictable. The
    matrix is not modified. Raises ValueError if the pair is already rated.
    """
    if matrix.is_rated(user, item):
        raise ValueError(f"({user!r}, {item!r}) is already rated")
    row = matrix._user_index[user]
    col = matrix._item_index[item]
    base = matrix._base()
    gains = kernels.gain_vector(base.values, base.predictable, row)
    return int(gains[col])


def apply_rating(matrix: RatingMatrix, user, item, value, now) -> None:
    """Record an observed binary rating; statuses recompute lazily.

    Ratings are immutable facts: rating a pair twice raises ValueError.
    """
    if value not in (0, 1):
        raise ValueError(f"rating must be 0 or 1, got {value!r}")
    if matrix.is_rated(user, item):
        raise ValueError(f"({user!r}, {item!r}) is already rated")
    matrix._set_rated(user, item, value, now)


def merge(local: RatingMatrix, remote: RatingMatrix) -> RatingMatrix:
    """Union of two matrices' rated entries (see RatingMatrix.merge_from)."""
    out = local.copy()
    out.merge_from(remote)
    return out
