"""NumPy implementation of the rating-matrix kernels.

This is the fallback used when the compiled extension (cofigel._core) is not
available, and the reference for its behaviour. Both implementations must
agree exactly on every integer output (counts, statuses, labels) and to
floating-point noise on similarities and ranks.

Conventions shared by both backends:

* ``values`` is an int8 array of shape (users, items): -1 unrated, 0 rated
  negative, 1 rated positive.
* Similarity between two items is the co-positive-rater count divided by the
  geometric mean of their positive-rater counts; items with no positive rater
  have similarity 0 to everything (including themselves).
* A pair (u, i) is predictable when it is unrated and at least one of u's
  positively rated items was co-rated positive with i by someone. This is
  pure integer logic, so both backends classify identically.
* Ranks are rounded to 12 decimals before top-k ordering so that summation
  order (BLAS vs sequential C loops) cannot flip ties between the backends.
"""

import numpy as np

RANK_DECIMALS = 12


def base_derive(values):
    """Derive similarity, ranks and predictability from a rating array.

    Returns ``(sim, ranks, predictable, npos)`` where sim is items x items,
    ranks is users x items (sum of similarities between the item and the
    user's positively rated items), predictable is a uint8 users x items
    mask and npos counts positive raters per item.
    """
    values = np.ascontiguousarray(values, dtype=np.int8)
    n_users, n_items = values.shape
    pos = (values == 1).astype(np.float64)
    counts = pos.T @ pos  # co-positive-rater counts, exact in float64
    npos = np.diag(counts).astype(np.int64).copy()
    denom = np.sqrt(np.outer(npos, npos).astype(np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(counts > 0, counts / denom, 0.0)
    ranks = pos @ sim
    # Predictability is decided on integer co-counts, never on float ranks.
    reachable = pos @ (counts > 0).astype(np.float64)
    predictable = ((values < 0) & (reachable > 0)).astype(np.uint8)
    return sim, ranks, predictable, npos


def label_derive(ranks, predictable, k, tie_order):
    """Label the top-k predictable items of every user as predicted positive.

    ``tie_order`` maps a column to its position in ascending item-id order;
    it breaks ties among equal (rounded) ranks. Returns ``(labels, gplus)``.
    """
    n_users, n_items = ranks.shape
    labels = np.zeros((n_users, n_items), dtype=np.uint8)
    quantized = np.round(ranks, RANK_DECIMALS)
    for u in range(n_users):
        cand = np.flatnonzero(predictable[u])
        if cand.size == 0:
            continue
        order = np.lexsort((tie_order[cand], -quantized[u, cand]))
        labels[u, cand[order[: min(k, cand.size)]]] = 1
    gplus = labels.sum(axis=0, dtype=np.int64)
    return labels, gplus


def gain_vector(values, predictable, u):
    """Coverage gain of hypothetically rating (u, i) positive, for every i.

    A currently unpredictable pair (v, i) flips to predictable exactly when
    v shares at least one positively rated item with u, because the new
    rating creates a co-positive count between i and each of u's positive
    items. Entries are only meaningful where (u, i) is unrated.
    """
    values = np.asarray(values, dtype=np.int8)
    pos = (values == 1).astype(np.int64)
    share = (pos @ pos[u]) > 0
    share[u] = False
    unpredictable = (values < 0) & (predictable == 0)
    gains = 1 + (unpredictable & share[:, None]).sum(axis=0, dtype=np.int64)
    return gains


def gain_best(values, predictable):
    """Best coverage gain per item over all users with that item unrated.

    Items already rated by every user yield 0 (nothing left to gain).
    """
    values = np.asarray(values, dtype=np.int8)
    n_users, n_items = values.shape
    if n_users == 0 or n_items == 0:
        return np.zeros(n_items, dtype=np.int64)
    pos = (values == 1).astype(np.int64)
    share = pos @ pos.T
    np.fill_diagonal(share, 0)
    share = (share > 0).astype(np.int64)
    unpredictable = ((values < 0) & (predictable == 0)).astype(np.int64)
    gains = 1 + share @ unpredictable
    gains = np.where(values < 0, gains, 0)
    return gains.max(axis=0).astype(np.int64)
