"""Transfer-queue ordering policies.

All policies see the same eligible set (the sender's unexpired forwardable
items the peer lacks) and only differ in the sort key. Keys are computed
strictly from what each policy is allowed to know: the delivery-blind
variant never touches queue positions or contact history, the rating-only
variant never evaluates coverage gain or the rating-gain bound, and only
the ground-truth policy reads the hidden ratings.
"""

from __future__ import annotations

import enum

import numpy as np

from . import kernels
from .estimator import ItemStats, bootstrap_floor, rating_gain_bound, utility


class SchedulerKind(str, enum.Enum):
    COFIGEL = "CoFiGel"
    COFIGEL_3G = "CoFiGel3G"
    NO_DELIVERY_TIME = "NoDeliveryTime"
    NO_COVERAGE = "NoCoverage"
    NO_ITEM_RECALL = "NoItemRecall"
    GROUND_TRUTH = "GroundTruth"

    @classmethod
    def parse(cls, name: str) -> "SchedulerKind":
        for kind in cls:
            if kind.value == name:
                return kind
        known = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown scheduler {name!r} (known: {known})")


class TransferScheduler:
    """Orders a node's forwardable items for a given peer under one policy."""

    def __init__(self, kind: SchedulerKind, catalog: dict, *, n_users: int,
                 top_k: int, bootstrap_fraction: float, user_node: dict,
                 ground_truth=None, global_matrix=None, true_holders=None):
        self.kind = SchedulerKind.parse(kind) if isinstance(kind, str) else kind
        self.catalog = catalog
        self.n_users = n_users
        self.top_k = top_k
        self.floor = bootstrap_floor(n_users, bootstrap_fraction)
        self.user_node = user_node
        self.ground_truth = ground_truth
        self.global_matrix = global_matrix
        self.true_holders = true_holders
        if self.kind is SchedulerKind.GROUND_TRUTH:
            if ground_truth is None or true_holders is None:
                raise ValueError("GroundTruth scheduling needs the hidden "
                                 "ratings and the holder map")
        if self.kind is SchedulerKind.COFIGEL_3G and global_matrix is None:
            raise ValueError("CoFiGel3G needs the shared rating matrix")
        self._gain_cache: dict = {}

    # -- public entry points -------------------------------------------------

    def eligible(self, node, peer, now) -> list:
        """Forwardable, unexpired items the peer lacks, id ascending."""
        return sorted(
            iid for iid in node.holdings()
            if self.catalog[iid].expiry_time > now and not peer.holds(iid))

    def order_queue(self, node, peer, now) -> list:
        ids = self.eligible(node, peer, now)
        keys = self._keys(node, peer, ids, now)
        decorated = sorted(zip(keys, ids), key=lambda p: (-p[0], p[1]))
        return [iid for _, iid in decorated]

    def order_full_queue(self, node, peer, now) -> list:
        """The node's whole forwardable queue in policy order for this peer.

        Queue positions are tracked over this ordering; the transfer walk
        then skips whatever the peer already holds. Ordering the full set
        keeps position records fresh for items many peers already have.
        """
        ids = sorted(iid for iid in node.holdings()
                     if self.catalog[iid].expiry_time > now)
        keys = self._keys(node, peer, ids, now)
        decorated = sorted(zip(keys, ids), key=lambda p: (-p[0], p[1]))
        return [iid for _, iid in decorated]

    def aggregate_keys(self, node, ids, now) -> list[float]:
        """Peer-independent valuation, e.g. for buffer eviction."""
        return self._keys(node, None, ids, now)

    # -- key computation -------------------------------------------------------

    def _keys(self, node, peer, ids, now) -> list[float]:
        kind = self.kind
        if kind in (SchedulerKind.COFIGEL, SchedulerKind.COFIGEL_3G):
            matrix = node.matrix if kind is SchedulerKind.COFIGEL else self.global_matrix
            return self._utility_keys(node, ids, now, matrix, with_delivery=True)
        if kind is SchedulerKind.NO_DELIVERY_TIME:
            return self._utility_keys(node, ids, now, node.matrix,
                                      with_delivery=False)
        if kind is SchedulerKind.NO_COVERAGE:
            return self._rank_keys(node, peer, ids)
        if kind is SchedulerKind.NO_ITEM_RECALL:
            return self._gain_keys(node, peer, ids)
        return self._ground_truth_keys(ids)

    def _utility_keys(self, node, ids, now, matrix, with_delivery) -> list[float]:
        state = matrix.derived_state(self.top_k)
        keys = []
        for iid in ids:
            col = state.item_index.get(iid)
            if col is None:
                g_plus, r_obs = 0, 0
            else:
                g_plus = int(state.gplus[col])
                r_obs = int(state.npos[col])
            r_plus = max(self.floor, r_obs)
            # An item with no queue-position record yet (e.g. just being
            # published or offered) is about to be held by this node.
            holders = node.sigma.holders(iid) or {node.node_id}
            stats = ItemStats(item=iid, n=self.n_users, g_plus=g_plus,
                              r_plus=r_plus, holders=holders)
            if not with_delivery:
                keys.append((g_plus + r_plus) * rating_gain_bound(stats))
                continue
            if col is not None:
                for row in state.positive_or_rated_rows(col):
                    user = _row_user(state)[row]
                    user_device = self.user_node.get(user)
                    # only users riding a device can still be delivered to
                    if user_device is not None and user_device not in holders:
                        stats.targets.add(user)
            t_left = self.catalog[iid].expiry_time - now
            keys.append(utility(stats, node.sigma, node.contact_stats, t_left))
        return keys

    def _rank_keys(self, node, peer, ids) -> list[float]:
        state = node.matrix.derived_state(self.top_k)
        user = peer.mapped_user if peer is not None else None
        if user is None or user not in state.user_index:
            # No rating identity to aim at: fall back to current audience.
            keys = []
            for iid in ids:
                col = state.item_index.get(iid)
                if col is None:
                    keys.append(0.0)
                else:
                    keys.append(float(state.gplus[col] + state.npos[col]))
            return keys
        row = state.user_index[user]
        keys = []
        for iid in ids:
            col = state.item_index.get(iid)
            if col is not None and state.predictable[row, col]:
                keys.append(float(state.ranks[row, col]))
            else:
                keys.append(0.0)
        return keys

    def _gain_keys(self, node, peer, ids) -> list[float]:
        state = node.matrix.derived_state(self.top_k)
        user = peer.mapped_user if peer is not None else None
        if user is None or user not in state.user_index:
            gains, unknown = self._best_gains(node.matrix, state)
            return [float(gains[state.item_index[iid]])
                    if iid in state.item_index else unknown for iid in ids]
        row = state.user_index[user]
        gains, unknown = self._user_gains(node.matrix, state, row)
        keys = []
        for iid in ids:
            col = state.item_index.get(iid)
            if col is None:
                keys.append(unknown)
            elif state.values[row, col] < 0:
                keys.append(float(gains[col]))
            else:
                keys.append(0.0)  # the peer's user already rated it
        return keys

    def _user_gains(self, matrix, state, row):
        memo_key = (id(matrix), state.version, row)
        hit = self._gain_cache.get(memo_key)
        if hit is not None:
            return hit
        gains = kernels.gain_vector(state.values, state.predictable, row)
        pos = (state.values == 1).astype(np.int64)
        share = (pos @ pos[row]) > 0
        share[row] = False
        unknown = 1.0 + float(share.sum())  # gain for items nobody rated yet
        self._remember(memo_key, (gains, unknown))
        return gains, unknown

    def _best_gains(self, matrix, state):
        memo_key = (id(matrix), state.version, "best")
        hit = self._gain_cache.get(memo_key)
        if hit is not None:
            return hit
        gains = kernels.gain_best(state.values, state.predictable)
        pos = (state.values == 1).astype(np.int64)
        share = pos @ pos.T
        np.fill_diagonal(share, 0)
        counts = (share > 0).sum(axis=1)
        unknown = 1.0 + float(counts.max()) if counts.size else 1.0
        self._remember(memo_key, (gains, unknown))
        return gains, unknown

    def _remember(self, key, value):
        if len(self._gain_cache) > 256:
            self._gain_cache.clear()
        self._gain_cache[key] = value

    def _ground_truth_keys(self, ids) -> list[float]:
        keys = []
        for iid in ids:
            holders = self.true_holders.get(iid, set())
            count = 0
            for user in self.ground_truth.positive_users(iid):
                node = self.user_node.get(user)
                if node is not None and node not in holders:
                    count += 1
            keys.append(float(count))
        return keys


def _row_user(state):
    cached = getattr(state, "_row_user", None)
    if cached is None:
        cached = {row: user for user, row in state.user_index.items()}
        state._row_user = cached
    return cached


def global_matrix_sync(nodes, shared_matrix) -> bool:
    """Fold every node's rated entries into the shared matrix.

    Models an always-on control channel: a rating revealed anywhere is
    immediately visible to utility computation everywhere. Item bytes never
    move here. Returns True when the shared matrix learned anything.
    """
    changed = False
    for node in nodes:
        changed |= shared_matrix.merge_from(node.matrix)
    return changed
