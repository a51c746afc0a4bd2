"""Transfer utility of an item from locally known statistics.

The scheduler values an item by three multiplicative factors:

* the positive audience it already has or is predicted to have (g+ + r+),
* a concentration bound on the chance those positive predictions keep being
  confirmed as more users rate the item (rating gain bound G),
* the chance the item still reaches its remaining audience before it
  expires, estimated from queue positions and contact history (delivery
  factor D).

Only the relative ordering of utilities matters; the bounds are loose by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def bootstrap_floor(n_users: int, fraction: float = 0.01) -> int:
    """Initial stand-in for confirmed positives: 1% of users, at least 1."""
    return max(1, math.ceil(fraction * n_users))


@dataclass
class ItemStats:
    """Per-item inputs to the utility, all obtainable from local metadata.

    ``r_plus`` is the confirmed-positive count with the bootstrap floor
    already applied; ``holders`` are the devices believed to carry the item;
    ``targets`` the users it should still reach.
    """

    item: object
    n: int
    g_plus: int
    r_plus: int
    holders: set = field(default_factory=set)
    targets: set = field(default_factory=set)


class ContactStats:
    """Running estimate of a device's contact rate and contact capacity.

    Before the first observed contact the configured priors are returned.
    After that, rate is contacts per elapsed second and capacity the mean
    bytes transferable per contact (duration times link bandwidth).
    """

    def __init__(self, lambda_prior: float, bytes_per_contact_prior: float,
                 start_time: float = 0.0):
        if lambda_prior <= 0 or bytes_per_contact_prior <= 0:
            raise ValueError("contact priors must be positive")
        self.lambda_prior = lambda_prior
        self.bytes_per_contact_prior = bytes_per_contact_prior
        self.start_time = start_time
        self.contacts = 0
        self.total_bytes = 0.0
        self._lam = lambda_prior

    def observe(self, capacity_bytes: float, now: float) -> None:
        self.contacts += 1
        self.total_bytes += capacity_bytes
        self._lam = self.contacts / max(now - self.start_time, 1.0)

    @property
    def lam(self) -> float:
        """Average contacts per second for this device."""
        return self._lam if self.contacts else self.lambda_prior

    @property
    def bytes_per_contact(self) -> float:
        if self.contacts:
            return self.total_bytes / self.contacts
        return self.bytes_per_contact_prior

    @property
    def service_rate(self) -> float:
        """Effective drain rate of a transfer queue, bytes per second."""
        return self.lam * self.bytes_per_contact


class QueuePositions:
    """Last known byte position of each item in each device's queue.

    Observations are timestamped; merging keeps the freshest one per
    (item, device), with the larger position winning an exact timestamp tie
    so that merge order never matters. Per-item position sums are maintained
    incrementally because the queue-wait estimate only needs the sum.
    """

    def __init__(self):
        self._entries: dict = {}  # item -> {node: (position, timestamp)}
        self._sums: dict = {}     # item -> sum of positions
        self.version = 0

    def record(self, item, node, position: float, timestamp: float) -> None:
        if position < 0:
            raise ValueError("queue positions are byte offsets, >= 0")
        per_item = self._entries.setdefault(item, {})
        old = per_item.get(node)
        if old is not None and (old[1], old[0]) >= (timestamp, position):
            return
        self._sums[item] = self._sums.get(item, 0.0) - (old[0] if old else 0.0) + position
        per_item[node] = (position, timestamp)
        self.version += 1

    def merge_from(self, other: "QueuePositions") -> None:
        for item, per_node in other._entries.items():
            for node, (position, timestamp) in per_node.items():
                self.record(item, node, position, timestamp)

    def holders(self, item) -> set:
        return set(self._entries.get(item, ()))

    def position(self, item, node) -> float:
        entry = self._entries.get(item, {}).get(node)
        return 0.0 if entry is None else entry[0]

    def sum_and_count(self, item):
        per_item = self._entries.get(item)
        if not per_item:
            return 0.0, 0
        return self._sums[item], len(per_item)

    def forget(self, item) -> None:
        self._entries.pop(item, None)
        self._sums.pop(item, None)


def rating_gain_bound(stats: ItemStats) -> float:
    """Chance that the item's positive predictions will keep growing.

    min{1, exp(r+ * r+ / (n - r+)) * (1 - r+/n) ** (r+ + g+)}, using the
    confirmed-positive count as the stand-in for the eventual total. Returns
    0 once every user has rated the item: no further gain is possible.
    """
    n, r, g = stats.n, stats.r_plus, stats.g_plus
    if n <= 0 or r >= n:
        return 0.0
    if r < 0 or g < 0:
        raise ValueError("counts must be nonnegative")
    # Evaluated in log space: the exponential factor alone overflows for
    # r*r/(n-r) beyond ~709 even when the full product is far below 1.
    log_bound = r * r / (n - r) + (r + g) * math.log1p(-r / n)
    if log_bound >= 0.0:
        return 1.0
    return math.exp(log_bound)


def mean_wait(sigma: QueuePositions, item, cs: ContactStats, holders) -> float:
    """FIFO wait estimate: mean known queue position over the drain rate.

    Holders with no recorded position count as position 0 (head of queue).
    An empty holder set means the item no longer exists anywhere and is a
    caller bug.
    """
    if not holders:
        raise ValueError(f"item {item!r} has no holders")
    total = sum(sigma.position(item, node) for node in holders)
    return total / (cs.service_rate * len(holders))


def delivery_factor(mu: float, n_targets: int, t_remaining: float) -> float:
    """Chance the item reaches its targets before the deadline, in [0, 1].

    Complement of the Markov-style lateness bound n_targets * mu / t,
    clamped to [0, 1]. Expired items (t_remaining <= 0) are worth 0.
    """
    if t_remaining <= 0:
        return 0.0
    return 1.0 - min(1.0, n_targets * mu / t_remaining)


def utility(stats: ItemStats, sigma: QueuePositions, cs: ContactStats,
            t_remaining: float) -> float:
    """(g+ + r+) * G * D. Zero iff any factor is zero."""
    if t_remaining <= 0:
        return 0.0
    gain = rating_gain_bound(stats)
    mu = mean_wait(sigma, stats.item, cs, stats.holders)
    d = delivery_factor(mu, len(stats.targets), t_remaining)
    return (stats.g_plus + stats.r_plus) * gain * d
