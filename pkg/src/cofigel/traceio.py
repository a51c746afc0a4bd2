"""Contact traces, rating datasets, role assignment, synthetic contacts.

Contact traces are plain text: one ``start end node_a node_b`` line per
contact, '#' starts a comment. Rating files use the classic 4-column layout
``user item rating timestamp`` (whitespace separated, ratings on a 1-5
scale) and are binarized on load.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParseError(Exception):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class ContactEvent:
    """Bidirectional link between two nodes over [start, end) seconds."""

    start: float
    end: float
    node_a: int
    node_b: int

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("contact must end after it starts")
        if self.node_a == self.node_b:
            raise ValueError("contact needs two distinct nodes")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def capacity(self, bandwidth_bytes_per_s: float) -> float:
        return self.duration * bandwidth_bytes_per_s

    def pair(self):
        a, b = self.node_a, self.node_b
        return (a, b) if a <= b else (b, a)


class GroundTruthRatings:
    """Binary user-item ratings used as the hidden truth of a simulation."""

    def __init__(self, rows=None, users=(), items=()):
        self.rows: dict = {}
        self.users: set = set(users)
        self.items: set = set(items)
        self._pos_by_item: dict | None = None
        for user, item, value in rows or ():
            self.add(user, item, value)

    def add(self, user, item, value):
        if (user, item) in self.rows:
            raise ValueError(f"duplicate rating for ({user!r}, {item!r})")
        if value not in (0, 1):
            raise ValueError("ratings are binary")
        self.rows[(user, item)] = value
        self.users.add(user)
        self.items.add(item)
        self._pos_by_item = None

    def get(self, user, item):
        return self.rows.get((user, item))

    def positive_users(self, item) -> set:
        if self._pos_by_item is None:
            table: dict = {}
            for (user, it), value in self.rows.items():
                if value == 1:
                    table.setdefault(it, set()).add(user)
            self._pos_by_item = table
        return self._pos_by_item.get(item, set())

    def __len__(self):
        return len(self.rows)


@dataclass
class Eligibility:
    """Thresholds a trace node must clear to be given a publisher or
    subscriber role; weakly connected nodes stay relays."""

    min_contacts: int
    min_bytes: float
    eligible: set

    def describe(self) -> str:
        return (f">= {self.min_contacts} contacts and "
                f">= {self.min_bytes:.0f} contact bytes")


@dataclass
class RoleAssignment:
    publishers: dict = field(default_factory=dict)   # node -> item pool (list)
    subscribers: dict = field(default_factory=dict)  # node -> user
    relays: list = field(default_factory=list)

    @property
    def mapped_users(self):
        return sorted(self.subscribers.values())

    def user_node(self):
        return {user: node for node, user in self.subscribers.items()}


def parse_contact_trace(path) -> list[ContactEvent]:
    """Read a contact trace file; sorted by start, overlaps per pair merged."""
    raw = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise ParseError(path, line_no, f"expected 4 fields, got {len(parts)}")
            try:
                start, end = float(parts[0]), float(parts[1])
                node_a, node_b = int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise ParseError(path, line_no, f"non-numeric field: {exc}") from None
            if end <= start:
                raise ParseError(path, line_no, f"end {end} <= start {start}")
            if node_a == node_b:
                raise ParseError(path, line_no, f"self-contact of node {node_a}")
            raw.append(ContactEvent(start, end, node_a, node_b))
    return merge_overlaps(raw)


def merge_overlaps(events) -> list[ContactEvent]:
    """Coalesce overlapping or touching contacts of the same node pair."""
    by_pair: dict = {}
    for ev in events:
        by_pair.setdefault(ev.pair(), []).append(ev)
    merged = []
    for (a, b), group in by_pair.items():
        group.sort(key=lambda e: (e.start, e.end))
        cur_start, cur_end = group[0].start, group[0].end
        for ev in group[1:]:
            if ev.start <= cur_end:
                cur_end = max(cur_end, ev.end)
            else:
                merged.append(ContactEvent(cur_start, cur_end, a, b))
                cur_start, cur_end = ev.start, ev.end
        merged.append(ContactEvent(cur_start, cur_end, a, b))
    merged.sort(key=lambda e: (e.start, e.end, e.node_a, e.node_b))
    return merged


def serialize_contact_trace(events, path) -> None:
    with open(path, "w") as fh:
        fh.write("# start_seconds end_seconds node_a node_b\n")
        for ev in events:
            fh.write(f"{ev.start!r} {ev.end!r} {ev.node_a} {ev.node_b}\n")


def parse_ratings(path, threshold: int = 4) -> GroundTruthRatings:
    """Load a 1-5 scale rating file, binarized at ``threshold`` (>= is 1)."""
    gt = GroundTruthRatings()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) < 3:
                raise ParseError(path, line_no, f"expected >= 3 fields, got {len(parts)}")
            try:
                user, item, score = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ParseError(path, line_no, f"non-numeric field: {exc}") from None
            try:
                gt.add(user, item, 1 if score >= threshold else 0)
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from None
    return gt


def reduce_dataset(gt: GroundTruthRatings, n_users: int, n_items: int,
                   rng: np.random.Generator) -> GroundTruthRatings:
    """Uniform random sub-universe of users and items, rows filtered to it."""
    if n_users > len(gt.users) or n_items > len(gt.items):
        raise ValueError(
            f"requested {n_users} users / {n_items} items from a dataset with "
            f"{len(gt.users)} users / {len(gt.items)} items")
    users = _sample(sorted(gt.users), n_users, rng)
    items = _sample(sorted(gt.items), n_items, rng)
    reduced = GroundTruthRatings(users=users, items=items)
    for (user, item), value in gt.rows.items():
        if user in reduced.users and item in reduced.items:
            reduced.rows[(user, item)] = value
    return reduced


def _sample(population, size, rng):
    idx = rng.choice(len(population), size=size, replace=False)
    return {population[int(i)] for i in idx}


def eligible_nodes(events, bandwidth_bytes_per_s: float, min_contacts: int,
                   min_bytes: float) -> Eligibility:
    """Nodes with enough contacts and cumulative contact bytes in the trace."""
    contacts: dict = {}
    total: dict = {}
    for ev in events:
        cap = ev.capacity(bandwidth_bytes_per_s)
        for node in (ev.node_a, ev.node_b):
            contacts[node] = contacts.get(node, 0) + 1
            total[node] = total.get(node, 0.0) + cap
    ok = {n for n in contacts
          if contacts[n] >= min_contacts and total[n] >= min_bytes}
    return Eligibility(min_contacts, min_bytes, ok)


def assign_roles(node_ids, n_publishers: int, n_subscribers: int,
                 gt: GroundTruthRatings, rng: np.random.Generator,
                 eligibility: Eligibility | None = None) -> RoleAssignment:
    """Randomly pick publishers and subscribers among eligible nodes.

    Items are partitioned uniformly at random across publisher pools; users
    are sampled injectively onto subscribers. Everything else relays.
    """
    node_ids = sorted(node_ids)
    pool = node_ids if eligibility is None else sorted(
        set(node_ids) & eligibility.eligible)
    need = n_publishers + n_subscribers
    if len(pool) < need:
        rule = eligibility.describe() if eligibility else "no threshold"
        raise ValueError(
            f"need {need} role nodes but only {len(pool)} are eligible "
            f"({rule})")
    if n_subscribers > len(gt.users):
        raise ValueError(
            f"{n_subscribers} subscribers but dataset has {len(gt.users)} users")
    chosen = [pool[int(i)] for i in
              rng.choice(len(pool), size=need, replace=False)]
    publishers, subscribers = chosen[:n_publishers], chosen[n_publishers:]

    items = sorted(gt.items)
    rng.shuffle(items)
    pools: dict = {node: [] for node in publishers}
    for idx, item in enumerate(items):
        pools[publishers[idx % n_publishers]].append(item)

    users = _sample(sorted(gt.users), n_subscribers, rng)
    mapping = dict(zip(subscribers, sorted(users)))

    relays = [n for n in node_ids
              if n not in pools and n not in mapping]
    return RoleAssignment(publishers=pools, subscribers=mapping, relays=relays)


def synth_trace(n_nodes: int, duration: float, mean_intercontact: float,
                mean_contact_duration: float, rng: np.random.Generator,
                ) -> list[ContactEvent]:
    """Exponential inter-contact gaps and durations per node pair."""
    if min(n_nodes, duration, mean_intercontact, mean_contact_duration) <= 0:
        raise ValueError("all synthetic trace parameters must be positive")
    events = []
    for a in range(n_nodes):
        for b in range(a + 1, n_nodes):
            t = rng.exponential(mean_intercontact)
            while t < duration:
                end = min(t + rng.exponential(mean_contact_duration), duration)
                if end > t:
                    events.append(ContactEvent(t, end, a, b))
                t = end + rng.exponential(mean_intercontact)
    events.sort(key=lambda e: (e.start, e.end, e.node_a, e.node_b))
    return events
