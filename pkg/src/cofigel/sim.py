"""Deterministic discrete-event replay of contacts, transfers and ratings.

Events (item publications, contacts, metric snapshots) are processed in
timestamp order with a total tie-break, so a (config, trace, ratings,
scheduler, seed) tuple always produces a bit-identical result. A contact is
handled atomically at its start time: metadata first (rating matrices and
queue-position matrices merge, contact histories update), then each side
pushes scheduler-ordered items while per-direction capacity lasts. Items
are never split across contacts; a transfer that does not fit in what is
left of the capacity is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics, ratings, traceio
from .config import ConfigError, RunConfig, validate_config
from .ratings import RatingMatrix
from .schedulers import SchedulerKind, TransferScheduler
from .traceio import ContactEvent, GroundTruthRatings
from .estimator import ContactStats, QueuePositions

PUBLISHER = "publisher"
SUBSCRIBER = "subscriber"
RELAY = "relay"

_EV_PUBLISH, _EV_CONTACT, _EV_SNAPSHOT = 0, 1, 2


@dataclass(frozen=True)
class Item:
    item_id: int
    publisher: int
    publish_time: float
    size: int
    expiry_time: float

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("item size must be positive")
        if self.expiry_time <= self.publish_time:
            raise ValueError("item must expire after publication")


class TransferLog:
    """Append-only record of transfers and first deliveries."""

    _COLUMNS = ["record", "time", "src", "dst", "item", "bytes", "user",
                "recommended"]

    def __init__(self):
        self.transfers: list[tuple] = []   # (time, src, dst, item, bytes)
        self.deliveries: list[tuple] = []  # (time, item, user, label_positive)

    def record_transfer(self, time, src, dst, item_id, size):
        self.transfers.append((time, src, dst, item_id, size))

    def record_delivery(self, time, item_id, user, label_positive):
        self.deliveries.append((time, item_id, user, bool(label_positive)))

    def to_text(self) -> str:
        lines = [f"T {t!r} {s} {d} {i} {b}" for t, s, d, i, b in self.transfers]
        lines += [f"D {t!r} {i} {u} {int(l)}" for t, i, u, l in self.deliveries]
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self._COLUMNS)
            for t, src, dst, iid, size in self.transfers:
                writer.writerow(["transfer", repr(float(t)), src, dst, iid,
                                 size, "", ""])
            for t, iid, user, label in self.deliveries:
                writer.writerow(["delivery", repr(float(t)), "", "", iid, "",
                                 user, int(label)])

    @classmethod
    def read_csv(cls, path) -> "TransferLog":
        import csv
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != cls._COLUMNS:
                raise ValueError(f"unexpected transfer-log header in {path}")
            for row in reader:
                if row[0] == "transfer":
                    log.record_transfer(float(row[1]), int(row[2]), int(row[3]),
                                        int(row[4]), int(row[5]))
                elif row[0] == "delivery":
                    log.record_delivery(float(row[1]), int(row[4]), int(row[6]),
                                        bool(int(row[7])))
                else:
                    raise ValueError(f"unknown record kind {row[0]!r} in {path}")
        return log


class NodeState:
    """One device: stored items, buffers, local matrices, contact history."""

    def __init__(self, node_id, role, mapped_user, buffer_capacity, matrix,
                 contact_stats):
        self.node_id = node_id
        self.role = role
        self.mapped_user = mapped_user
        self.buffer_capacity = buffer_capacity
        self.buffer_used = 0
        self.outbox: set = set()
        self.inbox: set = set()
        self.archive: set = set()
        self.matrix: RatingMatrix = matrix
        self.sigma = QueuePositions()
        self.contact_stats: ContactStats = contact_stats
        self.transfer_queue: list = []
        self._held: set = set()

    def holds(self, item_id) -> bool:
        return item_id in self._held

    def holdings(self) -> set:
        return self._held

    def store(self, item: Item, box: str):
        target = getattr(self, box)
        target.add(item.item_id)
        self._held.add(item.item_id)
        self.buffer_used += item.size

    def drop(self, item: Item):
        for box in (self.outbox, self.inbox, self.archive):
            box.discard(item.item_id)
        if item.item_id in self._held:
            self._held.discard(item.item_id)
            self.buffer_used -= item.size
        if item.item_id in self.transfer_queue:
            self.transfer_queue.remove(item.item_id)


@dataclass
class Snapshot:
    time: float
    positives_discovered: int
    coverage: float
    fcpp: float


@dataclass
class SimResult:
    scheduler: str
    seed: int
    log: TransferLog
    catalog: dict                  # item_id -> Item, everything published
    roles: traceio.RoleAssignment
    nodes: dict
    snapshots: list[Snapshot]
    global_matrix: RatingMatrix    # union of every revealed rating
    ground_truth: GroundTruthRatings
    duration_s: float
    warmup_s: float
    cooldown_s: float
    top_k: int


class Simulation:
    """Single run of one scheduler over one trace with one seed."""

    def __init__(self, config: RunConfig, contact_events, ground_truth,
                 scheduler_kind, seed: int, roles=None):
        diags = validate_config(config)
        if diags:
            raise ConfigError(diags)
        self.config = config
        self.kind = (SchedulerKind.parse(scheduler_kind)
                     if isinstance(scheduler_kind, str) else scheduler_kind)
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.now = 0.0
        self._given_events = contact_events
        self._given_gt = ground_truth
        self._given_roles = roles
        self._ready = False

    # -- setup ----------------------------------------------------------------

    def setup(self):
        cfg = self.config
        events = self._given_events
        if events is None:
            events = traceio.synth_trace(
                cfg.n_nodes, cfg.duration_s, cfg.synth_mean_intercontact_s,
                cfg.synth_mean_contact_s, self.rng)
        self.contacts = traceio.merge_overlaps(events)

        gt = self._given_gt
        if cfg.reduce_users is not None:
            gt = traceio.reduce_dataset(gt, cfg.reduce_users, cfg.reduce_items,
                                        self.rng)
        self.gt = gt

        node_ids = {n for ev in self.contacts for n in (ev.node_a, ev.node_b)}
        node_ids |= set(range(cfg.n_nodes))
        node_ids = sorted(node_ids)
        if self._given_roles is not None:
            self.roles = self._given_roles
            node_ids = sorted(set(node_ids) | set(self.roles.publishers)
                              | set(self.roles.subscribers)
                              | set(self.roles.relays))
        else:
            # Zero thresholds mean no filtering, which also lets contact-free
            # nodes (or an empty trace) take roles in desk-scale runs.
            eligibility = None
            min_bytes = cfg.effective_eligibility_min_bytes()
            if self.contacts and (cfg.eligibility_min_contacts > 0
                                  or min_bytes > 0):
                eligibility = traceio.eligible_nodes(
                    self.contacts, cfg.bandwidth_bytes_per_s,
                    cfg.eligibility_min_contacts, min_bytes)
            try:
                self.roles = traceio.assign_roles(
                    node_ids, cfg.publishers, cfg.subscribers, gt, self.rng,
                    eligibility)
            except ValueError as exc:
                raise ConfigError([str(exc)]) from None

        self.mapped_users = self.roles.mapped_users
        self.user_node = self.roles.user_node()
        # Matrices span the whole rating universe: unmapped users never rate
        # (their device is not in the trace) but they count toward n and can
        # still be predicted for once similarities exist.
        self.all_users = sorted(gt.users) if gt.users else self.mapped_users
        self.catalog: dict[int, Item] = {}
        self.published_ids: list[int] = []
        self.true_holders: dict[int, set] = {}
        self.delivered: set = set()
        self.positives_discovered = 0
        self.log = TransferLog()
        self.snapshots: list[Snapshot] = []
        self.global_matrix = RatingMatrix(users=self.all_users)
        self._merge_memo: dict = {}

        self.nodes: dict = {}
        for nid in node_ids:
            role = (PUBLISHER if nid in self.roles.publishers else
                    SUBSCRIBER if nid in self.roles.subscribers else RELAY)
            self.nodes[nid] = NodeState(
                nid, role, self.roles.subscribers.get(nid),
                cfg.buffer_bytes, RatingMatrix(users=self.all_users),
                ContactStats(cfg.lambda_prior_per_s,
                             cfg.effective_bytes_per_contact_prior()))

        self.scheduler = TransferScheduler(
            self.kind, self.catalog,
            n_users=len(self.all_users),
            top_k=cfg.top_k,
            bootstrap_fraction=cfg.bootstrap_fraction,
            user_node=self.user_node,
            ground_truth=self.gt,
            global_matrix=self.global_matrix,
            true_holders=self.true_holders)

        self._events = self._build_events()
        self._ready = True

    def _build_events(self):
        cfg = self.config
        events = []
        interval = 3600.0 / cfg.publish_rate_per_hour
        for pub in sorted(self.roles.publishers):
            pool = self.roles.publishers[pub]
            for j, pool_item in enumerate(pool):
                t = j * interval
                if t >= cfg.duration_s:
                    break
                events.append((t, _EV_PUBLISH, pub, j, pool_item))
        for ev in self.contacts:
            if ev.start >= cfg.duration_s:
                continue
            a, b = ev.pair()
            end = min(ev.end, cfg.duration_s)
            events.append((ev.start, _EV_CONTACT, a, b, end))
        t = 0.0
        while t < cfg.duration_s:
            events.append((t, _EV_SNAPSHOT, -1, -1, 0.0))
            t += cfg.report_interval_s
        events.append((cfg.duration_s, _EV_SNAPSHOT, -1, -1, 0.0))
        events.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
        return events

    # -- main loop --------------------------------------------------------------

    def execute(self) -> SimResult:
        if not self._ready:
            self.setup()
        for time, code, a, b, payload in self._events:
            self.now = time
            if code == _EV_PUBLISH:
                self._publish(a, payload, time)
            elif code == _EV_CONTACT:
                self.process_contact(self.nodes[a], self.nodes[b],
                                     ContactEvent(time, payload, a, b))
            else:
                self._snapshot(time)
        cfg = self.config
        return SimResult(
            scheduler=self.kind.value, seed=self.seed, log=self.log,
            catalog=self.catalog, roles=self.roles, nodes=self.nodes,
            snapshots=self.snapshots, global_matrix=self.global_matrix,
            ground_truth=self.gt, duration_s=cfg.duration_s,
            warmup_s=cfg.warmup_s, cooldown_s=cfg.cooldown_s, top_k=cfg.top_k)

    # -- event handlers -----------------------------------------------------------

    def _publish(self, pub_id, pool_item, now):
        cfg = self.config
        item = Item(item_id=pool_item, publisher=pub_id, publish_time=now,
                    size=cfg.item_size_bytes,
                    expiry_time=now + cfg.item_lifetime_s)
        self.catalog[item.item_id] = item
        self.published_ids.append(item.item_id)
        self.true_holders[item.item_id] = set()
        node = self.nodes[pub_id]
        self.expire_items(node, now)
        if self.enforce_buffer(node, item, now):
            node.store(item, "outbox")
            self.true_holders[item.item_id].add(pub_id)
            self._enqueue(node, item, now)

    def _enqueue(self, node, item, now):
        position = sum(self.catalog[i].size for i in node.transfer_queue)
        node.transfer_queue.append(item.item_id)
        node.sigma.record(item.item_id, node.node_id, position, now)

    def process_contact(self, node_a: NodeState, node_b: NodeState,
                        ev: ContactEvent):
        if node_a.node_id == node_b.node_id:
            raise ValueError("contact needs two distinct nodes")
        cfg = self.config
        now = ev.start
        self.expire_items(node_a, now)
        self.expire_items(node_b, now)
        raw_capacity = ev.capacity(cfg.bandwidth_bytes_per_s)
        node_a.contact_stats.observe(raw_capacity, now)
        node_b.contact_stats.observe(raw_capacity, now)
        if raw_capacity < cfg.metadata_bytes:
            return  # not even the metadata fits
        self._exchange_metadata(node_a, node_b, now)
        budget = raw_capacity - cfg.metadata_bytes
        for src, dst in ((node_a, node_b), (node_b, node_a)):
            self._push_direction(src, dst, budget, now)

    def _exchange_metadata(self, a: NodeState, b: NodeState, now):
        key = (a.node_id, b.node_id)
        state = (a.matrix.version, b.matrix.version,
                 a.sigma.version, b.sigma.version)
        if self._merge_memo.get(key) == state:
            return  # nothing new on either side since their last exchange
        a.matrix.merge_from(b.matrix)
        b.matrix.merge_from(a.matrix)
        a.sigma.merge_from(b.sigma)
        b.sigma.merge_from(a.sigma)
        self._merge_memo[key] = (a.matrix.version, b.matrix.version,
                                 a.sigma.version, b.sigma.version)

    def _label_matrix(self, node: NodeState) -> RatingMatrix:
        if self.kind is SchedulerKind.COFIGEL_3G:
            return self.global_matrix
        return node.matrix

    def _push_direction(self, src: NodeState, dst: NodeState, budget, now):
        queue = self.scheduler.order_full_queue(src, dst, now)
        src.transfer_queue = list(queue)
        position = 0
        for iid in queue:
            src.sigma.record(iid, src.node_id, position, now)
            position += self.catalog[iid].size
        label_state = None
        if dst.mapped_user is not None:
            label_state = self._label_matrix(dst).derived_state(self.config.top_k)
        residual = budget
        for iid in queue:
            if residual <= 0:
                break
            if dst.holds(iid):
                continue  # the peer already has it, walk on
            item = self.catalog[iid]
            if item.size > residual:
                continue  # atomic transfers: no partial carry-over
            if not self._receive(dst, item, now, label_state):
                continue
            residual -= item.size
            self.log.record_transfer(now, src.node_id, dst.node_id, iid,
                                     item.size)

    def _receive(self, dst: NodeState, item: Item, now, label_state) -> bool:
        if not self.enforce_buffer(dst, item, now):
            return False
        user = dst.mapped_user
        truth = self.gt.get(user, item.item_id) if user is not None else None
        if user is not None and (item.item_id, user) not in self.delivered:
            self.delivered.add((item.item_id, user))
            label = False
            if label_state is not None:
                row = label_state.user_index.get(user)
                col = label_state.item_index.get(item.item_id)
                if row is not None and col is not None:
                    label = bool(label_state.labels[row, col])
            self.log.record_delivery(now, item.item_id, user, label)
        if truth is not None:
            self.reveal_rating(dst, item, now)
            dst.store(item, "archive")  # watched and rated on arrival
        else:
            dst.store(item, "inbox")
        self.true_holders.setdefault(item.item_id, set()).add(dst.node_id)
        self._enqueue(dst, item, now)
        return True

    def reveal_rating(self, node: NodeState, item: Item, now):
        """Apply the hidden rating of (node's user, item), if there is one."""
        user = node.mapped_user
        if user is None:
            return
        value = self.gt.get(user, item.item_id)
        if value is None or node.matrix.is_rated(user, item.item_id):
            return
        ratings.apply_rating(node.matrix, user, item.item_id, value, now)
        if not self.global_matrix.is_rated(user, item.item_id):
            ratings.apply_rating(self.global_matrix, user, item.item_id, value, now)
            if value == 1:
                self.positives_discovered += 1

    def enforce_buffer(self, node: NodeState, incoming: Item, now) -> bool:
        """Make room for an incoming item; True when it can be stored.

        Expired items are dropped first. After that, stored items outside
        the archive may be evicted in ascending value order, but only while
        they are worth strictly less than the incoming item; otherwise the
        incoming item is the one that loses. Eviction is planned before it
        is committed, so a rejected item never costs stored ones.
        """
        if incoming.size > node.buffer_capacity:
            return False
        self.expire_items(node, now)
        free = node.buffer_capacity - node.buffer_used
        if incoming.size <= free:
            return True
        evictable = sorted(node.outbox | node.inbox)
        keyed = self.scheduler.aggregate_keys(node, evictable + [incoming.item_id],
                                              now)
        incoming_key = keyed[-1]
        candidates = sorted(
            ((k, iid) for k, iid in zip(keyed, evictable) if k < incoming_key))
        plan = []
        for key, iid in candidates:
            if incoming.size <= free:
                break
            plan.append(iid)
            free += self.catalog[iid].size
        if incoming.size > free:
            return False
        for iid in plan:
            self._remove_item(node, iid)
        return True

    def _remove_item(self, node: NodeState, item_id):
        node.drop(self.catalog[item_id])
        holders = self.true_holders.get(item_id)
        if holders is not None:
            holders.discard(node.node_id)

    def expire_items(self, node: NodeState, now):
        """Drop items at or past expiry from outbox and inbox (archive stays)."""
        dead = [iid for iid in (node.outbox | node.inbox)
                if self.catalog[iid].expiry_time <= now]
        for iid in sorted(dead):
            self._remove_item(node, iid)

    # -- snapshots ----------------------------------------------------------------

    def _snapshot(self, now):
        published = [iid for iid in self.published_ids]
        # Coverage is scoped to subscribed users; FCPP counts the whole
        # rating universe (predictions for unmapped users are still wins).
        cov = metrics.coverage(self.global_matrix, self.mapped_users, published)
        horizon = self.config.duration_s - self.config.cooldown_s
        window = [iid for iid in published
                  if self.catalog[iid].publish_time <= horizon]
        fcpp = metrics.fcpp(self.global_matrix, self.gt, self.all_users,
                            window, self.config.top_k)
        self.snapshots.append(Snapshot(now, self.positives_discovered, cov, fcpp))


def run(config: RunConfig, contact_events=None, ground_truth=None,
        scheduler_kind="CoFiGel", seed: int = 0, roles=None) -> SimResult:
    """Run one simulation; same arguments always give a bit-identical result.

    ``contact_events`` may be None to draw a synthetic trace from the
    config. ``ground_truth`` must be provided (parse_ratings loads one).
    ``roles`` pins the role assignment instead of drawing it from the seed.
    """
    if ground_truth is None:
        raise ValueError("ground_truth is required")
    sim = Simulation(config, contact_events, ground_truth, scheduler_kind,
                     seed, roles=roles)
    return sim.execute()
