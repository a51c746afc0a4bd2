"""Evaluation quantities computed from logs and merged rating knowledge.

Coverage and the fraction of correctly predicted positives (FCPP) are
evaluated on the union of every device's knowledge, which the simulator
maintains incrementally as its global matrix. User-satisfaction metrics
(precision, useful items per user, satisfied users, delivery latency) are
restricted to items published inside the measurement window: after warmup
and before the cooldown tail, so late publications cannot bias them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .ratings import RatingMatrix


@dataclass
class MetricsReport:
    snapshots: list = field(default_factory=list)  # (t, positives, coverage, fcpp)
    precision: float = 0.0
    avg_positive_per_user: float = 0.0
    users_satisfied: int = 0
    latency_p50: float = 0.0
    latency_p90: float = 0.0
    latency_p99: float = 0.0


def coverage(matrix: RatingMatrix, users, items) -> float:
    """Rated-or-predictable fraction of the (users x published items) grid."""
    if not items or not users:
        return 0.0
    state = matrix.derived_state(1)  # statuses do not depend on k
    rows = [state.user_index[u] for u in users if u in state.user_index]
    cols = [state.item_index[i] for i in items if i in state.item_index]
    if not rows or not cols:
        return 0.0
    grid = np.ix_(rows, cols)
    covered = int(((state.values[grid] >= 0) | (state.predictable[grid] > 0)).sum())
    return covered / (len(users) * len(items))


def fcpp(matrix: RatingMatrix, gt, users, items, k) -> float:
    """Correctly-predicted-positive plus observed-positive pairs, as a
    fraction of all hidden positive ratings over the given items."""
    total_pos = 0
    hit = 0
    user_set = set(users)
    state = matrix.derived_state(k) if items else None
    for iid in items:
        positives = gt.positive_users(iid) & user_set
        total_pos += len(positives)
        if state is None:
            continue
        col = state.item_index.get(iid)
        for user in positives:
            row = state.user_index.get(user)
            if row is None or col is None:
                continue
            if state.values[row, col] == 1 or state.labels[row, col]:
                hit += 1
    if total_pos == 0:
        return 0.0
    return hit / total_pos


def precision(deliveries, gt, items) -> float:
    """Of recommended deliveries (positive label on arrival), the fraction
    the user truly likes. 0 when nothing was recommended."""
    item_set = set(items)
    recommended = 0
    liked = 0
    for _, item_id, user, label_positive in deliveries:
        if item_id not in item_set or not label_positive:
            continue
        recommended += 1
        if gt.get(user, item_id) == 1:
            liked += 1
    if recommended == 0:
        return 0.0
    return liked / recommended


def recall_measures(deliveries, gt, users, items):
    """(average liked items delivered per user, users with at least one)."""
    item_set = set(items)
    per_user: dict = {}
    for _, item_id, user, _label in deliveries:
        if item_id in item_set and gt.get(user, item_id) == 1:
            per_user[user] = per_user.get(user, 0) + 1
    if not users:
        return 0.0, 0
    total = sum(per_user.values())
    return total / len(users), len(per_user)


def latency_percentiles(deliveries, catalog, items):
    """Nearest-rank 50/90/99th percentiles of publish-to-delivery delay."""
    item_set = set(items)
    lags = sorted(t - catalog[iid].publish_time
                  for t, iid, _u, _l in deliveries if iid in item_set)
    if not lags:
        return 0.0, 0.0, 0.0

    def pct(p):
        rank = max(1, int(np.ceil(p / 100.0 * len(lags))))
        return float(lags[rank - 1])

    return pct(50), pct(90), pct(99)


def measurement_items(result) -> list:
    """Items published after warmup and before the cooldown tail."""
    lo = result.warmup_s
    hi = result.duration_s - result.cooldown_s
    return [iid for iid, item in result.catalog.items()
            if lo <= item.publish_time <= hi]


def build_report(result) -> MetricsReport:
    """Assemble the full report for one simulation result."""
    users = result.roles.mapped_users
    window = measurement_items(result)
    gt = result.ground_truth
    avg_pos, satisfied = recall_measures(result.log.deliveries, gt, users, window)
    p50, p90, p99 = latency_percentiles(result.log.deliveries, result.catalog,
                                        window)
    return MetricsReport(
        snapshots=[(s.time, s.positives_discovered, s.coverage, s.fcpp)
                   for s in result.snapshots],
        precision=precision(result.log.deliveries, gt, window),
        avg_positive_per_user=avg_pos,
        users_satisfied=satisfied,
        latency_p50=p50,
        latency_p90=p90,
        latency_p99=p99,
    )


_COLUMNS = ["record", "t", "positive_ratings_discovered", "coverage", "fcpp",
            "precision", "avg_positive_items_per_user",
            "users_with_useful_item", "latency_p50_s", "latency_p90_s",
            "latency_p99_s"]


def emit_report(report: MetricsReport, path) -> None:
    """Write one snapshot row per reporting interval plus a summary row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for t, positives, cov, fc in report.snapshots:
            writer.writerow(["snapshot", repr(float(t)), positives,
                             repr(cov), repr(fc), "", "", "", "", "", ""])
        last = report.snapshots[-1] if report.snapshots else (0.0, 0, 0.0, 0.0)
        writer.writerow([
            "summary", repr(float(last[0])), last[1], repr(last[2]),
            repr(last[3]), repr(report.precision),
            repr(report.avg_positive_per_user), report.users_satisfied,
            repr(report.latency_p50), repr(report.latency_p90),
            repr(report.latency_p99)])


def parse_report(path) -> MetricsReport:
    """Read back a CSV produced by emit_report."""
    report = MetricsReport()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _COLUMNS:
            raise ValueError(f"unexpected report header in {path}")
        for row in reader:
            kind = row[0]
            if kind == "snapshot":
                report.snapshots.append(
                    (float(row[1]), int(row[2]), float(row[3]), float(row[4])))
            elif kind == "summary":
                report.precision = float(row[5])
                report.avg_positive_per_user = float(row[6])
                report.users_satisfied = int(row[7])
                report.latency_p50 = float(row[8])
                report.latency_p90 = float(row[9])
                report.latency_p99 = float(row[10])
            else:
                raise ValueError(f"unknown record kind {kind!r} in {path}")
    return report
