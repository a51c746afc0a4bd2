"""Shared scenarios for the acceptance suite.

The differential scenario compares schedulers on a 30-node synthetic world:
a ratings file in the classic 4-column format with planted structure
(broadly liked hits, five taste clusters, widely watched but disliked
filler), reduced to 100 users x 200 items, under bandwidth tight enough
that well under a third of the item x subscriber grid is ever reached.
"""

import tempfile
from pathlib import Path

import numpy as np

from cofigel import RunConfig, parse_ratings

N_CLUSTERS = 5
FILE_USERS = 240
FILE_ITEMS = 400
SEEDS = [0, 1, 2, 3, 4]

_cache: dict = {}


def write_differential_ratings(path, seed=20240811):
    """1-5 scale ratings with hits, genre clusters and watched-junk tiers."""
    rng = np.random.default_rng(seed)
    lines = []

    def emit(user, item, liked):
        if liked:
            score = 4 if rng.random() < 0.35 else 5
        else:
            score = int(rng.integers(1, 4))
        lines.append(f"{user}\t{item}\t{score}\t{875000000 + user}")

    for user in range(1, FILE_USERS + 1):
        cluster = (user - 1) % N_CLUSTERS
        for item in range(1, FILE_ITEMS + 1):
            tier = item % 10
            genre = (item - 1) % N_CLUSTERS
            if tier == 1:  # broad hits: nearly everyone watches and likes
                if rng.random() < 0.95:
                    emit(user, item, rng.random() < 0.92)
            elif tier in (2, 3, 4):  # genre items: loved inside the cluster
                if genre == cluster:
                    if rng.random() < 0.85:
                        emit(user, item, True)
                elif rng.random() < 0.35:
                    emit(user, item, False)
            else:  # filler: often watched, rarely liked
                if rng.random() < 0.5:
                    emit(user, item, rng.random() < 0.05)
    Path(path).write_text("\n".join(lines) + "\n")


def load_ground_truth():
    """Parse (and cache) the differential ratings file."""
    if "gt" not in _cache:
        path = Path(tempfile.mkdtemp(prefix="cofigel-scenario-")) / "ratings.data"
        write_differential_ratings(path)
        _cache["gt"] = parse_ratings(path, threshold=4)
    return _cache["gt"]


def differential_config(out_dir="out") -> RunConfig:
    """30 nodes, 200 items, 100 users, bandwidth-starved contacts."""
    return RunConfig(
        n_nodes=30,
        synth_mean_intercontact_s=1200.0,
        synth_mean_contact_s=25.0,
        reduce_users=100,
        reduce_items=200,
        publishers=6,
        subscribers=16,
        publish_rate_per_hour=20.0,
        duration_s=10800.0,
        item_size_bytes=5_000_000,
        buffer_bytes=150_000_000,
        bandwidth_bytes_per_s=150_000.0,
        item_lifetime_s=1800.0,
        warmup_s=600.0,
        cooldown_s=1800.0,
        report_interval_s=1800.0,
        top_k=20,
        eligibility_min_contacts=2,
        eligibility_min_bytes=5_000_000.0,
        lambda_prior_per_s=0.02,
        bytes_per_contact_prior=3_000_000.0,
        out_dir=out_dir,
    )


def write_preset_scale_ratings(path, n_users=600, n_items=1000, seed=11):
    """A sparse random ratings file large enough for the preset reductions."""
    rng = np.random.default_rng(seed)
    lines = []
    for user in range(1, n_users + 1):
        rated = rng.choice(n_items, size=20, replace=False)
        for idx in rated:
            score = int(rng.integers(1, 6))
            lines.append(f"{user}\t{int(idx) + 1}\t{score}\t{880000000 + user}")
    Path(path).write_text("\n".join(lines) + "\n")


def propagation_fraction(result) -> float:
    """Delivered (item, subscriber) pairs over the full epidemic grid."""
    n_items = len(result.catalog)
    n_subs = len(result.roles.subscribers)
    if n_items == 0 or n_subs == 0:
        return 0.0
    return len({(i, u) for _, i, u, _ in result.log.deliveries}) / (
        n_items * n_subs)
