"""Run configuration: key=value files, presets, validation.

A config file fully determines a run. Lines are ``key = value``; '#' starts
a comment. Two presets mirror the vehicular-scale and rollerblade-scale
parameter sets used in the evaluation; command-line flags override both.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field


class ConfigError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass
class RunConfig:
    # contact source: a trace file, or a synthetic trace over n_nodes
    trace_path: str | None = None
    n_nodes: int = 0
    synth_mean_intercontact_s: float | None = None
    synth_mean_contact_s: float | None = None
    # ratings source and optional reduction
    ratings_path: str | None = None
    reduce_users: int | None = None
    reduce_items: int | None = None
    binarize_threshold: int = 4
    # roles and publishing
    publishers: int = 1
    subscribers: int = 1
    publish_rate_per_hour: float = 20.0
    # device and link parameters
    duration_s: float = 21600.0
    item_size_bytes: int = 11_000_000
    buffer_bytes: int = 2_000_000_000
    bandwidth_bytes_per_s: float = 375_000.0
    item_lifetime_s: float = 7200.0
    metadata_bytes: int = 0
    # measurement windows
    warmup_s: float = 0.0
    cooldown_s: float = 0.0
    report_interval_s: float = 600.0
    # recommender and estimator knobs
    top_k: int = 10
    bootstrap_fraction: float = 0.01
    lambda_prior_per_s: float = 1.0 / 600.0
    bytes_per_contact_prior: float | None = None  # default: one item size
    # node eligibility for roles
    eligibility_min_contacts: int = 10
    eligibility_min_bytes: float | None = None    # default: 10 item sizes
    # experiment grid
    schedulers: list[str] = field(default_factory=lambda: ["CoFiGel"])
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "out"

    def effective_bytes_per_contact_prior(self) -> float:
        if self.bytes_per_contact_prior is not None:
            return self.bytes_per_contact_prior
        return float(self.item_size_bytes)

    def effective_eligibility_min_bytes(self) -> float:
        if self.eligibility_min_bytes is not None:
            return self.eligibility_min_bytes
        return 10.0 * self.item_size_bytes


# Table-scale presets: vehicular (taxi) and rollerblade-tour shaped runs.
PRESETS: dict[str, dict] = {
    "sancab-like": dict(
        publishers=22,
        subscribers=56,
        publish_rate_per_hour=20.0,
        duration_s=6 * 3600.0,
        item_size_bytes=11_000_000,
        buffer_bytes=2_000_000_000,
        bandwidth_bytes_per_s=375_000.0,
        item_lifetime_s=2 * 3600.0,
        warmup_s=3600.0,
        cooldown_s=3600.0,
        reduce_users=500,
        reduce_items=900,
    ),
    "rollernet-like": dict(
        publishers=10,
        subscribers=30,
        publish_rate_per_hour=40.0,
        duration_s=3 * 3600.0,
        item_size_bytes=15_000_000,
        buffer_bytes=1_000_000_000,
        bandwidth_bytes_per_s=375_000.0,
        item_lifetime_s=75 * 60.0,
        warmup_s=3600.0,
        cooldown_s=1800.0,
        reduce_users=500,
        reduce_items=900,
    ),
}

_LIST_FIELDS = {"schedulers", "seeds"}


def _field_types():
    return {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    if name in _LIST_FIELDS:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if name == "seeds":
            values = [int(p) for p in parts]
            # A single integer N is shorthand for seeds 0..N-1.
            if len(values) == 1 and "," not in raw:
                return list(range(values[0]))
            return values
        return parts
    ftype = _field_types()[name]
    if "int" in ftype:
        return int(raw)
    if "float" in ftype:
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    """Parse a key=value config file into an override dict."""
    known = _field_types()
    overrides: dict = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError([f"{path}:{line_no}: expected key = value"])
            key, raw = (s.strip() for s in text.split("=", 1))
            if key not in known:
                raise ConfigError([f"{path}:{line_no}: unknown key {key!r}"])
            try:
                overrides[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ConfigError(
                    [f"{path}:{line_no}: bad value for {key}: {exc}"]) from None
    return overrides


def make_config(preset: str | None = None, file_path=None,
                overrides: dict | None = None) -> RunConfig:
    """Layer preset, config file and explicit overrides, in that order."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError([f"unknown preset {preset!r} "
                               f"(known: {', '.join(sorted(PRESETS))})"])
        values.update(PRESETS[preset])
    if file_path is not None:
        values.update(load_config_file(file_path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def validate_config(config: RunConfig) -> list[str]:
    """Empty list iff the config can run; each diagnostic names its key."""
    diags = []

    def positive(name):
        if getattr(config, name) <= 0:
            diags.append(f"{name} must be positive")

    for name in ("duration_s", "item_size_bytes", "buffer_bytes",
                 "bandwidth_bytes_per_s", "item_lifetime_s",
                 "publish_rate_per_hour", "report_interval_s",
                 "lambda_prior_per_s"):
        positive(name)
    if config.warmup_s < 0 or config.cooldown_s < 0:
        diags.append("warmup_s and cooldown_s must be >= 0")
    elif config.warmup_s + config.cooldown_s >= config.duration_s:
        diags.append("warmup_s + cooldown_s must be smaller than duration_s")
    if config.metadata_bytes < 0:
        diags.append("metadata_bytes must be >= 0")
    if config.item_size_bytes > config.buffer_bytes:
        diags.append("item_size_bytes exceeds buffer_bytes: nothing can be stored")
    if config.top_k < 1:
        diags.append("top_k must be >= 1")
    if not (0 < config.bootstrap_fraction <= 1):
        diags.append("bootstrap_fraction must be in (0, 1]")
    if config.publishers < 1:
        diags.append("publishers must be >= 1")
    if config.subscribers < 1:
        diags.append("subscribers must be >= 1")
    if config.trace_path is None:
        if config.n_nodes < 2:
            diags.append("n_nodes must be >= 2 when no trace_path is given")
        if config.synth_mean_intercontact_s is None or \
                config.synth_mean_contact_s is None:
            diags.append("synth_mean_intercontact_s and synth_mean_contact_s "
                         "are required when no trace_path is given")
        elif min(config.synth_mean_intercontact_s,
                 config.synth_mean_contact_s) <= 0:
            diags.append("synthetic trace parameters must be positive")
    if (config.reduce_users is None) != (config.reduce_items is None):
        diags.append("reduce_users and reduce_items must be set together")
    if config.eligibility_min_contacts < 0:
        diags.append("eligibility_min_contacts must be >= 0")
    if not config.seeds:
        diags.append("seeds must not be empty")
    if not config.schedulers:
        diags.append("schedulers must not be empty")
    else:
        from .schedulers import SchedulerKind
        for name in config.schedulers:
            try:
                SchedulerKind.parse(name)
            except ValueError as exc:
                diags.append(str(exc))
    return diags
