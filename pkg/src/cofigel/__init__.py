"""Collaborative-filtering-aware transfer scheduling over intermittent
device-to-device contacts: rating engine, utility estimator, deterministic
trace-driven simulator, baseline schedulers and evaluation metrics."""

__version__ = "0.1.0"

from .config import ConfigError, PRESETS, RunConfig, make_config, validate_config
from .ratings import (NEGATIVE, POSITIVE, PredictionResult, RatingEntry,
                      RatingMatrix, apply_rating, coverage_gain, merge,
                      predict_user, rank, similarity)
from .schedulers import SchedulerKind, TransferScheduler, global_matrix_sync
from .sim import Item, NodeState, SimResult, Simulation, TransferLog, run
from .traceio import (ContactEvent, GroundTruthRatings, ParseError,
                      RoleAssignment, assign_roles, eligible_nodes,
                      parse_contact_trace, parse_ratings, reduce_dataset,
                      synth_trace)
from .estimator import (ContactStats, ItemStats, QueuePositions, bootstrap_floor,
                      delivery_factor, mean_wait, rating_gain_bound, utility)

__all__ = [name for name in dir() if not name.startswith("_")]
