import csv

import numpy as np
import pytest

from cofigel import PRESETS, RunConfig, make_config, validate_config
from cofigel.cli import main
from cofigel.config import ConfigError, load_config_file
from cofigel.metrics import parse_report


def write_ratings(path, n_users=12, n_items=20, seed=3):
    rng = np.random.default_rng(seed)
    lines = []
    for u in range(1, n_users + 1):
        items = rng.choice(range(1, n_items + 1), size=max(2, n_items // 2),
                           replace=False)
        for i in items:
            score = int(rng.integers(1, 6))
            lines.append(f"{u}\t{int(i)}\t{score}\t{800000000 + u}")
    path.write_text("\n".join(lines) + "\n")


def desk_config_text(ratings_path, out_dir):
    return f"""
# desk-scale run
ratings_path = {ratings_path}
n_nodes = 8
synth_mean_intercontact_s = 150
synth_mean_contact_s = 20
publishers = 2
subscribers = 4
publish_rate_per_hour = 120
duration_s = 1800
item_size_bytes = 1000
buffer_bytes = 100000
bandwidth_bytes_per_s = 200
item_lifetime_s = 900
warmup_s = 100
cooldown_s = 100
report_interval_s = 600
eligibility_min_contacts = 0
eligibility_min_bytes = 0
out_dir = {out_dir}
"""


class TestValidateConfig:
    def test_negative_buffer_flagged(self):
        cfg = RunConfig(buffer_bytes=-1, trace_path="x")
        diags = validate_config(cfg)
        assert any("buffer_bytes" in d for d in diags)

    def test_warmup_longer_than_run_flagged(self):
        cfg = RunConfig(trace_path="x", duration_s=3 * 3600.0,
                        warmup_s=4 * 3600.0)
        diags = validate_config(cfg)
        assert any("warmup" in d for d in diags)

    def test_presets_are_valid(self):
        for name in PRESETS:
            cfg = make_config(preset=name,
                              overrides=dict(trace_path="trace.txt"))
            assert validate_config(cfg) == []

    def test_unknown_scheduler_flagged(self):
        cfg = RunConfig(trace_path="x", schedulers=["Blah"])
        diags = validate_config(cfg)
        assert any("unknown scheduler" in d for d in diags)

    def test_missing_trace_source_flagged(self):
        diags = validate_config(RunConfig())
        assert any("synth_mean" in d for d in diags)


class TestConfigFile:
    def test_round_trip_keys(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("top_k = 7\nseeds = 0,2,4\nschedulers = CoFiGel,NoCoverage\n")
        overrides = load_config_file(p)
        assert overrides == {"top_k": 7, "seeds": [0, 2, 4],
                             "schedulers": ["CoFiGel", "NoCoverage"]}

    def test_seed_count_shorthand(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("seeds = 3\n")
        assert load_config_file(p) == {"seeds": [0, 1, 2]}

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("no_such_key = 5\n")
        with pytest.raises(ConfigError):
            load_config_file(p)

    def test_flags_override_file(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("top_k = 7\nout_dir = from_file\n")
        cfg = make_config(file_path=p, overrides={"out_dir": "from_flag"})
        assert cfg.top_k == 7
        assert cfg.out_dir == "from_flag"


class TestCliCommands:
    def test_validate_ok(self, tmp_path, capsys):
        ratings = tmp_path / "u.data"
        write_ratings(ratings)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(desk_config_text(ratings, tmp_path / "out"))
        assert main(["validate", "--config", str(cfg)]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_validate_bad_config_exits_one(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("buffer_bytes = -5\n")
        assert main(["validate", "--config", str(cfg)]) == 1
        assert "buffer_bytes" in capsys.readouterr().err

    def test_synth_writes_parseable_trace(self, tmp_path):
        out = tmp_path / "trace.txt"
        rc = main(["synth", "--nodes", "6", "--duration", "600",
                   "--mean-intercontact", "60", "--mean-contact", "10",
                   "--seed", "7", "--trace-out", str(out)])
        assert rc == 0
        from cofigel import parse_contact_trace
        events = parse_contact_trace(out)
        assert events and all(e.end <= 600.0 for e in events)

    def test_run_grid_writes_expected_files(self, tmp_path):
        ratings = tmp_path / "u.data"
        write_ratings(ratings)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(desk_config_text(ratings, tmp_path / "out"))
        rc = main(["run", "--config", str(cfg),
                   "--scheduler", "CoFiGel,NoCoverage", "--seeds", "3"])
        assert rc == 0
        out = tmp_path / "out"
        run_files = sorted(p.name for p in out.glob("*_seed*.csv")
                           if not p.name.endswith("_log.csv"))
        assert run_files == [
            "CoFiGel_seed0.csv", "CoFiGel_seed1.csv", "CoFiGel_seed2.csv",
            "NoCoverage_seed0.csv", "NoCoverage_seed1.csv",
            "NoCoverage_seed2.csv"]
        for name in run_files:
            parse_report(out / name)  # every file parses round-trip
        from cofigel import TransferLog
        for name in run_files:
            # the raw transfer log is emitted next to each report and parses
            TransferLog.read_csv(out / name.replace(".csv", "_log.csv"))
        with open(out / "summary.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "scheduler"
        assert [r[0] for r in rows[1:]] == ["CoFiGel", "NoCoverage"]
        assert all(r[1] == "3" for r in rows[1:])

    def test_run_without_ratings_is_config_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(desk_config_text("missing.dat", tmp_path / "out")
                       .replace("ratings_path = missing.dat\n", ""))
        rc = main(["run", "--config", str(cfg)])
        assert rc == 1

    def test_run_failure_leaves_marker_and_partial_outputs(self, tmp_path,
                                                           monkeypatch):
        ratings = tmp_path / "u.data"
        write_ratings(ratings)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(desk_config_text(ratings, tmp_path / "out"))

        import cofigel.cli as cli_mod
        real_run = cli_mod.sim.run
        calls = []

        def flaky(*args, **kwargs):
            calls.append(1)
            if len(calls) == 2:
                raise RuntimeError("disk fell over")
            return real_run(*args, **kwargs)

        monkeypatch.setattr(cli_mod.sim, "run", flaky)
        rc = main(["run", "--config", str(cfg), "--scheduler", "CoFiGel",
                   "--seeds", "3"])
        assert rc == 2
        out = tmp_path / "out"
        marker = out / "FAILED"
        assert marker.exists()
        assert "disk fell over" in marker.read_text()
        # the run that succeeded before the failure is retained
        assert (out / "CoFiGel_seed0.csv").exists()

    def test_unknown_preset_is_config_error(self, capsys):
        assert main(["validate", "--preset", "nope"]) == 1
        assert "unknown preset" in capsys.readouterr().err
