from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from vranrl.cli import main as cli_main
from vranrl.domain import KpiTargets
from vranrl.harness import (
    CSV_COLUMNS,
    ConfigError,
    convergence_cutoff,
    parse_scenario,
    read_metrics_csv,
    run_experiment,
    summarize_rows,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def twolink_cfg():
    return parse_scenario(CONFIGS / "twolink.cfg")


class TestParse:
    def test_twolink_loads(self, twolink_cfg):
        assert len(twolink_cfg.links) == 2
        assert len(twolink_cfg.traffic) == 5
        assert twolink_cfg.decision_slots == 1
        assert twolink_cfg.targets == KpiTargets(loss=0.01, latency_s=0.1)
        lte = twolink_cfg.links[0]
        assert lte.mcs_count == 29 and lte.level_count == 10
        assert lte.rho_max == 50.0
        wlan = twolink_cfg.links[1]
        assert wlan.mcs_count == 8 and wlan.kind == "airtime"

    def test_threelink_accepted_and_runs(self):
        cfg = parse_scenario(CONFIGS / "threelink.cfg")
        assert len(cfg.links) == 3
        assert len(cfg.traffic) == 7
        loads = sorted(t.load_mbps for t in cfg.traffic)
        assert loads == [1.0, 1.0, 1.0, 1.0, 3.0, 3.0, 3.0]
        rows = run_experiment(replace(cfg, periods=20))
        assert len(rows) == 7 * 20
        link_col = CSV_COLUMNS.index("link")
        assert {r[link_col] for r in rows} <= {0, 1, 2}

    def test_malformed_names_offender(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[sim]\nperiods = 10\n\n[links]\nlte = rb fifty 0.5\n")
        with pytest.raises(ConfigError) as e:
            parse_scenario(bad)
        assert "links" in str(e.value) and "lte" in str(e.value)

    def test_missing_table_section(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text(
            "[sim]\nperiods = 10\n\n[links]\nlte = rb 50 0.5\n\n[mts]\nmt1 = 1 1250 cbr uniform 8 21\n"
        )
        with pytest.raises(ConfigError) as e:
            parse_scenario(bad)
        assert "mcs.lte" in str(e.value)

    def test_bad_agent_kind(self, tmp_path, twolink_cfg):
        text = (CONFIGS / "twolink.cfg").read_text().replace(
            "kind = sarsa", "kind = dqn"
        )
        bad = tmp_path / "bad.cfg"
        bad.write_text(text)
        with pytest.raises(ConfigError) as e:
            parse_scenario(bad)
        assert "dqn" in str(e.value)


def tiny(cfg, periods=40, seed=3):
    return replace(cfg, periods=periods, seed=seed)


class TestRunExperiment:
    def test_row_count_and_shape(self, twolink_cfg):
        cfg = tiny(twolink_cfg)
        rows = run_experiment(cfg)
        assert len(rows) == 5 * 40  # K MTs x slots
        assert all(len(r) == len(CSV_COLUMNS) for r in rows)

    def test_byte_identical_reruns(self, twolink_cfg, tmp_path):
        cfg = tiny(twolink_cfg)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_experiment(cfg, out_csv=a)
        run_experiment(cfg, out_csv=b)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_stream(self, twolink_cfg):
        r1 = run_experiment(tiny(twolink_cfg, seed=3))
        r2 = run_experiment(tiny(twolink_cfg, seed=4))
        assert r1 != r2

    def test_csv_roundtrip(self, twolink_cfg, tmp_path):
        cfg = tiny(twolink_cfg)
        p = tmp_path / "m.csv"
        rows = run_experiment(cfg, out_csv=p)
        assert read_metrics_csv(p) == rows

    def test_snapshot_roundtrip_resumes_epsilon(self, twolink_cfg, tmp_path):
        cfg = tiny(twolink_cfg)
        snap = tmp_path / "agent.json"
        run_experiment(cfg, snapshot_out=snap)
        rows = run_experiment(tiny(twolink_cfg, periods=5), snapshot_in=snap)
        eps_col = CSV_COLUMNS.index("epsilon")
        assert rows[0][eps_col] == pytest.approx(0.5 * 0.999**41)

    def test_snapshot_transfers_across_run_seeds(self, twolink_cfg, tmp_path):
        # tile-coder geometry is run-seed independent, so pre-training under
        # one seed must load cleanly into a differently seeded run
        snap = tmp_path / "agent.json"
        run_experiment(tiny(twolink_cfg, seed=3), snapshot_out=snap)
        rows = run_experiment(
            tiny(twolink_cfg, periods=5, seed=1234), snapshot_in=snap
        )
        assert len(rows) == 5 * 5

    def test_static_policy_runs(self, tmp_path):
        cfg = tiny(parse_scenario(CONFIGS / "lte_comparison_static.cfg"))
        rows = run_experiment(cfg)
        assert len(rows) == 2 * 40
        mcs_col = CSV_COLUMNS.index("mcs")
        assert {r[mcs_col] for r in rows} != {0}


class TestSummarize:
    def synthetic_rows(self):
        # 2 MTs x 4 periods x 1 slot, hand-checkable numbers
        rows = []
        rewards = {0: [1.0, 1.0, 2.0, 2.0], 1: [0.0, 1.0, 1.0, 2.0]}
        for p in range(4):
            for mt in (0, 1):
                rows.append(
                    (
                        p, p, mt, rewards[mt][p], 0.5, 0.5,
                        0.0 if p >= 2 else 0.5,      # x_o ok post-cutoff
                        0.05 if mt == 0 else 0.2,    # mt 1 violates latency
                        1.0, 0, 5, 1, 0.2, 0.1, 0.5, 0.0,
                    )
                )
        return rows

    def test_hand_computed_means(self):
        s = summarize_rows(self.synthetic_rows(), cutoff=2)
        assert s.per_mt_mean_reward[0] == pytest.approx(1.5)
        assert s.per_mt_mean_reward[1] == pytest.approx(1.0)
        assert s.best_mt == 0 and s.worst_mt == 1
        assert s.compliance == pytest.approx(0.5)  # mt 1 latency violates
        assert s.loss_compliance == pytest.approx(1.0)
        assert s.mean_latency_s == pytest.approx(0.125)
        assert s.per_mt_throughput_mbps[0] == pytest.approx(1.0)
        assert s.link_allocated_utilization[0] == pytest.approx(0.4)
        assert s.link_used_utilization[0] == pytest.approx(0.2)

    def test_tie_breaks_to_lowest_mt(self):
        rows = [
            (0, 0, 1, 1.0, 0.5, 0.5, 0.0, 0.05, 1.0, 0, 5, 1, 0.2, 0.1, 0.5, 0.0),
            (0, 0, 0, 1.0, 0.5, 0.5, 0.0, 0.05, 1.0, 0, 5, 1, 0.2, 0.1, 0.5, 0.0),
            (1, 1, 1, 1.0, 0.5, 0.5, 0.0, 0.05, 1.0, 0, 5, 1, 0.2, 0.1, 0.5, 0.0),
            (1, 1, 0, 1.0, 0.5, 0.5, 0.0, 0.05, 1.0, 0, 5, 1, 0.2, 0.1, 0.5, 0.0),
        ]
        s = summarize_rows(rows, cutoff=1)
        assert s.best_mt == 0 and s.worst_mt == 0

    def test_cutoff_beyond_run_errors(self):
        with pytest.raises(ValueError):
            summarize_rows(self.synthetic_rows(), cutoff=4)

    def test_mcs_histogram_fractions(self):
        s = summarize_rows(self.synthetic_rows(), cutoff=0)
        assert s.mcs_histogram[0] == {5: 1.0}
        assert s.resource_histogram[0] == {0.2: 1.0}


class TestConvergenceCutoff:
    def test_detects_flattening_series(self):
        rng = np.random.default_rng(0)
        ramp = list(np.linspace(-1, 1.9, 400))
        flat = list(1.9 + 0.001 * rng.standard_normal(600))
        cut = convergence_cutoff(ramp + flat)
        assert cut is not None
        # the relative-change rule may fire late in the ramp, once the level
        # is high enough that the per-period change drops under 1%
        assert 200 <= cut <= 700

    def test_short_series_returns_none(self):
        assert convergence_cutoff([1.0] * 50) is None


class TestCli:
    def test_run_and_summarize(self, tmp_path, capsys):
        out = tmp_path / "m.csv"
        rc = cli_main([
            "run", str(CONFIGS / "twolink.cfg"),
            "--out", str(out), "--periods", "30", "--seed", "9",
        ])
        assert rc == 0
        assert out.exists()
        captured = capsys.readouterr().out
        assert "compliance" in captured
        rc = cli_main(["summarize", str(out), "--cutoff", "10", "--json"])
        assert rc == 0
        assert '"cutoff_period": 10' in capsys.readouterr().out

    def test_compare(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path, seed in ((a, 1), (b, 2)):
            cli_main([
                "run", str(CONFIGS / "twolink.cfg"),
                "--out", str(path), "--periods", "30", "--seed", str(seed), "--quiet",
            ])
        rc = cli_main(["compare", str(a), str(b), "--cutoff", "10"])
        assert rc == 0
        out = capsys.readouterr().out
        assert str(a) in out and str(b) in out

    def test_error_reports_cleanly(self, tmp_path, capsys):
        rc = cli_main(["summarize", str(tmp_path / "missing.csv")])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_byte_identical_via_cli(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            cli_main([
                "run", str(CONFIGS / "twolink.cfg"),
                "--out", str(path), "--periods", "25", "--quiet",
            ])
        assert a.read_bytes() == b.read_bytes()


class TestKernelBackendParity:
    def test_fallback_backend_matches_compiled_run(self, tmp_path):
        # the numpy fallback must reproduce the compiled backend bit-for-bit
        import os
        import subprocess
        import sys

        pytest.importorskip("vranrl._speedups")
        script = (
            "from vranrl.cli import main; import sys; "
            "sys.exit(main(['run', sys.argv[1], '--out', sys.argv[2], "
            "'--periods', '25', '--quiet']))"
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path, backend in ((a, ""), (b, "python")):
            env = dict(os.environ)
            if backend:
                env["VRANRL_KERNEL"] = backend
            else:
                env.pop("VRANRL_KERNEL", None)
            subprocess.run(
                [sys.executable, "-c", script, str(CONFIGS / "twolink.cfg"), str(path)],
                check=True,
                env=env,
            )
        assert a.read_bytes() == b.read_bytes()
