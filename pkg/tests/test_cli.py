"""Command-line interface tests using click's test runner."""

from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner

from transferopt.cli import main

FIXTURES = Path("src/transferopt/fixtures")


def run_cli(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


class TestPlanCommand:
    def test_plan_writes_json(self, tmp_path):
        out = tmp_path / "plan.json"
        result = run_cli(
            [
                "plan",
                "--config", str(FIXTURES / "scenario_thrifty.json"),
                "--seed", "0",
                "--out", str(out),
            ]
        )
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert doc["feasible"] is True
        assert doc["buys"] and isinstance(doc["buys"], list)
        assert doc["breakdown"]["cost"] > 0

    def test_plan_stdout_when_no_out(self):
        result = run_cli(
            ["plan", "--config", str(FIXTURES / "scenario_thrifty.json"), "--seed", "0"]
        )
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert "fitness" in doc["breakdown"]

    def test_plan_seed_override_deterministic(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            r = run_cli(
                [
                    "plan",
                    "--config", str(FIXTURES / "scenario_thrifty.json"),
                    "--seed", "7",
                    "--out", str(out),
                ]
            )
            assert r.exit_code == 0
            outs.append(out.read_text())
        assert outs[0] == outs[1]

    def test_missing_config_rejected(self):
        result = CliRunner().invoke(main, ["plan", "--config", "/nope.json"])
        assert result.exit_code != 0


class TestAuctionCommand:
    def test_single_round(self, tmp_path):
        out = tmp_path / "auction.json"
        result = run_cli(
            [
                "auction",
                "--setup", str(FIXTURES / "auction_almiron.json"),
                "--rounds", "1",
                "--nsim", "300",
                "--seed", "0",
                "--out", str(out),
            ]
        )
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert doc["n_sim"] == 300
        assert 0.0 <= doc["sale_probability"] <= 1.0
        assert len(doc["rounds"]) == 1

    def test_zero_rounds_rejected(self):
        result = CliRunner().invoke(
            main,
            ["auction", "--setup", str(FIXTURES / "auction_almiron.json"), "--rounds", "0"],
        )
        assert result.exit_code != 0


class TestBenchCommand:
    def test_bench_small_grid(self, tmp_path):
        out = tmp_path / "bench.json"
        result = run_cli(
            [
                "bench",
                "--methods", "ga,hc",
                "--lambda-grid", "0.3:0.7:0.2",
                "--seed", "0",
                "--out", str(out),
            ]
        )
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert set(doc["feasible_counts"]) == {"GA", "HC"}
        assert doc["feasible_counts"]["GA"] == 3

    def test_unknown_method_rejected(self):
        result = CliRunner().invoke(main, ["bench", "--methods", "bogus"])
        assert result.exit_code != 0


class TestServeCommand:
    def test_serve_registered(self):
        result = run_cli(["serve", "--help"])
        assert result.exit_code == 0
        assert "--port" in result.output
