"""Ingestion-layer tests: CSV schema, coefficient files, scenario configs."""

import csv
import json

import pytest

from transferopt.model_io import (
    BadEnumError,
    BadWeightError,
    ConflictingDirectivesError,
    ConstraintBounds,
    IngestError,
    MissingCoefficientError,
    MissingColumnError,
    NonPositiveAgeError,
    Position,
    ScenarioConfig,
    build_club_contexts,
    load_club_directory,
    load_coefficients,
    load_player_table,
    load_scenario_config,
    scenario_from_dict,
    _CSV_COLUMNS,
)

ROW = {
    "player_id": "p1", "name": "Test Player", "position": "FW", "age": "24",
    "height": "1.80", "weight": "75", "nationality": "Albion", "club_id": "FOC",
    "prev_club_id": "RIV", "league_id": "alpha-league",
    "prev_league_id": "beta-league", "last_rating": "7.1",
    "career_rating": "6.9", "game_time": "20", "goals": "0.4",
    "goal_contributions": "0.6", "penalty_accuracy": "0.8", "shots": "2.5",
    "passing_accuracy": "0.82", "yellow_cards": "3", "red_cards": "1",
    "clearances": "0.5", "interceptions": "0.7", "n_transfers": "2",
    "transfer_listed": "true",
}


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


class TestPlayerTable:
    def test_happy_path(self, tmp_path):
        f = tmp_path / "p.csv"
        write_csv(f, [ROW])
        (rec,) = load_player_table(f)
        assert rec.position == Position.FW
        assert rec.age == 24
        assert rec.transfer_listed is True

    def test_position_alias(self, tmp_path):
        f = tmp_path / "p.csv"
        write_csv(f, [{**ROW, "position": "Forward"}])
        (rec,) = load_player_table(f)
        assert rec.position == Position.FW

    def test_red_cards_fold_as_two(self, tmp_path):
        f = tmp_path / "p.csv"
        write_csv(f, [{**ROW, "yellow_cards": "3", "red_cards": "1"}])
        (rec,) = load_player_table(f)
        assert rec.cards == 5

    def test_missing_column(self, tmp_path):
        f = tmp_path / "p.csv"
        row = {k: v for k, v in ROW.items() if k != "height"}
        write_csv(f, [row])
        with pytest.raises(MissingColumnError):
            load_player_table(f)

    def test_unknown_position(self, tmp_path):
        f = tmp_path / "p.csv"
        write_csv(f, [{**ROW, "position": "LIBERO"}])
        with pytest.raises(BadEnumError) as exc:
            load_player_table(f)
        assert exc.value.row == 2

    def test_nonpositive_age(self, tmp_path):
        f = tmp_path / "p.csv"
        write_csv(f, [{**ROW, "age": "0"}])
        with pytest.raises(NonPositiveAgeError):
            load_player_table(f)

    def test_bundled_fixture_loads(self, fixtures_dir):
        players = load_player_table(fixtures_dir / "players.csv")
        assert len(players) == 60
        assert all(p.cards >= 0 for p in players)

    def test_column_list_is_documented_schema(self):
        assert "yellow_cards" in _CSV_COLUMNS and "red_cards" in _CSV_COLUMNS


class TestCoefficients:
    def test_bundled_file(self, fixtures_dir):
        coeffs = load_coefficients(fixtures_dir / "coefficients.json")
        assert coeffs.rating_fixed["intercept"] == pytest.approx(-2.828)
        assert coeffs.fee_fixed["intercept"] == pytest.approx(-17.552)
        assert coeffs.fee_units == "log-millions-eur"

    def test_missing_variance(self, tmp_path, fixtures_dir):
        raw = json.loads((fixtures_dir / "coefficients.json").read_text())
        del raw["fee_model"]["variances"]["sigma2_buy"]
        f = tmp_path / "c.json"
        f.write_text(json.dumps(raw))
        with pytest.raises(MissingCoefficientError):
            load_coefficients(f)

    def test_negative_variance(self, tmp_path, fixtures_dir):
        raw = json.loads((fixtures_dir / "coefficients.json").read_text())
        raw["rating_model"]["variances"]["sigma2"] = -0.1
        f = tmp_path / "c.json"
        f.write_text(json.dumps(raw))
        with pytest.raises(IngestError):
            load_coefficients(f)

    def test_roundtrip_bit_exact(self, fixtures_dir):
        coeffs = load_coefficients(fixtures_dir / "coefficients.json")
        again = load_coefficients(fixtures_dir / "coefficients.json")
        assert coeffs.rating_fixed == again.rating_fixed
        assert coeffs.fee_fixed == again.fee_fixed
        assert coeffs.fee_variances == again.fee_variances


class TestScenario:
    def test_defaults(self):
        cfg = scenario_from_dict({"focal_club": "FOC"})
        assert cfg.bounds.k_tot_max == 30
        assert cfg.bounds.k_retain_min == 15
        assert cfg.bounds.k_transfer_max == 10
        assert cfg.bounds.other_continent_max == 2
        assert cfg.alpha == pytest.approx(0.05)

    def test_lambda_stored_verbatim(self):
        cfg = scenario_from_dict({"focal_club": "FOC", "lambda": [0.2, 0.2, 0.6]})
        assert cfg.lambda_weights == (0.2, 0.2, 0.6)

    def test_conflicting_directives(self):
        with pytest.raises(ConflictingDirectivesError):
            scenario_from_dict(
                {"focal_club": "FOC", "must_sell": ["a"], "keep": ["a"]}
            )

    def test_negative_weight(self):
        with pytest.raises(BadWeightError):
            scenario_from_dict({"focal_club": "FOC", "lambda": [-0.1, 0.5, 0.6]})

    def test_bundled_files(self, fixtures_dir):
        for name in ("quality", "balanced", "thrifty"):
            cfg = load_scenario_config(fixtures_dir / f"scenario_{name}.json")
            assert cfg.focal_club == "FOC"
            assert sum(cfg.lambda_weights) == pytest.approx(1.0)


class TestBounds:
    def test_min_le_max_enforced(self):
        with pytest.raises(IngestError):
            ConstraintBounds(gk_min=5, gk_max=4)

    def test_budget_positive(self):
        with pytest.raises(ValueError):
            ConstraintBounds(budget_max=0.0)


class TestClubContexts:
    def test_depth_partitions_members(self, planning_data):
        for ctx in planning_data.contexts.values():
            assert sum(ctx.depth_by_position.values()) == len(ctx.member_ids)

    def test_directory_requires_blocks(self, tmp_path):
        f = tmp_path / "clubs.json"
        f.write_text(json.dumps({"clubs": []}))
        with pytest.raises(IngestError):
            load_club_directory(f)

    def test_focal_club_present(self, planning_data):
        assert "FOC" in planning_data.contexts
        assert planning_data.contexts["FOC"].budget_max == pytest.approx(120.0)
