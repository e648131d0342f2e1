"""Data ingestion and validation.

Player tables arrive as CSV with a fixed header, model coefficients and
scenario configurations as JSON. All money is millions of euros in memory;
coefficient files must declare that unit explicitly.
"""

from __future__ import annotations

import csv
import json
import statistics
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

__all__ = [
    "Position",
    "PlayerRecord",
    "ClubContext",
    "ModelCoefficients",
    "ConstraintBounds",
    "SolverParams",
    "ScenarioConfig",
    "IngestError",
    "MissingColumnError",
    "BadEnumError",
    "NonPositiveAgeError",
    "MissingCoefficientError",
    "NegativeVarianceError",
    "ConflictingDirectivesError",
    "BadWeightError",
    "load_player_table",
    "load_coefficients",
    "load_scenario_config",
    "load_club_directory",
    "build_club_contexts",
]


class IngestError(ValueError):
    pass


class MissingColumnError(IngestError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing column: {column}")


class BadEnumError(IngestError):
    def __init__(self, row: int, value: str):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: unknown enum value {value!r}")


class NonPositiveAgeError(IngestError):
    def __init__(self, row: int, age: float):
        super().__init__(f"row {row}: age must be positive, got {age}")


class MissingCoefficientError(IngestError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing coefficient: {name}")


class NegativeVarianceError(IngestError):
    def __init__(self, name: str, value: float):
        super().__init__(f"variance component {name} must be >= 0, got {value}")


class ConflictingDirectivesError(IngestError):
    def __init__(self, player_id: str):
        self.player_id = player_id
        super().__init__(f"player {player_id} appears in more than one directive set")


class BadWeightError(IngestError):
    pass


class Position(str, Enum):
    GK = "GK"
    DF = "DF"
    MF = "MF"
    FW = "FW"


_POSITION_ALIASES = {
    "GK": Position.GK, "GOALKEEPER": Position.GK,
    "DF": Position.DF, "DEFENDER": Position.DF, "D": Position.DF,
    "MF": Position.MF, "MIDFIELDER": Position.MF, "M": Position.MF,
    "FW": Position.FW, "FORWARD": Position.FW, "F": Position.FW, "ST": Position.FW,
}


class PlayerRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    player_id: str
    name: str
    position: Position
    age: float = Field(gt=0)
    height: float
    weight: float
    nationality: str
    club_id: str
    prev_club_id: str
    league_id: str
    prev_league_id: str
    last_rating: float
    career_rating: float
    game_time: float  # hundreds of minutes
    goals: float
    goal_contributions: float
    penalty_accuracy: float = Field(ge=0.0, le=1.0)
    shots: float
    passing_accuracy: float
    cards: float = Field(ge=0)  # yellows + 2*reds, folded at ingestion
    clearances: float
    interceptions: float
    n_transfers: float
    transfer_listed: bool = False


class ClubContext(BaseModel):
    model_config = ConfigDict(frozen=True)

    club_id: str
    league_id: str
    country: str
    continent: str
    member_ids: frozenset[str]
    median_rating: float
    median_rating_by_position: dict[Position, float]
    depth_by_position: dict[Position, int]
    league_median_sell_fee: float
    league_median_buy_fee: float
    budget_max: float = Field(gt=0)
    profit_min: float = 0.0
    avg_age: float = 0.0
    avg_rating: float = 0.0
    top_league: bool = False

    @model_validator(mode="after")
    def _members_nonempty(self):
        if not self.member_ids:
            raise IngestError(f"club {self.club_id} has no members")
        if sum(self.depth_by_position.values()) != len(self.member_ids):
            raise IngestError(f"club {self.club_id}: depth counts do not partition members")
        return self


class ModelCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True)

    rating_fixed: dict[str, float]
    rating_scalers: dict[str, tuple[float, float]]  # name -> (center, scale)
    rating_random_corridor: dict[str, float]  # "prev->cur" keys
    rating_random_current_league: dict[str, float]
    rating_random_last_league: dict[str, float]
    rating_variances: dict[str, float]  # sigma2, sigma2_club, sigma2_cur, sigma2_last
    fee_fixed: dict[str, float]
    fee_scalers: dict[str, tuple[float, float]] = Field(default_factory=dict)
    fee_random_buyer: dict[str, float]
    fee_random_seller: dict[str, float]
    fee_variances: dict[str, float]  # tau2, sigma2_buy, sigma2_sell
    fee_units: str

    @model_validator(mode="after")
    def _validate(self):
        if self.fee_units != "log-millions-eur":
            raise IngestError(f"unsupported fee_units {self.fee_units!r}")
        for block in (self.rating_variances, self.fee_variances):
            for name, v in block.items():
                if v < 0:
                    raise NegativeVarianceError(name, v)
        for name, (_, scale) in {**self.rating_scalers, **self.fee_scalers}.items():
            if scale == 0:
                raise IngestError(f"scaler for {name} has zero scale")
        return self


class _IngestModel(BaseModel):
    """Base that re-raises validator failures under their declared error types
    instead of pydantic's wrapper."""

    def __init__(self, /, **data):
        try:
            super().__init__(**data)
        except PydanticValidationError as exc:
            for err in exc.errors():
                inner = err.get("ctx", {}).get("error")
                if isinstance(inner, IngestError):
                    raise inner from exc
            raise


class ConstraintBounds(_IngestModel):
    model_config = ConfigDict(frozen=True)

    k_tot_max: int = 30
    k_retain_min: int = 15
    k_transfer_max: int = 10
    gk_min: int = 2
    gk_max: int = 4
    df_min: int = 8
    mf_min: int = 8
    fw_min: int = 4
    buy_min: dict[Position, int] = Field(
        default_factory=lambda: {p: 0 for p in Position}
    )
    other_continent_min: int = 0
    other_continent_max: int = 2
    top_league_min: int = 0
    local_min: int = 0
    profit_min: float = 0.0
    budget_max: float = Field(default=100.0, gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.gk_min > self.gk_max:
            raise IngestError("gk_min > gk_max")
        if self.other_continent_min > self.other_continent_max:
            raise IngestError("other_continent_min > other_continent_max")
        return self


class SolverMethod(str, Enum):
    GA = "GA"
    SA = "SA"
    HC = "HC"
    BRUTE = "BRUTE"


class SolverParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: SolverMethod = SolverMethod.GA
    population: int = Field(default=60, gt=0)
    max_iterations: int = Field(default=200, gt=0)
    stall_limit: int = Field(default=50, gt=0)
    mutation_rate: float = Field(default=0.02, ge=0.0, le=1.0)
    crossover_rate: float = Field(default=0.8, ge=0.0, le=1.0)
    cooling_ratio: float = Field(default=0.995, gt=0.0, lt=1.0)
    restarts: int = Field(default=8, gt=0)
    beta: float = Field(default=1e6, gt=0)
    seed: int = 0


class ScenarioConfig(_IngestModel):
    model_config = ConfigDict(frozen=True)

    focal_club: str
    lambda_weights: tuple[float, float, float] = (0.1, 0.1, 0.8)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    bounds: ConstraintBounds = Field(default_factory=ConstraintBounds)
    must_buy: frozenset[str] = frozenset()
    must_sell: frozenset[str] = frozenset()
    keep: frozenset[str] = frozenset()
    solver: SolverParams = Field(default_factory=SolverParams)
    resale_prices: dict[str, float] = Field(default_factory=dict)
    normalize_objective: bool = False
    time_index: float = 0.0

    @field_validator("lambda_weights")
    @classmethod
    def _nonneg(cls, v):
        if any(w < 0 for w in v):
            raise BadWeightError(f"lambda weights must be nonnegative, got {v}")
        return v

    @model_validator(mode="after")
    def _disjoint(self):
        sets = [self.must_buy, self.must_sell, self.keep]
        seen: set[str] = set()
        for s in sets:
            clash = seen & s
            if clash:
                raise ConflictingDirectivesError(sorted(clash)[0])
            seen |= s
        return self


_CSV_COLUMNS = [
    "player_id", "name", "position", "age", "height", "weight", "nationality",
    "club_id", "prev_club_id", "league_id", "prev_league_id", "last_rating",
    "career_rating", "game_time", "goals", "goal_contributions",
    "penalty_accuracy", "shots", "passing_accuracy", "yellow_cards",
    "red_cards", "clearances", "interceptions", "n_transfers",
    "transfer_listed",
]

_NUMERIC = {
    "age", "height", "weight", "last_rating", "career_rating", "game_time",
    "goals", "goal_contributions", "penalty_accuracy", "shots",
    "passing_accuracy", "yellow_cards", "red_cards", "clearances",
    "interceptions", "n_transfers",
}


def load_player_table(source: str | Path) -> list[PlayerRecord]:
    """Read the documented CSV schema; red cards fold into cards as two yellows."""
    path = Path(source)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in _CSV_COLUMNS:
            if col not in header:
                raise MissingColumnError(col)
        records = []
        for idx, row in enumerate(reader, start=2):
            pos_raw = (row["position"] or "").strip().upper()
            if pos_raw not in _POSITION_ALIASES:
                raise BadEnumError(idx, row["position"])
            numeric = {k: float(row[k]) for k in _NUMERIC}
            if numeric["age"] <= 0:
                raise NonPositiveAgeError(idx, numeric["age"])
            cards = numeric.pop("yellow_cards") + 2.0 * numeric.pop("red_cards")
            records.append(
                PlayerRecord(
                    player_id=row["player_id"],
                    name=row["name"],
                    position=_POSITION_ALIASES[pos_raw],
                    nationality=row["nationality"],
                    club_id=row["club_id"],
                    prev_club_id=row["prev_club_id"],
                    league_id=row["league_id"],
                    prev_league_id=row["prev_league_id"],
                    cards=cards,
                    transfer_listed=row["transfer_listed"].strip().lower()
                    in ("1", "true", "yes"),
                    **numeric,
                )
            )
    return records


_RATING_VARIANCE_NAMES = ("sigma2", "sigma2_club", "sigma2_cur", "sigma2_last")
_FEE_VARIANCE_NAMES = ("tau2", "sigma2_buy", "sigma2_sell")


def load_coefficients(source: str | Path) -> ModelCoefficients:
    raw = json.loads(Path(source).read_text())
    for block in ("rating_model", "fee_model"):
        if block not in raw:
            raise MissingCoefficientError(block)
    rating = raw["rating_model"]
    fee = raw["fee_model"]
    for name in _RATING_VARIANCE_NAMES:
        if name not in rating.get("variances", {}):
            raise MissingCoefficientError(name)
    for name in _FEE_VARIANCE_NAMES:
        if name not in fee.get("variances", {}):
            raise MissingCoefficientError(name)
    if "fixed" not in rating or "fixed" not in fee:
        raise MissingCoefficientError("fixed")

    def scalers(block):
        return {k: (float(c), float(s)) for k, (c, s) in block.get("scalers", {}).items()}

    rating_random = rating.get("random", {})
    fee_random = fee.get("random", {})
    try:
        return _build_coefficients(raw, rating, fee, rating_random, fee_random, scalers)
    except PydanticValidationError as exc:
        raise IngestError(str(exc)) from exc


def _build_coefficients(raw, rating, fee, rating_random, fee_random, scalers):
    return ModelCoefficients(
        rating_fixed=rating["fixed"],
        rating_scalers=scalers(rating),
        rating_random_corridor=rating_random.get("corridor", {}),
        rating_random_current_league=rating_random.get("current_league", {}),
        rating_random_last_league=rating_random.get("last_league", {}),
        rating_variances=rating["variances"],
        fee_fixed=fee["fixed"],
        fee_scalers=scalers(fee),
        fee_random_buyer=fee_random.get("buyer", {}),
        fee_random_seller=fee_random.get("seller", {}),
        fee_variances=fee["variances"],
        fee_units=raw.get("fee_units", "log-millions-eur"),
    )


def load_scenario_config(source: str | Path) -> ScenarioConfig:
    raw = json.loads(Path(source).read_text())
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    data = dict(raw)
    if "lambda" in data:
        data["lambda_weights"] = tuple(data.pop("lambda"))
    for key in ("must_buy", "must_sell", "keep"):
        if key in data:
            data[key] = frozenset(data[key])
    directives = data.pop("directives", None)
    if directives:
        for key in ("must_buy", "must_sell", "keep"):
            if key in directives:
                data[key] = frozenset(directives[key])
    if "bounds" in data and isinstance(data["bounds"], dict):
        bounds = dict(data["bounds"])
        if "buy_min" in bounds:
            bounds["buy_min"] = {Position(k): v for k, v in bounds["buy_min"].items()}
        if "alpha" in data and "alpha" not in bounds:
            bounds["alpha"] = data["alpha"]
        data["bounds"] = ConstraintBounds(**bounds)
    elif "alpha" in data:
        data["bounds"] = ConstraintBounds(alpha=data["alpha"])
    try:
        return ScenarioConfig(**data)
    except (ConflictingDirectivesError, BadWeightError):
        raise
    except ValueError as exc:
        # surface weight violations under the documented error type
        if "lambda_weights" in str(exc):
            raise BadWeightError(str(exc)) from exc
        raise


def load_club_directory(source: str | Path) -> dict:
    """Read the clubs/leagues metadata file (budgets, countries, league flags)."""
    raw = json.loads(Path(source).read_text())
    if "clubs" not in raw or "leagues" not in raw:
        raise IngestError("club directory must contain 'clubs' and 'leagues' blocks")
    return raw


def build_club_contexts(
    players: list[PlayerRecord], directory: dict
) -> dict[str, ClubContext]:
    """Derive per-club squad statistics from the player table plus metadata."""
    leagues = {l["league_id"]: l for l in directory["leagues"]}
    by_club: dict[str, list[PlayerRecord]] = {}
    for p in players:
        by_club.setdefault(p.club_id, []).append(p)

    contexts: dict[str, ClubContext] = {}
    for meta in directory["clubs"]:
        cid = meta["club_id"]
        members = by_club.get(cid, [])
        if not members:
            continue
        league = leagues[meta["league_id"]]
        ratings = [p.last_rating for p in members]
        by_pos: dict[Position, list[PlayerRecord]] = {p: [] for p in Position}
        for m in members:
            by_pos[m.position].append(m)
        contexts[cid] = ClubContext(
            club_id=cid,
            league_id=meta["league_id"],
            country=league["country"],
            continent=league["continent"],
            member_ids=frozenset(p.player_id for p in members),
            median_rating=statistics.median(ratings),
            median_rating_by_position={
                pos: statistics.median([m.last_rating for m in plist]) if plist else 0.0
                for pos, plist in by_pos.items()
            },
            depth_by_position={pos: len(plist) for pos, plist in by_pos.items()},
            league_median_sell_fee=league.get("median_sell_fee", 0.0),
            league_median_buy_fee=league.get("median_buy_fee", 0.0),
            budget_max=meta.get("budget_max", 100.0),
            profit_min=meta.get("profit_min", 0.0),
            avg_age=sum(p.age for p in members) / len(members),
            avg_rating=sum(ratings) / len(ratings),
            top_league=bool(league.get("top_league", False)),
        )
    return contexts
