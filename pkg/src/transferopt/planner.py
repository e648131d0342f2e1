"""End-to-end squad planning: ingest fixtures, forecast ratings and fees,
assemble the decision pool, and run the constrained search."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .model_io import (
    ClubContext,
    ModelCoefficients,
    PlayerRecord,
    ScenarioConfig,
    build_club_contexts,
    load_club_directory,
    load_coefficients,
    load_player_table,
)
from .objective import PoolPlayer, SquadStats
from .predictors import predict_fee, predict_rating
from .solvers import ReducedProblem, TransferPlan, preprocess, solve

__all__ = [
    "PlanningData",
    "load_planning_data",
    "build_pool",
    "build_problem",
    "plan_transfers",
]


@dataclass(frozen=True)
class PlanningData:
    players: list[PlayerRecord]
    contexts: dict[str, ClubContext]
    coeffs: ModelCoefficients


def load_planning_data(
    players_path: str | Path,
    clubs_path: str | Path,
    coeffs_path: str | Path,
) -> PlanningData:
    players = load_player_table(players_path)
    directory = load_club_directory(clubs_path)
    contexts = build_club_contexts(players, directory)
    coeffs = load_coefficients(coeffs_path)
    return PlanningData(players=players, contexts=contexts, coeffs=coeffs)


def build_pool(
    data: PlanningData, scenario: ScenarioConfig
) -> tuple[dict[str, PoolPlayer], SquadStats]:
    """Annotate every candidate with its forecast rating and fee
    distribution from the focal club's point of view.

    Squad members are priced as outgoing sales (focal club sells to the
    anonymous market); outside transfer-listed players are priced as
    incoming purchases by the focal club.
    """
    focal = data.contexts[scenario.focal_club]
    pool: dict[str, PoolPlayer] = {}
    for player in data.players:
        in_squad = player.player_id in focal.member_ids
        if not in_squad and not player.transfer_listed:
            continue
        seller = data.contexts.get(player.club_id)
        if seller is None:
            continue
        rating = predict_rating(player, focal, data.coeffs).value
        if in_squad:
            fee = predict_fee(
                player, focal, None, scenario.time_index, data.coeffs
            )
        else:
            fee = predict_fee(
                player, seller, focal, scenario.time_index, data.coeffs
            )
        resale = scenario.resale_prices.get(player.player_id)
        pool[player.player_id] = PoolPlayer(
            player_id=player.player_id,
            position=player.position,
            age=player.age,
            rating=rating,
            fee=fee,
            in_squad=in_squad,
            resale=resale,
            other_continent=seller.continent != focal.continent,
            top_league=seller.top_league,
            same_country=seller.country == focal.country,
        )
    stats = SquadStats(avg_age=focal.avg_age, avg_rating=focal.avg_rating)
    return pool, stats


def build_problem(
    data: PlanningData, scenario: ScenarioConfig
) -> ReducedProblem:
    pool, stats = build_pool(data, scenario)
    return preprocess(
        pool,
        scenario.bounds,
        stats,
        must_buy=scenario.must_buy,
        must_sell=scenario.must_sell,
        keep=scenario.keep,
        normalize=scenario.normalize_objective,
    )


def plan_transfers(data: PlanningData, scenario: ScenarioConfig) -> TransferPlan:
    problem = build_problem(data, scenario)
    return solve(problem, scenario.lambda_weights, scenario.solver)
