"""Rating and fee prediction from ingested coefficient files.

Feature vectors are assembled by name against a coefficient block; the key
sets must match exactly so that a coefficient never silently drops. Random
intercepts contribute zero when their lookup key is unseen, and fee
predictive variance is inflated by the corresponding component on fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model_io import ClubContext, ModelCoefficients, PlayerRecord, Position
from .numerics import LogNormalParams, lognormal_mean, lognormal_variance

__all__ = [
    "RatingForecast",
    "MissingFeatureError",
    "rating_features",
    "fee_features",
    "predict_rating",
    "predict_fee",
    "expected_fee",
    "fee_variance",
]


class MissingFeatureError(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no feature builder for coefficient {name!r}")


@dataclass(frozen=True)
class RatingForecast:
    player_id: str
    value: float
    used_corridor_effect: bool
    used_league_effects: tuple[bool, bool]  # (current league, last league)


def _scaled(name: str, value: float, scalers: dict[str, tuple[float, float]]) -> float:
    if name in scalers:
        center, scale = scalers[name]
        return (value - center) / scale
    return value


def _assemble(
    raw: dict[str, float],
    fixed: dict[str, float],
    scalers: dict[str, tuple[float, float]],
) -> dict[str, float]:
    """Pick and scale exactly the features named by the coefficient block."""
    out: dict[str, float] = {}
    for name in fixed:
        if name == "intercept":
            out[name] = 1.0
            continue
        if name not in raw:
            raise MissingFeatureError(name)
        out[name] = _scaled(name, raw[name], scalers)
    # quadratic age is the square of the already-scaled age term
    if "age_sq" in out:
        out["age_sq"] = _scaled("age", raw["age"], scalers) ** 2
    return out


def _dot(features: dict[str, float], fixed: dict[str, float]) -> float:
    return sum(fixed[name] * features[name] for name in fixed)


def rating_features(
    player: PlayerRecord, target_club: ClubContext, coeffs: ModelCoefficients
) -> dict[str, float]:
    pos = player.position
    raw = {
        "age": player.age,
        "age_sq": player.age**2,  # placeholder, overridden by scaled square
        "pos_df": 1.0 if pos == Position.DF else 0.0,
        "pos_mf": 1.0 if pos == Position.MF else 0.0,
        "pos_fw": 1.0 if pos == Position.FW else 0.0,
        "height": player.height,
        "weight": player.weight,
        "last_rating": player.last_rating,
        "n_transfers": player.n_transfers,
        "same_team": 1.0 if player.club_id == target_club.club_id else 0.0,
        "same_nationality": 1.0 if player.nationality == target_club.country else 0.0,
        "team_rating": target_club.median_rating,
        "team_rating_pos": target_club.median_rating_by_position.get(pos, 0.0),
        "team_depth_pos": float(target_club.depth_by_position.get(pos, 0)),
    }
    return _assemble(raw, coeffs.rating_fixed, coeffs.rating_scalers)


def predict_rating(
    player: PlayerRecord, target_club: ClubContext, coeffs: ModelCoefficients
) -> RatingForecast:
    """Counterfactual next-season rating of the player at the target club."""
    features = rating_features(player, target_club, coeffs)
    value = _dot(features, coeffs.rating_fixed)

    corridor_key = f"{player.club_id}->{target_club.club_id}"
    corridor = coeffs.rating_random_corridor.get(corridor_key)
    cur = coeffs.rating_random_current_league.get(target_club.league_id)
    last = coeffs.rating_random_last_league.get(player.prev_league_id)
    value += (corridor or 0.0) + (cur or 0.0) + (last or 0.0)
    return RatingForecast(
        player_id=player.player_id,
        value=value,
        used_corridor_effect=corridor is not None,
        used_league_effects=(cur is not None, last is not None),
    )


def fee_features(
    player: PlayerRecord,
    seller: ClubContext,
    buyer: ClubContext | None,
    time_index: float,
    coeffs: ModelCoefficients,
) -> dict[str, float]:
    pos = player.position
    # buyer None means the anonymous external market: buyer-side squad
    # features default to the seller's league-typical values
    b_league_fee = buyer.league_median_buy_fee if buyer else seller.league_median_buy_fee
    b_depth = buyer.depth_by_position.get(pos, 0) if buyer else seller.depth_by_position.get(pos, 0)
    b_rating_pos = (
        buyer.median_rating_by_position.get(pos, 0.0)
        if buyer
        else seller.median_rating_by_position.get(pos, 0.0)
    )
    b_rating = buyer.median_rating if buyer else seller.median_rating
    raw = {
        "trend": time_index,
        "age": player.age,
        "age_sq": player.age**2,
        "pos_df": 1.0 if pos == Position.DF else 0.0,
        "pos_mf": 1.0 if pos == Position.MF else 0.0,
        "pos_fw": 1.0 if pos == Position.FW else 0.0,
        "height": player.height,
        "weight": player.weight,
        "career_rating": player.career_rating,
        "rating": player.last_rating,
        "game_time": player.game_time,
        "goals": player.goals,
        "goal_contributions": player.goal_contributions,
        "penalty_accuracy": player.penalty_accuracy,
        "shots": player.shots,
        "passing_accuracy": player.passing_accuracy,
        "cards": player.cards,
        "clearances": player.clearances,
        "interceptions": player.interceptions,
        "fee_seller_league": seller.league_median_sell_fee,
        "fee_buyer_league": b_league_fee,
        "depth_pos_seller": float(seller.depth_by_position.get(pos, 0)),
        "depth_pos_buyer": float(b_depth),
        "rating_pos_seller": seller.median_rating_by_position.get(pos, 0.0),
        "rating_pos_buyer": b_rating_pos,
        "rating_seller": seller.median_rating,
        "rating_buyer": b_rating,
    }
    return _assemble(raw, coeffs.fee_fixed, coeffs.fee_scalers)


def predict_fee(
    player: PlayerRecord,
    seller: ClubContext,
    buyer: ClubContext | None,
    time_index: float,
    coeffs: ModelCoefficients,
) -> LogNormalParams:
    """Log-fee distribution for the (player, seller, buyer) triple.

    buyer=None prices a sale to the anonymous external market: zero buyer
    random intercept, buyer variance component added (fallback rule).
    """
    features = fee_features(player, seller, buyer, time_index, coeffs)
    mu = _dot(features, coeffs.fee_fixed)

    buyer_eff = coeffs.fee_random_buyer.get(buyer.club_id) if buyer else None
    seller_eff = coeffs.fee_random_seller.get(seller.club_id)
    mu += (buyer_eff or 0.0) + (seller_eff or 0.0)

    sigma2 = coeffs.fee_variances["tau2"]
    if buyer_eff is None:
        sigma2 += coeffs.fee_variances["sigma2_buy"]
    if seller_eff is None:
        sigma2 += coeffs.fee_variances["sigma2_sell"]
    return LogNormalParams(mu, sigma2**0.5)


def expected_fee(params: LogNormalParams) -> float:
    return lognormal_mean(params)


def fee_variance(params: LogNormalParams) -> float:
    return lognormal_variance(params)
