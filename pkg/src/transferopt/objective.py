"""Objective evaluation for a candidate squad decision vector.

cost and risk are in millions of euros, quality is a raw rating sum. The
eighteen constraint residuals are nonnegative and expressed in natural
units (counts, millions, log-millions, years, rating points); violation
zero everywhere is the definition of feasibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .model_io import ConstraintBounds, Position
from .numerics import (
    LogNormalParams,
    chance_bound,
    lognormal_mean,
    lognormal_variance,
    marlow_approx,
)

__all__ = [
    "PoolPlayer",
    "SquadStats",
    "ObjectiveBreakdown",
    "UnpricedPlayerError",
    "MissingForecastError",
    "N_CONSTRAINTS",
    "compute_cost",
    "compute_risk",
    "compute_quality",
    "evaluate_constraints",
    "fitness",
]

N_CONSTRAINTS = 18


class UnpricedPlayerError(ValueError):
    pass


class MissingForecastError(ValueError):
    pass


@dataclass(frozen=True)
class PoolPlayer:
    """One candidate in the decision pool with all annotations the
    objective needs: price distribution, rating forecast, membership and
    market-segment flags."""

    player_id: str
    position: Position
    age: float
    rating: Optional[float]
    fee: Optional[LogNormalParams]
    in_squad: bool
    resale: Optional[float] = None  # defaults to the expected fee
    other_continent: bool = False
    top_league: bool = False
    same_country: bool = False

    @property
    def expected_fee(self) -> float:
        if self.fee is None:
            raise UnpricedPlayerError(self.player_id)
        return lognormal_mean(self.fee)

    @property
    def fee_var(self) -> float:
        if self.fee is None:
            raise UnpricedPlayerError(self.player_id)
        return lognormal_variance(self.fee)

    @property
    def resale_price(self) -> float:
        return self.expected_fee if self.resale is None else self.resale


@dataclass(frozen=True)
class SquadStats:
    """Pre-window averages of the focal squad, the baselines for the
    no-ageing and no-weakening constraints."""

    avg_age: float
    avg_rating: float


@dataclass(frozen=True)
class ObjectiveBreakdown:
    cost: float
    risk: float
    quality: float
    violations: np.ndarray  # 18 nonnegative residuals
    fitness: float
    normalized: bool = False

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.violations == 0.0))

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "risk": self.risk,
            "quality": self.quality,
            "violations": [float(v) for v in self.violations],
            "fitness": self.fitness,
            "normalized": self.normalized,
            "feasible": self.feasible,
        }


def _require_rating(p: PoolPlayer) -> float:
    if p.rating is None:
        raise MissingForecastError(p.player_id)
    return p.rating


def compute_cost(x: Mapping[str, bool], pool: Mapping[str, PoolPlayer]) -> float:
    """Expected spend on buys plus expected loss on sales (E(Y)-r per sale)."""
    total = 0.0
    for pid, p in pool.items():
        chosen = x.get(pid, False)
        if p.in_squad:
            if not chosen:
                total += p.expected_fee - p.resale_price
        elif chosen:
            total += p.expected_fee
    return total


def compute_risk(x: Mapping[str, bool], pool: Mapping[str, PoolPlayer]) -> float:
    var = sum(
        p.fee_var for pid, p in pool.items() if x.get(pid, False) and not p.in_squad
    )
    return math.sqrt(var)


def compute_quality(x: Mapping[str, bool], pool: Mapping[str, PoolPlayer]) -> float:
    return sum(_require_rating(p) for pid, p in pool.items() if x.get(pid, False))


def evaluate_constraints(
    x: Mapping[str, bool],
    pool: Mapping[str, PoolPlayer],
    bounds: ConstraintBounds,
    squad_stats: SquadStats,
    fixed_buys: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """Eighteen nonnegative residuals; zero everywhere means feasible.

    fixed_buys = (mean, variance) of spend already committed outside the
    pool (directive pre-charge); it enters only the budget chance bound.
    """
    chosen = [p for pid, p in pool.items() if x.get(pid, False)]
    buys = [p for p in chosen if not p.in_squad]
    sells = [p for pid, p in pool.items() if p.in_squad and not x.get(pid, False)]
    retained = [p for p in chosen if p.in_squad]

    v = np.zeros(N_CONSTRAINTS)

    # C1 budget chance constraint via the moment-matched log-normal total
    fixed_mean, fixed_var = fixed_buys
    buy_mean = sum(p.expected_fee for p in buys) + fixed_mean
    buy_var = sum(p.fee_var for p in buys) + fixed_var
    if buy_mean > 0.0:
        sigma2 = math.log(buy_var / buy_mean**2 + 1.0) if buy_var > 0 else 0.0
        total = LogNormalParams(math.log(buy_mean) - 0.5 * sigma2, math.sqrt(sigma2))
        v[0] = max(0.0, chance_bound(total, bounds.alpha) - math.log(bounds.budget_max))

    n = len(chosen)
    v[1] = max(0, n - bounds.k_tot_max)
    v[2] = max(0, bounds.k_retain_min - len(retained))
    v[3] = max(0, len(buys) + len(sells) - bounds.k_transfer_max)
    revenue = sum(p.resale_price for p in sells)
    v[4] = max(0.0, bounds.profit_min - revenue)

    counts = {pos: 0 for pos in Position}
    for p in chosen:
        counts[p.position] += 1
    v[5] = max(0, bounds.gk_min - counts[Position.GK]) + max(
        0, counts[Position.GK] - bounds.gk_max
    )
    v[6] = max(0, bounds.df_min - counts[Position.DF])
    v[7] = max(0, bounds.mf_min - counts[Position.MF])
    v[8] = max(0, bounds.fw_min - counts[Position.FW])

    buy_counts = {pos: 0 for pos in Position}
    for p in buys:
        buy_counts[p.position] += 1
    for k, pos in enumerate([Position.GK, Position.DF, Position.MF, Position.FW]):
        v[9 + k] = max(0, bounds.buy_min.get(pos, 0) - buy_counts[pos])

    n_oth = sum(1 for p in buys if p.other_continent)
    v[13] = max(0, bounds.other_continent_min - n_oth) + max(
        0, n_oth - bounds.other_continent_max
    )
    v[14] = max(0, bounds.top_league_min - sum(1 for p in buys if p.top_league))
    v[15] = max(0, bounds.local_min - sum(1 for p in buys if p.same_country))

    if n == 0:
        # empty selections fail the averages by a fixed unit (0/0 guard)
        v[16] = 1.0
        v[17] = 1.0
    else:
        avg_age = sum(p.age for p in chosen) / n
        avg_rating = sum(_require_rating(p) for p in chosen) / n
        v[16] = max(0.0, avg_age - squad_stats.avg_age)
        v[17] = max(0.0, squad_stats.avg_rating - avg_rating)
    return v


def fitness(
    x: Mapping[str, bool],
    pool: Mapping[str, PoolPlayer],
    weights: tuple[float, float, float],
    beta: float,
    bounds: ConstraintBounds,
    squad_stats: SquadStats,
    normalize: bool = False,
    fixed_buys: tuple[float, float] = (0.0, 0.0),
) -> ObjectiveBreakdown:
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    cost = compute_cost(x, pool)
    risk = compute_risk(x, pool)
    quality = compute_quality(x, pool)
    violations = evaluate_constraints(x, pool, bounds, squad_stats, fixed_buys)

    c, r, q = cost, risk, quality
    if normalize:
        c /= bounds.budget_max
        r /= bounds.budget_max
        max_rating = max((p.rating or 0.0) for p in pool.values()) if pool else 1.0
        q /= 30.0 * max(max_rating, 1e-12)
    l1, l2, l3 = weights
    score = -(l1 * c + l2 * r) + l3 * q - beta * float(np.sum(violations))
    return ObjectiveBreakdown(
        cost=cost,
        risk=risk,
        quality=quality,
        violations=violations,
        fitness=score,
        normalized=normalize,
    )
