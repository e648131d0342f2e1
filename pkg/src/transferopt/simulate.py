"""Monte Carlo simulation of single- and multi-round negotiations.

Each path draws persistent private valuations once, then plays rounds:
bids come from inverting the round's equilibrium tables, the winning bid
becomes the announced threshold, and the seller accepts with the truncated
affinity-times-reserve-mass probability. Paths use counter-derived random
streams so results are independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .auction import (
    AuctionSetup,
    Bidder,
    OutOfWindowError,
    RoundLookup,
    truncated_affinity,
    truncated_reserve_cdf,
)

__all__ = [
    "PathResult",
    "RoundStats",
    "PriceStats",
    "AuctionStats",
    "EmptyLookupError",
    "simulate",
    "acceptance_probability",
    "summarize_prices",
]


class EmptyLookupError(ValueError):
    pass


@dataclass(frozen=True)
class PathResult:
    sold: bool
    round_index: Optional[int]  # 1-based round of sale, None if unsold
    price: Optional[float]
    winner: Optional[str]


@dataclass(frozen=True)
class PriceStats:
    n: int
    mean: float
    median: float
    sd: Optional[float]  # absent for n = 1
    iqr: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "n": self.n, "mean": self.mean, "median": self.median,
            "sd": self.sd, "iqr": list(self.iqr),
        }


@dataclass(frozen=True)
class RoundStats:
    round_index: int
    sales: int
    conditional_rate: float  # sales / paths still unsold entering the round
    prices: Optional[PriceStats]
    win_share: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "sales": self.sales,
            "conditional_rate": self.conditional_rate,
            "prices": self.prices.to_dict() if self.prices else None,
            "win_share": dict(self.win_share),
        }


@dataclass(frozen=True)
class AuctionStats:
    n_sim: int
    sale_probability: float
    unsold: int
    overall_prices: Optional[PriceStats]
    rounds: list[RoundStats]
    win_share: dict[str, float]
    # pre-binned sale prices so display layers never have to aggregate;
    # the final bin edge is the buyout threshold
    price_histogram: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "n_sim": self.n_sim,
            "sale_probability": self.sale_probability,
            "unsold": self.unsold,
            "overall_prices": self.overall_prices.to_dict() if self.overall_prices else None,
            "rounds": [r.to_dict() for r in self.rounds],
            "win_share": dict(self.win_share),
            "price_histogram": self.price_histogram,
        }


def acceptance_probability(
    setup: AuctionSetup, tau_prev: float, winner: Bidder, tau: float
) -> float:
    """Seller acceptance: truncated affinity of the winner times the
    incremental truncated reserve mass up to the winning bid."""
    if tau <= tau_prev or tau > setup.upsilon + 1e-9:
        raise OutOfWindowError(f"tau must lie in ({tau_prev}, {setup.upsilon}]")
    if tau >= setup.upsilon - 1e-12:
        return 1.0  # buyout: a matched threshold forces the sale
    return truncated_affinity(winner, setup.upsilon, tau) * truncated_reserve_cdf(
        setup, tau_prev, tau
    )


def _nearest_rank_quantile(sorted_vals: np.ndarray, q: float) -> float:
    n = len(sorted_vals)
    rank = max(1, math.ceil(q * n))
    return float(sorted_vals[rank - 1])


def _price_stats(prices: Sequence[float]) -> Optional[PriceStats]:
    if not prices:
        return None
    arr = np.sort(np.asarray(prices, dtype=float))
    n = len(arr)
    sd = float(np.std(arr, ddof=1)) if n > 1 else None
    return PriceStats(
        n=n,
        mean=float(np.mean(arr)),
        median=_nearest_rank_quantile(arr, 0.5),
        sd=sd,
        iqr=(_nearest_rank_quantile(arr, 0.25), _nearest_rank_quantile(arr, 0.75)),
    )


def _shares(winners: Sequence[str]) -> dict[str, float]:
    if not winners:
        return {}
    out: dict[str, int] = {}
    for w in winners:
        out[w] = out.get(w, 0) + 1
    total = len(winners)
    return {k: v / total for k, v in sorted(out.items())}


def _price_histogram(prices: Sequence[float], upsilon: Optional[float]) -> Optional[dict]:
    if not prices:
        return None
    top = upsilon if upsilon is not None else max(prices)
    edges = np.linspace(0.0, top, 25)
    counts, _ = np.histogram(np.asarray(prices, dtype=float), bins=edges)
    return {
        "edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
        "upsilon": float(top),
    }


def summarize_prices(
    paths: Sequence[PathResult],
    n_sim: int,
    max_rounds: int,
    upsilon: Optional[float] = None,
) -> AuctionStats:
    sold = [p for p in paths if p.sold]
    rounds = []
    remaining = n_sim
    for r in range(1, max_rounds + 1):
        in_round = [p for p in sold if p.round_index == r]
        if not in_round and remaining == 0:
            break
        rate = len(in_round) / remaining if remaining else 0.0
        rounds.append(
            RoundStats(
                round_index=r,
                sales=len(in_round),
                conditional_rate=rate,
                prices=_price_stats([p.price for p in in_round]),
                win_share=_shares([p.winner for p in in_round]),
            )
        )
        remaining -= len(in_round)
    return AuctionStats(
        n_sim=n_sim,
        sale_probability=len(sold) / n_sim if n_sim else 0.0,
        unsold=n_sim - len(sold),
        overall_prices=_price_stats([p.price for p in sold]),
        rounds=rounds,
        win_share=_shares([p.winner for p in sold]),
        price_histogram=_price_histogram([p.price for p in sold], upsilon),
    )


def _simulate_path(
    setup: AuctionSetup,
    lookup: RoundLookup,
    max_rounds: int,
    rng: np.random.Generator,
) -> PathResult:
    bidders = setup.bidders
    # persistent private valuations, drawn once per path
    valuations = {
        bd.club_id: bd.valuation.quantile(min(max(rng.random(), 1e-12), 1.0 - 1e-12))
        for bd in bidders
    }
    tau_prev = 0.0
    for r in range(1, max_rounds + 1):
        _, sol = lookup.entry_for(tau_prev)
        bids: list[tuple[float, str]] = []
        for bd in bidders:
            t = sol.psi[bd.club_id]
            s = valuations[bd.club_id]
            if s < t.ys[0]:
                continue  # valuation below the round's support: abstain
            bid = float(np.interp(s, t.ys, t.xs))
            bids.append((bid, bd.club_id))
        if not bids:
            return PathResult(False, None, None, None)  # nobody can bid, ever
        top = max(b for b, _ in bids)
        tied = [c for b, c in bids if b >= top - 1e-12]
        winner_id = tied[int(rng.integers(0, len(tied)))] if len(tied) > 1 else tied[0]
        tau = min(top, setup.upsilon)
        if tau <= tau_prev + 1e-12:
            return PathResult(False, None, None, None)  # no fresh information
        winner = next(bd for bd in bidders if bd.club_id == winner_id)
        a = acceptance_probability(setup, tau_prev, winner, tau)
        if rng.random() < a:
            return PathResult(True, r, tau, winner_id)
        tau_prev = tau
    return PathResult(False, None, None, None)


def simulate(
    setup: AuctionSetup,
    lookup: RoundLookup,
    n_sim: int,
    seed: int = 0,
    max_rounds: Optional[int] = None,
    on_progress: Optional[Callable[[int], None]] = None,
) -> AuctionStats:
    if not lookup.entries:
        raise EmptyLookupError("lookup has no equilibrium entries")
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    rounds = max_rounds if max_rounds is not None else setup.max_rounds
    paths = []
    for p in range(n_sim):
        rng = np.random.default_rng([seed, p])
        paths.append(_simulate_path(setup, lookup, rounds, rng))
        if on_progress is not None and (p + 1) % 200 == 0:
            on_progress(p + 1)
    return summarize_prices(paths, n_sim, rounds, upsilon=setup.upsilon)
