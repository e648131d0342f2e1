"""Squad-plan search.

Pipeline: directive filtering first (forced buys/sells/keeps leave the
decision set, with bound updates and fixed objective contributions), then a
heuristic search over the remaining pool, then a feasibility re-check of
the winner against the original constraints with a single doubled-effort
rerun on failure. A brute-force enumerator serves as the test oracle on
small pools.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model_io import ConstraintBounds, Position, SolverMethod, SolverParams
from .objective import (
    N_CONSTRAINTS,
    ObjectiveBreakdown,
    PoolPlayer,
    SquadStats,
    fitness,
)

__all__ = [
    "FixedContributions",
    "ReducedProblem",
    "TransferPlan",
    "InfeasibleAfterFilteringError",
    "PoolTooLargeError",
    "preprocess",
    "solve",
    "brute_force",
    "compare_solvers",
]

BRUTE_LIMIT = 24


class InfeasibleAfterFilteringError(ValueError):
    pass


class PoolTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class FixedContributions:
    """Objective contributions of directive-forced decisions."""

    cost: float = 0.0
    risk_var: float = 0.0
    quality: float = 0.0
    buy_mean: float = 0.0  # pre-charged into the budget chance bound
    buy_var: float = 0.0
    n_chosen: int = 0
    n_transfers: int = 0
    age_sum: float = 0.0
    rating_sum: float = 0.0


@dataclass(frozen=True)
class ReducedProblem:
    full_pool: Mapping[str, PoolPlayer]
    free_ids: tuple[str, ...]
    forced: Mapping[str, bool]
    bounds: ConstraintBounds  # original, used for evaluation
    bounds_reduced: ConstraintBounds  # decremented view of the residual problem
    fixed: FixedContributions
    squad_stats: SquadStats
    normalize: bool = False

    def full_decision(self, bits: np.ndarray) -> dict[str, bool]:
        x = dict(self.forced)
        for pid, b in zip(self.free_ids, bits):
            x[pid] = bool(b)
        return x

    def evaluate(
        self, bits: np.ndarray, weights: tuple[float, float, float], beta: float
    ) -> ObjectiveBreakdown:
        return fitness(
            self.full_decision(bits),
            self.full_pool,
            weights,
            beta,
            self.bounds,
            self.squad_stats,
            normalize=self.normalize,
        )


@dataclass(frozen=True)
class TransferPlan:
    decision: dict[str, bool]
    buys: list[tuple[str, float, tuple[float, float]]]  # (id, E(Y), fee IQR)
    sells: list[tuple[str, float]]
    breakdown: ObjectiveBreakdown
    feasible: bool
    solver_trace: dict

    def to_dict(self) -> dict:
        return {
            "decision": dict(self.decision),
            "buys": [
                {"player_id": pid, "expected_fee": fee, "fee_iqr": list(iqr)}
                for pid, fee, iqr in self.buys
            ],
            "sells": [
                {"player_id": pid, "expected_fee": fee} for pid, fee in self.sells
            ],
            "breakdown": self.breakdown.to_dict(),
            "feasible": self.feasible,
            "solver_trace": dict(self.solver_trace),
        }


def preprocess(
    pool: Mapping[str, PoolPlayer],
    bounds: ConstraintBounds,
    squad_stats: SquadStats,
    must_buy: frozenset[str] = frozenset(),
    must_sell: frozenset[str] = frozenset(),
    keep: frozenset[str] = frozenset(),
    normalize: bool = False,
) -> ReducedProblem:
    """Remove directive players from the decision set.

    Forced choices stay in the full pool for exact evaluation; the reduced
    bounds describe what remains for the residual search.
    """
    forced: dict[str, bool] = {}
    cost = risk_var = quality = buy_mean = buy_var = 0.0
    age_sum = rating_sum = 0.0
    n_chosen = n_transfers = 0
    adj = bounds.model_dump()

    for pid in sorted(must_buy):
        p = pool[pid]
        if p.in_squad:
            raise InfeasibleAfterFilteringError(f"must_buy player {pid} already in squad")
        forced[pid] = True
        cost += p.expected_fee
        risk_var += p.fee_var
        buy_mean += p.expected_fee
        buy_var += p.fee_var
        quality += p.rating or 0.0
        age_sum += p.age
        rating_sum += p.rating or 0.0
        n_chosen += 1
        n_transfers += 1
        adj["k_tot_max"] -= 1
        adj["k_transfer_max"] -= 1
        pos_key = {Position.GK: "gk_min", Position.DF: "df_min",
                   Position.MF: "mf_min", Position.FW: "fw_min"}[p.position]
        adj[pos_key] = max(0, adj[pos_key] - 1)
        adj["buy_min"][p.position] = max(0, adj["buy_min"].get(p.position, 0) - 1)
        if p.other_continent:
            adj["other_continent_max"] -= 1
            adj["other_continent_min"] = max(0, adj["other_continent_min"] - 1)
        if p.top_league:
            adj["top_league_min"] = max(0, adj["top_league_min"] - 1)
        if p.same_country:
            adj["local_min"] = max(0, adj["local_min"] - 1)

    for pid in sorted(must_sell):
        p = pool[pid]
        if not p.in_squad:
            raise InfeasibleAfterFilteringError(f"must_sell player {pid} not in squad")
        forced[pid] = False
        cost += p.expected_fee - p.resale_price
        n_transfers += 1
        adj["k_transfer_max"] -= 1
        adj["profit_min"] = adj["profit_min"] - p.resale_price

    for pid in sorted(keep):
        p = pool[pid]
        if not p.in_squad:
            raise InfeasibleAfterFilteringError(f"keep player {pid} not in squad")
        forced[pid] = True
        quality += p.rating or 0.0
        age_sum += p.age
        rating_sum += p.rating or 0.0
        n_chosen += 1
        adj["k_tot_max"] -= 1
        adj["k_retain_min"] = max(0, adj["k_retain_min"] - 1)
        pos_key = {Position.GK: "gk_min", Position.DF: "df_min",
                   Position.MF: "mf_min", Position.FW: "fw_min"}[p.position]
        adj[pos_key] = max(0, adj[pos_key] - 1)

    if adj["k_tot_max"] < 0:
        raise InfeasibleAfterFilteringError("directives alone exceed the squad cap")
    if adj["k_transfer_max"] < 0:
        raise InfeasibleAfterFilteringError("directives alone exceed the transfer cap")
    adj["other_continent_max"] = max(adj["other_continent_max"], adj["other_continent_min"])
    adj["profit_min"] = max(0.0, adj["profit_min"])

    free_ids = tuple(sorted(pid for pid in pool if pid not in forced))
    return ReducedProblem(
        full_pool=pool,
        free_ids=free_ids,
        forced=forced,
        bounds=bounds,
        bounds_reduced=ConstraintBounds(**adj),
        fixed=FixedContributions(
            cost=cost, risk_var=risk_var, quality=quality,
            buy_mean=buy_mean, buy_var=buy_var, n_chosen=n_chosen,
            n_transfers=n_transfers, age_sum=age_sum, rating_sum=rating_sum,
        ),
        squad_stats=squad_stats,
        normalize=normalize,
    )


def _n_transfers(problem: ReducedProblem, bits: np.ndarray) -> int:
    n = problem.fixed.n_transfers
    for pid, b in zip(problem.free_ids, bits):
        p = problem.full_pool[pid]
        if p.in_squad and not b:
            n += 1
        elif not p.in_squad and b:
            n += 1
    return n


def _tie_key(problem: ReducedProblem, bits: np.ndarray, score: float):
    # prefer higher fitness, then fewer transfers, then lexicographically
    # smallest decision string over sorted player ids
    return (-score, _n_transfers(problem, bits), tuple(int(b) for b in bits))


def _status_quo(problem: ReducedProblem) -> np.ndarray:
    return np.array(
        [problem.full_pool[pid].in_squad for pid in problem.free_ids], dtype=bool
    )


def _perturb(rng: np.random.Generator, base: np.ndarray, max_flips: int) -> np.ndarray:
    out = base.copy()
    if len(out) == 0 or max_flips <= 0:
        return out
    k = int(rng.integers(1, max_flips + 1))
    idx = rng.choice(len(out), size=min(k, len(out)), replace=False)
    out[idx] = ~out[idx]
    return out


def _run_ga(problem, weights, params: SolverParams, max_iter: int, rng, counter):
    n = len(problem.free_ids)
    beta = params.beta
    base = _status_quo(problem)
    pop = [base]
    # seed diversity: every single-bit neighbor of the status quo, then random
    # perturbations and uniform bitstrings
    for j in range(min(n, params.population // 2)):
        nb = base.copy()
        nb[j] = ~nb[j]
        pop.append(nb)
    while len(pop) < params.population:
        if rng.random() < 0.7:
            pop.append(_perturb(rng, base, problem.bounds.k_transfer_max))
        else:
            pop.append(rng.random(n) < 0.5 if n else base.copy())
    scores = [problem.evaluate(c, weights, beta).fitness for c in pop]
    counter[0] += len(pop)
    order = sorted(range(len(pop)), key=lambda i: _tie_key(problem, pop[i], scores[i]))
    best, best_score = pop[order[0]].copy(), scores[order[0]]
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        new_pop = [best.copy()]  # elitism
        while len(new_pop) < params.population:
            a = _tournament(pop, scores, rng)
            b = _tournament(pop, scores, rng)
            if rng.random() < params.crossover_rate and n > 0:
                mask = rng.random(n) < 0.5
                child = np.where(mask, a, b)
            else:
                child = a.copy()
            if n > 0:
                flip = rng.random(n) < params.mutation_rate
                child = child ^ flip
            new_pop.append(child)
        if n > 0 and len(new_pop) > 3:
            # random immigrants keep the pool from collapsing on one basin
            new_pop[-1] = rng.random(n) < 0.5
            new_pop[-2] = _perturb(rng, best, 2)
        pop = new_pop
        scores = [problem.evaluate(c, weights, beta).fitness for c in pop]
        counter[0] += len(pop)
        order = sorted(range(len(pop)), key=lambda i: _tie_key(problem, pop[i], scores[i]))
        cand, cand_score = pop[order[0]], scores[order[0]]
        if _tie_key(problem, cand, cand_score) < _tie_key(problem, best, best_score):
            best, best_score = cand.copy(), cand_score
            stall = 0
        else:
            stall += 1
            if stall >= params.stall_limit:
                break
    best, best_score = _polish(problem, best, best_score, weights, beta, counter)
    return best, it


def _polish(problem, best, best_score, weights, beta, counter, max_pairs=600):
    """Greedy pass over the 1- and 2-flip neighborhood of the incumbent."""
    n = len(best)
    improved = True
    while improved:
        improved = False
        moves = [(j,) for j in range(n)]
        if n * (n - 1) // 2 <= max_pairs:
            moves += [(i, j) for i in range(n) for j in range(i + 1, n)]
        for move in moves:
            cand = best.copy()
            for j in move:
                cand[j] = ~cand[j]
            s = problem.evaluate(cand, weights, beta).fitness
            counter[0] += 1
            if _tie_key(problem, cand, s) < _tie_key(problem, best, best_score):
                best, best_score = cand, s
                improved = True
    return best, best_score


def _tournament(pop, scores, rng, k: int = 3):
    idx = rng.integers(0, len(pop), size=k)
    return pop[max(idx, key=lambda i: scores[i])]


def _run_sa(problem, weights, params: SolverParams, max_iter: int, rng, counter):
    beta = params.beta
    n = len(problem.free_ids)
    cur = _status_quo(problem)
    cur_score = problem.evaluate(cur, weights, beta).fitness
    counter[0] += 1
    best, best_score = cur.copy(), cur_score
    temp = max(1.0, abs(cur_score)) * 0.1
    steps = max_iter * max(n, 1)
    for _ in range(steps):
        if n == 0:
            break
        cand = cur.copy()
        j = int(rng.integers(0, n))
        cand[j] = ~cand[j]
        s = problem.evaluate(cand, weights, beta).fitness
        counter[0] += 1
        if s >= cur_score or rng.random() < np.exp((s - cur_score) / temp):
            cur, cur_score = cand, s
            if _tie_key(problem, cur, cur_score) < _tie_key(problem, best, best_score):
                best, best_score = cur.copy(), cur_score
        temp *= params.cooling_ratio
    return best, steps


def _run_hc(problem, weights, params: SolverParams, max_iter: int, rng, counter):
    beta = params.beta
    n = len(problem.free_ids)
    best = None
    best_score = -np.inf
    base = _status_quo(problem)
    for restart in range(params.restarts):
        cur = base.copy() if restart == 0 else _perturb(
            rng, base, problem.bounds.k_transfer_max
        )
        cur_score = problem.evaluate(cur, weights, beta).fitness
        counter[0] += 1
        for _ in range(max_iter):
            if n == 0:
                break
            improved = False
            cand_best, cand_best_score = None, cur_score
            for j in range(n):
                cand = cur.copy()
                cand[j] = ~cand[j]
                s = problem.evaluate(cand, weights, beta).fitness
                counter[0] += 1
                if s > cand_best_score:
                    cand_best, cand_best_score = cand, s
                    improved = True
            if not improved:
                break
            cur, cur_score = cand_best, cand_best_score
        if best is None or _tie_key(problem, cur, cur_score) < _tie_key(
            problem, best, best_score
        ):
            best, best_score = cur.copy(), cur_score
    return best, params.restarts


def _make_plan(
    problem: ReducedProblem,
    bits: np.ndarray,
    weights,
    beta: float,
    trace: dict,
) -> TransferPlan:
    decision = problem.full_decision(bits)
    breakdown = fitness(
        decision, problem.full_pool, weights, beta, problem.bounds,
        problem.squad_stats, normalize=problem.normalize,
    )
    buys = []
    sells = []
    for pid in sorted(problem.full_pool):
        p = problem.full_pool[pid]
        chosen = decision.get(pid, False)
        if chosen and not p.in_squad:
            iqr = (p.fee.quantile(0.25), p.fee.quantile(0.75)) if p.fee and p.fee.sigma > 0 else (
                p.expected_fee, p.expected_fee
            )
            buys.append((pid, p.expected_fee, iqr))
        elif p.in_squad and not chosen:
            sells.append((pid, p.expected_fee))
    feasible = bool(np.all(breakdown.violations == 0.0))
    return TransferPlan(
        decision=decision, buys=buys, sells=sells,
        breakdown=breakdown, feasible=feasible, solver_trace=trace,
    )


_RUNNERS = {
    SolverMethod.GA: _run_ga,
    SolverMethod.SA: _run_sa,
    SolverMethod.HC: _run_hc,
}


def solve(
    problem: ReducedProblem,
    weights: tuple[float, float, float],
    params: SolverParams,
) -> TransferPlan:
    """Run the configured heuristic with the single-rerun policy."""
    if params.method == SolverMethod.BRUTE:
        return brute_force(problem, weights, beta=params.beta)
    runner = _RUNNERS[params.method]
    evaluations = [0]
    rng = np.random.default_rng(params.seed)
    bits, iters = runner(problem, weights, params, params.max_iterations, rng, evaluations)
    plan_trace = {
        "method": params.method.value, "iterations": iters,
        "evaluations": evaluations[0], "rerun_used": False, "seed": params.seed,
    }
    plan = _make_plan(problem, bits, weights, params.beta, plan_trace)
    if not plan.feasible:
        # one rerun with doubled effort, then accept the outcome
        rng = np.random.default_rng([params.seed, 1])
        bits2, iters2 = runner(
            problem, weights, params, params.max_iterations * 2, rng, evaluations
        )
        trace2 = {
            "method": params.method.value, "iterations": iters2,
            "evaluations": evaluations[0], "rerun_used": True, "seed": params.seed,
        }
        plan2 = _make_plan(problem, bits2, weights, params.beta, trace2)
        if plan2.feasible or plan2.breakdown.fitness > plan.breakdown.fitness:
            return plan2
        plan = TransferPlan(
            decision=plan.decision, buys=plan.buys, sells=plan.sells,
            breakdown=plan.breakdown, feasible=plan.feasible, solver_trace=trace2,
        )
    return plan


def brute_force(
    problem: ReducedProblem,
    weights: tuple[float, float, float],
    beta: float = 1e6,
) -> TransferPlan:
    """Exhaustive oracle: feasible maximizer of the raw objective."""
    n = len(problem.free_ids)
    if n > BRUTE_LIMIT:
        raise PoolTooLargeError(f"{n} free candidates exceeds limit {BRUTE_LIMIT}")
    best_bits = None
    best_key = None
    evaluations = 0
    for combo in itertools.product([False, True], repeat=n):
        bits = np.array(combo, dtype=bool)
        br = problem.evaluate(bits, weights, beta)
        evaluations += 1
        if not np.all(br.violations == 0.0):
            continue
        key = _tie_key(problem, bits, br.fitness)
        if best_key is None or key < best_key:
            best_key, best_bits = key, bits
    trace = {
        "method": "BRUTE", "iterations": 1, "evaluations": evaluations,
        "rerun_used": False, "seed": None,
    }
    if best_bits is None:
        # no feasible point: report the status quo, flagged infeasible
        return _make_plan(problem, _status_quo(problem), weights, beta, trace)
    return _make_plan(problem, best_bits, weights, beta, trace)


def compare_solvers(
    problem: ReducedProblem,
    lambda3_grid: Sequence[float],
    methods: Sequence[SolverMethod],
    params: SolverParams,
) -> dict:
    """Benchmark heuristics over a quality-weight grid.

    Per (method, lambda3): feasibility, cost, mean squad rating, wall time,
    evaluation count. Dominance counts A over B on runs where both were
    feasible and A had strictly lower cost and strictly higher rating.
    """
    runs: dict[str, list[dict]] = {m.value: [] for m in methods}
    for method in methods:
        for l3 in lambda3_grid:
            w = ((1.0 - l3) / 2.0, (1.0 - l3) / 2.0, l3)
            p = params.model_copy(update={"method": method})
            t0 = time.perf_counter()
            plan = solve(problem, w, p)
            elapsed = time.perf_counter() - t0
            n_chosen = sum(1 for v in plan.decision.values() if v)
            runs[method.value].append({
                "lambda3": l3,
                "feasible": plan.feasible,
                "cost": plan.breakdown.cost,
                "mean_rating": plan.breakdown.quality / n_chosen if n_chosen else 0.0,
                "wall_time_s": elapsed,
                "evaluations": plan.solver_trace["evaluations"],
            })
    dominance: dict[str, dict[str, int]] = {}
    shared: dict[str, dict[str, int]] = {}
    for a in methods:
        dominance[a.value] = {}
        shared[a.value] = {}
        for b in methods:
            if a == b:
                dominance[a.value][b.value] = 0
                shared[a.value][b.value] = sum(
                    1 for r in runs[a.value] if r["feasible"]
                )
                continue
            wins = 0
            n_shared = 0
            for ra, rb in zip(runs[a.value], runs[b.value]):
                if ra["feasible"] and rb["feasible"]:
                    n_shared += 1
                    if ra["cost"] < rb["cost"] and ra["mean_rating"] > rb["mean_rating"]:
                        wins += 1
            dominance[a.value][b.value] = wins
            shared[a.value][b.value] = n_shared
    return {
        "runs": runs,
        "dominance": dominance,
        "shared_feasible": shared,
        "feasible_counts": {
            m.value: sum(1 for r in runs[m.value] if r["feasible"]) for m in methods
        },
    }
