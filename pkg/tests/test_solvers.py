"""Solver-layer tests: directive filtering (bound arithmetic and objective
conservation), heuristic quality against the brute-force oracle, the
rerun policy, determinism, and the benchmark harness."""

import functools

import numpy as np
import pytest

from transferopt.model_io import ConstraintBounds, Position, SolverMethod, SolverParams
from transferopt.numerics import LogNormalParams
from transferopt.objective import PoolPlayer, SquadStats, fitness
from transferopt.solvers import (
    InfeasibleAfterFilteringError,
    PoolTooLargeError,
    brute_force,
    compare_solvers,
    preprocess,
    solve,
)

STATS = SquadStats(avg_age=26.0, avg_rating=6.5)
W = (0.1, 0.1, 0.8)


def mk(pid, pos=Position.MF, in_squad=False, mu=None, sigma=0.8, rating=7.0,
       age=25.0, resale=None, **flags):
    if mu is None:
        mu = float(np.log(3.0)) - sigma**2 / 2  # E(Y) = 3
    return PoolPlayer(
        player_id=pid, position=pos, age=age, rating=rating,
        fee=LogNormalParams(mu, sigma), in_squad=in_squad, resale=resale, **flags
    )


def squad(n_gk=2, n_df=8, n_mf=8, n_fw=4, rating=7.0, age=24.0):
    pool = {}
    i = 0
    for pos, count in [(Position.GK, n_gk), (Position.DF, n_df),
                       (Position.MF, n_mf), (Position.FW, n_fw)]:
        for _ in range(count):
            pid = f"s{i:02d}"
            pool[pid] = mk(pid, pos=pos, in_squad=True, rating=rating, age=age)
            i += 1
    return pool


def relaxed_bounds(**overrides):
    base = dict(
        k_tot_max=30, k_retain_min=15, k_transfer_max=10,
        gk_min=2, gk_max=4, df_min=8, mf_min=8, fw_min=4,
        budget_max=100.0, alpha=0.05,
    )
    base.update(overrides)
    return ConstraintBounds(**base)


class TestPreprocess:
    def test_empty_directives_identity(self):
        pool = squad()
        prob = preprocess(pool, relaxed_bounds(), STATS)
        assert prob.forced == {}
        assert set(prob.free_ids) == set(pool)
        assert prob.bounds_reduced == prob.bounds
        assert prob.fixed.cost == 0.0 and prob.fixed.n_chosen == 0

    def test_keep_fifteen_bound_arithmetic(self):
        pool = squad()
        kept = frozenset(sorted(pool)[:15])
        prob = preprocess(pool, relaxed_bounds(), STATS, keep=kept)
        assert prob.bounds_reduced.k_retain_min == 0
        assert prob.bounds_reduced.k_tot_max == 15
        assert prob.fixed.n_chosen == 15
        assert len(prob.free_ids) == len(pool) - 15

    def test_must_sell_bound_arithmetic(self):
        pool = squad()
        sells = frozenset(sorted(pool)[:2])  # resale defaults to E(Y) = 3 each
        prob = preprocess(
            pool, relaxed_bounds(profit_min=6.0), STATS, must_sell=sells
        )
        assert prob.bounds_reduced.k_transfer_max == 8
        assert prob.bounds_reduced.profit_min == pytest.approx(0.0)
        # booked transfer loss is zero when resale equals the expected fee
        assert prob.fixed.cost == pytest.approx(0.0, abs=1e-12)
        assert prob.fixed.n_transfers == 2

    def test_must_buy_bound_arithmetic(self):
        pool = dict(squad())
        pool["b0"] = mk("b0", pos=Position.FW, other_continent=True, top_league=True)
        prob = preprocess(
            pool, relaxed_bounds(fw_min=5, other_continent_max=2, top_league_min=1),
            STATS, must_buy=frozenset({"b0"}),
        )
        r = prob.bounds_reduced
        assert r.k_tot_max == 29 and r.k_transfer_max == 9
        assert r.fw_min == 4 and r.other_continent_max == 1 and r.top_league_min == 0
        assert prob.fixed.buy_mean == pytest.approx(3.0)

    def test_directive_conflicts_with_pool_state(self):
        pool = dict(squad())
        pool["b0"] = mk("b0")
        with pytest.raises(InfeasibleAfterFilteringError):
            preprocess(pool, relaxed_bounds(), STATS, must_buy=frozenset({"s00"}))
        with pytest.raises(InfeasibleAfterFilteringError):
            preprocess(pool, relaxed_bounds(), STATS, must_sell=frozenset({"b0"}))
        with pytest.raises(InfeasibleAfterFilteringError):
            preprocess(pool, relaxed_bounds(), STATS, keep=frozenset({"b0"}))

    def test_directives_exceeding_caps_rejected(self):
        pool = squad()
        sells = frozenset(sorted(pool)[:3])
        with pytest.raises(InfeasibleAfterFilteringError):
            preprocess(pool, relaxed_bounds(k_transfer_max=2), STATS, must_sell=sells)

    def test_objective_conservation(self):
        # evaluating through the reduced problem must equal direct evaluation
        # of the same full decision
        pool = dict(squad())
        for i in range(4):
            pool[f"b{i}"] = mk(f"b{i}", pos=Position.FW, rating=7.5)
        prob = preprocess(
            pool, relaxed_bounds(), STATS,
            must_buy=frozenset({"b0"}), must_sell=frozenset({"s21"}),
            keep=frozenset({"s00", "s01"}),
        )
        rng = np.random.default_rng(3)
        for _ in range(5):
            bits = rng.random(len(prob.free_ids)) < 0.5
            via_reduced = prob.evaluate(bits, W, 1e6)
            direct = fitness(
                prob.full_decision(bits), pool, W, 1e6, relaxed_bounds(), STATS
            )
            assert via_reduced.fitness == pytest.approx(direct.fitness, rel=1e-9)
            assert via_reduced.cost == pytest.approx(direct.cost, abs=1e-9)


def random_instance(rng, n_candidates=10):
    """Small pool: a feasible core squad plus a handful of buy candidates."""
    pool = squad()
    for i in range(n_candidates):
        pos = [Position.DF, Position.MF, Position.FW][int(rng.integers(0, 3))]
        pool[f"c{i:02d}"] = mk(
            f"c{i:02d}", pos=pos,
            mu=float(rng.uniform(0.2, 1.6)), sigma=float(rng.uniform(0.3, 0.9)),
            rating=float(rng.uniform(6.0, 8.0)), age=float(rng.uniform(19, 30)),
        )
    bounds = relaxed_bounds(budget_max=float(rng.uniform(15, 60)))
    keep = frozenset(pid for pid in pool if pid.startswith("s"))
    return preprocess(pool, bounds, STATS, keep=keep)


@functools.lru_cache(maxsize=1)
def oracle_instances():
    rng = np.random.default_rng(7)
    out = []
    for _ in range(50):
        prob = random_instance(rng)
        out.append((prob, brute_force(prob, W)))
    return out


class TestHeuristicsVsOracle:
    def _score(self, method, tol=0.0):
        hits = 0
        for trial, (prob, oracle) in enumerate(oracle_instances()):
            params = SolverParams(method=method, seed=trial)
            plan = solve(prob, W, params)
            if not oracle.feasible:
                hits += 0 if plan.feasible else 1
                continue
            if plan.feasible and plan.breakdown.fitness >= oracle.breakdown.fitness * (
                1 - tol
            ) - tol * 1e-6:
                hits += 1
        return hits

    def test_ga_matches_oracle(self):
        assert self._score(SolverMethod.GA, tol=1e-9) >= 48

    def test_sa_near_oracle(self):
        assert self._score(SolverMethod.SA, tol=0.01) >= 45

    def test_hc_near_oracle(self):
        assert self._score(SolverMethod.HC, tol=0.01) >= 45


class TestSolveBehavior:
    def test_deterministic(self):
        prob = random_instance(np.random.default_rng(1))
        params = SolverParams(method=SolverMethod.GA, seed=5)
        p1 = solve(prob, W, params)
        p2 = solve(prob, W, params)
        assert p1.decision == p2.decision
        assert p1.breakdown.fitness == p2.breakdown.fitness

    def test_rerun_flag_on_infeasible(self):
        # impossible bounds: every search output fails the re-check, so the
        # single doubled-effort rerun must have been used
        pool = squad(n_gk=1)
        prob = preprocess(pool, relaxed_bounds(gk_min=5, gk_max=6), STATS)
        params = SolverParams(
            method=SolverMethod.GA, population=10, max_iterations=5, stall_limit=3
        )
        plan = solve(prob, W, params)
        assert not plan.feasible
        assert plan.solver_trace["rerun_used"] is True

    def test_no_rerun_when_feasible(self):
        prob = random_instance(np.random.default_rng(2))
        plan = solve(prob, W, SolverParams(method=SolverMethod.GA, seed=0))
        assert plan.feasible
        assert plan.solver_trace["rerun_used"] is False

    def test_brute_limit_guard(self):
        pool = squad()
        for i in range(25):
            pool[f"c{i}"] = mk(f"c{i}")
        prob = preprocess(pool, relaxed_bounds(), STATS)
        with pytest.raises(PoolTooLargeError):
            brute_force(prob, W)

    def test_tie_breaking_prefers_fewer_transfers(self):
        # two identical candidates: the oracle must keep the status quo
        # rather than swap in an equivalent outsider
        pool = squad()
        prob = preprocess(pool, relaxed_bounds(k_tot_max=22, k_retain_min=22), STATS)
        plan = brute_force(prob, W)
        assert plan.feasible
        assert all(plan.decision[pid] for pid in pool)
        assert plan.buys == [] and plan.sells == []

    def test_plan_serialization(self):
        prob = random_instance(np.random.default_rng(4))
        plan = solve(prob, W, SolverParams(method=SolverMethod.HC, seed=0))
        d = plan.to_dict()
        assert set(d) == {
            "decision", "buys", "sells", "breakdown", "feasible", "solver_trace"
        }
        for b in d["buys"]:
            assert b["fee_iqr"][0] <= b["expected_fee"] <= b["fee_iqr"][1] * 4


class TestCompareSolvers:
    def test_shape_and_self_dominance(self):
        prob = random_instance(np.random.default_rng(9), n_candidates=6)
        grid = [0.2, 0.5, 0.8]
        methods = [SolverMethod.GA, SolverMethod.HC]
        params = SolverParams(population=20, max_iterations=30, stall_limit=10)
        out = compare_solvers(prob, grid, methods, params)
        assert set(out) == {"runs", "dominance", "shared_feasible", "feasible_counts"}
        for m in ("GA", "HC"):
            assert len(out["runs"][m]) == len(grid)
            assert out["dominance"][m][m] == 0
            for r in out["runs"][m]:
                assert r["evaluations"] > 0 and r["wall_time_s"] >= 0.0
        assert out["feasible_counts"]["GA"] == len(grid)
