"""Shared fixtures: bundled dataset paths and expensive equilibrium
objects computed once per session."""

from pathlib import Path

import pytest

from transferopt.auction import (
    RoundLookup,
    build_lookup,
    load_auction_setup,
    solve_equilibrium,
)
from transferopt.planner import load_planning_data

FIXTURES = Path(__file__).parent.parent / "src" / "transferopt" / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def planning_data():
    return load_planning_data(
        FIXTURES / "players.csv", FIXTURES / "clubs.json", FIXTURES / "coefficients.json"
    )


@pytest.fixture(scope="session")
def almiron_setup():
    return load_auction_setup(FIXTURES / "auction_almiron.json")


@pytest.fixture(scope="session")
def traore_setup():
    return load_auction_setup(FIXTURES / "auction_traore.json")


@pytest.fixture(scope="session")
def almiron_round1(almiron_setup):
    return solve_equilibrium(almiron_setup)


@pytest.fixture(scope="session")
def traore_round1(traore_setup):
    return solve_equilibrium(traore_setup)


# wall-clock seconds spent constructing each multi-round lookup, keyed by
# fixture name; the acceptance suite checks these against runtime budgets
LOOKUP_BUILD_SECONDS: dict[str, float] = {}


def _timed_lookup(name: str, setup):
    import time

    start = time.perf_counter()
    lookup = build_lookup(setup, seed=0)
    LOOKUP_BUILD_SECONDS[name] = time.perf_counter() - start
    return lookup


@pytest.fixture(scope="session")
def almiron_lookup(almiron_setup):
    return _timed_lookup("almiron", almiron_setup)


@pytest.fixture(scope="session")
def traore_lookup(traore_setup):
    return _timed_lookup("traore", traore_setup)


@pytest.fixture(scope="session")
def almiron_round1_lookup(almiron_round1):
    return RoundLookup(((0.0, almiron_round1),))


@pytest.fixture(scope="session")
def traore_round1_lookup(traore_round1):
    return RoundLookup(((0.0, traore_round1),))


@pytest.fixture(scope="session")
def equilibrium_sweep():
    """Solve 25 randomized 2-4-bidder setups (plus two flat-acceptance
    variants each) in the regime where the opening-round quasi-Newton pass
    converges, and collect the per-setup property measurements."""
    import numpy as np

    from transferopt.auction import (
        AuctionSetup,
        Bidder,
        NonMonotoneSolutionError,
    )
    from transferopt.numerics import (
        AffinitySpec,
        LogNormalParams,
        NoConvergenceError,
        NonFiniteResidualError,
    )

    def try_solve(setup):
        try:
            return solve_equilibrium(setup, max_nfev=0)
        except (NoConvergenceError, NonFiniteResidualError, NonMonotoneSolutionError):
            return None

    rng = np.random.default_rng(0)
    results = []
    tried = 0
    while len(results) < 25 and tried < 200:
        tried += 1
        nb = int(rng.integers(2, 5))
        mus = [float(rng.uniform(1.1, 1.8)) for _ in range(nb)]
        centers = [float(rng.uniform(2.5, 5.2)) for _ in range(nb)]
        reserve = LogNormalParams(float(rng.uniform(0.7, 1.5)), 1.1)

        def make(affinities):
            return AuctionSetup(
                "p", "SEL", reserve,
                tuple(
                    Bidder(f"c{j}", LogNormalParams(m, 1.1), a)
                    for j, (m, a) in enumerate(zip(mus, affinities))
                ),
            )

        base = make([AffinitySpec(center=c, scale=1.0) for c in centers])
        flat_a = make([AffinitySpec(center=1e12, scale=1e12)] * nb)
        flat_b = make([AffinitySpec(center=2e12, scale=3e12)] * nb)
        eqs = [try_solve(s) for s in (base, flat_a, flat_b)]
        if any(e is None for e in eqs):
            continue
        e0, e1, e2 = eqs
        ids = [f"c{j}" for j in range(nb)]
        boundary_err = max(
            abs(float(e0.psi_at(c, e0.grid[0])) - e0.lower_supports[c]) for c in ids
        )
        margin = min(
            float(np.min(e0.psi_at(c, e0.grid[1:]) - e0.grid[1:])) for c in ids
        )
        invariance = max(
            float(np.max(np.abs(e1.psi_at(c, e1.grid) - e2.psi_at(c, e2.grid))))
            for c in ids
        )
        order = np.argsort(mus)
        mid = e1.grid[3:-3]
        ordering_violation = 0.0
        for a, b in zip(order, order[1:]):
            if mus[b] - mus[a] > 1e-6:
                gap = float(np.min(e1.psi_at(ids[b], mid) - e1.psi_at(ids[a], mid)))
                ordering_violation = min(ordering_violation, gap)
        results.append({
            "n_bidders": nb,
            "residual_norm": e0.residual_norm,
            "monotone_ok": e0.monotone_ok,
            "boundary_err": boundary_err,
            "margin": margin,
            "invariance": invariance,
            "ordering_violation": ordering_violation,
        })
    return results
