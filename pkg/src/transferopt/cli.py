"""Command-line client over the core package.

Commands: ``plan`` (squad optimisation), ``auction`` (equilibrium +
Monte Carlo simulation), ``bench`` (heuristic comparison), ``serve``
(start the HTTP service).
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .auction import RoundLookup, build_lookup, load_auction_setup, solve_equilibrium
from .model_io import SolverMethod, load_scenario_config
from .planner import build_problem, load_planning_data, plan_transfers
from .simulate import simulate
from .solvers import compare_solvers

_FIXTURES = Path(__file__).parent / "fixtures"


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


@click.group()
def main() -> None:
    """Transfer-window decision engine."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--players", "players_path", type=click.Path(exists=True),
              default=str(_FIXTURES / "players.csv"), show_default=True)
@click.option("--clubs", "clubs_path", type=click.Path(exists=True),
              default=str(_FIXTURES / "clubs.json"), show_default=True)
@click.option("--coeffs", "coeffs_path", type=click.Path(exists=True),
              default=str(_FIXTURES / "coefficients.json"), show_default=True)
@click.option("--seed", type=int, default=None, help="override the solver seed")
@click.option("--out", type=click.Path(), default=None)
def plan(config_path, players_path, clubs_path, coeffs_path, seed, out):
    """Solve the buy/sell squad problem for a scenario file."""
    scenario = load_scenario_config(config_path)
    if seed is not None:
        scenario = scenario.model_copy(
            update={"solver": scenario.solver.model_copy(update={"seed": seed})}
        )
    data = load_planning_data(players_path, clubs_path, coeffs_path)
    result = plan_transfers(data, scenario)
    _write_json(result.to_dict(), out)


@main.command()
@click.option("--setup", "setup_path", required=True, type=click.Path(exists=True))
@click.option("--rounds", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--nsim", type=click.IntRange(min=1), default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def auction(setup_path, rounds, nsim, seed, out):
    """Simulate the bidding process described by a setup file."""
    setup = load_auction_setup(setup_path)
    if rounds > 1 and len(setup.bidders) >= 2:
        lookup = build_lookup(setup)
    else:
        lookup = RoundLookup(((0.0, solve_equilibrium(setup)),))
    if rounds == 1:
        lookup = RoundLookup(lookup.entries[:1])
    stats = simulate(setup, lookup, n_sim=nsim, seed=seed, max_rounds=rounds)
    _write_json(stats.to_dict(), out)


def _parse_grid(spec: str) -> list[float]:
    lo, hi, step = (float(v) for v in spec.split(":"))
    vals = []
    v = lo
    while v <= hi + 1e-9:
        vals.append(round(v, 10))
        v += step
    return vals


@main.command()
@click.option("--methods", default="ga,sa,hc", show_default=True)
@click.option("--lambda-grid", "grid_spec", default="0.1:0.9:0.1", show_default=True,
              help="lo:hi:step for the quality weight")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="scenario file (defaults to the bundled balanced one)")
@click.option("--players", "players_path", type=click.Path(exists=True),
              default=str(_FIXTURES / "players.csv"), show_default=True)
@click.option("--clubs", "clubs_path", type=click.Path(exists=True),
              default=str(_FIXTURES / "clubs.json"), show_default=True)
@click.option("--coeffs", "coeffs_path", type=click.Path(exists=True),
              default=str(_FIXTURES / "coefficients.json"), show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def bench(methods, grid_spec, config_path, players_path, clubs_path, coeffs_path, seed, out):
    """Compare heuristics over a quality-weight grid; emit a dominance report."""
    scenario = load_scenario_config(config_path or str(_FIXTURES / "scenario_balanced.json"))
    data = load_planning_data(players_path, clubs_path, coeffs_path)
    problem = build_problem(data, scenario)
    method_list = [SolverMethod(m.strip().upper()) for m in methods.split(",")]
    params = scenario.solver.model_copy(update={"seed": seed})
    report = compare_solvers(problem, _parse_grid(grid_spec), method_list, params)
    _write_json(report, out)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", type=click.Path(), default=None,
              help="overrides the TRANSFEROPT_DATA environment variable")
def serve(host, port, data_dir):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


if __name__ == "__main__":
    main()
