"""Command-line front end: ``grandsim <command> --scenario FILE --out DIR``.

Exit status is 0 on success, 2 when the scenario or arguments are invalid
and 3 when a solver or integration fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import compare_sim_fluid, conjecture_experiment, steady_state
from .fluid import FluidIntegrationError, FluidSystem, integrate
from .linprog import SolverError
from .optimal import a_sweep, solve_lp, write_sweep_csv
from .policies import GrandConst, policy_to_dict
from .scenario import Scenario, ScenarioError, bundled_scenarios, load_scenario
from .simulator import SystemSpec, replicate

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


def _tag(value: float) -> str:
    return f"{value:g}".replace("+", "")


def _policy_tag(policy) -> str:
    ((kind, value),) = policy_to_dict(policy).items()
    return f"{kind}{_tag(value)}"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _provenance(sc: Scenario, command: str) -> dict:
    return {"command": command, "version": __version__, "source": sc.source, "scenario": sc.resolved()}


def cmd_simulate(sc: Scenario, out: Path, log) -> dict:
    sc.require("policy", "r")
    burn_in = sc.burn_in if sc.burn_in is not None else 2.0 * sc.horizon / 3.0
    init = sc.initial_counts(sc.r)
    results = []
    for policy in sc.policies:
        spec = SystemSpec(sc.config_set, sc.lam, sc.mu, sc.r, policy)
        trajs = replicate(spec, init, sc.horizon, sc.sample_dt, sc.seeds, n_jobs=sc.n_jobs)
        for seed, tr in zip(sc.seeds, trajs):
            tr.meta = {**tr.meta, "scenario": sc.resolved()}
            path = out / f"{sc.name}_{_policy_tag(policy)}_seed{seed}.csv"
            tr.to_csv(path)
            entry = {"policy": policy_to_dict(policy), "seed": seed, "file": path.name}
            if sc.horizon > burn_in and len(tr.window(burn_in)) >= 20:
                est = steady_state(tr, burn_in)
                entry["steady_state"] = est.as_dict(sc.config_set)
                log(f"{policy.name} seed {seed}: occupied {est.occupied:.1f} +- {est.occupied_se:.1f} after t={burn_in:g}")
            else:
                log(f"{policy.name} seed {seed}: wrote {path.name}")
            results.append(entry)
    return {"runs": results, "burn_in": burn_in}


def cmd_fluid(sc: Scenario, out: Path, log) -> dict:
    sc.require("a", "init")
    results = []
    for a in sc.a_list:
        system = FluidSystem(sc.config_set, sc.lam, sc.mu, a)
        tr = integrate(sc.init, system, sc.horizon, dt=sc.dt, sample_dt=sc.sample_dt if sc.sample_dt >= sc.dt else sc.dt)
        tr.meta = {**tr.meta, "scenario": sc.resolved()}
        path = out / f"{sc.name}_a{_tag(a)}.csv"
        tr.to_csv(path)
        results.append({"a": a, "file": path.name, "final_occupied": float(tr.occupied[-1])})
        log(f"a={a:g}: occupied {tr.occupied[0]:.5f} -> {tr.occupied[-1]:.5f} at t={tr.times[-1]:g}")
    return {"runs": results}


def cmd_optimal(sc: Scenario, out: Path, log) -> dict:
    rho = np.array(sc.lam) / np.array(sc.mu)
    lp = solve_lp(sc.config_set, rho)
    value = lp.objective
    frac = Fraction(value).limit_denominator(1000)
    log(f"LP optimum {value:.12g} (~{frac}); duals {np.round(lp.eta, 12).tolist()}")
    summary = {
        "lp": {
            "objective": value,
            "objective_fraction": str(frac),
            "x": {lab: float(v) for lab, v in zip(sc.config_set.labels(), lp.x) if v != 0},
            "eta": lp.eta.tolist(),
        }
    }
    if sc.a_list:
        rows = a_sweep(sc.config_set, rho, sc.mu, sc.a_list)
        path = out / f"{sc.name}_sweep.csv"
        write_sweep_csv(rows, sc.config_set, path, comment=json.dumps(_provenance(sc, "optimal"), sort_keys=True))
        summary["sweep_file"] = path.name
        summary["sweep"] = []
        for row in rows:
            if row.point is None:
                log(f"a={row.a:g}: failed ({row.error})")
                summary["sweep"].append({"a": row.a, "error": row.error})
                continue
            log(f"a={row.a:g}: objective {row.point.objective:.6f}, distance {row.distance:.6f}")
            summary["sweep"].append({"a": row.a, "objective": row.point.objective, "distance": row.distance})
        failed = [r for r in rows if r.point is None]
        if failed:
            raise SolverError(f"{len(failed)} sweep point(s) failed; see {path.name}")
    return summary


def cmd_compare(sc: Scenario, out: Path, log) -> dict:
    sc.require("policy", "r", "init")
    if len(sc.policies) != 1:
        raise ScenarioError("policies", "compare needs exactly one policy")
    policy = sc.policies[0]
    if not sc.a_list and isinstance(policy, GrandConst) and policy.c > 0:
        # c zero servers at scale r correspond to a = c / r in the fluid model
        sc.a_list = [policy.c / sc.r]
        log(f"using a = c / r = {sc.a_list[0]:g} for the fluid path")
    if len(sc.a_list) != 1:
        raise ScenarioError("a", "compare needs exactly one value of a")
    a = sc.a_list[0]
    fluid = integrate(sc.init, FluidSystem(sc.config_set, sc.lam, sc.mu, a), sc.horizon, dt=sc.dt)
    spec = SystemSpec(sc.config_set, sc.lam, sc.mu, sc.r, policy)
    sims = replicate(spec, sc.initial_counts(sc.r), sc.horizon, sc.sample_dt, sc.seeds, n_jobs=sc.n_jobs)
    runs, columns = [], {}
    grid = None
    for seed, sim in zip(sc.seeds, sims):
        gap = compare_sim_fluid(sim, fluid, t_max=sc.t_max)
        grid = gap.times
        columns[f"gap_seed{seed}"] = gap.gap
        runs.append({"seed": seed, "sup_gap": gap.sup, "t_at_sup": gap.argsup})
        log(f"seed {seed}: sup gap {gap.sup:.4f} at t={gap.argsup:g}")
    path = out / f"{sc.name}_gaps.csv"
    with path.open("w") as fh:
        fh.write("# " + json.dumps(_provenance(sc, "compare"), sort_keys=True) + "\n")
        fh.write(",".join(["t", *columns]) + "\n")
        for n, t in enumerate(grid):
            fh.write(",".join([repr(float(t))] + [repr(float(c[n])) for c in columns.values()]) + "\n")
    sups = [r["sup_gap"] for r in runs]
    return {"a": a, "runs": runs, "max_sup_gap": max(sups), "mean_sup_gap": float(np.mean(sups)), "gap_file": path.name}


def cmd_conjecture(sc: Scenario, out: Path, log) -> dict:
    sc.require("policy", "r_list", "init")
    table = []
    for policy in sc.policies:
        rows = conjecture_experiment(
            sc.config_set, sc.lam, sc.mu, policy, sc.r_list, sc.seeds, sc.init,
            horizon=sc.horizon, burn_in=sc.burn_in, sample_dt=sc.sample_dt, n_jobs=sc.n_jobs,
        )
        for row in rows:
            log(f"{policy.name} r={row.r:g}: distance {row.mean_distance:.4f} +- {row.distance_se:.4f}")
            table.append({"policy": policy_to_dict(policy), **row.as_dict()})
    path = out / f"{sc.name}_table.csv"
    with path.open("w") as fh:
        fh.write("# " + json.dumps(_provenance(sc, "conjecture"), sort_keys=True) + "\n")
        fh.write("policy,r,mean_distance,distance_se,occupied_fraction\n")
        for row in table:
            ((kind, value),) = row["policy"].items()
            fh.write(f"{kind}:{value},{row['r']!r},{row['mean_distance']!r},{row['distance_se']!r},{row['occupied_fraction']!r}\n")
    return {"table": table, "table_file": path.name}


COMMANDS = {
    "simulate": cmd_simulate,
    "fluid": cmd_fluid,
    "optimal": cmd_optimal,
    "compare": cmd_compare,
    "conjecture": cmd_conjecture,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grandsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file or bundled scenario name")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, help="run this single seed instead of the scenario's seeds")
        p.add_argument("--quiet", action="store_true")
    sub.add_parser("list", help="list bundled scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in bundled_scenarios():
            print(name)
        return EXIT_OK

    def log(msg: str) -> None:
        if not args.quiet:
            print(msg)

    try:
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ScenarioError("--seed", "must be non-negative")
            sc.seeds = [args.seed]
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](sc, out, log)
    except ScenarioError as exc:
        print(f"grandsim: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, FluidIntegrationError, RuntimeError, FloatingPointError) as exc:
        print(f"grandsim: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except ValueError as exc:
        print(f"grandsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    _write_json(out / f"{sc.name}_{args.command}.json", {**_provenance(sc, args.command), "results": summary})
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
