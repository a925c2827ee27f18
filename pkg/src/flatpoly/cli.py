"""Command-line front end.

Three subcommands:

* ``delta``: print the degree-dependent nonpositivity margins.
* ``solve``: run the full pipeline (flat transform, polynomial
  parameterization, cost/constraint conditioning, QP and/or LP solve) on a
  JSON model file; write a solution JSON and a sampled trajectory CSV.
* ``simulate-pmsm``: run the closed-loop motor scenario and write trace CSVs.

Exit codes: 0 success; 1 infeasible or non-optimal solve; 2 argument,
parse, or shape errors; 3 non-convex conditioned cost.  The environment
variable FLATPOLY_LOG (off | info | debug) routes diagnostics to standard
error; standard output carries only data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import (
    DegreeOutOfRange,
    DegreeTooLow,
    DimensionMismatch,
    NotPositiveDefinite,
    UncontrollableSystem,
)
from .flat import LinearConstraintSpec, LtiSystem, QuadraticCostSpec, flat_transform
from .polybasis import parameterize_outputs, parameterize_states_inputs
from .costcond import condition_cost, least_distance_transform
from .polyconstraint import compute_delta, condition_constraints, delta_table
from .pmsm_sim import PmsmParams, Scenario, pmsm_constraints, run_closed_loop
from .solver import solve_lp, solve_qp, suboptimality_report

log = logging.getLogger(__name__)

#: Number of CSV sample points on [0, T] for `solve` trajectories.
TRAJECTORY_SAMPLES = 200

EXIT_OK = 0
EXIT_SOLVE_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_NOT_CONVEX = 3


@dataclass
class ModelConfig:
    """One planning problem, loadable from a JSON document.

    Layout::

        {
          "system":      {"A": [[..]], "B": [[..]], "d": [..]},
          "cost":        {"Q": [[..]], "R": [[..]], "P": [[..]],
                          "x_star": [..], "x_ref": [..], "T": 1.0},
          "constraints": {"G_x": [[..]], "G_u": [[..]], "g0": [..]},
          "basis":       {"N": 5},
          "initial_state": [..]
        }

    "d", "x_ref" and the whole "constraints" object are optional.
    """

    system: LtiSystem
    cost: QuadraticCostSpec
    constraints: LinearConstraintSpec
    degree: int
    x0: np.ndarray

    @classmethod
    def from_dict(cls, doc):
        try:
            sys_doc = doc["system"]
            cost_doc = doc["cost"]
            basis_doc = doc["basis"]
            x0 = np.asarray(doc["initial_state"], dtype=float)
        except KeyError as exc:
            raise DimensionMismatch(f"missing required config key: {exc}") from exc
        system = LtiSystem(
            A=np.asarray(sys_doc["A"], dtype=float),
            B=np.asarray(sys_doc["B"], dtype=float),
            d=None if sys_doc.get("d") is None
            else np.asarray(sys_doc["d"], dtype=float),
        )
        cost = QuadraticCostSpec(
            Q=np.asarray(cost_doc["Q"], dtype=float),
            R=np.asarray(cost_doc["R"], dtype=float),
            P=np.asarray(cost_doc["P"], dtype=float),
            x_star=np.asarray(cost_doc["x_star"], dtype=float),
            x_ref=None if cost_doc.get("x_ref") is None
            else np.asarray(cost_doc["x_ref"], dtype=float),
            T=float(cost_doc["T"]),
        )
        con_doc = doc.get("constraints")
        constraints = None
        if con_doc is not None:
            constraints = LinearConstraintSpec(
                G_x=np.asarray(con_doc["G_x"], dtype=float),
                G_u=np.asarray(con_doc["G_u"], dtype=float),
                g0=np.asarray(con_doc["g0"], dtype=float),
            )
        degree = int(basis_doc["N"])
        if x0.shape != (system.n,):
            raise DimensionMismatch(
                f"initial_state has shape {x0.shape}, expected ({system.n},)"
            )
        return cls(system=system, cost=cost, constraints=constraints,
                   degree=degree, x0=x0)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        doc = {
            "system": {
                "A": self.system.A.tolist(),
                "B": self.system.B.tolist(),
                "d": self.system.d.tolist(),
            },
            "cost": {
                "Q": self.cost.Q.tolist(),
                "R": self.cost.R.tolist(),
                "P": self.cost.P.tolist(),
                "x_star": self.cost.x_star.tolist(),
                "x_ref": self.cost.x_ref.tolist(),
                "T": self.cost.T,
            },
            "basis": {"N": self.degree},
            "initial_state": self.x0.tolist(),
        }
        if self.constraints is not None:
            doc["constraints"] = {
                "G_x": self.constraints.G_x.tolist(),
                "G_u": self.constraints.G_u.tolist(),
                "g0": self.constraints.g0.tolist(),
            }
        return doc


def _fmt(x):
    """Locale-independent scalar formatting for CSV cells."""
    return format(float(x), ".10g")


def cmd_delta(args):
    """Print N, Delta(N) rows up to --max-n."""
    table = delta_table(args.max_n)
    for N, value in table.items():
        print(f"{N}, {value:.4f}")
    return EXIT_OK


def _result_to_doc(result):
    return {
        "status": result.status,
        "solver": result.solver,
        "alpha": None if result.alpha is None else result.alpha.tolist(),
        "quadratic_cost": None if not np.isfinite(result.quadratic_cost)
        else result.quadratic_cost,
        "iterations": result.iterations,
        "active_rows": list(result.active_rows),
    }


def cmd_solve(args):
    """Solve one model file and write solution JSON plus trajectory CSV."""
    config = ModelConfig.from_file(args.model)
    fm = flat_transform(config.system)
    basis, y = parameterize_outputs(fm, config.x0, config.degree, config.cost.T)
    x_poly, u_poly = parameterize_states_inputs(y, fm)
    pc = condition_cost(x_poly, u_poly, config.cost)
    acs = None
    if config.constraints is not None:
        acs = condition_constraints(
            x_poly, u_poly, config.constraints, config.cost.T,
            compute_delta(config.degree),
        )
    ldp = least_distance_transform(pc, acs)

    results = {}
    if args.solver in ("qp", "both"):
        results["qp"] = solve_qp(ldp)
    if args.solver in ("lp", "both"):
        results["lp"] = solve_lp(ldp)

    doc = {name: _result_to_doc(res) for name, res in results.items()}
    if args.solver == "both" and all(
        r.status == "optimal" for r in results.values()
    ):
        rep = suboptimality_report(results["qp"], results["lp"], pc)
        doc["suboptimality"] = {
            "j_lp": rep.j_lp,
            "j_unconstrained": rep.j0,
            "j_constraint": rep.j_c,
            "bound": rep.bound,
            "holds": rep.holds,
        }

    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("solution written to %s", args.out)

    failed = [n for n, r in results.items() if r.status != "optimal"]
    if failed:
        for name in failed:
            print(f"error: {name} solve ended with status "
                  f"{results[name].status}", file=sys.stderr)
        return EXIT_SOLVE_FAILED

    csv_path = os.path.splitext(args.out)[0] + ".csv"
    primary = results["qp"] if "qp" in results else results["lp"]
    t_grid = np.linspace(0.0, config.cost.T, TRAJECTORY_SAMPLES)
    x_vals = x_poly(primary.alpha, t_grid)
    u_vals = u_poly(primary.alpha, t_grid)
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["t"]
            + [f"x{i + 1}" for i in range(fm.n)]
            + [f"u{j + 1}" for j in range(fm.m)]
        )
        for idx, t in enumerate(t_grid):
            writer.writerow(
                [_fmt(t)]
                + [_fmt(v) for v in x_vals[:, idx]]
                + [_fmt(v) for v in u_vals[:, idx]]
            )
    log.info("trajectory written to %s", csv_path)
    return EXIT_OK


def _scenario_from_file(path):
    if path is None:
        return Scenario(), PmsmParams()
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    machine_doc = doc.pop("machine", {})
    scenario_kwargs = {}
    mapping = {
        "T_horizon": "T_horizon", "dt": "dt", "duration": "duration",
        "degree": "degree", "N": "degree", "q": "q",
        "speed_setpoints": "speed_setpoints", "load_torque": "load_torque",
        "J_m": "J_m", "b": "b", "k_p": "k_p", "k_i": "k_i",
        "tau_limit": "tau_limit", "current_margin": "current_margin",
    }
    for key, value in doc.items():
        if key not in mapping:
            raise DimensionMismatch(f"unknown scenario key: {key!r}")
        target = mapping[key]
        if target in ("speed_setpoints", "load_torque"):
            value = tuple((float(t), float(v)) for t, v in value)
        scenario_kwargs[target] = value
    params = PmsmParams(**machine_doc)
    return Scenario(**scenario_kwargs), params


def _write_trace(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "id", "iq", "vd", "vq", "omega", "tau",
                         "tau_ref", "J", "iters", "status"])
        for row in trace:
            writer.writerow([
                _fmt(row.t), _fmt(row.i_d), _fmt(row.i_q), _fmt(row.v_d),
                _fmt(row.v_q), _fmt(row.omega), _fmt(row.tau),
                _fmt(row.tau_ref), _fmt(row.J), row.iterations, row.status,
            ])


def _polytope_violations(trace, params, tol=1e-6):
    spec = pmsm_constraints(params, current_margin=0.0)
    count = 0
    for row in trace:
        x = np.array([row.i_d, row.i_q])
        u = np.array([row.v_d, row.v_q])
        vals = spec.G_x @ x + spec.G_u @ u + spec.g0
        if np.any(vals > tol):
            count += 1
    return count


def cmd_simulate_pmsm(args):
    """Run the closed-loop scenario and write one CSV per solver."""
    scenario, params = _scenario_from_file(args.scenario)
    solvers = ["qp", "lp"] if args.solver == "both" else [args.solver]
    for kind in solvers:
        trace = run_closed_loop(scenario, kind, params)
        path = f"{args.out}-{kind}.csv"
        _write_trace(path, trace)
        if trace:
            worst = max(row.iterations for row in trace)
            violations = _polytope_violations(trace, params)
            peak_id = max(abs(row.i_d) for row in trace)
            print(f"{kind}: steps={len(trace)} worst_iterations={worst} "
                  f"violations={violations} peak_abs_id={peak_id:.4f}")
        else:
            print(f"{kind}: steps=0")
        log.info("trace written to %s", path)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="flatpoly",
        description="Polynomial trajectory optimization for constrained "
                    "linear systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_delta = sub.add_parser(
        "delta", help="print the nonpositivity margin table"
    )
    p_delta.add_argument("--max-n", type=int, default=15,
                         help="largest degree to print (1..15)")
    p_delta.set_defaults(func=cmd_delta)

    p_solve = sub.add_parser("solve", help="solve one model file")
    p_solve.add_argument("--model", required=True, help="model JSON path")
    p_solve.add_argument("--solver", choices=["qp", "lp", "both"],
                         default="qp")
    p_solve.add_argument("--out", required=True,
                         help="solution JSON path (CSV written alongside)")
    p_solve.set_defaults(func=cmd_solve)

    p_sim = sub.add_parser("simulate-pmsm",
                           help="closed-loop motor scenario")
    p_sim.add_argument("--scenario", default=None,
                       help="scenario JSON path (defaults used if omitted)")
    p_sim.add_argument("--solver", choices=["qp", "lp", "both"],
                       default="both")
    p_sim.add_argument("--out", required=True, help="output CSV prefix")
    p_sim.set_defaults(func=cmd_simulate_pmsm)
    return parser


def _configure_logging():
    level_name = os.environ.get("FLATPOLY_LOG", "off").lower()
    levels = {"off": logging.CRITICAL + 10, "info": logging.INFO,
              "debug": logging.DEBUG}
    level = levels.get(level_name)
    if level is None:
        print(f"warning: unknown FLATPOLY_LOG value {level_name!r}; "
              "using 'off'", file=sys.stderr)
        level = levels["off"]
    logging.basicConfig(
        stream=sys.stderr, level=level,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "delta" and not 1 <= args.max_n <= 15:
        parser.error(f"--max-n must be in 1..15, got {args.max_n}")
    try:
        return args.func(args)
    except NotPositiveDefinite as exc:
        print(f"error: conditioned cost is not convex: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVEX
    except (DimensionMismatch, DegreeOutOfRange, DegreeTooLow,
            UncontrollableSystem, KeyError, ValueError,
            json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
