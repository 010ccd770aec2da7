"""Command-line entry point.

Exit codes:
    0  success (solve: verdict optimal; member: phi is a potential; experiment: all assertions held)
    1  solve found a non-optimal result, or member rejected phi
    2  invalid input (schema, flags, tolerances)
    3  solver failure (stalled pivoting, negative cycle, broken invariant)
    4  experiment assertion failure
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import DEFAULT_TOL, Box, SchemaError, load_instance
from .errors import DomainError, FeasibilityError, PothullError, PreconditionError, UnsupportedOperation
from .experiments import jsonable, load_config, run_config
from .geometry import hausdorff
from .potentials import (
    build_chain_graph,
    compute_lambda,
    from_brenier,
    is_member,
    uniqueness_predictor,
)
from .solver import TransportPlan, optimal_face, solve, verify_optimal

EXIT_OK, EXIT_NONOPTIMAL, EXIT_SCHEMA, EXIT_SOLVER, EXIT_EXPERIMENT = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_SCHEMA)


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("tolerance must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pothull", description="Kantorovich potential sets of discrete transport instances.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_nonneg, default=DEFAULT_TOL, help="absolute tolerance (default 1e-9)")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common], help="optimal plan, duals, optimal face and report")
    s.add_argument("instance")

    c = sub.add_parser("certificate", parents=[common], help="lambda matrix, extremal potentials, diameters")
    c.add_argument("instance")
    c.add_argument("--anchor", type=int, default=0)
    c.add_argument("--plan", help="reuse plan and duals from a previous 'solve' output")

    m = sub.add_parser("member", parents=[common], help="is a given phi a Kantorovich potential")
    m.add_argument("instance")
    m.add_argument("phi", help="JSON list, or path to a JSON file holding a list")
    m.add_argument("--anchor", type=int, default=0)
    m.add_argument("--brenier", action="store_true", help="phi is in the convex (Brenier) convention")

    e = sub.add_parser("experiment", parents=[common], help="run a scenario config")
    e.add_argument("config")
    e.add_argument("--seed", type=int, help="override the config seed")

    h = sub.add_parser("hausdorff", parents=[common], help="Hausdorff distance of a point set to a box or set")
    h.add_argument("points", help="JSON file with a list of points")
    g = h.add_mutually_exclusive_group(required=True)
    g.add_argument("--box", nargs=2, metavar=("LO", "HI"), help="comma-separated corners")
    g.add_argument("--other", help="JSON file with a second list of points")
    return p


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _json_arg(text: str):
    path = Path(text)
    if path.exists():
        return json.loads(path.read_text())
    return json.loads(text)


def _require_json(args) -> None:
    if args.format != "json":
        raise SchemaError("--format", f"'{args.command}' only emits json")


def cmd_solve(args) -> int:
    _require_json(args)
    inst = load_instance(args.instance)
    C = inst.cost_matrix()
    sol = solve(inst.rho, inst.mu, inst.cost, C=C)
    report = verify_optimal(sol.plan, sol.phi, sol.psi, inst.rho, inst.mu, inst.cost, tol=args.tol, C=C)
    payload = {"plan": [[i, j, w] for i, j, w in sol.plan.entries], "value": sol.value,
               "phi": sol.phi.tolist(), "psi": sol.psi.tolist(), "iterations": sol.iterations}
    if report.optimal:
        face = optimal_face(sol.plan, sol.phi, sol.psi, inst.rho, inst.mu, inst.cost, tol=args.tol, C=C)
        payload["usable_edges"] = sorted([list(e) for e in face.usable_edges])
    payload["report"] = report.to_dict()
    _emit(payload, args.out)
    return EXIT_OK if report.optimal else EXIT_NONOPTIMAL


def _certificate(inst, anchor: int, tol: float, plan_path: Optional[str] = None):
    C = inst.cost_matrix()
    if plan_path:
        data = json.loads(Path(plan_path).read_text())
        for key in ("plan", "phi", "psi"):
            if key not in data:
                raise SchemaError(f"plan.{key}", "missing")
        plan = TransportPlan.from_entries(data["plan"], C.shape)
        phi, psi = np.asarray(data["phi"], float), np.asarray(data["psi"], float)
    else:
        sol = solve(inst.rho, inst.mu, inst.cost, C=C)
        plan, phi, psi = sol.plan, sol.phi, sol.psi
    face = optimal_face(plan, phi, psi, inst.rho, inst.mu, inst.cost, tol=tol, C=C)
    cert = compute_lambda(build_chain_graph(face, C=C), anchor, tol)
    return face, cert


def cmd_certificate(args) -> int:
    _require_json(args)
    inst = load_instance(args.instance)
    face, cert = _certificate(inst, args.anchor, args.tol, args.plan)
    comps = uniqueness_predictor(face)
    payload = cert.to_dict()
    payload["components"] = [p["sources"] for p in comps.partition()]
    payload["component_targets"] = [p["targets"] for p in comps.partition()]
    payload["connected"] = comps.connected
    payload["usable_edges"] = sorted([list(e) for e in face.usable_edges])
    _emit(payload, args.out)
    return EXIT_OK


def cmd_member(args) -> int:
    _require_json(args)
    inst = load_instance(args.instance)
    try:
        phi = np.asarray(_json_arg(args.phi), dtype=float)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise SchemaError("phi", f"not a JSON list of numbers ({exc})") from None
    if phi.shape != (inst.rho.size,):
        raise SchemaError("phi", f"expected {inst.rho.size} values, got shape {phi.shape}")
    if args.brenier:
        phi = from_brenier(phi, inst.rho.points, inst.cost.kind)
    _, cert = _certificate(inst, args.anchor, args.tol)
    ok, worst, pair = is_member(phi, cert, tol=args.tol)
    _emit({"member": ok, "worst_violation": worst, "worst_pair": list(pair)}, args.out)
    return EXIT_OK if ok else EXIT_NONOPTIMAL


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = args.out or cfg.output
    cfg = replace(cfg, output=None)
    res = run_config(cfg)
    if out:
        res.write(out)
    elif args.format == "csv":
        sys.stdout.write(res.csv_text())
    else:
        _emit(jsonable(res.metadata()), None)
    if not res.passed:
        for f in res.failures:
            print(f"assertion failed: {f}", file=sys.stderr)
        return EXIT_EXPERIMENT
    return EXIT_OK


def _points_file(path: str, field: str) -> np.ndarray:
    try:
        P = np.asarray(json.loads(Path(path).read_text()), dtype=float)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise SchemaError(field, f"cannot read points ({exc})") from None
    if P.ndim == 1:
        P = P[:, None]
    if P.ndim != 2 or P.shape[0] == 0:
        raise SchemaError(field, "expected a non-empty list of points")
    return P


def cmd_hausdorff(args) -> int:
    _require_json(args)
    A = _points_file(args.points, "points")
    if args.box:
        try:
            lo = np.array([float(v) for v in args.box[0].split(",")])
            hi = np.array([float(v) for v in args.box[1].split(",")])
        except ValueError:
            raise SchemaError("--box", "corners must be comma-separated numbers") from None
        other = Box(lo, hi)
    else:
        other = _points_file(args.other, "other")
    _emit({"hausdorff": hausdorff(A, other)}, args.out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "certificate": cmd_certificate, "member": cmd_member,
            "experiment": cmd_experiment, "hausdorff": cmd_hausdorff}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (PreconditionError, FeasibilityError) as exc:
        print(f"non-optimal input: {exc}", file=sys.stderr)
        return EXIT_NONOPTIMAL
    except (DomainError, UnsupportedOperation) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except PothullError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
