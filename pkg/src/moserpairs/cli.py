"""Command line entry point: ``moserpairs <command> --scenario <path|builtin:name>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .expr import ParseError
from .gallery import BUILDERS, builtin_documents, mutation_documents
from .rankclass import DimensionError
from .runner import COMMANDS, Settings, report_json, report_table, run
from .scenario import ScenarioError, dump_scenario, load_scenario, scenario_from_dict


def resolve(spec: str):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        docs = {**builtin_documents(), **mutation_documents()}
        if name not in docs:
            raise ScenarioError(f"unknown builtin scenario {name!r}; try 'moserpairs list'")
        return scenario_from_dict(docs[name])
    return load_scenario(spec)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moserpairs", description="Stability checks for pairs of geometric structures.")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        c = sub.add_parser(cmd, help=f"run the {cmd} tasks of a scenario")
        c.add_argument("--scenario", required=True, help="path to a JSON scenario or builtin:<name>")
        c.add_argument("--grid", type=int, default=17, help="grid points per coordinate for validation")
        c.add_argument("--t-steps", type=int, default=1000, help="RK4 steps on [0, 1]")
        c.add_argument("--seeds", type=int, default=100, help="number of quasi-random flow seeds")
        c.add_argument("--fourier-order", type=int, default=4, help="spectral truncation order N")
        c.add_argument("--tol", type=float, default=1e-8, help="local error tolerance of the integrator")
        c.add_argument("--report", choices=("json", "table"), default="table")
        c.add_argument("--out", type=Path, help="directory for <scenario>.<command>.json and .txt")
    sub.add_parser("list", help="list builtin scenarios")
    e = sub.add_parser("export", help="write a builtin scenario as JSON")
    e.add_argument("name")
    e.add_argument("--out", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in BUILDERS:
            print(name)
        for name in mutation_documents():
            print(f"{name} (mutation)")
        return 0
    try:
        if args.command == "export":
            text = dump_scenario(resolve(f"builtin:{args.name}"))
            if args.out:
                args.out.write_text(text)
            else:
                sys.stdout.write(text)
            return 0
        scenario = resolve(args.scenario)
        settings = Settings(grid=args.grid, t_steps=args.t_steps, seeds=args.seeds,
                            fourier_order=args.fourier_order, tol=args.tol)
        code, report = run(scenario, args.command, settings)
    except (ScenarioError, ParseError, DimensionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    text_json, text_table = report_json(report), report_table(report)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        stem = f"{scenario.name}.{args.command}"
        (args.out / f"{stem}.json").write_text(text_json)
        (args.out / f"{stem}.txt").write_text(text_table)
    sys.stdout.write(text_json if args.report == "json" else text_table)
    if code:
        print(report["first_mismatch"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
