"""Execute scenario tasks and assemble deterministic reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .cohomology import (
    RESIDUAL_TOL,
    basic_h2_dimension,
    de_rham_periods,
    find_basic_primitive,
    reeb_class,
)
from .moser import (
    MoserProblem,
    integrate_isotopy,
    necessity_check,
    quasi_random_seeds,
    verify_isotopy,
)
from .rankclass import StructureError, sample_grid, validate_structure
from .reeb import (
    check_commutation_rank_prop,
    check_leafwise_projection,
    reeb_cs_pair,
    reeb_cs_structure,
    reeb_distribution_cc,
    reeb_pair_contact,
)
from .scenario import SCHEMA, Scenario

COMMANDS = ("validate", "reeb", "cohomology", "moser", "all")
OP_COMMAND = {
    "validate": "validate",
    "reeb": "reeb",
    "reeb_class": "cohomology",
    "basic_h2": "cohomology",
    "primitive": "cohomology",
    "periods": "cohomology",
    "moser": "moser",
}

REEB_TOL = 1e-9
PERIOD_TOL = 1e-9
ISOTOPY_TOL = 1e-6


@dataclass
class Settings:
    grid: int = 17
    reeb_grid: int = 7
    t_steps: int = 1000
    seeds: int = 100
    fourier_order: int = 4
    tol: float = 1e-8


def plain(obj):
    """JSON-ready copy: numpy scalars and arrays become Python numbers and lists."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    return obj


# task handlers ---------------------------------------------------------------------------

def _validate(sc: Scenario, task, st: Settings):
    s = sc.structure(task.get("structure"))
    rep = validate_structure(s, grid_k=st.grid, t_samples=tuple(task.get("t_samples", (0.0,))))
    outcome = "pass" if rep.valid else "fail"
    details = {"failed": rep.failed, "grid_points": rep.grid_points, "certification": rep.certification,
               "worst": {c.name: c.value for c in rep.conditions}}
    missing = [c for c in task.get("expect_failed", []) if c not in rep.failed]
    if missing:
        details["missing_failures"] = missing
    return outcome, details


def _reeb(sc: Scenario, task, st: Settings):
    s = sc.structure(task.get("structure"))
    t = float(task.get("t", 0.0))
    pts = sample_grid(sc.model, list(s.forms.values()), k=st.reeb_grid)
    details = {"grid_points": len(pts), "t": t}
    ok = True
    if s.kind == "symplectic_pair":
        return "inapplicable", {"reason": "symplectic pairs carry no Reeb fields"}
    if s.kind in ("contact_symplectic_pair", "cs_structure"):
        sol = reeb_cs_structure(s.alpha, s.eta, pts, t)
        details["residual"] = sol.max_residual
        if s.kind == "contact_symplectic_pair":
            pair = reeb_cs_pair(s.alpha, s.eta, pts, t)
            details["pair_residual"] = pair.max_residual
            details["route_gap"] = float(np.max(np.abs(pair["R"] - sol["R"])))
            ok = details["route_gap"] <= REEB_TOL and pair.max_residual <= REEB_TOL
        ok = ok and sol.max_residual <= REEB_TOL
    else:
        dist = reeb_distribution_cc(s.alpha, s.beta, pts, t)
        details["residual"] = dist.max_residual
        ok = dist.max_residual <= REEB_TOL
        if s.kind == "contact_pair":
            pair = reeb_pair_contact(s.alpha, s.beta, pts, t)
            details["pair_residual"] = pair.max_residual
            details["route_gap"] = float(max(np.max(np.abs(pair["A"] - dist["A"])), np.max(np.abs(pair["B"] - dist["B"]))))
            ok = ok and pair.max_residual <= REEB_TOL and details["route_gap"] <= REEB_TOL
        if "commuting" in task:
            com = check_commutation_rank_prop(s.alpha, s.beta, pts, t)
            details["commutation"] = com.to_dict()
            ok = ok and com.agrees and com.commuting == bool(task["commuting"])
        if task.get("projection"):
            h = s.h
            k = s.k
            proj = check_leafwise_projection(s.alpha, s.beta, h, k, pts, t)
            details["projection"] = proj.to_dict()
            ok = ok and proj.holds
    return ("pass" if ok else "fail"), details


def _reeb_class(sc: Scenario, task, st: Settings):
    rc = reeb_class(sc.forms[task["form"]], order=int(task.get("order", 2)))
    return ("pass" if rc.vanishes else "fail"), rc.to_dict()


def _basic_h2(sc: Scenario, task, st: Settings):
    fol = sc.foliations[task["foliation"]]
    orders = [int(n) for n in task.get("orders", [st.fourier_order, 2 * st.fourier_order])]
    dims = [basic_h2_dimension(sc.model, fol, n) for n in orders]
    prop = task.get("property", "stable")
    if prop == "stable":
        ok = len(set(dims)) == 1
    elif prop == "grows":
        ok = all(b > a for a, b in zip(dims, dims[1:]))
    else:
        raise ValueError(f"unknown basic_h2 property {prop!r}")
    return ("pass" if ok else "fail"), {"orders": orders, "dimensions": dims, "property": prop}


def _primitive(sc: Scenario, task, st: Settings):
    fol = sc.foliations[task["foliation"]]
    order = int(task.get("order", st.fourier_order))
    res = find_basic_primitive(sc.forms[task["form"]], fol, order, convergence=bool(task.get("convergence", False)))
    details = res.to_dict()
    details.pop("found")
    if res.found and max(res.residual_by_order.values()) <= RESIDUAL_TOL:
        return "pass", details
    floor = task.get("min_residual")
    if floor is not None and min(res.residual_by_order.values()) < float(floor):
        details["reason"] = f"residual fell below the certified floor {floor}"
        return "indeterminate", details
    return "fail", details


def _periods(sc: Scenario, task, st: Settings):
    cycles = [tuple(c) for c in task["cycles"]]
    ts = [float(t) for t in task.get("t_samples", (0.0, 0.5, 1.0))]
    per = de_rham_periods(sc.forms[task["form"]], cycles, ts)
    variation = float(np.max(per.max(axis=0) - per.min(axis=0)))
    return ("pass" if variation <= PERIOD_TOL else "fail"), {
        "cycles": [list(c) for c in cycles], "t_samples": ts, "periods": per, "variation": variation}


def _moser(sc: Scenario, task, st: Settings):
    s = sc.structure(task.get("structure"))
    nec = necessity_check(s, order=st.fourier_order)
    details = {"necessity": nec.to_dict()}
    if nec.verdict != "pass":
        return nec.verdict, details
    prims = {role: sc.forms[name] for role, name in task.get("primitives", {}).items()}
    problem = MoserProblem(s, prims, order=st.fourier_order)
    checks = problem.check_primitives()
    details["primitives"] = checks
    if not all(c["ok"] for c in checks.values()):
        return "fail", details
    seeds = quasi_random_seeds(sc.model, st.seeds)
    result = integrate_isotopy(problem, seeds, st.t_steps, tol=st.tol)
    report = verify_isotopy(result, problem)
    details["integration"] = result.to_dict()
    details["verification"] = report.summary()
    ok = (report.pullback_sup <= ISOTOPY_TOL and report.proportionality_sup <= ISOTOPY_TOL
          and report.factor_mismatch <= ISOTOPY_TOL)
    if task.get("factor_nontrivial"):
        ok = ok and report.factor_deviation > 1e-3
    return ("pass" if ok else "fail"), details


HANDLERS = {
    "validate": _validate,
    "reeb": _reeb,
    "reeb_class": _reeb_class,
    "basic_h2": _basic_h2,
    "primitive": _primitive,
    "periods": _periods,
    "moser": _moser,
}


# orchestration -----------------------------------------------------------------------------

def _matches(task, outcome, details) -> bool:
    if outcome != task.get("expect", "pass"):
        return False
    return not details.get("missing_failures")


def run(sc: Scenario, command: str = "all", settings: Settings | None = None) -> tuple[int, dict]:
    """Run the tasks selected by ``command``; returns (exit code, report)."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    st = settings or Settings()
    selected = [(i, t) for i, t in enumerate(sc.tasks) if command == "all" or OP_COMMAND.get(t["op"]) == command]
    entries = []
    mismatches = []
    validated = {}
    for i, task in selected:
        op = task["op"]
        if op not in HANDLERS:
            raise ValueError(f"tasks[{i}]: unknown op {op!r}")
        name = task.get("structure")
        if op not in ("validate",) and name is not None and name not in validated:
            rep = validate_structure(sc.structure(name), grid_k=st.grid)
            validated[name] = rep
            if not rep.valid:
                entry = {"index": i, "op": op, "expect": task.get("expect", "pass"), "outcome": "invalid",
                         "matched": False, "details": {"failed": rep.failed}}
                entries.append(entry)
                mismatches.append(f"tasks[{i}] ({op}): structure {name!r} does not validate: {rep.failed}")
                continue
        try:
            outcome, details = HANDLERS[op](sc, task, st)
        except StructureError as exc:
            outcome, details = "error", {"error": str(exc)}
        matched = _matches(task, outcome, details)
        entries.append({"index": i, "op": op, "expect": task.get("expect", "pass"), "outcome": outcome,
                        "matched": matched, "details": details})
        if not matched:
            mismatches.append(f"tasks[{i}] ({op}): expected {task.get('expect', 'pass')}, got {outcome}")
    report = {
        "schema": SCHEMA,
        "scenario": sc.name,
        "command": command,
        "settings": asdict(st),
        "tasks": entries,
        "matched": not mismatches,
        "first_mismatch": mismatches[0] if mismatches else None,
    }
    return (0 if not mismatches else 1), plain(report)


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _headline(entry) -> str:
    d = entry["details"]
    op = entry["op"]
    if op == "validate":
        return "failed: " + (", ".join(d.get("failed", [])) or "none")
    if op == "reeb" and "residual" in d:
        return f"residual {d['residual']:.2e}"
    if op == "basic_h2":
        return "dims " + " ".join(f"N={n}:{k}" for n, k in zip(d["orders"], d["dimensions"]))
    if op == "primitive":
        return "residual " + " ".join(f"N={n}:{r:.2e}" for n, r in d["residual_by_order"].items())
    if op == "periods":
        return f"variation {d['variation']:.2e}"
    if op == "moser" and "verification" in d:
        v = d["verification"]
        return (f"pullback {v['pullback_sup']:.2e} proportional {v['proportionality_sup']:.2e} "
                f"factor gap {v['factor_mismatch']:.2e}")
    if op == "moser":
        return d["necessity"].get("reason", "")
    if op == "reeb_class":
        return f"leafwise sup {d['leafwise_sup']:.2e}"
    return d.get("error", d.get("reason", ""))


def report_table(report: dict) -> str:
    rows = [("task", "op", "expect", "outcome", "ok", "summary")]
    for e in report["tasks"]:
        rows.append((str(e["index"]), e["op"], e["expect"], e["outcome"], "yes" if e["matched"] else "NO", _headline(e)))
    widths = [max(len(r[c]) for r in rows) for c in range(5)]
    lines = [f"scenario {report['scenario']} ({report['command']})"]
    for r in rows:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in range(5)) + "  " + r[5])
    lines.append("all expectations met" if report["matched"] else f"MISMATCH: {report['first_mismatch']}")
    return "\n".join(lines) + "\n"
