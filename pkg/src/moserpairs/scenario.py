"""Scenario documents: JSON with a model, named forms, structures, foliations and tasks.

Example::

    {"schema": 1, "name": "t3-cs-pair",
     "model": {"builtin": "T3"},
     "forms": {"alpha": {"degree": 1, "components": [{"indices": [3], "expr": "1"}]}, ...},
     "structures": {"main": {"kind": "contact_symplectic_pair", "forms": {"alpha": "alpha", "eta": "eta"},
                             "type": [0, 1]}},
     "foliations": {"G": {"frame_span": [3]}},
     "tasks": [{"op": "validate", "structure": "main", "expect": "pass"}]}

Periods and structure constants accept numbers or constant expressions in ``pi``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ParseError, ScalarField, parse, to_string
from .manifold import CoframeModel, DifferentialForm
from .models import shipped_models
from .rankclass import DimensionError, FrameSpan, GeometricStructure, KernelOf

SCHEMA = 1


class ScenarioError(ValueError):
    """Input problem in a scenario document (maps to exit code 2)."""


@dataclass
class Scenario:
    name: str
    model: CoframeModel
    forms: dict
    structures: dict
    foliations: dict
    tasks: list
    description: str = ""
    document: dict = field(default_factory=dict, repr=False)

    def structure(self, name=None) -> GeometricStructure:
        if name is None:
            name = next(iter(self.structures))
        return self.structures[name]


def _constant(value, where):
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(parse(str(value), ["pi"]).evaluate({"pi": math.pi}))
    except ParseError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def _expr(text, variables, where) -> ScalarField:
    try:
        return parse(str(text), variables)
    except ParseError as exc:
        raise ScenarioError(f"{where}: {exc} in {text!r}") from exc


def model_from_dict(doc) -> CoframeModel:
    if isinstance(doc, str):
        doc = {"builtin": doc}
    if "builtin" in doc:
        models = shipped_models()
        if doc["builtin"] not in models:
            raise ScenarioError(f"unknown builtin model {doc['builtin']!r}; known: {sorted(models)}")
        return models[doc["builtin"]]
    try:
        coords = list(doc["coords"])
        n = len(coords)
        periods = [_constant(p, "model.periods") for p in doc["periods"]]
    except KeyError as exc:
        raise ScenarioError(f"model is missing {exc}") from exc
    variables = coords
    sc = {}
    for entry in doc.get("structure_constants", []):
        if len(entry) != 4:
            raise ScenarioError("structure constants are [i, j, k, c] with 1-based indices")
        i, j, k, c = entry
        if not all(1 <= int(x) <= n for x in (i, j, k)):
            raise ScenarioError(f"structure constant index out of range in {entry}")
        sc[(int(i) - 1, int(j) - 1, int(k) - 1)] = _constant(c, "structure constant")

    def matrix(key):
        rows = doc.get(key)
        if rows is None:
            return None
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ScenarioError(f"model.{key} must be {n}x{n}")
        return [[_expr(x, variables, f"model.{key}") for x in r] for r in rows]

    shears = []
    for entry in doc.get("shears", []):
        shift, target, source, coef = entry
        shears.append((int(shift) - 1, int(target) - 1, int(source) - 1, _constant(coef, "shear")))
    try:
        return CoframeModel(doc.get("name", "custom"), coords, periods, sc, matrix("frame"), matrix("coframe"), shears)
    except ValueError as exc:
        raise ScenarioError(f"model: {exc}") from exc


def model_to_dict(model: CoframeModel) -> dict:
    builtin = shipped_models().get(model.name)
    if builtin is not None and model_to_dict_full(builtin) == model_to_dict_full(model):
        return {"builtin": model.name}
    return model_to_dict_full(model)


def model_to_dict_full(model: CoframeModel) -> dict:
    return {
        "name": model.name,
        "coords": list(model.coords),
        "periods": [float(p) for p in model.periods],
        "structure_constants": [[i + 1, j + 1, k + 1, float(c)] for (i, j, k), c in sorted(model.structure_constants.items())],
        "frame": [[to_string(f.node) for f in row] for row in model.frame_fields],
        "coframe": [[to_string(f.node) for f in row] for row in model.coframe],
        "shears": [[s + 1, t + 1, u + 1, float(c)] for s, t, u, c in model.shears],
    }


def form_from_dict(model: CoframeModel, doc, where) -> DifferentialForm:
    try:
        degree = int(doc["degree"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: missing or bad degree") from exc
    if not 0 <= degree <= model.dim:
        raise ScenarioError(f"{where}: degree {degree} does not fit dimension {model.dim}")
    comps = {}
    for c, entry in enumerate(doc.get("components", [])):
        idx = tuple(int(i) for i in entry.get("indices", []))
        if len(idx) != degree or any(not 1 <= i <= model.dim for i in idx):
            raise ScenarioError(f"{where}: component {c} has indices {list(idx)} unfit for degree {degree} on dimension {model.dim}")
        if len(set(idx)) != len(idx):
            raise ScenarioError(f"{where}: repeated index in {list(idx)}")
        if idx in comps:
            raise ScenarioError(f"{where}: duplicate component {list(idx)}")
        comps[idx] = _expr(entry["expr"], model.variables, f"{where}.components[{c}]")
    try:
        return model.form(degree, comps)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def form_to_dict(form: DifferentialForm) -> dict:
    return {
        "degree": form.degree,
        "components": [{"indices": [i + 1 for i in idx], "expr": to_string(f.node)}
                       for idx, f in sorted(form.components.items())],
    }


def _unique_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ScenarioError(f"duplicate name {k!r}")
        out[k] = v
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    doc = copy.deepcopy(doc)
    if doc.get("schema") != SCHEMA:
        raise ScenarioError(f"unsupported schema {doc.get('schema')!r}; expected {SCHEMA}")
    if "name" not in doc or "model" not in doc:
        raise ScenarioError("scenario needs 'name' and 'model'")
    model = model_from_dict(doc["model"])
    forms = {name: form_from_dict(model, f, f"forms.{name}") for name, f in doc.get("forms", {}).items()}
    structures = {}
    for name, s in doc.get("structures", {}).items():
        refs = s.get("forms", {})
        missing = [r for r in refs.values() if r not in forms]
        if missing:
            raise ScenarioError(f"structures.{name}: unresolved forms {missing}")
        h, k = (list(s.get("type", [])) + [None, None])[:2]
        try:
            structures[name] = GeometricStructure(s["kind"], {role: forms[r] for role, r in refs.items()}, h, k)
        except KeyError as exc:
            raise ScenarioError(f"structures.{name}: missing {exc}") from exc
        except DimensionError:
            raise
        except ValueError as exc:
            raise ScenarioError(f"structures.{name}: {exc}") from exc
    foliations = {}
    for name, f in doc.get("foliations", {}).items():
        if "frame_span" in f:
            idx = [int(i) for i in f["frame_span"]]
            if any(not 1 <= i <= model.dim for i in idx):
                raise ScenarioError(f"foliations.{name}: index out of range")
            foliations[name] = FrameSpan(idx)
        elif "kernel_of" in f:
            if f["kernel_of"] not in forms:
                raise ScenarioError(f"foliations.{name}: unresolved form {f['kernel_of']!r}")
            foliations[name] = KernelOf(forms[f["kernel_of"]], f.get("corank"))
        else:
            raise ScenarioError(f"foliations.{name}: needs frame_span or kernel_of")
    tasks = list(doc.get("tasks", []))
    for c, task in enumerate(tasks):
        _check_task_refs(task, c, forms, structures, foliations)
    return Scenario(doc["name"], model, forms, structures, foliations, tasks, doc.get("description", ""), doc)


REF_KEYS = {"structure": "structures", "form": "forms", "foliation": "foliations"}


def _check_task_refs(task, c, forms, structures, foliations):
    pools = {"structures": structures, "forms": forms, "foliations": foliations}
    if "op" not in task:
        raise ScenarioError(f"tasks[{c}] has no op")
    for key, pool in REF_KEYS.items():
        if key in task and task[key] not in pools[pool]:
            raise ScenarioError(f"tasks[{c}]: unresolved {key} {task[key]!r}")
    for role, name in task.get("primitives", {}).items():
        if name not in forms:
            raise ScenarioError(f"tasks[{c}]: unresolved primitive form {name!r} for {role}")


def scenario_to_dict(sc: Scenario) -> dict:
    doc = {
        "schema": SCHEMA,
        "name": sc.name,
        "description": sc.description,
        "model": model_to_dict(sc.model),
        "forms": {name: form_to_dict(f) for name, f in sc.forms.items()},
        "structures": {},
        "foliations": {},
        "tasks": copy.deepcopy(sc.tasks),
    }
    form_names = {id(f): name for name, f in sc.forms.items()}
    for name, s in sc.structures.items():
        doc["structures"][name] = {
            "kind": s.kind,
            "forms": {role: form_names[id(f)] for role, f in s.forms.items()},
            "type": [s.h, s.k],
        }
    for name, f in sc.foliations.items():
        if isinstance(f, FrameSpan):
            doc["foliations"][name] = {"frame_span": sorted(f.indices)}
        else:
            entry = {"kernel_of": form_names[id(f.form)]}
            if f.corank is not None:
                entry["corank"] = f.corank
            doc["foliations"][name] = entry
    return doc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text, object_pairs_hook=_unique_keys)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: {exc.msg} at line {exc.lineno}, column {exc.colno}") from exc
    return scenario_from_dict(doc)


def dump_scenario(sc: Scenario, path=None) -> str:
    text = json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
