"""Builtin scenarios and single-condition mutations, stored as scenario documents."""

from __future__ import annotations

import copy

from .scenario import SCHEMA, Scenario, scenario_from_dict


def _f(degree, *components):
    """Form document from (indices, expr) pairs."""
    return {"degree": degree, "components": [{"indices": list(i), "expr": e} for i, e in components]}


def _doc(name, description, model, forms, structure, foliations, tasks):
    kind, roles, typ = structure
    return {
        "schema": SCHEMA,
        "name": name,
        "description": description,
        "model": model,
        "forms": forms,
        "structures": {"main": {"kind": kind, "forms": roles, "type": list(typ)}},
        "foliations": foliations,
        "tasks": tasks,
    }


T_SAMPLES = [0.0, 0.5, 1.0]

# the Hamiltonian of the suspension scenario is 0.1 sin(th1) sin(th2)
_H1 = "0.1*cos(th1)*sin(th2)"
_H2 = "0.1*sin(th1)*cos(th2)"


def _t4_exact():
    return _doc(
        "t4-exact",
        "Symplectic pair on T4 deformed by basic-exact 2-forms on both sides.",
        {"builtin": "T4"},
        {
            "omega": _f(2, ((1, 2), "1 + 0.5*t*cos(th1)")),
            "eta": _f(2, ((3, 4), "1 + 0.3*t*sin(th3)")),
            "alpha_t": _f(1, ((2,), "0.5*sin(th1)")),
            "beta_t": _f(1, ((4,), "-0.3*cos(th3)")),
            "omega_dot": _f(2, ((1, 2), "0.5*cos(th1)")),
        },
        ("symplectic_pair", {"omega": "omega", "eta": "eta"}, (1, 1)),
        {"F": {"frame_span": [1, 2]}, "G": {"frame_span": [3, 4]}},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "basic_h2", "foliation": "G", "orders": [1, 2, 4], "property": "stable", "expect": "pass"},
            {"op": "primitive", "form": "omega_dot", "foliation": "G", "expect": "pass"},
            {"op": "periods", "form": "omega", "cycles": [[1, 2], [1, 3], [2, 3]], "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "moser", "structure": "main", "primitives": {"alpha": "alpha_t", "beta": "beta_t"}, "expect": "pass"},
        ],
    )


def _suspension():
    return _doc(
        "suspension-hamiltonian",
        "T4 as the suspension of the time-1 map of H = 0.1 sin(th1) sin(th2): "
        "omega = dth1^dth2 + dH^dth3 has kernel spanned by d/dth3 + X_H and d/dth4; "
        "eta is deformed through exact forms.",
        {"builtin": "T4"},
        {
            "omega": _f(2, ((1, 2), "1"), ((1, 3), _H1), ((2, 3), _H2)),
            "eta": _f(2, ((3, 4), "1 + 0.3*t*cos(th3)")),
            "beta_t": _f(1, ((4,), "0.3*sin(th3)")),
            "omega_s": _f(2, ((1, 2), "1"), ((1, 3), f"t*{_H1}"), ((2, 3), f"t*{_H2}")),
        },
        ("symplectic_pair", {"omega": "omega", "eta": "eta"}, (1, 1)),
        {"F": {"frame_span": [1, 2]}, "G": {"kernel_of": "omega", "corank": 2}},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "periods", "form": "omega_s", "cycles": [[1, 2], [1, 3], [2, 3], [1, 4], [2, 4], [3, 4]],
             "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "moser", "structure": "main", "primitives": {"beta": "beta_t"}, "expect": "pass"},
        ],
    )


def _ghys():
    return _doc(
        "ghys-nil",
        "Heisenberg x circle with de^3 = -e^1^e^2 and fiber monodromy ((1,1),(0,1)); "
        "omega moves by a basic form that is exact in de Rham cohomology but not basic-exact.",
        {"builtin": "Nil3xS1"},
        {
            "omega": _f(2, ((2, 3), "1 + 0.5*t*cos(y)")),
            "eta": _f(2, ((1, 4), "1")),
            "omega_dot": _f(2, ((2, 3), "0.5*cos(y)")),
        },
        ("symplectic_pair", {"omega": "omega", "eta": "eta"}, (1, 1)),
        {"F": {"frame_span": [2, 3]}, "G": {"frame_span": [1, 4]}},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "basic_h2", "foliation": "G", "orders": [2, 4], "property": "grows", "expect": "pass"},
            {"op": "primitive", "form": "omega_dot", "foliation": "G", "convergence": True, "min_residual": 0.5,
             "expect": "fail"},
            {"op": "periods", "form": "omega", "cycles": [[2, 3], [2, 4], [3, 4]], "t_samples": T_SAMPLES,
             "expect": "pass"},
            {"op": "moser", "structure": "main", "expect": "fail"},
        ],
    )


def _t4_contact_pair():
    amp = "(1 + 0.3*t*sin(th3))"
    return _doc(
        "t4-contact-pair",
        "Type (1,0) contact pair on T4 with a rotating, rescaled alpha.",
        {"builtin": "T4"},
        {
            "alpha": _f(1, ((1,), f"{amp}*cos(th3 + t)"), ((2,), f"{amp}*sin(th3 + t)")),
            "beta": _f(1, ((4,), "1")),
        },
        ("contact_pair", {"alpha": "alpha", "beta": "beta"}, (1, 0)),
        {},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "reeb", "structure": "main", "t": 0.5, "commuting": True, "projection": True, "expect": "pass"},
            {"op": "moser", "structure": "main", "factor_nontrivial": True, "expect": "pass"},
        ],
    )


def _t3_cs_pair():
    return _doc(
        "t3-cs-pair",
        "Static contact-symplectic pair (e^3, e^1^e^2) of type (0,1) on T3.",
        {"builtin": "T3"},
        {"alpha": _f(1, ((3,), "1")), "eta": _f(2, ((1, 2), "1"))},
        ("contact_symplectic_pair", {"alpha": "alpha", "eta": "eta"}, (0, 1)),
        {"F": {"frame_span": [3]}, "G": {"frame_span": [1, 2]}},
        [
            {"op": "validate", "structure": "main", "expect": "pass"},
            {"op": "reeb", "structure": "main", "expect": "pass"},
            {"op": "reeb_class", "form": "alpha", "expect": "pass"},
        ],
    )


def _t5_cs_structure():
    amp = "(1 + 0.2*t*cos(th2))"
    return _doc(
        "t5-cs-structure",
        "gamma = cos(x) e^z + sin(x) e^y on T3 times a symplectic T2, type (1,1), "
        "with gamma rotating in x and eta deformed through exact forms.",
        {"builtin": "T5"},
        {
            "alpha": _f(1, ((3,), f"{amp}*cos(th1 + t)"), ((2,), f"{amp}*sin(th1 + t)")),
            "eta": _f(2, ((4, 5), "1 + 0.3*t*cos(th4)")),
            "beta_t": _f(1, ((5,), "0.3*sin(th4)")),
            "rho": _f(3, ((1, 2, 3), "1")),
        },
        ("cs_structure", {"alpha": "alpha", "eta": "eta"}, (1, 1)),
        {"F": {"frame_span": [1, 2, 3]}, "G": {"frame_span": [4, 5]}},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "reeb", "structure": "main", "t": 0.5, "expect": "pass"},
            {"op": "moser", "structure": "main", "primitives": {"beta": "beta_t"}, "factor_nontrivial": True,
             "expect": "pass"},
        ],
    )


def _t6_cc_structure():
    a = "(1 + 0.2*t*cos(th1))"
    b = "(1 + 0.2*t*sin(th4))"
    return _doc(
        "t6-cc-structure",
        "Product of two contact T3 factors, type (1,1), rotating independently.",
        {"builtin": "T6"},
        {
            "alpha": _f(1, ((1,), f"{a}*cos(th3 + t)"), ((2,), f"{a}*sin(th3 + t)")),
            "beta": _f(1, ((4,), f"{b}*cos(th6 + 2*t)"), ((5,), f"{b}*sin(th6 + 2*t)")),
        },
        ("cc_structure", {"alpha": "alpha", "beta": "beta"}, (1, 1)),
        {},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "reeb", "structure": "main", "t": 0.5, "commuting": True, "projection": True, "expect": "pass"},
            {"op": "moser", "structure": "main", "factor_nontrivial": True, "expect": "pass"},
        ],
    )


def _fol_drift():
    return _doc(
        "fol-drift",
        "Symplectic pair on T4 whose omega-kernel tilts with t: the periods move "
        "and no stability statement applies.",
        {"builtin": "T4"},
        {
            "omega": _f(2, ((1, 2), "1"), ((2, 3), "0.3*t")),
            "eta": _f(2, ((3, 4), "1")),
        },
        ("symplectic_pair", {"omega": "omega", "eta": "eta"}, (1, 1)),
        {},
        [
            {"op": "validate", "structure": "main", "t_samples": T_SAMPLES, "expect": "pass"},
            {"op": "periods", "form": "omega", "cycles": [[2, 3]], "t_samples": T_SAMPLES, "expect": "fail"},
            {"op": "moser", "structure": "main", "expect": "inapplicable"},
        ],
    )


def _t4_cc_perturbed():
    return _doc(
        "t4-cc-perturbed",
        "Contact-contact structure of type (1,0) on T4 whose Reeb fields do not commute: "
        "d alpha + d beta has rank 4 wherever cos(th1) cos(th3) is nonzero.",
        {"builtin": "T4"},
        {
            "alpha": _f(1, ((1,), "cos(th3)"), ((2,), "sin(th3)")),
            "beta": _f(1, ((4,), "1 + 0.3*sin(th1)")),
        },
        ("cc_structure", {"alpha": "alpha", "beta": "beta"}, (1, 0)),
        {},
        [
            {"op": "validate", "structure": "main", "expect": "pass"},
            {"op": "reeb", "structure": "main", "commuting": False, "projection": True, "expect": "pass"},
        ],
    )


BUILDERS = {
    "t4-exact": _t4_exact,
    "suspension-hamiltonian": _suspension,
    "ghys-nil": _ghys,
    "t4-contact-pair": _t4_contact_pair,
    "t3-cs-pair": _t3_cs_pair,
    "t5-cs-structure": _t5_cs_structure,
    "t6-cc-structure": _t6_cc_structure,
    "fol-drift": _fol_drift,
    "t4-cc-perturbed": _t4_cc_perturbed,
}


def builtin_documents() -> dict:
    return {name: build() for name, build in BUILDERS.items()}


def builtin_scenarios() -> list[Scenario]:
    return [scenario_from_dict(doc) for doc in builtin_documents().values()]


def builtin(name: str) -> Scenario:
    if name not in BUILDERS:
        raise KeyError(f"unknown builtin scenario {name!r}; known: {sorted(BUILDERS)}")
    return scenario_from_dict(BUILDERS[name]())


# mutations -------------------------------------------------------------------

# (name, base, replaced forms, failing condition)
MUTATIONS = [
    ("sp-omega-not-closed", "sp", {"omega": _f(2, ((1, 2), "1 + 0.5*cos(th3)"))}, "closed(omega)"),
    ("sp-eta-not-closed", "sp", {"eta": _f(2, ((3, 4), "1 + 0.5*cos(th1)"))}, "closed(eta)"),
    ("sp-omega-rank", "sp", {"omega": _f(2, ((1, 2), "1"), ((3, 4), "0.5"))}, "vanish(omega^(h+1))"),
    ("sp-eta-rank", "sp", {"eta": _f(2, ((3, 4), "1"), ((1, 2), "0.5"))}, "vanish(eta^(k+1))"),
    ("sp-volume", "sp", {"eta": _f(2, ((1, 2), "1"))}, "volume(omega^h^eta^k)"),
    ("cp-alpha-rank", "cp", {"alpha": _f(1, ((1,), "cos(th3)"), ((2,), "sin(th3)"), ((4,), "0.3*sin(th1)"))},
     "vanish(da^(h+1))"),
    ("cp-beta-not-closed", "cp", {"beta": _f(1, ((4,), "1 + 0.3*sin(th1)"))}, "vanish(db^(k+1))"),
    ("cp-volume", "cp", {"beta": _f(1, ((3,), "1"))}, "volume(alpha^da^h^beta^db^k)"),
    ("csp-eta-not-closed", "csp", {"eta": _f(2, ((1, 2), "1 + 0.5*cos(th3)"))}, "closed(eta)"),
    ("csp-alpha-not-closed", "csp", {"alpha": _f(1, ((3,), "1 + 0.5*cos(th1)"))}, "vanish(da^(h+1))"),
    ("csp-volume", "csp", {"alpha": _f(1, ((1,), "1"))}, "volume(alpha^da^h^eta^k)"),
    ("cs-eta-not-closed", "cs", {"eta": _f(2, ((4, 5), "1 + 0.5*cos(th1)"))}, "closed(eta)"),
    ("cs-alpha-class", "cs", {"alpha": _f(1, ((3,), "cos(th1)"), ((2,), "sin(th1)"), ((5,), "0.3*cos(th4)"))},
     "vanish(alpha^da^(h+1))"),
    ("cs-eta-rank", "cs", {"eta": _f(2, ((4, 5), "1"), ((2, 3), "0.5"))}, "vanish(eta^(k+1))"),
    ("cc-alpha-class", "cc", {"alpha": _f(1, ((1,), "cos(th3)"), ((2,), "sin(th3)"), ((6,), "0.3*cos(th4)"))},
     "vanish(alpha^da^(h+1))"),
    ("cc-beta-class", "cc", {"beta": _f(1, ((4,), "cos(th6)"), ((5,), "sin(th6)"), ((3,), "0.3*cos(th1)"))},
     "vanish(beta^db^(k+1))"),
]

_BASES = {
    "sp": ("T4", {"omega": _f(2, ((1, 2), "1")), "eta": _f(2, ((3, 4), "1"))},
           ("symplectic_pair", {"omega": "omega", "eta": "eta"}, (1, 1))),
    "cp": ("T4", {"alpha": _f(1, ((1,), "cos(th3)"), ((2,), "sin(th3)")), "beta": _f(1, ((4,), "1"))},
           ("contact_pair", {"alpha": "alpha", "beta": "beta"}, (1, 0))),
    "csp": ("T3", {"alpha": _f(1, ((3,), "1")), "eta": _f(2, ((1, 2), "1"))},
            ("contact_symplectic_pair", {"alpha": "alpha", "eta": "eta"}, (0, 1))),
    "cs": ("T5", {"alpha": _f(1, ((3,), "cos(th1)"), ((2,), "sin(th1)")), "eta": _f(2, ((4, 5), "1"))},
           ("cs_structure", {"alpha": "alpha", "eta": "eta"}, (1, 1))),
    "cc": ("T6", {"alpha": _f(1, ((1,), "cos(th3)"), ((2,), "sin(th3)")),
                  "beta": _f(1, ((4,), "cos(th6)"), ((5,), "sin(th6)"))},
           ("cc_structure", {"alpha": "alpha", "beta": "beta"}, (1, 1))),
}


def mutation_documents() -> dict:
    out = {}
    for name, base, replaced, condition in MUTATIONS:
        model, forms, structure = _BASES[base]
        forms = copy.deepcopy(forms)
        forms.update(copy.deepcopy(replaced))
        task = {"op": "validate", "structure": "main", "expect": "fail", "expect_failed": [condition]}
        out[name] = _doc(name, f"{base} base with one broken condition: {condition}",
                         {"builtin": model}, forms, structure, {}, [task])
    return out


def base_documents() -> dict:
    """The unmutated bases, each of which validates."""
    out = {}
    for base, (model, forms, structure) in _BASES.items():
        task = {"op": "validate", "structure": "main", "expect": "pass"}
        out[base] = _doc(f"{base}-base", "", {"builtin": model}, copy.deepcopy(forms), structure, {}, [task])
    return out


def mutation_scenarios() -> list[Scenario]:
    return [scenario_from_dict(doc) for doc in mutation_documents().values()]
