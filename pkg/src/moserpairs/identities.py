"""Residuals of the exterior-calculus identities, for checking a model or a form library."""

from __future__ import annotations

import numpy as np

from .expr import ScalarField, cos, sin
from .manifold import (
    CoframeModel,
    DifferentialForm,
    VectorField,
    exterior_derivative,
    interior_product,
    lie_bracket,
    lie_derivative,
    t_derivative,
    wedge,
)

IDENTITIES = ("d_squared", "graded_commutativity", "leibniz", "cartan", "naturality", "t_commutes", "duality")


def random_scalar(model: CoframeModel, rng: np.random.Generator, terms: int = 2, with_t: bool = False) -> ScalarField:
    """Short trig polynomial in the coordinates that are periodic on ``model``."""
    twisted = {s[1] for s in model.shears}
    usable = [j for j in range(model.dim) if j not in twisted]
    out = ScalarField.const(round(float(rng.normal()), 3))
    for _ in range(terms):
        j = int(rng.choice(usable))
        arg = model.coord(j + 1) * float(rng.integers(1, 3) * 2 * np.pi / model.periods[j])
        if rng.random() < 0.5:
            k = int(rng.choice(usable))
            arg = arg + model.coord(k + 1) * float(2 * np.pi / model.periods[k])
        wave = sin(arg) if rng.random() < 0.5 else cos(arg)
        coef = ScalarField.const(round(float(rng.normal()), 3))
        if with_t:
            coef = coef * (1 + ScalarField.var("t"))
        out = out + coef * wave
    return out


def random_form(model: CoframeModel, degree: int, rng: np.random.Generator, components: int = 2,
                with_t: bool = False) -> DifferentialForm:
    combos = model.combos(degree)
    picks = rng.choice(len(combos), size=min(components, len(combos)), replace=False)
    return DifferentialForm(model, degree, {combos[int(c)]: random_scalar(model, rng, with_t=with_t) for c in picks})


def random_vector(model: CoframeModel, rng: np.random.Generator) -> VectorField:
    return VectorField(model, [random_scalar(model, rng, terms=1) for _ in range(model.dim)])


def open_mesh(model: CoframeModel, k: int) -> list:
    """Broadcastable coordinate axes of the k^n periodic grid (one axis per coordinate)."""
    n = model.dim
    axes = []
    for j in range(n):
        shape = [1] * n
        shape[j] = k
        axes.append((np.arange(k) * model.periods[j] / k).reshape(shape))
    return axes


def mesh_sup(form: DifferentialForm, axes, t=0.0) -> float:
    """sup |component| over the grid spanned by ``axes``; each term is evaluated only on the axes it uses."""
    worst = 0.0
    for comp in form.components.values():
        value = comp.compile(form.model.variables)(*axes, t)
        worst = max(worst, float(np.max(np.abs(value))))
    return worst


def lie_derivative_frame(X: VectorField, a: DifferentialForm) -> DifferentialForm:
    """L_X a by the frame formula X(a_I) - sum_k a(..., [X, X_ik], ...)."""
    model = a.model
    comps = {I: X.apply(f) for I, f in a.components.items()}
    brackets = [lie_bracket(X, model.X(i + 1)).components for i in range(model.dim)]
    for I in model.combos(a.degree):
        total = comps.get(I, ScalarField.const(0.0))
        for k, i in enumerate(I):
            for j, g in enumerate(brackets[i]):
                if g.is_zero:
                    continue
                slot = I[:k] + (j,) + I[k + 1:]
                total = total - g * a.component(*(s + 1 for s in slot))
        comps[I] = total
    return DifferentialForm(model, a.degree, comps)


def identity_residuals(model: CoframeModel, forms, k: int, rng: np.random.Generator, t: float = 0.5) -> dict:
    """Worst residual of each identity over ``forms`` (pairs formed cyclically) on the k^n grid."""
    axes = open_mesh(model, k)
    res = {name: 0.0 for name in IDENTITIES}

    def note(name, form):
        res[name] = max(res[name], mesh_sup(form, axes, t))

    for c, a in enumerate(forms):
        b = forms[(c + 1) % len(forms)]
        X = random_vector(model, rng)
        da = exterior_derivative(a)
        note("d_squared", exterior_derivative(da))
        if a.degree + b.degree <= model.dim:
            note("graded_commutativity", wedge(a, b) - (-1) ** (a.degree * b.degree) * wedge(b, a))
            if a.degree + b.degree > 0:
                gap = interior_product(X, wedge(a, b))
                if a.degree:
                    gap = gap - wedge(interior_product(X, a), b)
                if b.degree:
                    gap = gap - (-1) ** a.degree * wedge(a, interior_product(X, b))
                note("leibniz", gap)
        lx = lie_derivative(X, a)
        note("cartan", lx - lie_derivative_frame(X, a))
        note("naturality", lie_derivative(X, da) - exterior_derivative(lx))
        note("t_commutes", exterior_derivative(t_derivative(a)) - t_derivative(da))
    pts = model.grid(k) if not all(f.constant_value is not None for row in model.frame_fields for f in row) \
        else model.grid(1)
    dual = np.einsum("mij,mjk->mik", model.coframe_matrix(pts), model.frame_matrix(pts))
    res["duality"] = float(np.max(np.abs(dual - np.eye(model.dim)), initial=0.0))
    return res
