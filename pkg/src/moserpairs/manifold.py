"""Coframe model manifolds and the exterior calculus on them.

A model is a parallelizable quotient of R^n with a global coframe
e^1..e^n whose exterior derivatives have constant coefficients,

    de^i = sum_{j<k} c^i_{jk} e^j ^ e^k,

and dual frame fields X_1..X_n given by coordinate expressions. Forms are
stored in coframe components keyed by strictly increasing index tuples.
Public indices (``e(i)``, ``X(i)``, ``FrameSpan``...) are 1-based like the
usual notation; stored tuples are 0-based.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import ONE, ZERO, ScalarField

T = "t"


class ModelMismatch(ValueError):
    pass


class EvaluationError(ArithmeticError):
    def __init__(self, message, component=None):
        self.component = component
        super().__init__(message)


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 on repeated entries."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inversions % 2 else 1


def _merge(a: tuple, b: tuple):
    sign = perm_sign(a + b)
    return sign, tuple(sorted(a + b))


@dataclass(eq=False)
class CoframeModel:
    """Model manifold: coordinates, periods, structure constants and frames.

    ``frame_fields[j][i]`` is the j-th coordinate component of X_{i+1};
    ``coframe[i][j]`` the j-th coordinate component of e^{i+1}. ``shears``
    lists lattice twists ``(shift, target, source, coef)``: translating
    coordinate ``shift`` by its period also adds ``coef * x_source`` to
    ``x_target``.
    """

    name: str
    coords: list[str]
    periods: list[float]
    structure_constants: dict = field(default_factory=dict)
    frame_fields: list | None = None
    coframe: list | None = None
    shears: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.coords)
        if len(self.periods) != n:
            raise ValueError("periods and coords differ in length")
        if len(set(self.coords)) != n or T in self.coords:
            raise ValueError("coordinate names must be distinct and differ from 't'")
        sc = {}
        for key, value in dict(self.structure_constants).items():
            i, j, k = key
            if j == k:
                if value:
                    raise ValueError("c^i_jj must vanish")
                continue
            if j > k:
                j, k, value = k, j, -value
            if value:
                sc[(i, j, k)] = sc.get((i, j, k), 0.0) + float(value)
        self.structure_constants = {k: v for k, v in sc.items() if v}
        eye = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
        self.frame_fields = _as_matrix(self.frame_fields, eye)
        self.coframe = _as_matrix(self.coframe, eye)
        self.periods = [float(p) for p in self.periods]
        self.shears = [tuple(s) for s in self.shears]

    # basics -----------------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def variables(self) -> list[str]:
        return list(self.coords) + [T]

    @property
    def is_abelian(self) -> bool:
        return not self.structure_constants

    def e(self, i: int) -> "DifferentialForm":
        return DifferentialForm(self, 1, {(i - 1,): ONE})

    def X(self, i: int) -> "VectorField":
        comps = [ZERO] * self.dim
        comps[i - 1] = ONE
        return VectorField(self, comps)

    def coord(self, name_or_index) -> ScalarField:
        if isinstance(name_or_index, int):
            return ScalarField.var(self.coords[name_or_index - 1])
        return ScalarField.var(name_or_index)

    def form(self, degree: int, components: Mapping) -> "DifferentialForm":
        """Build a form from ``{(i, j, ...): expr}`` with 1-based indices."""
        out = DifferentialForm(self, degree, {})
        for idx, value in components.items():
            idx = (idx,) if isinstance(idx, int) else tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} does not match degree {degree}")
            term = DifferentialForm(self, 0, {(): ScalarField.coerce(value)})
            for i in idx:
                term = wedge(term, self.e(i))
            out = out + term
        return out

    def scalar(self, value) -> "DifferentialForm":
        return DifferentialForm(self, 0, {(): ScalarField.coerce(value)})

    def vector(self, components: Sequence) -> "VectorField":
        return VectorField(self, [ScalarField.coerce(c) for c in components])

    # frame calculus -----------------------------------------------------------
    def frame_derivative(self, f: ScalarField, i: int) -> ScalarField:
        """X_{i+1}(f) for 0-based ``i``."""
        out = ZERO
        for j, name in enumerate(self.coords):
            coef = self.frame_fields[j][i]
            if coef.is_zero or not f.depends_on(name):
                continue
            out = out + coef * f.diff(name)
        return out

    @cached_property
    def _d_basis(self) -> dict:
        d = {i: {} for i in range(self.dim)}
        for (i, j, k), c in self.structure_constants.items():
            d[i][(j, k)] = d[i].get((j, k), 0.0) + c
        return d

    def d_monomial(self, idx: tuple) -> dict:
        """Constant coframe expansion of d(e^I) as ``{J: coefficient}``."""
        cache = self.__dict__.setdefault("_dmono_cache", {})
        if idx in cache:
            return cache[idx]
        out = {}
        for pos, i in enumerate(idx):
            for pair, c in self._d_basis[i].items():
                new = idx[:pos] + pair + idx[pos + 1:]
                sign = perm_sign(new)
                if sign:
                    key = tuple(sorted(new))
                    out[key] = out.get(key, 0.0) + (-1) ** pos * sign * c
        out = {k: v for k, v in out.items() if v}
        cache[idx] = out
        return out

    def bracket_coefficients(self, j: int, k: int) -> dict:
        """[X_j, X_k] = sum_i gamma^i X_i (0-based), from the structure constants."""
        out = {}
        if j == k:
            return out
        for (i, a, b), c in self.structure_constants.items():
            if (a, b) == (j, k):
                out[i] = out.get(i, 0.0) - c
            elif (a, b) == (k, j):
                out[i] = out.get(i, 0.0) + c
        return out

    def jacobi_residual(self) -> float:
        """Largest coefficient of d(d e^i); zero for a consistent model."""
        worst = 0.0
        for i in range(self.dim):
            dd = exterior_derivative(exterior_derivative(self.e(i + 1)))
            for comp in dd.components.values():
                value = comp.constant_value
                worst = max(worst, abs(value) if value is not None else math.inf)
        return worst

    # points -----------------------------------------------------------------
    def env(self, points: np.ndarray, t=0.0) -> list:
        points = np.atleast_2d(points)
        return [points[:, j] for j in range(self.dim)] + [t]

    def reduce(self, points: np.ndarray) -> np.ndarray:
        """Reduce points into the fundamental domain, applying lattice twists."""
        pts = np.array(np.atleast_2d(points), dtype=float)
        twisted = {s[0] for s in self.shears}
        for shift, target, source, coef in self.shears:
            k = np.floor(pts[:, shift] / self.periods[shift])
            pts[:, shift] -= k * self.periods[shift]
            pts[:, target] -= k * coef * pts[:, source]
        for j, period in enumerate(self.periods):
            if j in twisted:
                continue
            pts[:, j] = np.mod(pts[:, j], period)
        return pts

    def lattice_translates(self, points: np.ndarray) -> list[np.ndarray]:
        """Images of ``points`` under each lattice generator."""
        pts = np.atleast_2d(points)
        out = []
        twisted = {s[0]: s for s in self.shears}
        for j, period in enumerate(self.periods):
            image = np.array(pts, dtype=float)
            image[:, j] += period
            if j in twisted:
                _, target, source, coef = twisted[j]
                image[:, target] += coef * pts[:, source]
            out.append(image)
        return out

    def grid(self, k: int, coords: Iterable[int] | None = None, base=None) -> np.ndarray:
        """Uniform periodic grid with ``k`` points along each chosen coordinate (0-based)."""
        coords = list(range(self.dim)) if coords is None else list(coords)
        base = np.zeros(self.dim) if base is None else np.asarray(base, dtype=float)
        axes = [np.arange(k) * self.periods[j] / k for j in coords]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.tile(base, (mesh[0].size if mesh else 1, 1))
        for axis, j in zip(mesh, coords):
            pts[:, j] = axis.ravel()
        return pts

    def random_points(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.random((m, self.dim)) * np.asarray(self.periods)

    def _matrix_values(self, mat, points, t=0.0) -> np.ndarray:
        env = self.env(points, t)
        m = env[0].shape[0]
        dtype = np.result_type(*[np.asarray(a) for a in env])
        if all(f.constant_value is not None for row in mat for f in row):
            const = np.array([[f.constant_value for f in row] for row in mat], dtype=dtype)
            return np.repeat(const[None], m, axis=0)
        out = np.empty((m, self.dim, self.dim), dtype=dtype)
        for r in range(self.dim):
            for c in range(self.dim):
                out[:, r, c] = _eval(mat[r][c], self.variables, env, m)
        return out

    def frame_matrix(self, points, t=0.0) -> np.ndarray:
        """(m, n, n): column i holds the coordinate components of X_{i+1}."""
        return self._matrix_values(self.frame_fields, points, t)

    def coframe_matrix(self, points, t=0.0) -> np.ndarray:
        """(m, n, n): row i holds the coordinate components of e^{i+1}."""
        return self._matrix_values(self.coframe, points, t)

    def combos(self, degree: int) -> list[tuple]:
        return list(itertools.combinations(range(self.dim), degree))


def _as_matrix(mat, default):
    if mat is None:
        return default
    return [[ScalarField.coerce(v) for v in row] for row in mat]


def _eval(f: ScalarField, names, env, m):
    value = f.compile(names)(*env)
    value = np.asarray(value)
    if value.ndim == 0 or value.shape[0] != m:
        value = np.broadcast_to(value, (m,))
    return value


@functools.lru_cache(maxsize=None)
def _tensor_layout(n: int, p: int):
    """Source column, flat target index and sign for scattering components into a tensor."""
    cols, flat, signs = [], [], []
    for c, idx in enumerate(itertools.combinations(range(n), p)):
        for perm in itertools.permutations(range(p)):
            key = [idx[q] for q in perm]
            cols.append(c)
            flat.append(int(np.ravel_multi_index(key, (n,) * p)) if p else 0)
            signs.append(perm_sign(perm))
    return np.array(cols, dtype=int), np.array(flat, dtype=int), np.array(signs, dtype=float)


class DifferentialForm:
    """Coframe components ``{increasing 0-based tuple: ScalarField}`` of a p-form."""

    __slots__ = ("model", "degree", "components")

    def __init__(self, model: CoframeModel, degree: int, components: Mapping):
        self.model = model
        self.degree = degree
        comps = {}
        if degree <= model.dim:
            for idx, value in components.items():
                idx = tuple(idx)
                if len(idx) != degree or list(idx) != sorted(set(idx)):
                    raise ValueError(f"component index {idx} is not strictly increasing of length {degree}")
                if not 0 <= min(idx, default=0) or max(idx, default=0) >= model.dim:
                    raise ValueError(f"component index {idx} out of range")
                value = ScalarField.coerce(value)
                if not value.is_zero:
                    comps[idx] = value
        self.components = comps

    def __repr__(self):
        terms = [f"({v})*e^{'^'.join(str(i + 1) for i in k) or '0'}" for k, v in sorted(self.components.items())]
        return f"<{self.degree}-form {' + '.join(terms) or '0'}>"

    def _check(self, other):
        if not isinstance(other, DifferentialForm):
            raise TypeError("expected a DifferentialForm")
        if other.model is not self.model:
            raise ModelMismatch("forms live on different models")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = comps[k] + v if k in comps else v
        return DifferentialForm(self.model, self.degree, comps)

    def __neg__(self):
        return DifferentialForm(self.model, self.degree, {k: -v for k, v in self.components.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, DifferentialForm):
            return wedge(self, scalar)
        s = ScalarField.coerce(scalar)
        return DifferentialForm(self.model, self.degree, {k: s * v for k, v in self.components.items()})

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def __pow__(self, k: int):
        out = DifferentialForm(self.model, 0, {(): ONE})
        for _ in range(k):
            out = wedge(out, self)
        return out

    @property
    def is_zero(self) -> bool:
        return not self.components

    def component(self, *indices: int) -> ScalarField:
        idx = tuple(i - 1 for i in indices)
        sign = perm_sign(idx)
        if sign == 0:
            return ZERO
        return sign * self.components.get(tuple(sorted(idx)), ZERO)

    def variables(self) -> frozenset:
        out = set()
        for v in self.components.values():
            out |= v.variables()
        return frozenset(out)

    def depends_on_t(self) -> bool:
        return T in self.variables()

    def d(self) -> "DifferentialForm":
        return exterior_derivative(self)

    def dt(self) -> "DifferentialForm":
        return t_derivative(self)

    def values(self, points, t=0.0) -> np.ndarray:
        """(m, C(n, p)) component values in ``model.combos(degree)`` order."""
        model = self.model
        env = model.env(points, t)
        m = env[0].shape[0]
        combos = model.combos(self.degree)
        dtype = np.result_type(*[np.asarray(a) for a in env], float)
        out = np.zeros((m, len(combos)), dtype=dtype)
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            for c, idx in enumerate(combos):
                comp = self.components.get(idx)
                if comp is None:
                    continue
                try:
                    out[:, c] = _eval(comp, model.variables, env, m)
                except (FloatingPointError, ZeroDivisionError) as exc:
                    label = "e^" + "^".join(str(i + 1) for i in idx)
                    raise EvaluationError(f"cannot evaluate component {label} = {comp}: {exc}", idx) from exc
        return out

    def tensor(self, points, t=0.0) -> np.ndarray:
        """Full antisymmetric array of shape (m, n, ..., n)."""
        vals = self.values(points, t)
        n, p = self.model.dim, self.degree
        cols, flat, signs = _tensor_layout(n, p)
        out = np.zeros((vals.shape[0], n ** p), dtype=vals.dtype)
        out[:, flat] = vals[:, cols] * signs
        return out.reshape((vals.shape[0],) + (n,) * p)

    def matrix(self, points, t=0.0) -> np.ndarray:
        if self.degree != 2:
            raise ValueError("matrix() needs a 2-form")
        return self.tensor(points, t)

    def sup_norm(self, points, t=0.0) -> float:
        if self.is_zero:
            return 0.0
        return float(np.max(np.abs(self.values(points, t)), initial=0.0))

    def is_closed(self, points, tol: float = 1e-9) -> bool:
        return self.d().sup_norm(points) <= tol

    def lattice_defect(self, points, t=0.0) -> float:
        """Largest change of any component under a lattice generator; zero when the form descends."""
        if self.is_zero:
            return 0.0
        base = self.values(points, t)
        return max(float(np.max(np.abs(self.values(img, t) - base))) for img in self.model.lattice_translates(points))


class VectorField:
    """Vector field in frame components v = sum_i v^i X_i."""

    __slots__ = ("model", "components")

    def __init__(self, model: CoframeModel, components: Sequence):
        if len(components) != model.dim:
            raise ValueError("vector field needs one component per frame field")
        self.model = model
        self.components = [ScalarField.coerce(c) for c in components]

    def __repr__(self):
        return "<vector " + ", ".join(str(c) for c in self.components) + ">"

    def __add__(self, other):
        return VectorField(self.model, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return VectorField(self.model, [a - b for a, b in zip(self.components, other.components)])

    def __mul__(self, scalar):
        s = ScalarField.coerce(scalar)
        return VectorField(self.model, [s * c for c in self.components])

    __rmul__ = __mul__

    def apply(self, f: ScalarField) -> ScalarField:
        """Directional derivative X(f)."""
        out = ZERO
        for i, c in enumerate(self.components):
            if not c.is_zero:
                out = out + c * self.model.frame_derivative(f, i)
        return out

    def values(self, points, t=0.0) -> np.ndarray:
        model = self.model
        env = model.env(points, t)
        m = env[0].shape[0]
        return np.stack([_eval(c, model.variables, env, m) for c in self.components], axis=1)

    def coordinate_values(self, points, t=0.0) -> np.ndarray:
        frame = self.model.frame_matrix(points, t)
        return np.einsum("mji,mi->mj", frame, self.values(points, t))


def lie_bracket(u: VectorField, v: VectorField) -> VectorField:
    model = u.model
    if v.model is not model:
        raise ModelMismatch("vector fields live on different models")
    comps = [u.apply(v.components[i]) - v.apply(u.components[i]) for i in range(model.dim)]
    for j, k in itertools.permutations(range(model.dim), 2):
        if u.components[j].is_zero or v.components[k].is_zero:
            continue
        for i, g in model.bracket_coefficients(j, k).items():
            comps[i] = comps[i] + g * u.components[j] * v.components[k]
    return VectorField(model, comps)


# core operations --------------------------------------------------------------

def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    a._check(b)
    degree = a.degree + b.degree
    model = a.model
    if degree > model.dim:
        return DifferentialForm(model, degree, {})
    comps = {}
    for ia, fa in a.components.items():
        for ib, fb in b.components.items():
            sign, key = _merge(ia, ib)
            if sign == 0:
                continue
            term = fa * fb if sign > 0 else -(fa * fb)
            comps[key] = comps[key] + term if key in comps else term
    return DifferentialForm(model, degree, comps)


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    """d(f e^I) = sum_i X_i(f) e^i ^ e^I + f d(e^I)."""
    model = a.model
    comps = {}

    def add(key, value):
        comps[key] = comps[key] + value if key in comps else value

    for idx, f in a.components.items():
        for i in range(model.dim):
            if i in idx:
                continue
            xf = model.frame_derivative(f, i)
            if xf.is_zero:
                continue
            sign, key = _merge((i,), idx)
            add(key, xf if sign > 0 else -xf)
        for key, c in model.d_monomial(idx).items():
            add(key, c * f)
    return DifferentialForm(model, a.degree + 1, comps)


def interior_product(X: VectorField, a: DifferentialForm) -> DifferentialForm:
    if X.model is not a.model:
        raise ModelMismatch("vector field and form live on different models")
    if a.degree == 0:
        return DifferentialForm(a.model, 0, {})
    comps = {}
    for idx, f in a.components.items():
        for pos, i in enumerate(idx):
            v = X.components[i]
            if v.is_zero:
                continue
            key = idx[:pos] + idx[pos + 1:]
            term = v * f if pos % 2 == 0 else -(v * f)
            comps[key] = comps[key] + term if key in comps else term
    return DifferentialForm(a.model, a.degree - 1, comps)


def lie_derivative(X: VectorField, a: DifferentialForm) -> DifferentialForm:
    """Cartan's formula L_X = i_X d + d i_X."""
    first = interior_product(X, exterior_derivative(a))
    if a.degree == 0:
        return first
    return first + exterior_derivative(interior_product(X, a))


def t_derivative(a: DifferentialForm) -> DifferentialForm:
    return DifferentialForm(a.model, a.degree, {k: v.diff(T) for k, v in a.components.items()})


def evaluate(a: DifferentialForm, p, t: float = 0.0) -> dict:
    """Component values at a single point, keyed by 1-based index tuples."""
    vals = a.values(np.atleast_2d(np.asarray(p, dtype=float)), t)[0]
    return {tuple(i + 1 for i in idx): float(vals[c]) for c, idx in enumerate(a.model.combos(a.degree))}


def substitute_t(a: DifferentialForm, value: float) -> DifferentialForm:
    """Freeze the family parameter at ``value`` (returns a form without ``t``)."""
    from .expr import _substitute  # local to keep expr's surface small

    return DifferentialForm(a.model, a.degree, {k: ScalarField(_substitute(v.node, T, value)) for k, v in a.components.items()})
