"""Ideal and basic forms, Reeb classes, spectral primitives and periods.

Basic forms of a frame-span foliation are truncated to trigonometric
polynomials (order <= N) in the coordinates that the spanning fields do not
move, tensored with constant-coefficient forms that are themselves basic.
Lattice twists of the model kill every mode that is not invariant under the
induced action on frequencies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import ScalarField, cos, sin
from .manifold import CoframeModel, DifferentialForm, exterior_derivative, interior_product, lie_derivative, wedge
from .rankclass import FrameSpan, KernelOf, StructureError, foliation_basis, frobenius_check, sample_grid

RESIDUAL_TOL = 1e-8
ZERO_TOL = 1e-9


class UnsupportedFoliation(ValueError):
    pass


class NotBasic(ValueError):
    pass


# modes ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    """Real trigonometric mode ``kind(sum_i m_i * 2pi x_i / P_i)`` over ``coords``."""

    freq: tuple
    kind: str  # "cos" or "sin"

    @property
    def is_constant(self) -> bool:
        return not any(self.freq)

    def label(self, names) -> str:
        if self.is_constant:
            return "1"
        arg = "+".join(f"{m}*{n}" for m, n in zip(self.freq, names) if m)
        return f"{self.kind}({arg})"


def lattice_fixed(model: CoframeModel, coords, freq) -> bool:
    """A mode is well defined iff its phase is unchanged by every lattice twist.

    Shifting ``shift`` by its period adds ``coef * x_source`` to ``target``,
    which multiplies the mode by a phase linear in ``x_source``; that phase is
    trivial exactly when the frequency along ``target`` vanishes.
    """
    index = {c: k for k, c in enumerate(coords)}
    for _shift, target, _source, coef in model.shears:
        if coef and target in index and freq[index[target]] != 0:
            return False
    return True


def half_frequencies(dim: int, order: int):
    """Frequencies with |m_i| <= order, one representative per +-pair, zero first."""
    out = []
    for freq in itertools.product(range(-order, order + 1), repeat=dim):
        nz = [m for m in freq if m]
        if not nz or nz[0] > 0:
            out.append(freq)
    out.sort(key=lambda f: (sum(abs(m) for m in f), f))
    return out


def trig_modes(model: CoframeModel, coords, order: int) -> list[Mode]:
    modes = []
    for freq in half_frequencies(len(coords), order):
        if not lattice_fixed(model, coords, freq):
            continue
        if not any(freq):
            modes.append(Mode(freq, "cos"))
        else:
            modes.extend([Mode(freq, "cos"), Mode(freq, "sin")])
    return modes


def mode_function(model: CoframeModel, coords, mode: Mode) -> ScalarField:
    if mode.is_constant:
        return ScalarField.const(1.0)
    phase = ScalarField.const(0.0)
    for m, j in zip(mode.freq, coords):
        if m:
            phase = phase + ScalarField.const(2 * math.pi * m / model.periods[j]) * ScalarField.var(model.coords[j])
    return cos(phase) if mode.kind == "cos" else sin(phase)


# constant basic forms ---------------------------------------------------------------

def _rref_basis(null: np.ndarray, tol=1e-10) -> np.ndarray:
    """Sparse-looking basis (columns) of the span of ``null`` via row reduction."""
    a = null.T.copy()
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[p, c]) < tol:
            continue
        a[[r, p]] = a[[p, r]]
        a[r] /= a[r, c]
        for q in range(rows):
            if q != r:
                a[q] -= a[q, c] * a[r]
        r += 1
    a[np.abs(a) < tol] = 0.0
    return a[:r].T


def invariant_constant_forms(model: CoframeModel, fol: FrameSpan, degree: int) -> list[DifferentialForm]:
    """Constant-coefficient p-forms on indices outside the span with L_{X_s} = 0."""
    span = set(fol.zero_based())
    allowed = [idx for idx in model.combos(degree) if not span.intersection(idx)]
    if not allowed:
        return []
    monos = [DifferentialForm(model, degree, {idx: 1.0}) for idx in allowed]
    blocks = []
    for s in sorted(span):
        X = model.X(s + 1)
        cols = []
        for mono in monos:
            lie = lie_derivative(X, mono)
            vec = np.zeros(len(model.combos(degree)))
            for c, idx in enumerate(model.combos(degree)):
                comp = lie.components.get(idx)
                if comp is not None:
                    vec[c] = comp.constant_value
            cols.append(vec)
        blocks.append(np.array(cols).T)
    if blocks:
        mat = np.vstack(blocks)
        _, sv, vh = np.linalg.svd(mat)
        rank = int(np.sum(sv > 1e-10))
        null = vh[rank:].T
    else:
        null = np.eye(len(monos))
    basis = _rref_basis(null)
    out = []
    for col in basis.T:
        comps = {idx: float(v) for idx, v in zip(allowed, col) if v}
        out.append(DifferentialForm(model, degree, comps))
    return out


def free_coords(model: CoframeModel, fol: FrameSpan) -> list[int]:
    """Coordinates (0-based) along which no spanning field has a component."""
    span = fol.zero_based()
    return [j for j in range(model.dim) if all(model.frame_fields[j][s].is_zero for s in span)]


# spectral basis ---------------------------------------------------------------------

@dataclass
class BasisElement:
    mode: Mode
    constant: int  # index into the constant-form list of this degree
    form: DifferentialForm


class SpectralBasis:
    """Truncated basic complex of a frame-span foliation, degrees 0..max_degree."""

    def __init__(self, model: CoframeModel, foliation, order: int, max_degree: int = 2, grid_k: int | None = None):
        if not isinstance(foliation, FrameSpan):
            raise UnsupportedFoliation("spectral bases need a frame-span foliation")
        ok, res = frobenius_check(foliation, model=model)
        if not ok:
            raise StructureError(f"foliation is not integrable (bracket residual {res:.3g})")
        self.model = model
        self.foliation = foliation
        self.order = int(order)
        self.coords = free_coords(model, foliation)
        self.modes = trig_modes(model, self.coords, self.order)
        self.grid_k = grid_k if grid_k is not None else 2 * self.order + 3
        self.constants = {p: invariant_constant_forms(model, foliation, p) for p in range(max_degree + 2)}
        self.constants[0] = [model.scalar(1.0)]
        self._elements = {}
        self._grid = None

    @property
    def coord_names(self) -> list[str]:
        return [self.model.coords[j] for j in self.coords]

    def elements(self, degree: int) -> list[BasisElement]:
        if degree not in self._elements:
            out = []
            for mode in self.modes:
                f = self.model.scalar(mode_function(self.model, self.coords, mode))
                for c, nu in enumerate(self.constants.get(degree, [])):
                    out.append(BasisElement(mode, c, wedge(f, nu)))
            self._elements[degree] = out
        return self._elements[degree]

    def dimension(self, degree: int) -> int:
        return len(self.elements(degree))

    def grid(self) -> np.ndarray:
        if self._grid is None:
            self._grid = self.model.grid(self.grid_k, self.coords)
        return self._grid

    def value_matrix(self, forms, points=None) -> np.ndarray:
        """Columns are flattened grid values of ``forms``."""
        pts = self.grid() if points is None else points
        cols = [f.values(pts).ravel() for f in forms]
        if not cols:
            return np.zeros((0, 0))
        return np.stack(cols, axis=1)

    def d_matrix(self, degree: int) -> np.ndarray:
        forms = [exterior_derivative(el.form) for el in self.elements(degree)]
        if not forms:
            size = self.grid().shape[0] * math.comb(self.model.dim, degree + 1)
            return np.zeros((size, 0))
        return self.value_matrix(forms)

    def combine(self, degree: int, coef, cutoff=1e-13) -> DifferentialForm:
        out = DifferentialForm(self.model, degree, {})
        for c, el in zip(coef, self.elements(degree)):
            if abs(c) > cutoff:
                out = out + el.form * float(c)
        return out

    def describe(self, degree: int, coef, cutoff=1e-10) -> list[dict]:
        names = self.coord_names
        rows = []
        for c, el in zip(coef, self.elements(degree)):
            if abs(c) > cutoff:
                rows.append({
                    "mode": el.mode.label(names),
                    "frequency": list(el.mode.freq),
                    "form": _form_label(self.constants[degree][el.constant]),
                    "coefficient": float(c),
                })
        return rows


def _form_label(nu: DifferentialForm) -> str:
    parts = []
    for idx, comp in sorted(nu.components.items()):
        mono = "^".join(f"e{i + 1}" for i in idx) or "1"
        parts.append(f"{comp.constant_value:g}*{mono}")
    return " + ".join(parts) or "0"


def _rank(mat: np.ndarray, tol=1e-9) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > tol * max(1.0, sv[0])))


def basic_h2_dimension(model: CoframeModel, foliation: FrameSpan, order: int) -> int:
    """dim ker(d on truncated basic 2-forms) - rank(d from truncated basic 1-forms)."""
    basis = SpectralBasis(model, foliation, order)
    d2 = basis.d_matrix(2)
    d1 = basis.d_matrix(1)
    return basis.dimension(2) - _rank(d2) - _rank(d1)


# ideal and basic tests ---------------------------------------------------------------

def restrict_values(a: DifferentialForm, bases, points, t=0.0) -> np.ndarray:
    """Values of ``a`` on all increasing tuples of foliation basis vectors, (m, q)."""
    p = a.degree
    vals = a.values(points, t)
    if p == 0:
        return vals
    combos = a.model.combos(p)
    out = []
    for m, B in enumerate(bases):
        r = B.shape[1]
        row = []
        for sub in itertools.combinations(range(r), p):
            total = 0.0
            for c, idx in enumerate(combos):
                if vals[m, c]:
                    total += vals[m, c] * np.linalg.det(B[np.ix_(idx, sub)])
            row.append(total)
        out.append(row)
    return np.array(out, dtype=float).reshape(len(bases), -1)


def is_in_ideal(a: DifferentialForm, foliation, points=None, t=0.0, tol=ZERO_TOL):
    """(vanishes on the foliation, sup residual)."""
    model = a.model
    pts = sample_grid(model, [a]) if points is None else np.atleast_2d(points)
    bases = foliation_basis(foliation, model, pts, t)
    if a.degree > min(b.shape[1] for b in bases):
        return True, 0.0
    vals = restrict_values(a, bases, pts, t)
    res = float(np.max(np.abs(vals), initial=0.0))
    return res <= tol, res


@dataclass
class BasicReport:
    basic: bool
    interior: dict
    lie: dict

    @property
    def residual(self) -> float:
        return max(list(self.interior.values()) + list(self.lie.values()), default=0.0)

    def __bool__(self):
        return self.basic


def is_basic(a: DifferentialForm, foliation, points=None, t=0.0, tol=ZERO_TOL) -> BasicReport:
    if not isinstance(foliation, FrameSpan):
        raise UnsupportedFoliation("basic-form checks need a frame-span foliation")
    model = a.model
    interior, lie = {}, {}
    for s in sorted(foliation.indices):
        X = model.X(s)
        ia, la = interior_product(X, a), lie_derivative(X, a)
        pts = sample_grid(model, [a, ia, la]) if points is None else np.atleast_2d(points)
        interior[s] = ia.sup_norm(pts, t)
        lie[s] = la.sup_norm(pts, t)
    ok = max(list(interior.values()) + list(lie.values()), default=0.0) <= tol
    return BasicReport(ok, interior, lie)


# Reeb class ------------------------------------------------------------------------

@dataclass
class ReebClass:
    beta: np.ndarray  # (m, n) frame components of a pointwise solution
    points: np.ndarray
    equation_residual: float
    leafwise_sup: float
    primitive_residual: float | None
    order: int

    @property
    def vanishes(self) -> bool:
        if self.leafwise_sup <= ZERO_TOL:
            return True
        return self.primitive_residual is not None and self.primitive_residual <= RESIDUAL_TOL

    def to_dict(self):
        return {
            "equation_residual": self.equation_residual,
            "leafwise_sup": self.leafwise_sup,
            "primitive_residual": self.primitive_residual,
            "order": self.order,
            "vanishes": self.vanishes,
        }


def reeb_class(rho: DifferentialForm, points=None, t=0.0, order: int = 2, tol=ZERO_TOL) -> ReebClass:
    """Solve d rho = rho ^ beta pointwise and test whether beta is leafwise exact.

    Leafwise exactness is probed by fitting d u, u a trigonometric polynomial
    of order ``order`` in the coordinates rho depends on, to beta on the
    leaves; a zero Reeb class is reported only within that truncation.
    """
    model = rho.model
    n = model.dim
    drho = exterior_derivative(rho)
    pts = sample_grid(model, [rho, drho], k=2 * order + 3) if points is None else np.atleast_2d(points)
    ok, res = frobenius_check(KernelOf(rho), pts, t)
    if not ok:
        raise StructureError(f"Ker rho is not integrable (residual {res:.3g}); d rho = rho ^ beta has no solution")
    target = drho.values(pts, t)
    cols = np.stack([wedge(rho, model.e(i + 1)).values(pts, t) for i in range(n)], axis=2)
    beta = np.empty((pts.shape[0], n))
    worst = 0.0
    for m in range(pts.shape[0]):
        sol, *_ = np.linalg.lstsq(cols[m], target[m], rcond=None)
        beta[m] = sol
        worst = max(worst, float(np.max(np.abs(cols[m] @ sol - target[m]), initial=0.0)))
    if worst > tol:
        raise StructureError(f"d rho = rho ^ beta has no pointwise solution (residual {worst:.3g})")

    bases = KernelOf(rho).basis(model, pts, t)
    leaf = np.concatenate([beta[m] @ bases[m] for m in range(pts.shape[0])])
    leaf_sup = float(np.max(np.abs(leaf), initial=0.0))
    prim = None
    if leaf_sup > tol:
        coords = sorted(set(range(n)) & set(_dep(model, [rho])))
        modes = [md for md in trig_modes(model, coords, order) if not md.is_constant]
        blocks = []
        for md in modes:
            u = model.scalar(mode_function(model, coords, md))
            du = exterior_derivative(u).values(pts, t)
            blocks.append(np.concatenate([du[m] @ bases[m] for m in range(pts.shape[0])]))
        if blocks:
            mat = np.stack(blocks, axis=1)
            c, *_ = np.linalg.lstsq(mat, leaf, rcond=None)
            prim = float(np.linalg.norm(mat @ c - leaf) / np.linalg.norm(leaf))
        else:
            prim = 1.0
    return ReebClass(beta, pts, worst, leaf_sup, prim, order)


def _dep(model, forms):
    names = set()
    for f in forms:
        names |= f.variables()
    return [j for j, c in enumerate(model.coords) if c in names]


# primitives ------------------------------------------------------------------------

@dataclass
class PrimitiveResult:
    primitive: DifferentialForm | None
    residual: float
    witness: list
    order: int
    sup_error: float | None = None
    residual_by_order: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.primitive is not None

    def to_dict(self):
        return {
            "found": self.found,
            "residual": self.residual,
            "order": self.order,
            "sup_error": self.sup_error,
            "residual_by_order": {str(k): v for k, v in sorted(self.residual_by_order.items())},
            "witness": self.witness,
        }


def _solve_primitive(target: DifferentialForm, basis: SpectralBasis, tol: float) -> PrimitiveResult:
    pts = basis.grid()
    b = target.values(pts).ravel()
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        zero = DifferentialForm(basis.model, 1, {})
        return PrimitiveResult(zero, 0.0, [], basis.order, 0.0)
    d1 = basis.d_matrix(1)
    if d1.shape[1]:
        coef, *_ = np.linalg.lstsq(d1, b, rcond=None)
        fitted = d1 @ coef
    else:
        coef, fitted = np.zeros(0), np.zeros_like(b)
    residual = float(np.linalg.norm(b - fitted) / norm)
    if residual <= tol:
        prim = basis.combine(1, coef)
        err = (exterior_derivative(prim) - target).sup_norm(pts)
        return PrimitiveResult(prim, residual, [], basis.order, err)
    v2 = basis.value_matrix([el.form for el in basis.elements(2)])
    w, *_ = np.linalg.lstsq(v2, b - fitted, rcond=None)
    return PrimitiveResult(None, residual, basis.describe(2, w), basis.order)


def find_basic_primitive(target: DifferentialForm, foliation, order: int = 4, tol: float = RESIDUAL_TOL,
                         convergence: bool = False, check: bool = True) -> PrimitiveResult:
    """Least-squares basic primitive of a closed basic 2-form at Fourier order ``order``.

    With ``convergence=True`` the solve is repeated at order 2N; the result
    at 2N is returned and both residuals are kept in ``residual_by_order``.
    """
    model = target.model
    if target.degree != 2:
        raise ValueError("target must be a 2-form")
    if check:
        rep = is_basic(target, foliation)
        if not rep:
            raise NotBasic(f"target is not basic (residual {rep.residual:.3g})")
        dres = exterior_derivative(target).sup_norm(sample_grid(model, [exterior_derivative(target)]))
        if dres > ZERO_TOL:
            raise NotBasic(f"target is not closed (|d target| = {dres:.3g})")
    orders = [order, 2 * order] if convergence else [order]
    result = None
    history = {}
    for N in orders:
        result = _solve_primitive(target, SpectralBasis(model, foliation, N), tol)
        history[N] = result.residual
    result.residual_by_order = history
    return result


# de Rham periods -----------------------------------------------------------------------

def coordinate_component(a: DifferentialForm, i: int, j: int, points, t=0.0) -> np.ndarray:
    """a(d/dx_i, d/dx_j) at each point (0-based coordinate indices)."""
    F = a.model.frame_matrix(points, t)
    C = np.linalg.inv(F)  # rows: coframe in coordinates
    tens = a.tensor(points, t)
    u, v = C[:, :, i], C[:, :, j]
    return np.einsum("mrs,mr,ms->m", tens, u, v)


def check_cycle(model: CoframeModel, i: int, j: int):
    for shift, target, _source, coef in model.shears:
        if coef and shift in (i, j):
            raise ValueError(
                f"coordinate torus ({model.coords[i]}, {model.coords[j]}) is not closed: "
                f"translating {model.coords[shift]} also moves {model.coords[target]}"
            )


def de_rham_periods(a: DifferentialForm, cycles, t_samples=(0.0,), k: int = 32) -> np.ndarray:
    """Periods over coordinate 2-tori (1-based coordinate pairs), shape (len(t), len(cycles))."""
    model = a.model
    if a.degree != 2:
        raise ValueError("periods need a 2-form")
    out = np.zeros((len(t_samples), len(cycles)))
    for c, (i, j) in enumerate(cycles):
        i0, j0 = i - 1, j - 1
        check_cycle(model, i0, j0)
        pts = model.grid(k, [i0, j0])
        area = model.periods[i0] * model.periods[j0]
        for r, t in enumerate(t_samples):
            out[r, c] = float(np.mean(coordinate_component(a, i0, j0, pts, t))) * area
    return out


# basic versus ideal primitives -------------------------------------------------------------

def ideal_one_forms(model: CoframeModel, foliation: FrameSpan, order: int) -> list[DifferentialForm]:
    """Truncated I^1(F): trigonometric coefficients in every coordinate on e^i, i outside F."""
    coords = list(range(model.dim))
    span = set(foliation.zero_based())
    out = []
    for md in trig_modes(model, coords, order):
        f = mode_function(model, coords, md)
        for i in range(model.dim):
            if i not in span:
                out.append(DifferentialForm(model, 1, {(i,): f}))
    return out


@dataclass
class InclusionCase:
    label: str
    ideal_residual: float
    basic_residual: float
    tol: float

    @property
    def ideal_exact(self) -> bool:
        return self.ideal_residual <= self.tol

    @property
    def basic_exact(self) -> bool:
        return self.basic_residual <= self.tol

    @property
    def holds(self) -> bool:
        return self.basic_exact or not self.ideal_exact

    def to_dict(self):
        return {"label": self.label, "ideal_residual": self.ideal_residual,
                "basic_residual": self.basic_residual, "holds": self.holds}


@dataclass
class InclusionReport:
    order: int
    cases: list

    @property
    def holds(self) -> bool:
        return all(c.holds for c in self.cases)

    @property
    def artifacts(self) -> list:
        return [{"label": c.label, "order": self.order} for c in self.cases if not c.holds]

    def to_dict(self):
        return {"order": self.order, "holds": self.holds, "artifacts": self.artifacts,
                "cases": [c.to_dict() for c in self.cases]}


def lemma_incl_test(targets, foliation: FrameSpan, order: int = 2, tol: float = RESIDUAL_TOL) -> InclusionReport:
    """Whenever a closed basic 2-form has a primitive in the truncated ideal, it has a basic one.

    ``targets`` is a list of (label, form). Only abelian models are supported,
    where the truncated ideal complex is a plain trigonometric space.
    """
    cases = []
    if not targets:
        return InclusionReport(order, cases)
    model = targets[0][1].model
    if not model.is_abelian:
        raise UnsupportedFoliation("ideal-complex truncations are built on abelian models only")
    basis = SpectralBasis(model, foliation, order)
    grid = model.grid(2 * order + 2)
    ideal = [exterior_derivative(g) for g in ideal_one_forms(model, foliation, order)]
    dI = basis.value_matrix(ideal, grid)
    dB = basis.value_matrix([exterior_derivative(el.form) for el in basis.elements(1)], grid)
    UI, UB = _range_basis(dI), _range_basis(dB)
    for label, form in targets:
        b = form.values(grid).ravel()
        norm = float(np.linalg.norm(b)) or 1.0
        ri = float(np.linalg.norm(b - UI @ (UI.T @ b))) / norm
        rb = float(np.linalg.norm(b - UB @ (UB.T @ b))) / norm
        cases.append(InclusionCase(label, ri, rb, tol))
    return InclusionReport(order, cases)


def _range_basis(mat, tol=1e-10) -> np.ndarray:
    """Orthonormal basis of the column space (one SVD, reused for many targets)."""
    if mat.size == 0:
        return np.zeros((mat.shape[0], 0))
    u, sv, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, : int(np.sum(sv > tol * max(1.0, sv[0])))]


def random_closed_basic(basis: SpectralBasis, rng: np.random.Generator, exact: bool, terms: int = 4) -> DifferentialForm:
    """Random closed basic 2-form from the truncated basis (exact ones via d of 1-forms)."""
    if exact:
        els = basis.elements(1)
        pick = rng.choice(len(els), size=min(terms, len(els)), replace=False)
        coef = np.zeros(len(els))
        coef[pick] = rng.normal(size=len(pick))
        return exterior_derivative(basis.combine(1, coef))
    d2 = basis.d_matrix(2)
    if d2.size:
        _, sv, vh = np.linalg.svd(d2)
        rank = int(np.sum(sv > 1e-9 * max(1.0, sv[0])))
        null = vh[rank:].T
    else:
        null = np.eye(basis.dimension(2))
    coef = null @ rng.normal(size=null.shape[1])
    return basis.combine(2, coef)
