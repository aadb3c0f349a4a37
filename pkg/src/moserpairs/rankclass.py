"""Rank and class of forms, characteristic foliations and structure validation.

Vanishing and nonvanishing conditions are certified on sampled grids only.
Grids span just the coordinates that the evaluated coframe components
actually depend on; along the remaining coordinates every component is
constant, so nothing is lost by freezing them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .manifold import CoframeModel, DifferentialForm, exterior_derivative, wedge

ZERO_TOL = 1e-9
KERNEL_TOL = 1e-8
LATTICE_TOL = 1e-9
SPLIT_TOL = 1e-6


class StructureError(ValueError):
    """A form or structure fails a precondition; ``report`` carries the evidence."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class DimensionError(StructureError):
    pass


# foliations -------------------------------------------------------------------

@dataclass(frozen=True)
class FrameSpan:
    """Distribution spanned by frame fields X_i, i in ``indices`` (1-based)."""

    indices: frozenset
    oriented: bool = True

    def __init__(self, indices, oriented=True):
        object.__setattr__(self, "indices", frozenset(int(i) for i in indices))
        object.__setattr__(self, "oriented", oriented)

    @property
    def dimension(self) -> int:
        return len(self.indices)

    def zero_based(self) -> list[int]:
        return sorted(i - 1 for i in self.indices)

    def basis(self, model: CoframeModel, points) -> np.ndarray:
        m = np.atleast_2d(points).shape[0]
        eye = np.eye(model.dim)[:, self.zero_based()]
        return np.broadcast_to(eye, (m,) + eye.shape)


@dataclass(frozen=True, eq=False)
class KernelOf:
    """Distribution Ker(form); ``corank`` is the expected codimension."""

    form: DifferentialForm
    corank: int | None = None
    oriented: bool = True

    def basis(self, model: CoframeModel, points, t=0.0) -> np.ndarray:
        return kernel_basis(self.form, points, t)


def contraction_matrix(form: DifferentialForm, points, t=0.0) -> np.ndarray:
    """(m, C(n,p-1), n) matrix of v -> i_v form in frame components."""
    model = form.model
    p, n = form.degree, model.dim
    vals = form.values(points, t)
    lower = {idx: r for r, idx in enumerate(model.combos(p - 1))}
    out = np.zeros((vals.shape[0], len(lower), n), dtype=vals.dtype)
    for c, idx in enumerate(model.combos(p)):
        for pos, i in enumerate(idx):
            rest = idx[:pos] + idx[pos + 1:]
            out[:, lower[rest], i] += (-1) ** pos * vals[:, c]
    return out


def _null_space(mat: np.ndarray, tol: float) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.eye(mat.shape[1])
    _, s, vh = np.linalg.svd(mat)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].T.conj()


def _batched_null_spaces(mats: np.ndarray, tol: float) -> list:
    """Null spaces of a stack of matrices with one batched SVD."""
    m, rows, n = mats.shape
    if rows == 0:
        return [np.eye(n) for _ in range(m)]
    if rows > n:
        mats = np.linalg.qr(mats, mode="r")  # same row space, square and cheaper to decompose
    _, s, vh = np.linalg.svd(mats)
    scale = np.maximum(1.0, s[:, 0])
    ranks = np.sum(s > tol * scale[:, None], axis=1)
    vh = np.swapaxes(vh, 1, 2).conj()
    return [vh[i, :, ranks[i]:] for i in range(m)]


def kernel_basis(form: DifferentialForm, points, t=0.0, tol=KERNEL_TOL) -> list:
    """Per-point orthonormal kernel bases (list of (n, r) arrays)."""
    return _batched_null_spaces(contraction_matrix(form, points, t), tol)


def stacked_kernel(forms: Sequence[DifferentialForm], points, t=0.0, tol=KERNEL_TOL) -> list:
    mats = [contraction_matrix(f, points, t) for f in forms]
    return _batched_null_spaces(np.concatenate(mats, axis=1), tol)


def foliation_basis(fol, model, points, t=0.0) -> list:
    if isinstance(fol, FrameSpan):
        return list(fol.basis(model, points))
    return fol.basis(model, points, t)


# sampling --------------------------------------------------------------------

def dependent_coords(model: CoframeModel, forms: Sequence[DifferentialForm]) -> list[int]:
    names = set()
    for f in forms:
        names |= f.variables()
    return [j for j, c in enumerate(model.coords) if c in names]


def sample_grid(model: CoframeModel, forms: Sequence[DifferentialForm], k: int = 17) -> np.ndarray:
    return model.grid(k, dependent_coords(model, forms))


# rank and class -----------------------------------------------------------------

def powers(form: DifferentialForm, kmax: int) -> list[DifferentialForm]:
    out = [form.model.scalar(1.0)]
    for _ in range(kmax):
        out.append(wedge(out[-1], form))
    return out


def _nonzero(form: DifferentialForm, points, t, tol) -> np.ndarray:
    m = np.atleast_2d(points).shape[0]
    if form.is_zero:
        return np.zeros(m, dtype=bool)
    return np.max(np.abs(form.values(points, t)), axis=1) > tol


def rank_2form(eta: DifferentialForm, points, t=0.0, tol=ZERO_TOL) -> np.ndarray:
    """Rank 2k per point, k maximal with eta^k != 0 (wedge-power test)."""
    if eta.degree != 2:
        raise ValueError("rank_2form needs a 2-form")
    pts = np.atleast_2d(points)
    ranks = np.zeros(pts.shape[0], dtype=int)
    for k, pw in enumerate(powers(eta, eta.model.dim // 2)):
        if k == 0:
            continue
        nz = _nonzero(pw, pts, t, tol)
        if not nz.any():
            break
        ranks[nz] = 2 * k
    return ranks


def pointwise_rank_2form(eta: DifferentialForm, p, t=0.0, tol=ZERO_TOL) -> int:
    return int(rank_2form(eta, np.atleast_2d(p), t, tol)[0])


def matrix_rank_2form(eta: DifferentialForm, points, t=0.0, tol=1e-8) -> np.ndarray:
    """Eigenvalue route to the rank, kept as a cross-check of the wedge route."""
    mats = eta.matrix(points, t)
    return np.array([np.linalg.matrix_rank(m, tol=tol) for m in mats])


class ClassValue(int):
    """Integer class carrying a ``degenerate`` flag (set when the form vanishes)."""

    def __new__(cls, value, degenerate=False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


def class_1form(alpha: DifferentialForm, points, t=0.0, tol=ZERO_TOL):
    """Class per point and a degeneracy mask (alpha = 0)."""
    if alpha.degree != 1:
        raise ValueError("class_1form needs a 1-form")
    pts = np.atleast_2d(points)
    da = exterior_derivative(alpha)
    dpow = powers(da, alpha.model.dim // 2)
    m = pts.shape[0]
    top = np.zeros(m, dtype=int)
    for k in range(1, len(dpow)):
        nz = _nonzero(dpow[k], pts, t, tol)
        top[nz] = k
    classes = 2 * top
    for k in sorted(set(top.tolist())):
        sel = top == k
        odd = _nonzero(wedge(alpha, dpow[k]), pts[sel], t, tol)
        classes[np.flatnonzero(sel)[odd]] += 1
    degenerate = ~_nonzero(alpha, pts, t, tol)
    classes[degenerate & (top == 0)] = 0
    return classes, degenerate


def class_of_1form(alpha: DifferentialForm, p, t=0.0, tol=ZERO_TOL) -> ClassValue:
    classes, degenerate = class_1form(alpha, np.atleast_2d(p), t, tol)
    return ClassValue(int(classes[0]), bool(degenerate[0]))


@dataclass
class ClassReport:
    points: np.ndarray
    values: np.ndarray
    kind: str

    @property
    def min(self) -> int:
        return int(self.values.min())

    @property
    def max(self) -> int:
        return int(self.values.max())

    @property
    def constant_class(self) -> bool:
        return self.min == self.max

    @property
    def witness(self):
        if self.constant_class:
            return None
        i = int(np.argmax(self.values != self.values[0]))
        return self.points[i].tolist()


def class_report(form: DifferentialForm, points, t=0.0) -> ClassReport:
    if form.degree == 1:
        values, _ = class_1form(form, points, t)
        return ClassReport(np.atleast_2d(points), values, "class")
    if form.degree == 2:
        return ClassReport(np.atleast_2d(points), rank_2form(form, points, t), "rank")
    raise ValueError("class reports cover 1-forms and 2-forms")


@dataclass
class CharacteristicDistribution:
    bases: list
    foliation: object
    report: ClassReport

    @property
    def dimension(self) -> int:
        return self.bases[0].shape[1]


def _detect_frame_span(bases, n, tol=KERNEL_TOL):
    if not bases:
        return None
    dim = bases[0].shape[1]
    if dim == 0:
        return FrameSpan([])
    weight = np.zeros(n)
    for b in bases:
        weight = np.maximum(weight, np.linalg.norm(b, axis=1))
    support = [i for i in range(n) if weight[i] > tol]
    if len(support) != dim:
        return None
    off = [i for i in range(n) if i not in support]
    for b in bases:
        if off and np.max(np.abs(b[off])) > tol:
            return None
    return FrameSpan(i + 1 for i in support)


def characteristic_distribution(form: DifferentialForm, points, t=0.0) -> CharacteristicDistribution:
    """C_p = Ker(alpha) n Ker(d alpha) for a 1-form; Ker(eta) for a 2-form."""
    report = class_report(form, points, t)
    if not report.constant_class:
        raise StructureError(f"{report.kind} is not constant on the grid (witness {report.witness})", report)
    if form.degree == 1:
        bases = stacked_kernel([form, exterior_derivative(form)], points, t)
    else:
        bases = kernel_basis(form, points, t)
    span = _detect_frame_span(bases, form.model.dim)
    corank = form.model.dim - bases[0].shape[1]
    defining = form if form.degree == 2 else wedge(form, powers(exterior_derivative(form), (report.min - 1) // 2)[-1])
    return CharacteristicDistribution(bases, span if span is not None else KernelOf(defining, corank), report)


# Frobenius -------------------------------------------------------------------

def frobenius_check(fol, points=None, t=0.0, tol=ZERO_TOL, model=None):
    """(integrable, worst residual). FrameSpan: exact bracket closure."""
    if isinstance(fol, FrameSpan):
        if model is None:
            raise ValueError("FrameSpan checks need the model")
        idx = fol.zero_based()
        worst = 0.0
        for j, k in itertools.combinations(idx, 2):
            for i, g in model.bracket_coefficients(j, k).items():
                if i not in idx:
                    worst = max(worst, abs(g))
        return worst <= tol, worst
    rho = fol.form
    pts = np.atleast_2d(points)
    bases = kernel_basis(rho, pts, t)
    dims = {b.shape[1] for b in bases}
    if len(dims) != 1:
        raise StructureError(f"kernel dimension varies over the grid: {sorted(dims)}")
    drho = exterior_derivative(rho)
    if drho.is_zero or dims.pop() < 2:
        return True, 0.0
    tens = drho.tensor(pts, t)
    B = np.stack(bases)
    c = np.einsum("mau,mbv,mab...->muv...", B, B, tens)
    worst = float(np.max(np.abs(c), initial=0.0))
    return worst <= tol, worst


# structures --------------------------------------------------------------------

KINDS = ("symplectic_pair", "contact_pair", "contact_symplectic_pair", "cs_structure", "cc_structure")

FORM_ROLES = {
    "symplectic_pair": ("omega", "eta"),
    "contact_pair": ("alpha", "beta"),
    "contact_symplectic_pair": ("alpha", "eta"),
    "cs_structure": ("alpha", "eta"),
    "cc_structure": ("alpha", "beta"),
}


@dataclass
class GeometricStructure:
    """One of the five structures. ``h``/``k`` give the type; for a symplectic
    pair they are the half-ranks of omega and eta."""

    kind: str
    forms: dict
    h: int
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown structure kind {self.kind!r}")
        roles = FORM_ROLES[self.kind]
        missing = [r for r in roles if r not in self.forms]
        if missing:
            raise ValueError(f"{self.kind} needs forms {missing}")
        a, b = (self.forms[r] for r in roles)
        if a.model is not b.model:
            raise ValueError("structure forms live on different models")
        n = self.model.dim
        if self.kind in ("cs_structure", "cc_structure"):
            if self.kind == "cs_structure" and n % 2 == 0:
                raise DimensionError("contact-symplectic structure needs odd dimension 2n+1")
            if self.kind == "cc_structure" and n % 2 == 1:
                raise DimensionError("contact-contact structure needs even dimension 2n+2")
            half = (n - 1) // 2 if self.kind == "cs_structure" else (n - 2) // 2
            if self.k is None:
                self.k = half - self.h
            if self.h + self.k != half or self.h < 0 or self.k < 0:
                raise DimensionError(f"type ({self.h},{self.k}) does not fit dimension {n}")
        else:
            if self.k is None:
                raise ValueError("pair structures need both type entries")
            need = {
                "symplectic_pair": 2 * self.h + 2 * self.k,
                "contact_pair": 2 * self.h + 2 * self.k + 2,
                "contact_symplectic_pair": 2 * self.h + 2 * self.k + 1,
            }[self.kind]
            if need != n:
                raise DimensionError(f"{self.kind} of type ({self.h},{self.k}) needs dimension {need}, model has {n}")
        for role, f in self.forms.items():
            want = 2 if role in ("omega", "eta") else 1
            if f.degree != want:
                raise ValueError(f"form {role} must have degree {want}")

    @property
    def model(self) -> CoframeModel:
        return next(iter(self.forms.values())).model

    def __getattr__(self, name):
        forms = self.__dict__.get("forms", {})
        if name in forms:
            return forms[name]
        raise AttributeError(name)

    def at_t(self, value: float) -> "GeometricStructure":
        from .manifold import substitute_t

        return GeometricStructure(self.kind, {r: substitute_t(f, value) for r, f in self.forms.items()}, self.h, self.k)

    def conditions(self) -> list:
        """(name, kind, form) triples: kind in closed | volume | vanish."""
        f = self.forms
        h, k = self.h, self.k
        if self.kind == "symplectic_pair":
            w, e = f["omega"], f["eta"]
            return [
                ("closed(omega)", "closed", w),
                ("closed(eta)", "closed", e),
                ("volume(omega^h^eta^k)", "volume", wedge(w ** h, e ** k)),
                ("vanish(omega^(h+1))", "vanish", w ** (h + 1)),
                ("vanish(eta^(k+1))", "vanish", e ** (k + 1)),
            ]
        if self.kind == "contact_symplectic_pair":
            a, e = f["alpha"], f["eta"]
            da = exterior_derivative(a)
            return [
                ("closed(eta)", "closed", e),
                ("volume(alpha^da^h^eta^k)", "volume", wedge(wedge(a, da ** h), e ** k)),
                ("vanish(da^(h+1))", "vanish", da ** (h + 1)),
                ("vanish(eta^(k+1))", "vanish", e ** (k + 1)),
            ]
        if self.kind == "contact_pair":
            a, b = f["alpha"], f["beta"]
            da, db = exterior_derivative(a), exterior_derivative(b)
            return [
                ("volume(alpha^da^h^beta^db^k)", "volume", wedge(wedge(a, da ** h), wedge(b, db ** k))),
                ("vanish(da^(h+1))", "vanish", da ** (h + 1)),
                ("vanish(db^(k+1))", "vanish", db ** (k + 1)),
            ]
        if self.kind == "cs_structure":
            a, e = f["alpha"], f["eta"]
            da = exterior_derivative(a)
            return [
                ("closed(eta)", "closed", e),
                ("volume(alpha^da^h^eta^k)", "volume", wedge(wedge(a, da ** h), e ** k)),
                ("vanish(alpha^da^(h+1))", "vanish", wedge(a, da ** (h + 1))),
                ("vanish(eta^(k+1))", "vanish", e ** (k + 1)),
            ]
        a, b = f["alpha"], f["beta"]
        da, db = exterior_derivative(a), exterior_derivative(b)
        return [
            ("volume(alpha^da^h^beta^db^k)", "volume", wedge(wedge(a, da ** h), wedge(b, db ** k))),
            ("vanish(alpha^da^(h+1))", "vanish", wedge(a, da ** (h + 1))),
            ("vanish(beta^db^(k+1))", "vanish", wedge(b, db ** (k + 1))),
        ]

    def defining_forms(self) -> dict:
        """Forms whose kernels are the two characteristic foliations F and G."""
        f = self.forms
        h, k = self.h, self.k
        if self.kind == "symplectic_pair":
            return {"F": f["eta"], "G": f["omega"]}
        if self.kind in ("contact_symplectic_pair", "cs_structure"):
            a = f["alpha"]
            return {"F": f["eta"], "G": wedge(a, exterior_derivative(a) ** h)}
        a, b = f["alpha"], f["beta"]
        return {
            "F": wedge(a, exterior_derivative(a) ** h),
            "G": wedge(b, exterior_derivative(b) ** k),
        }

    def foliations(self, points=None, t=0.0) -> dict:
        """Characteristic foliations, as FrameSpan when the kernel is a constant frame span."""
        out = {}
        for name, rho in self.defining_forms().items():
            pts = points if points is not None else sample_grid(self.model, [rho], 5)
            bases = kernel_basis(rho, pts, t)
            span = _detect_frame_span(bases, self.model.dim)
            out[name] = span if span is not None else KernelOf(rho, self.model.dim - bases[0].shape[1])
        return out


@dataclass
class Condition:
    name: str
    kind: str
    value: float
    tol: float
    passed: bool
    witness: list | None = None
    t: float | None = None

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "value": float(self.value),
            "tol": self.tol,
            "passed": self.passed,
            "witness": self.witness,
            "t": self.t,
        }


@dataclass
class ValidationReport:
    kind: str
    type: tuple
    conditions: list = field(default_factory=list)
    grid_points: int = 0
    t_samples: tuple = (0.0,)
    certification: str = "sampled grid only"

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failed(self) -> list[str]:
        return sorted({c.name for c in self.conditions if not c.passed})

    def condition(self, name):
        return [c for c in self.conditions if c.name == name]

    def to_dict(self):
        return {
            "kind": self.kind,
            "type": list(self.type),
            "valid": self.valid,
            "failed": self.failed,
            "grid_points": self.grid_points,
            "t_samples": list(self.t_samples),
            "certification": self.certification,
            "conditions": [c.to_dict() for c in self.conditions],
        }


def _worst(values: np.ndarray, pts: np.ndarray, largest=True):
    mags = np.max(np.abs(values), axis=1) if values.ndim == 2 else np.abs(values)
    i = int(np.argmax(mags) if largest else np.argmin(mags))
    return float(mags[i]), pts[i].tolist()


def _boundary_points(model: CoframeModel, pts: np.ndarray, m: int = 64) -> np.ndarray:
    """Grid points pushed onto the faces of the fundamental domain where lattice translates meet."""
    picks = pts[np.linspace(0, len(pts) - 1, min(m, len(pts))).astype(int)]
    faces = []
    for j in range(model.dim):
        face = np.array(picks, dtype=float)
        face[:, j] = 0.0
        faces.append(face)
    return np.concatenate(faces)


def validate_structure(s: GeometricStructure, grid_k: int = 17, t_samples=(0.0,), tol: float = ZERO_TOL) -> ValidationReport:
    """Check the defining conditions of ``s`` on a grid for each t-sample."""
    model = s.model
    conds = s.conditions()
    d_forms = {name: exterior_derivative(f) for name, kind, f in conds if kind == "closed"}
    defining = s.defining_forms()
    deps = [f for _, _, f in conds] + list(d_forms.values()) + list(defining.values())
    has_t = any(f.depends_on_t() for f in s.forms.values())
    t_samples = tuple(float(x) for x in t_samples) if has_t else (0.0,)
    pts = sample_grid(model, deps, grid_k)
    report = ValidationReport(s.kind, (s.h, s.k), grid_points=len(pts), t_samples=t_samples)
    edge = _boundary_points(model, pts)
    for t in t_samples:
        for role, form in s.forms.items():
            value = form.lattice_defect(edge, t)
            ok = value <= LATTICE_TOL
            report.conditions.append(Condition(f"periodic({role})", "periodic", value, LATTICE_TOL, ok, None, t))
        for name, kind, form in conds:
            if kind == "closed":
                df = d_forms[name]
                value, wit = (0.0, None) if df.is_zero else _worst(df.values(pts, t), pts)
                report.conditions.append(Condition(name, kind, value, tol, value <= tol, None if value <= tol else wit, t))
            elif kind == "vanish":
                value, wit = (0.0, None) if form.is_zero else _worst(form.values(pts, t), pts)
                report.conditions.append(Condition(name, kind, value, tol, value <= tol, None if value <= tol else wit, t))
            else:
                vals = form.values(pts, t) if not form.is_zero else np.zeros((len(pts), 1))
                value, wit = _worst(vals, pts, largest=False)
                ok = value > tol
                report.conditions.append(Condition(name, "volume", value, tol, ok, None if ok else wit, t))
        # characteristic foliations: constant dimension, Frobenius, complementarity
        bases = {}
        for fname, rho in defining.items():
            kb = kernel_basis(rho, pts, t)
            dims = np.array([b.shape[1] for b in kb])
            ok = dims.min() == dims.max()
            wit = None if ok else pts[int(np.argmax(dims != dims[0]))].tolist()
            report.conditions.append(Condition(f"constant_dim({fname})", "foliation", float(dims.max() - dims.min()), 0, ok, wit, t))
            if ok:
                integ, resid = frobenius_check(KernelOf(rho), pts, t, tol)
                report.conditions.append(Condition(f"frobenius({fname})", "foliation", resid, tol, integ, None, t))
            bases[fname] = kb
        dets = np.zeros(len(pts))
        fits = [i for i, (bf, bg) in enumerate(zip(bases["F"], bases["G"])) if bf.shape[1] + bg.shape[1] == model.dim]
        if fits:
            stack = np.stack([np.concatenate((bases["F"][i], bases["G"][i]), axis=1) for i in fits])
            dets[fits] = np.abs(np.linalg.det(stack))
        i = int(np.argmin(dets))
        ok = dets[i] >= SPLIT_TOL
        report.conditions.append(Condition("complementary(F,G)", "foliation", float(dets[i]), SPLIT_TOL, ok, None if ok else pts[i].tolist(), t))
    return report


def is_valid(s: GeometricStructure, **kw) -> bool:
    return validate_structure(s, **kw).valid


__all__ = [
    "ClassReport",
    "ClassValue",
    "Condition",
    "DimensionError",
    "FrameSpan",
    "GeometricStructure",
    "KernelOf",
    "StructureError",
    "ValidationReport",
    "characteristic_distribution",
    "class_of_1form",
    "frobenius_check",
    "kernel_basis",
    "pointwise_rank_2form",
    "rank_2form",
    "validate_structure",
]

