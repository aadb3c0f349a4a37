"""Moser and Gray type isotopies: vector fields, flows with frame transport, checks.

The three field equations are pointwise dense solves in frame components.
Constraints such as X in Ker alpha are imposed by appending rows to a square
system, so every solve is a plain ``numpy.linalg.solve`` and stays analytic in
the base point. That lets the flow Jacobian be differentiated by the complex
step, and the variational equation dJ/dt = (grad V) J is integrated with the
same RK4 stages as the trajectory.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.stats import qmc

from .cohomology import (
    RESIDUAL_TOL,
    UnsupportedFoliation,
    check_cycle,
    de_rham_periods,
    find_basic_primitive,
)
from .manifold import DifferentialForm, exterior_derivative, interior_product, substitute_t, t_derivative
from .rankclass import FrameSpan, GeometricStructure, StructureError, kernel_basis, sample_grid
from .reeb import SingularSystem, _check_cond, cc_system, complex_step_jacobian, cs_system

VARIANTS = ("SymplecticPair", "ContactSymplecticStructure", "ContactContactStructure")
KIND_TO_VARIANT = {
    "symplectic_pair": "SymplecticPair",
    "cs_structure": "ContactSymplecticStructure",
    "contact_symplectic_pair": "ContactSymplecticStructure",
    "cc_structure": "ContactContactStructure",
    "contact_pair": "ContactContactStructure",
}

DRIFT_TOL = 1e-8


class IntegrationError(RuntimeError):
    pass


def quasi_random_seeds(model, m: int) -> np.ndarray:
    """First m non-trivial points of the unscrambled Halton sequence, scaled to the periods."""
    pts = qmc.Halton(d=model.dim, scramble=False).random(m + 1)[1:]
    return pts * np.asarray(model.periods)


# problems --------------------------------------------------------------------------

def _spectral_primitive(form: DifferentialForm, foliation, order: int) -> DifferentialForm:
    dot = t_derivative(form)
    if dot.is_zero:
        return DifferentialForm(form.model, 1, {})
    if dot.depends_on_t():
        raise ValueError("spectral primitives need a t-independent derivative; supply the primitive explicitly")
    res = find_basic_primitive(dot, foliation, order)
    if not res.found:
        raise StructureError(f"no basic primitive at order {order} (residual {res.residual:.3g})")
    return res.primitive


@dataclass
class MoserProblem:
    """A t-family of structures on [0, 1] plus the primitives its field equation needs.

    For a symplectic pair ``primitives`` holds ``alpha`` (d alpha = d omega/dt,
    basic for G) and ``beta`` (d beta = d eta/dt, basic for F); for a
    contact-symplectic structure only ``beta``. Missing primitives are
    produced spectrally when the derivative does not depend on t.
    """

    structure: GeometricStructure
    primitives: dict = field(default_factory=dict)
    order: int = 4

    def __post_init__(self):
        self.variant = KIND_TO_VARIANT[self.structure.kind]
        self.model = self.structure.model
        s = self.structure
        if self.variant == "SymplecticPair":
            fols = s.foliations()
            for name, form, fol in (("alpha", s.omega, "G"), ("beta", s.eta, "F")):
                if name not in self.primitives:
                    self.primitives[name] = _spectral_primitive(form, fols[fol], self.order)
            self.omega, self.eta = s.omega, s.eta
            self.total = s.omega + s.eta
        elif self.variant == "ContactSymplecticStructure":
            if "beta" not in self.primitives:
                self.primitives["beta"] = _spectral_primitive(s.eta, s.foliations()["F"], self.order)
            self.alpha, self.eta = s.alpha, s.eta
            self.dalpha = exterior_derivative(s.alpha)
            self.total = self.dalpha + s.eta
            self.alpha_dot = t_derivative(s.alpha)
        else:
            self.alpha, self.beta = s.alpha, s.beta
            self.dalpha = exterior_derivative(s.alpha)
            self.dbeta = exterior_derivative(s.beta)
            self.total = self.dalpha + self.dbeta
            self.alpha_dot = t_derivative(s.alpha)
            self.beta_dot = t_derivative(s.beta)

    def check_primitives(self, t_samples=(0.0, 0.5, 1.0), tol=RESIDUAL_TOL) -> dict:
        """sup |d(primitive) - d/dt form| and the basic residual of each primitive."""
        s = self.structure
        pairs = []
        if self.variant == "SymplecticPair":
            pairs = [("alpha", s.omega, "G"), ("beta", s.eta, "F")]
        elif self.variant == "ContactSymplecticStructure":
            pairs = [("beta", s.eta, "F")]
        out = {}
        for name, form, fol_name in pairs:
            prim = self.primitives[name]
            diff = exterior_derivative(prim) - t_derivative(form)
            pts = sample_grid(self.model, [diff, prim, form])
            d_err = max(diff.sup_norm(pts, t) for t in t_samples)
            basic = max(basic_residual(prim, s.at_t(t).foliations()[fol_name], pts, t) for t in t_samples)
            out[name] = {"d_error": d_err, "basic_residual": basic, "ok": d_err <= tol and basic <= tol}
        return out


def basic_residual(a: DifferentialForm, foliation, points, t=0.0) -> float:
    """max over foliation basis vectors v of |i_v a| and |i_v da| (pointwise basic test)."""
    model = a.model
    if isinstance(foliation, FrameSpan):
        bases = list(foliation.basis(model, points))
    else:
        bases = foliation.basis(model, points, t)
    worst = 0.0
    for form in (a, exterior_derivative(a)):
        if form.is_zero or form.degree == 0:
            continue
        tens = form.tensor(points, t)
        for m, B in enumerate(bases):
            contracted = np.tensordot(B.T, tens[m], axes=(1, 0))
            worst = max(worst, float(np.max(np.abs(contracted), initial=0.0)))
    return worst


# field equations -----------------------------------------------------------------------

def _contract(form: DifferentialForm, X, points, t):
    """i_X form for a 2-form, as (m, n) one-form components."""
    return np.einsum("mi,mij->mj", X, form.matrix(points, t))


def moser_field_symplectic_pair(problem: MoserProblem, points, t, diagnostics=False):
    """Solve i_X(omega_t + eta_t) = -alpha_t - beta_t."""
    pts = np.atleast_2d(points)
    mat = np.swapaxes(problem.total.matrix(pts, t), 1, 2)
    _check_cond(mat, pts, "omega_t + eta_t is degenerate")
    rhs = -(problem.primitives["alpha"].values(pts, t) + problem.primitives["beta"].values(pts, t))
    X = np.linalg.solve(mat, rhs[..., None])[..., 0]
    if not diagnostics:
        return X
    a = problem.primitives["alpha"].values(pts, t)
    b = problem.primitives["beta"].values(pts, t)
    return X, {
        "residual": float(np.max(np.abs(np.einsum("mij,mj->mi", mat, X) - rhs), initial=0.0)),
        "split_omega": float(np.max(np.abs(_contract(problem.omega, X, pts, t) + a), initial=0.0)),
        "split_eta": float(np.max(np.abs(_contract(problem.eta, X, pts, t) + b), initial=0.0)),
    }


def _solve_padded(mat, oneform, extra):
    rhs = np.concatenate([oneform, np.zeros((oneform.shape[0], extra), dtype=oneform.dtype)], axis=1)
    return np.linalg.solve(mat, rhs[..., None])[..., 0]


def _reeb_from(mat, n, extra):
    rhs = np.zeros(mat.shape[:2] + (extra,), dtype=mat.dtype)
    for c in range(extra):
        rhs[:, n + c, c] = 1.0
    return np.linalg.solve(mat, rhs)[:, :n, :]


def moser_field_cs_structure(problem: MoserProblem, points, t, diagnostics=False):
    """X in Ker alpha_t with i_X(d alpha_t + eta_t) = -beta_t + mu_t alpha_t - d/dt alpha_t."""
    pts = np.atleast_2d(points)
    n = problem.model.dim
    mat = cs_system(problem.alpha, problem.total, pts, t)
    _check_cond(mat, pts, "contact-symplectic field system")
    adot = problem.alpha_dot.values(pts, t)
    b = problem.primitives["beta"].values(pts, t)
    if not diagnostics:
        # the mu*alpha term only moves the multiplier of alpha, never X itself
        return -_solve_padded(mat, b + adot, 1)[:, :n]
    R = _reeb_from(mat, n, 1)[..., 0]
    a = problem.alpha.values(pts, t)
    mu = np.einsum("mi,mi->m", adot, R) + np.einsum("mi,mi->m", b, R)
    rhs1 = -b + mu[:, None] * a - adot
    rhs = np.concatenate([rhs1, np.zeros((pts.shape[0], 1), dtype=rhs1.dtype)], axis=1)
    sol = np.linalg.solve(mat, rhs[..., None])[..., 0]
    X = sol[:, :n]
    om = problem.total.matrix(pts, t)
    lhs = np.einsum("mi,mij->mj", X, om)
    consistency = float(np.max(np.abs(np.einsum("mi,mi->m", rhs1, R)), initial=0.0))
    if consistency > 1e-9:
        raise SingularSystem(f"right-hand side does not annihilate the Reeb field ({consistency:.3g})")
    shortcut = -_solve_padded(mat, b + adot, 1)[:, :n]
    return X, {
        "mu": mu,
        "shortcut_gap": float(np.max(np.abs(shortcut - X), initial=0.0)),
        "residual": max(float(np.max(np.abs(lhs - rhs1), initial=0.0)),
                        float(np.max(np.abs(np.einsum("mi,mi->m", a, X)), initial=0.0))),
        "consistency": consistency,
        "split_eta": float(np.max(np.abs(_contract(problem.eta, X, pts, t) + b), initial=0.0)),
        "split_alpha": float(np.max(np.abs(_contract(problem.dalpha, X, pts, t) + adot - mu[:, None] * a), initial=0.0)),
    }


def moser_field_cc_structure(problem: MoserProblem, points, t, diagnostics=False):
    """W in Ker alpha_t n Ker beta_t with i_W(d alpha_t + d beta_t) = mu alpha - alpha' + nu beta - beta'."""
    pts = np.atleast_2d(points)
    n = problem.model.dim
    mat = cc_system(problem.alpha, problem.beta, problem.total, pts, t)
    _check_cond(mat, pts, "contact-contact field system")
    adot, bdot = problem.alpha_dot.values(pts, t), problem.beta_dot.values(pts, t)
    if not diagnostics:
        return -_solve_padded(mat, adot + bdot, 2)[:, :n]
    AB = _reeb_from(mat, n, 2)
    A, B = AB[..., 0], AB[..., 1]
    a, b = problem.alpha.values(pts, t), problem.beta.values(pts, t)
    s = adot + bdot
    mu = np.einsum("mi,mi->m", s, A)
    nu = np.einsum("mi,mi->m", s, B)
    rhs1 = mu[:, None] * a - adot + nu[:, None] * b - bdot
    rhs = np.concatenate([rhs1, np.zeros((pts.shape[0], 2), dtype=rhs1.dtype)], axis=1)
    W = np.linalg.solve(mat, rhs[..., None])[..., 0][:, :n]
    om = problem.total.matrix(pts, t)
    lhs = np.einsum("mi,mij->mj", W, om)
    consistency = max(float(np.max(np.abs(np.einsum("mi,mi->m", rhs1, A)), initial=0.0)),
                      float(np.max(np.abs(np.einsum("mi,mi->m", rhs1, B)), initial=0.0)))
    if consistency > 1e-9:
        raise SingularSystem(f"right-hand side does not annihilate the Reeb distribution ({consistency:.3g})")
    shortcut = -_solve_padded(mat, adot + bdot, 2)[:, :n]
    return W, {
        "mu": mu,
        "nu": nu,
        "shortcut_gap": float(np.max(np.abs(shortcut - W), initial=0.0)),
        "residual": max(float(np.max(np.abs(lhs - rhs1), initial=0.0)),
                        float(np.max(np.abs(np.einsum("mi,mi->m", a, W)), initial=0.0)),
                        float(np.max(np.abs(np.einsum("mi,mi->m", b, W)), initial=0.0))),
        "consistency": consistency,
        "split_alpha": float(np.max(np.abs(_contract(problem.dalpha, W, pts, t) + adot - mu[:, None] * a), initial=0.0)),
        "split_beta": float(np.max(np.abs(_contract(problem.dbeta, W, pts, t) + bdot - nu[:, None] * b), initial=0.0)),
    }


FIELD_OPS = {
    "SymplecticPair": moser_field_symplectic_pair,
    "ContactSymplecticStructure": moser_field_cs_structure,
    "ContactContactStructure": moser_field_cc_structure,
}


def moser_field(problem: MoserProblem, points, t, diagnostics=False):
    return FIELD_OPS[problem.variant](problem, points, t, diagnostics)


def coordinate_velocity(problem: MoserProblem, points, t):
    """Field in coordinate components (works for complex points)."""
    X = moser_field(problem, points, t)
    F = problem.model.frame_matrix(points, t)
    return np.einsum("mji,mi->mj", F, X)


# integration ----------------------------------------------------------------------------

@dataclass
class IsotopyResult:
    seeds: np.ndarray
    times: np.ndarray
    trajectories: np.ndarray  # (T, m, n)
    frames: np.ndarray  # (T, m, n, n) coordinate Jacobians of the flow
    min_det: float
    rejected_steps: int
    min_step: float

    def to_dict(self):
        return {
            "seeds": int(self.seeds.shape[0]),
            "samples": int(self.times.size),
            "min_det": self.min_det,
            "rejected_steps": self.rejected_steps,
            "min_step": self.min_step,
        }


def _rk4_step(velocity, x, J, t, h, k1=None):
    def rhs(xs, Js, ts):
        V, D = complex_step_jacobian(lambda p: velocity(p, ts), xs)
        return V, np.einsum("mij,mjk->mik", D, Js)

    if k1 is None:
        k1 = rhs(x, J, t)
    k2 = rhs(x + 0.5 * h * k1[0], J + 0.5 * h * k1[1], t + 0.5 * h)
    k3 = rhs(x + 0.5 * h * k2[0], J + 0.5 * h * k2[1], t + 0.5 * h)
    k4 = rhs(x + h * k3[0], J + h * k3[1], t + h)
    xn = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    Jn = J + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return xn, Jn, k1


def integrate_flow(velocity, seeds, steps: int = 1000, tol: float = 1e-8,
                   adaptive: bool = True, min_step: float = 1e-5) -> IsotopyResult:
    """RK4 for dx/dt = V(x, t) with dJ/dt = (grad V) J, sampled at t = k/steps.

    ``velocity(points, t)`` returns coordinate components and must accept
    complex points. Each interval is checked by step doubling; if the two
    estimates differ by more than ``tol`` the interval is split in half, down
    to ``min_step``.
    """
    x = np.array(np.atleast_2d(seeds), dtype=float)
    m, n = x.shape
    J = np.repeat(np.eye(n)[None], m, axis=0)
    times = np.linspace(0.0, 1.0, steps + 1)
    traj = np.empty((steps + 1, m, n))
    frames = np.empty((steps + 1, m, n, n))
    traj[0], frames[0] = x, J
    stats = {"rejected": 0, "min_step": 1.0 / steps}

    def advance(x, J, t, h):
        if not adaptive:
            xn, Jn, _ = _rk4_step(velocity, x, J, t, h)
            return xn, Jn
        xf, Jf, k1 = _rk4_step(velocity, x, J, t, h)
        xh, Jh, _ = _rk4_step(velocity, x, J, t, h / 2, k1=k1)
        xh, Jh, _ = _rk4_step(velocity, xh, Jh, t + h / 2, h / 2)
        err = max(float(np.max(np.abs(xf - xh))), float(np.max(np.abs(Jf - Jh))))
        if err <= tol:
            return xh, Jh
        if h / 2 < min_step:
            raise IntegrationError(f"local error {err:.3g} > {tol} at t = {t:.6g} with step {h:.3g} at the floor {min_step}")
        stats["rejected"] += 1
        stats["min_step"] = min(stats["min_step"], h / 2)
        x, J = advance(x, J, t, h / 2)
        return advance(x, J, t + h / 2, h / 2)

    for k in range(steps):
        x, J = advance(x, J, times[k], times[k + 1] - times[k])
        traj[k + 1], frames[k + 1] = x, J
    dets = np.abs(np.linalg.det(frames))
    return IsotopyResult(np.array(traj[0]), times, traj, frames, float(dets.min()), stats["rejected"], stats["min_step"])


def integrate_isotopy(problem: MoserProblem, seeds, steps: int = 1000, tol: float = 1e-8,
                      adaptive: bool = True, min_step: float = 1e-5) -> IsotopyResult:
    """Flow of the problem's field from t = 0 to 1, with the flow Jacobian."""
    return integrate_flow(lambda p, t: coordinate_velocity(problem, p, t), seeds, steps, tol, adaptive, min_step)


# verification ---------------------------------------------------------------------------

def frame_transport(model, seeds, q, J, t=0.0):
    """T with frame components at p mapped to frame components at q = phi(p)."""
    Fp = model.frame_matrix(seeds, t)
    Fq = model.frame_matrix(q, t)
    return np.linalg.solve(Fq, np.einsum("mij,mjk->mik", J, Fp))


def pullback_values(form: DifferentialForm, q, T, t) -> np.ndarray:
    """(phi^* form)_p components given values at q and the frame transport T."""
    vals = form.values(q, t)
    p = form.degree
    if p == 0:
        return vals
    if p == 1:
        return np.einsum("mj,mji->mi", vals, T)
    combos = form.model.combos(p)
    out = np.zeros_like(vals)
    for c_out, I in enumerate(combos):
        for c_in, K in enumerate(combos):
            out[:, c_out] += vals[:, c_in] * np.linalg.det(T[:, np.ix_(K, I)[0], np.ix_(K, I)[1]])
    return out


def _forms_to_check(problem: MoserProblem):
    """(name, form, kind, factor key): kind 'equal' or 'proportional'."""
    if problem.variant == "SymplecticPair":
        return [("omega", problem.omega, "equal", None), ("eta", problem.eta, "equal", None)]
    if problem.variant == "ContactSymplecticStructure":
        return [("alpha", problem.alpha, "proportional", "mu"), ("eta", problem.eta, "equal", None)]
    return [("alpha", problem.alpha, "proportional", "mu"), ("beta", problem.beta, "proportional", "nu")]


@dataclass
class IsotopyReport:
    variant: str
    errors: dict  # per form: array over t-samples of sup errors
    factors: dict = field(default_factory=dict)  # per form: fitted, integrated (T, m)
    diagnostics: dict = field(default_factory=dict)

    def sup(self, name) -> float:
        return float(np.max(self.errors[name], initial=0.0))

    @property
    def pullback_sup(self) -> float:
        eq = [self.sup(k) for k, v in self.diagnostics["kinds"].items() if v == "equal"]
        return max(eq, default=0.0)

    @property
    def proportionality_sup(self) -> float:
        pr = [self.sup(k) for k, v in self.diagnostics["kinds"].items() if v == "proportional"]
        return max(pr, default=0.0)

    @property
    def factor_mismatch(self) -> float:
        return max((float(np.max(np.abs(f["fitted"] - f["integrated"]))) for f in self.factors.values()), default=0.0)

    @property
    def factor_deviation(self) -> float:
        """max |f_t - 1|: how far the isotopy is from a strict pullback."""
        return max((float(np.max(np.abs(f["fitted"] - 1.0))) for f in self.factors.values()), default=0.0)

    def summary(self) -> dict:
        out = {
            "pullback_sup": self.pullback_sup,
            "proportionality_sup": self.proportionality_sup,
            "factor_mismatch": self.factor_mismatch,
            "factor_deviation": self.factor_deviation,
        }
        for k, v in sorted(self.diagnostics.items()):
            if k != "kinds":
                out[k] = v
        return out


def verify_isotopy(result: IsotopyResult, problem: MoserProblem, stride: int = 1) -> IsotopyReport:
    """Pull the t-family back along the flow and compare with t = 0."""
    model = problem.model
    seeds = result.seeds
    idx = list(range(0, result.times.size, stride))
    if idx[-1] != result.times.size - 1:
        idx.append(result.times.size - 1)
    checks = _forms_to_check(problem)
    base = {name: form.values(seeds, 0.0) for name, form, _, _ in checks}
    errors = {name: np.zeros(len(idx)) for name, *_ in checks}
    fitted = {name: np.ones((len(idx), seeds.shape[0])) for name, _, kind, _ in checks if kind == "proportional"}
    factor_samples = {key: np.zeros((result.times.size, seeds.shape[0])) for *_, key in checks if key}
    split, residual = 0.0, 0.0
    fol_err = 0.0
    fol0 = _defining_kernels(problem.structure, seeds, 0.0)

    for r in range(result.times.size):
        t = float(result.times[r])
        q = result.trajectories[r]
        _, diag = moser_field(problem, q, t, diagnostics=True)
        for key in factor_samples:
            factor_samples[key][r] = diag[key]
        split = max(split, max(v for k, v in diag.items() if k.startswith("split")))
        residual = max(residual, diag["residual"], diag.get("shortcut_gap", 0.0))

    for c, r in enumerate(idx):
        t = float(result.times[r])
        q = result.trajectories[r]
        T = frame_transport(model, seeds, q, result.frames[r], t)
        for name, form, kind, _ in checks:
            pb = pullback_values(form, q, T, t)
            a0 = base[name]
            if kind == "equal":
                errors[name][c] = float(np.max(np.abs(pb - a0), initial=0.0))
            else:
                f = np.einsum("mi,mi->m", a0, pb) / np.einsum("mi,mi->m", a0, a0)
                fitted[name][c] = f
                errors[name][c] = float(np.max(np.abs(pb - f[:, None] * a0), initial=0.0))
        fol_t = _defining_kernels(problem.structure, q, t)
        for name, K0 in fol0.items():
            Kq = fol_t[name]
            if K0.shape != Kq.shape:
                fol_err = float("inf")
                continue
            v = np.einsum("mij,mjk->mik", T, K0)
            proj = np.einsum("mij,mkj,mkl->mil", Kq, Kq, v)
            fol_err = max(fol_err, float(np.max(np.abs(v - proj), initial=0.0)))

    factors = {}
    mu_log = 0.0
    times = result.times
    for name, _, kind, key in checks:
        if kind != "proportional":
            continue
        integral = cumulative_simpson(factor_samples[key], x=times, axis=0, initial=0.0)
        factors[name] = {"fitted": fitted[name], "integrated": np.exp(integral[idx])}
        if stride == 1 and times.size >= 3:
            logf = np.log(np.abs(fitted[name]))
            deriv = np.gradient(logf, times, axis=0, edge_order=2)
            mu_log = max(mu_log, float(np.max(np.abs(deriv - factor_samples[key]))))

    diagnostics = {
        "kinds": {name: kind for name, _, kind, _ in checks},
        "field_residual": residual,
        "splitting_sup": split,
        "foliation_sup": fol_err,
        "min_det": result.min_det,
        "mu_log_derivative_error": mu_log,
    }
    return IsotopyReport(problem.variant, errors, factors, diagnostics)


def _defining_kernels(structure: GeometricStructure, points, t):
    out = {}
    for name, rho in sorted(structure.defining_forms().items()):
        bases = kernel_basis(rho, points, t)
        if len({b.shape for b in bases}) != 1:
            raise StructureError(f"kernel of the {name} defining form changes dimension along the flow")
        out[name] = np.stack(bases)
    return out


def step_halving_study(problem: MoserProblem, seeds, coarse: int = 10) -> dict:
    """Fixed-step errors at ``coarse`` and ``2*coarse`` steps and their ratio."""
    out = {}
    for steps in (coarse, 2 * coarse):
        res = integrate_isotopy(problem, seeds, steps, adaptive=False)
        rep = verify_isotopy(res, problem, stride=steps)
        out[steps] = max(rep.pullback_sup, rep.proportionality_sup, rep.factor_mismatch)
    out["ratio"] = out[coarse] / out[2 * coarse] if out[2 * coarse] > 0 else float("inf")
    return out


# necessity ------------------------------------------------------------------------------

def foliation_drift(structure: GeometricStructure, t_samples, points=None) -> float:
    """max over defining foliations of |P_t - P_0| for kernel projectors on a grid."""
    model = structure.model
    forms = list(structure.defining_forms().values())
    pts = sample_grid(model, forms, k=7) if points is None else points
    worst = 0.0
    for rho in forms:
        K0 = kernel_basis(rho, pts, t_samples[0])
        for t in t_samples[1:]:
            Kt = kernel_basis(rho, pts, t)
            for a, b in zip(K0, Kt):
                if a.shape != b.shape:
                    return float("inf")
                worst = max(worst, float(np.max(np.abs(a @ a.T - b @ b.T))))
    return worst


def closed_cycles(model):
    out = []
    for i, j in itertools.combinations(range(model.dim), 2):
        try:
            check_cycle(model, i, j)
        except ValueError:
            continue
        out.append((i + 1, j + 1))
    return out


@dataclass
class NecessityReport:
    verdict: str  # pass | fail | inapplicable
    drift: float
    targets: list
    period_variation: float
    reason: str = ""

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "drift": self.drift,
            "period_variation": self.period_variation,
            "reason": self.reason,
            "targets": self.targets,
        }


def necessity_check(structure: GeometricStructure, order: int = 4, t_samples=(0.0, 0.5, 1.0),
                    tol: float = RESIDUAL_TOL, drift_tol: float = DRIFT_TOL) -> NecessityReport:
    """Is every d/dt of a closed 2-form exact in the basic complex of its own kernel foliation?"""
    model = structure.model
    t_samples = tuple(float(t) for t in t_samples)
    drift = foliation_drift(structure, t_samples)
    roles = {"symplectic_pair": [("omega", "G"), ("eta", "F")],
             "cs_structure": [("eta", "F")], "contact_symplectic_pair": [("eta", "F")]}.get(structure.kind, [])
    variation = 0.0
    cycles = closed_cycles(model)
    for role, _ in roles:
        if cycles:
            per = de_rham_periods(structure.forms[role], cycles, t_samples)
            variation = max(variation, float(np.max(per.max(axis=0) - per.min(axis=0))))
    if drift > drift_tol:
        return NecessityReport("inapplicable", drift, [], variation,
                               f"characteristic foliations move with t (drift {drift:.3g})")
    targets = []
    verdict = "pass"
    reason = ""
    for role, fol_name in roles:
        dot = t_derivative(structure.forms[role])
        for t in t_samples:
            target = substitute_t(dot, t)
            if target.is_zero:
                targets.append({"form": role, "t": t, "residual": 0.0, "residual_by_order": {}, "witness": []})
                continue
            fol = structure.at_t(t).foliations()[fol_name]
            try:
                res = find_basic_primitive(target, fol, order, tol=tol, convergence=True)
            except UnsupportedFoliation:
                return NecessityReport("inapplicable", drift, targets, variation,
                                       f"foliation {fol_name} has no frame-span description")
            entry = {"form": role, "t": t, "residual": res.residual,
                     "residual_by_order": {str(k): v for k, v in sorted(res.residual_by_order.items())},
                     "witness": res.witness}
            targets.append(entry)
            if max(res.residual_by_order.values()) > tol and verdict == "pass":
                verdict = "fail"
                reason = f"d{role}/dt at t = {t:g} is not basic-exact (residual {res.residual:.3g})"
    return NecessityReport(verdict, drift, targets, variation, reason)
