"""Pointwise solvers for Reeb fields, Reeb distributions and leafwise Reeb fields.

Every system is a small dense linear solve in frame components. The square
"augmented" systems (used by the structure-level solvers) only involve
``numpy.linalg.solve`` and are complex-analytic in the sample point, which
lets :func:`complex_step_jacobian` differentiate their solutions to machine
precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifold import DifferentialForm, exterior_derivative, interior_product, wedge
from .rankclass import StructureError, kernel_basis, powers, rank_2form

SOLVE_TOL = 1e-10
COND_LIMIT = 1e12


class SingularSystem(StructureError):
    pass


@dataclass
class ReebSolution:
    variant: str
    points: np.ndarray
    fields: dict
    residuals: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.fields[name]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _points(points):
    return np.atleast_2d(np.asarray(points))


def _check_cond(mats, points, what):
    if np.iscomplexobj(mats):
        return
    cond = np.linalg.cond(mats)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
    if bad.any():
        i = int(np.argmax(bad))
        raise SingularSystem(f"{what}: singular system at {np.real(points[i]).tolist()} (cond {cond[i]:.3g})")


def _lstsq_rows(rows, rhs, points, what, tol):
    """Solve stacked per-point systems rows @ x = rhs by least squares."""
    out = np.empty((rows.shape[0], rows.shape[2]))
    resid = np.empty(rows.shape[0])
    for m in range(rows.shape[0]):
        sol, _, rank, _ = np.linalg.lstsq(rows[m], rhs, rcond=None)
        if rank < rows.shape[2]:
            raise SingularSystem(f"{what}: singular system at {points[m].tolist()}")
        out[m] = sol
        resid[m] = np.max(np.abs(rows[m] @ sol - rhs))
    worst = float(resid.max(initial=0.0))
    if worst > tol:
        i = int(np.argmax(resid))
        raise SingularSystem(f"{what}: inconsistent system at {points[i].tolist()} (residual {worst:.3g})")
    return out, worst


# contact-symplectic ------------------------------------------------------------

def reeb_cs_pair(alpha: DifferentialForm, eta: DifferentialForm, points, t=0.0, tol=SOLVE_TOL) -> ReebSolution:
    """R with alpha(R) = 1, i_R d alpha = 0, i_R eta = 0 (overdetermined, least squares)."""
    pts = _points(points)
    n = alpha.model.dim
    a = alpha.values(pts, t)
    da = exterior_derivative(alpha).matrix(pts, t)
    et = eta.matrix(pts, t)
    rows = np.concatenate([a[:, None, :], np.swapaxes(da, 1, 2), np.swapaxes(et, 1, 2)], axis=1)
    rhs = np.zeros(2 * n + 1)
    rhs[0] = 1.0
    R, worst = _lstsq_rows(rows, rhs, pts, "contact-symplectic pair Reeb field", tol)
    return ReebSolution("SingleField", pts, {"R": R}, {"R": worst})


def cs_system(alpha: DifferentialForm, two_form: DifferentialForm, points, t=0.0):
    """Square matrix of (Y, c) -> (i_Y two_form - c alpha, alpha(Y))."""
    a = alpha.values(points, t)
    om = two_form.matrix(points, t)
    m, n = a.shape
    mat = np.zeros((m, n + 1, n + 1), dtype=np.result_type(a, om))
    mat[:, :n, :n] = np.swapaxes(om, 1, 2)
    mat[:, :n, n] = -a
    mat[:, n, :n] = a
    return mat


def reeb_cs_structure(alpha: DifferentialForm, eta: DifferentialForm, points, t=0.0, tol=SOLVE_TOL, check=True) -> ReebSolution:
    """R with alpha(R) = 1 and i_R(d alpha + eta) = 0."""
    pts = _points(points)
    omega = exterior_derivative(alpha) + eta
    mat = cs_system(alpha, omega, pts, t)
    n = alpha.model.dim
    _check_cond(mat, pts, "kernel of d alpha + eta lies in Ker alpha")
    rhs = np.zeros((pts.shape[0], n + 1, 1), dtype=mat.dtype)
    rhs[:, n, 0] = 1.0
    sol = np.linalg.solve(mat, rhs)[..., 0]
    R = sol[:, :n]
    if not check:
        return ReebSolution("SingleField", pts, {"R": R})
    a = alpha.values(pts, t)
    om = omega.matrix(pts, t)
    res = max(
        float(np.max(np.abs(np.einsum("mi,mi->m", a, R) - 1.0))),
        float(np.max(np.abs(np.einsum("mi,mij->mj", R, om)))),
    )
    if res > tol:
        raise SingularSystem(f"contact-symplectic Reeb residual {res:.3g} exceeds {tol}")
    return ReebSolution("SingleField", pts, {"R": R}, {"R": res})


# contact pairs and contact-contact structures ------------------------------------

def reeb_pair_contact(alpha: DifferentialForm, beta: DifferentialForm, points, t=0.0, tol=SOLVE_TOL) -> ReebSolution:
    """A, B with alpha(A) = beta(B) = 1, alpha(B) = beta(A) = 0 and i d alpha = i d beta = 0."""
    pts = _points(points)
    n = alpha.model.dim
    a = alpha.values(pts, t)
    b = beta.values(pts, t)
    da = np.swapaxes(exterior_derivative(alpha).matrix(pts, t), 1, 2)
    db = np.swapaxes(exterior_derivative(beta).matrix(pts, t), 1, 2)
    rows = np.concatenate([a[:, None, :], b[:, None, :], da, db], axis=1)
    rhs_a = np.zeros(2 * n + 2)
    rhs_a[0] = 1.0
    rhs_b = np.zeros(2 * n + 2)
    rhs_b[1] = 1.0
    A, ra = _lstsq_rows(rows, rhs_a, pts, "contact pair Reeb field A", tol)
    B, rb = _lstsq_rows(rows, rhs_b, pts, "contact pair Reeb field B", tol)
    return ReebSolution("Pair", pts, {"A": A, "B": B}, {"A": ra, "B": rb})


def cc_system(alpha: DifferentialForm, beta: DifferentialForm, two_form: DifferentialForm, points, t=0.0):
    """Square matrix of (Y, a, b) -> (i_Y two_form - a alpha - b beta, alpha(Y), beta(Y))."""
    av = alpha.values(points, t)
    bv = beta.values(points, t)
    om = two_form.matrix(points, t)
    m, n = av.shape
    mat = np.zeros((m, n + 2, n + 2), dtype=np.result_type(av, bv, om))
    mat[:, :n, :n] = np.swapaxes(om, 1, 2)
    mat[:, :n, n] = -av
    mat[:, :n, n + 1] = -bv
    mat[:, n, :n] = av
    mat[:, n + 1, :n] = bv
    return mat


def reeb_distribution_dimension(alpha, beta, points, t=0.0, tol=1e-8) -> np.ndarray:
    """Dimension of {Y : i_Y(d alpha + d beta) vanishes on Ker alpha n Ker beta} per point."""
    pts = _points(points)
    omega = (exterior_derivative(alpha) + exterior_derivative(beta)).matrix(pts, t)
    av = alpha.values(pts, t)
    bv = beta.values(pts, t)
    dims = []
    for m in range(pts.shape[0]):
        ab = np.vstack([av[m], bv[m]])
        _, s, vh = np.linalg.svd(ab)
        K = vh[int(np.sum(s > tol)):].T  # basis of xi n sigma
        cond = K.T @ omega[m].T
        sv = np.linalg.svd(cond, compute_uv=False)
        dims.append(pts.shape[1] - int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 0.0))))
    return np.array(dims)


def reeb_distribution_cc(alpha: DifferentialForm, beta: DifferentialForm, points, t=0.0, tol=SOLVE_TOL, check=True) -> ReebSolution:
    """Reeb distribution of a contact-contact structure and its fields A, B."""
    pts = _points(points)
    n = alpha.model.dim
    omega = exterior_derivative(alpha) + exterior_derivative(beta)
    if check:
        dims = reeb_distribution_dimension(alpha, beta, pts, t)
        if np.any(dims != 2):
            i = int(np.argmax(dims != 2))
            raise SingularSystem(f"Reeb distribution has dimension {dims[i]} at {pts[i].tolist()}")
    mat = cc_system(alpha, beta, omega, pts, t)
    _check_cond(mat, pts, "Reeb distribution")
    rhs = np.zeros((pts.shape[0], n + 2, 2), dtype=mat.dtype)
    rhs[:, n, 0] = 1.0
    rhs[:, n + 1, 1] = 1.0
    sol = np.linalg.solve(mat, rhs)
    A, B = sol[:, :n, 0], sol[:, :n, 1]
    out = ReebSolution("Distribution", pts, {"A": A, "B": B, "basis": np.stack([A, B], axis=2)})
    if check:
        av, bv = alpha.values(pts, t), beta.values(pts, t)
        om = omega.matrix(pts, t)
        for name, Y, target in (("A", A, (1.0, 0.0)), ("B", B, (0.0, 1.0))):
            res = max(
                float(np.max(np.abs(np.einsum("mi,mi->m", av, Y) - target[0]))),
                float(np.max(np.abs(np.einsum("mi,mi->m", bv, Y) - target[1]))),
                _restricted_residual(np.einsum("mi,mij->mj", Y, om), av, bv),
            )
            out.residuals[name] = res
        if out.max_residual > tol:
            raise SingularSystem(f"Reeb distribution residual {out.max_residual:.3g} exceeds {tol}")
    return out


def _restricted_residual(oneforms, av, bv):
    """sup of |theta| restricted to Ker alpha n Ker beta, per point maximum."""
    worst = 0.0
    for th, a, b in zip(oneforms, av, bv):
        q, _ = np.linalg.qr(np.vstack([a, b]).T)
        proj = th - q @ (q.T @ th)
        worst = max(worst, float(np.max(np.abs(proj))))
    return worst


# leafwise Reeb fields -------------------------------------------------------------

def _wedge_map(one_form_of_vec, rho: DifferentialForm, n, pts, t):
    """(m, C, n) matrix of v -> (one_form_of_vec(v)) ^ rho, linear in v."""
    cols = []
    model = rho.model
    for i in range(n):
        cols.append(wedge(one_form_of_vec(model.X(i + 1)), rho).values(pts, t))
    return np.stack(cols, axis=2)


def leafwise_reeb(alpha: DifferentialForm, beta: DifferentialForm, h: int, k: int, points, t=0.0, tol=1e-9) -> ReebSolution:
    """R_alpha tangent to Ker(beta ^ d beta^k) and R_beta tangent to Ker(alpha ^ d alpha^h)."""
    pts = _points(points)
    n = alpha.model.dim
    da, db = exterior_derivative(alpha), exterior_derivative(beta)
    rho_a = wedge(alpha, powers(da, h)[-1])
    rho_b = wedge(beta, powers(db, k)[-1])
    fields, residuals = {}, {}
    for name, form, dform, rho in (("R_alpha", alpha, da, rho_b), ("R_beta", beta, db, rho_a)):
        K = kernel_basis(rho, pts, t)
        fv = form.values(pts, t)
        W = _wedge_map(lambda X: interior_product(X, dform), rho, n, pts, t)
        out = np.empty((pts.shape[0], n))
        worst = 0.0
        for m in range(pts.shape[0]):
            rows = np.vstack([fv[m] @ K[m], W[m] @ K[m]])
            rhs = np.zeros(rows.shape[0])
            rhs[0] = 1.0
            c, _, rank, _ = np.linalg.lstsq(rows, rhs, rcond=None)
            if rank < K[m].shape[1]:
                raise SingularSystem(f"leafwise Reeb field {name}: singular restricted system at {pts[m].tolist()}")
            out[m] = K[m] @ c
            worst = max(worst, float(np.max(np.abs(rows @ c - rhs))))
        if worst > tol:
            raise SingularSystem(f"leafwise Reeb field {name}: residual {worst:.3g}")
        fields[name] = out
        residuals[name] = worst
    return ReebSolution("Leafwise", pts, fields, residuals)


# derivatives of solved fields and the commutation proposition --------------------

def complex_step_jacobian(fn, points, h=1e-20):
    """Value and coordinate Jacobian of a complex-analytic point map.

    ``fn(points)`` must accept complex (m, n) points and return (m, q).
    Returns (value (m, q), jac (m, q, n)).
    """
    pts = _points(points).astype(float)
    m, n = pts.shape
    stacked = np.repeat(pts[None], n + 1, axis=0).astype(complex)
    for j in range(n):
        stacked[j + 1, :, j] += 1j * h
    out = fn(stacked.reshape(-1, n)).reshape(n + 1, m, -1)
    value = out[0].real
    jac = np.stack([out[j + 1].imag / h for j in range(n)], axis=2)
    return value, jac


def frame_bracket(model, A_fn, B_fn, points, t=0.0):
    """[A, B] in frame components for fields given as point -> frame-component maps."""
    pts = _points(points).astype(float)
    A, dA = complex_step_jacobian(A_fn, pts)
    B, dB = complex_step_jacobian(B_fn, pts)
    F = model.frame_matrix(pts, t)
    a_coord = np.einsum("mji,mi->mj", F, A)
    b_coord = np.einsum("mji,mi->mj", F, B)
    out = np.einsum("ml,mil->mi", a_coord, dB) - np.einsum("ml,mil->mi", b_coord, dA)
    n = model.dim
    for j in range(n):
        for k in range(n):
            for i, g in model.bracket_coefficients(j, k).items():
                out[:, i] += g * A[:, j] * B[:, k]
    return out


@dataclass
class CommutationReport:
    ranks: np.ndarray
    bracket_sup: np.ndarray
    expected_rank: int
    tol: float
    witness: list | None

    @property
    def constant_rank(self) -> bool:
        return bool(np.all(self.ranks == self.expected_rank))

    @property
    def commuting(self) -> bool:
        return bool(np.max(self.bracket_sup) <= self.tol)

    @property
    def agrees(self) -> bool:
        return self.constant_rank == self.commuting

    def to_dict(self):
        return {
            "rank_min": int(self.ranks.min()),
            "rank_max": int(self.ranks.max()),
            "expected_rank": self.expected_rank,
            "constant_rank": self.constant_rank,
            "bracket_sup": float(np.max(self.bracket_sup)),
            "commuting": self.commuting,
            "agrees": self.agrees,
            "witness": self.witness,
        }


def check_commutation_rank_prop(alpha, beta, points, t=0.0, tol=1e-9) -> CommutationReport:
    """Rank of d alpha + d beta versus the bracket [A, B] at each point."""
    pts = _points(points).astype(float)
    model = alpha.model
    omega = exterior_derivative(alpha) + exterior_derivative(beta)
    ranks = rank_2form(omega, pts, t)
    n = model.dim

    def solve(p, col):
        mat = cc_system(alpha, beta, omega, p, t)
        rhs = np.zeros((p.shape[0], n + 2), dtype=mat.dtype)
        rhs[:, n + col] = 1.0
        return np.linalg.solve(mat, rhs[..., None])[:, :n, 0]

    br = frame_bracket(model, lambda p: solve(p, 0), lambda p: solve(p, 1), pts, t)
    sup = np.max(np.abs(br), axis=1)
    witness = pts[int(np.argmax(sup))].tolist() if np.max(sup) > tol else None
    return CommutationReport(ranks, sup, n - 2, tol, witness)


@dataclass
class ProjectionReport:
    error: float
    min_det: float
    tol: float

    @property
    def ill_conditioned(self) -> bool:
        return self.min_det < 1e-6

    @property
    def holds(self) -> bool:
        return self.error <= self.tol and not self.ill_conditioned

    def to_dict(self):
        return {"error": self.error, "min_det": self.min_det, "tol": self.tol, "holds": self.holds}


def split_projection(v, K_keep, K_along):
    """Component of v in span(K_keep) for the splitting span(K_keep) + span(K_along)."""
    basis = np.hstack([K_keep, K_along])
    coef = np.linalg.solve(basis, v)
    return K_keep @ coef[: K_keep.shape[1]], abs(np.linalg.det(basis))


def check_leafwise_projection(alpha, beta, h, k, points, t=0.0, tol=1e-8) -> ProjectionReport:
    """R_alpha equals the projection of A to Ker(beta ^ d beta^k) along Ker(alpha ^ d alpha^h)."""
    pts = _points(points)
    dist = reeb_distribution_cc(alpha, beta, pts, t)
    leaf = leafwise_reeb(alpha, beta, h, k, pts, t)
    da, db = exterior_derivative(alpha), exterior_derivative(beta)
    rho_a = wedge(alpha, powers(da, h)[-1])
    rho_b = wedge(beta, powers(db, k)[-1])
    Ka = kernel_basis(rho_a, pts, t)
    Kb = kernel_basis(rho_b, pts, t)
    worst, min_det = 0.0, np.inf
    for m in range(pts.shape[0]):
        pa, det = split_projection(dist["A"][m], Kb[m], Ka[m])
        pb, _ = split_projection(dist["B"][m], Ka[m], Kb[m])
        min_det = min(min_det, det)
        worst = max(worst, float(np.max(np.abs(pa - leaf["R_alpha"][m]))), float(np.max(np.abs(pb - leaf["R_beta"][m]))))
    return ProjectionReport(worst, float(min_det), tol)
