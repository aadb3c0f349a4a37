import numpy as np
import pytest

from moserpairs.gallery import builtin
from moserpairs.manifold import exterior_derivative, wedge
from moserpairs.models import torus
from moserpairs.rankclass import kernel_basis
from moserpairs.reeb import (
    SingularSystem,
    check_commutation_rank_prop,
    check_leafwise_projection,
    complex_step_jacobian,
    leafwise_reeb,
    reeb_cs_pair,
    reeb_cs_structure,
    reeb_distribution_cc,
    reeb_distribution_dimension,
    reeb_pair_contact,
)

RNG = np.random.default_rng(11)


def _rotating(model, a, b, c):
    """cos(x_c) e^a + sin(x_c) e^b."""
    name = model.coords[c - 1]
    return model.form(1, {a: f"cos({name})", b: f"sin({name})"})


def test_cs_pair_coordinate_reeb_field():
    m = torus(3)
    pts = m.random_points(RNG, 10)
    sol = reeb_cs_pair(m.e(3), m.form(2, {(1, 2): 1}), pts)
    np.testing.assert_allclose(sol["R"], np.tile([0, 0, 1], (10, 1)), atol=1e-14)
    t5 = torus(5)
    sol = reeb_cs_pair(t5.e(5), t5.form(2, {(1, 2): 1, (3, 4): 1}), t5.random_points(RNG, 5))
    np.testing.assert_allclose(sol["R"], np.tile([0, 0, 0, 0, 1], (5, 1)), atol=1e-14)


def test_cs_structure_matches_dense_kernel_oracle():
    sc = builtin("t5-cs-structure")
    s = sc.structure()
    pts = sc.model.random_points(RNG, 50)
    sol = reeb_cs_structure(s.alpha, s.eta, pts, t=0.3)
    assert sol.max_residual <= 1e-10
    omega = (exterior_derivative(s.alpha) + s.eta).matrix(pts, 0.3)
    a = s.alpha.values(pts, 0.3)
    for m in range(len(pts)):
        _, sv, vt = np.linalg.svd(omega[m])
        k = vt[-1]
        np.testing.assert_allclose(sol["R"][m], k / (a[m] @ k), atol=1e-10)


def test_pair_and_structure_solvers_agree():
    m = torus(3)
    pts = m.random_points(RNG, 10)
    alpha, eta = m.e(3), m.form(2, {(1, 2): 1})
    a = reeb_cs_pair(alpha, eta, pts)
    b = reeb_cs_structure(alpha, eta, pts)
    np.testing.assert_allclose(a["R"], b["R"], atol=1e-10)
    # the Reeb field is tangent to Ker eta
    assert np.max(np.abs(np.einsum("mi,mij->mj", a["R"], eta.matrix(pts)))) <= 1e-10


def test_scaling_alpha_rescales_reeb_field():
    sc = builtin("t5-cs-structure")
    s = sc.structure()
    pts = sc.model.random_points(RNG, 10)
    R2 = reeb_cs_structure(2 * s.alpha, s.eta, pts)["R"]
    assert np.max(np.abs(np.einsum("mi,mi->m", (2 * s.alpha).values(pts), R2) - 1)) <= 1e-12


def test_contact_pair_closed_form():
    m = torus(4)
    alpha, beta = _rotating(m, 1, 2, 3), m.e(4)
    pts = m.random_points(RNG, 20)
    sol = reeb_pair_contact(alpha, beta, pts)
    th3 = pts[:, 2]
    np.testing.assert_allclose(sol["A"], np.stack([np.cos(th3), np.sin(th3), 0 * th3, 0 * th3], 1), atol=1e-12)
    np.testing.assert_allclose(sol["B"], np.tile([0, 0, 0, 1.0], (20, 1)), atol=1e-12)
    dist = reeb_distribution_cc(alpha, beta, pts)
    np.testing.assert_allclose(dist["A"], sol["A"], atol=1e-9)
    np.testing.assert_allclose(dist["B"], sol["B"], atol=1e-9)


def test_product_factor_reeb_fields():
    m = torus(6)
    alpha, beta = _rotating(m, 1, 2, 3), _rotating(m, 4, 5, 6)
    pts = m.random_points(RNG, 15)
    for sol in (reeb_pair_contact(alpha, beta, pts), reeb_distribution_cc(alpha, beta, pts)):
        c3, s3, c6, s6 = np.cos(pts[:, 2]), np.sin(pts[:, 2]), np.cos(pts[:, 5]), np.sin(pts[:, 5])
        z = 0 * c3
        np.testing.assert_allclose(sol["A"], np.stack([c3, s3, z, z, z, z], 1), atol=1e-10)
        np.testing.assert_allclose(sol["B"], np.stack([z, z, z, c6, s6, z], 1), atol=1e-10)
    leaf = leafwise_reeb(alpha, beta, 1, 1, pts)
    np.testing.assert_allclose(leaf["R_alpha"], reeb_pair_contact(alpha, beta, pts)["A"], atol=1e-9)


def test_invalid_pair_is_singular():
    m = torus(4)
    with pytest.raises(SingularSystem):
        reeb_pair_contact(m.e(1), m.e(4), m.random_points(RNG, 3))
    t3 = torus(3)
    # d alpha + eta = e^1^e^2 has kernel X_3 inside Ker alpha
    with pytest.raises(SingularSystem):
        reeb_cs_structure(t3.e(1), t3.form(2, {(1, 2): 1}), np.zeros((1, 3)))


def test_distribution_dimension_jump_detected():
    # on Ker alpha n Ker beta the form d alpha + d beta restricts to 1 + 2 cos(th1) sin(th3)
    m = torus(4)
    alpha = _rotating(m, 1, 2, 3)
    beta = m.form(1, {4: "1", 3: "2*sin(th1)"})
    pts = np.array([[0.0, 0.4, 7 * np.pi / 6, 1.0], [0.5, 0.4, 0.3, 1.0]])
    dims = reeb_distribution_dimension(alpha, beta, pts)
    assert dims[0] != 2 and dims[1] == 2
    with pytest.raises(SingularSystem):
        reeb_distribution_cc(alpha, beta, pts)


def test_commutation_product_and_perturbed():
    sc = builtin("t6-cc-structure")
    s = sc.structure()
    pts = sc.model.random_points(RNG, 20)
    rep = check_commutation_rank_prop(s.alpha, s.beta, pts, t=0.5)
    assert rep.constant_rank and rep.commuting and rep.agrees
    sc = builtin("t4-cc-perturbed")
    s = sc.structure()
    rep = check_commutation_rank_prop(s.alpha, s.beta, sc.model.grid(5))
    assert not rep.constant_rank and not rep.commuting and rep.agrees
    assert rep.witness is not None
    pair = builtin("t4-contact-pair").structure()
    rep = check_commutation_rank_prop(pair.alpha, pair.beta, sc.model.grid(4))
    assert rep.commuting and rep.agrees


def test_bracket_uses_exact_derivatives():
    # complex step on sin gives the derivative to rounding
    pts = np.array([[0.3, 1.0], [1.1, -0.4]])
    val, jac = complex_step_jacobian(lambda p: np.stack([np.sin(p[:, 0]) * p[:, 1]], 1), pts)
    np.testing.assert_allclose(jac[:, 0, 0], np.cos(pts[:, 0]) * pts[:, 1], rtol=1e-15)
    np.testing.assert_allclose(jac[:, 0, 1], np.sin(pts[:, 0]), rtol=1e-15)


@pytest.mark.parametrize("name, t", [("t4-contact-pair", 0.5), ("t6-cc-structure", 0.5), ("t4-cc-perturbed", 0.0)])
def test_leafwise_projection(name, t):
    sc = builtin(name)
    s = sc.structure()
    pts = sc.model.random_points(RNG, 25)
    rep = check_leafwise_projection(s.alpha, s.beta, s.h, s.k, pts, t)
    assert rep.holds, rep.to_dict()


def test_leafwise_projection_independent_oracle():
    sc = builtin("t4-cc-perturbed")
    s = sc.structure()
    pts = sc.model.random_points(RNG, 10)
    dist = reeb_distribution_cc(s.alpha, s.beta, pts)
    leaf = leafwise_reeb(s.alpha, s.beta, s.h, s.k, pts)
    rho_a = wedge(s.alpha, exterior_derivative(s.alpha))
    Ka = kernel_basis(rho_a, pts)
    Kb = kernel_basis(s.beta, pts)  # k = 0: the G form is beta itself
    for m in range(len(pts)):
        # least squares: A = u + w with u in Kb, w in Ka
        coef, *_ = np.linalg.lstsq(np.hstack([Kb[m], Ka[m]]), dist["A"][m], rcond=None)
        u = Kb[m] @ coef[: Kb[m].shape[1]]
        np.testing.assert_allclose(u, leaf["R_alpha"][m], atol=1e-8)


def test_ideal_property_of_characteristic_kernel():
    for name in ("t4-contact-pair", "t5-cs-structure", "t6-cc-structure"):
        sc = builtin(name)
        alpha = sc.structure().alpha
        da = exterior_derivative(alpha)
        rho = wedge(alpha, da)
        pts = sc.model.random_points(RNG, 10)
        K = kernel_basis(rho, pts, 0.2)
        a, D = alpha.values(pts, 0.2), da.matrix(pts, 0.2)
        for m in range(len(pts)):
            X = RNG.normal(size=sc.model.dim)
            X -= a[m] * (a[m] @ X) / (a[m] @ a[m])
            assert np.max(np.abs(X @ D[m] @ K[m]), initial=0.0) <= 1e-9


def test_solutions_are_unique():
    sc = builtin("t6-cc-structure")
    s = sc.structure()
    pts = sc.model.random_points(RNG, 10)
    one = reeb_distribution_cc(s.alpha, s.beta, pts, 0.4)
    two = reeb_distribution_cc(s.alpha, s.beta, pts[::-1], 0.4)
    np.testing.assert_allclose(one["A"], two["A"][::-1], atol=1e-12)
