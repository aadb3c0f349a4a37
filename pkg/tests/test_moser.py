import numpy as np
import pytest

from moserpairs.gallery import builtin
from moserpairs.models import torus
from moserpairs.moser import (
    IntegrationError,
    MoserProblem,
    integrate_flow,
    integrate_isotopy,
    moser_field,
    necessity_check,
    quasi_random_seeds,
    step_halving_study,
    verify_isotopy,
)
from moserpairs.rankclass import GeometricStructure

RNG = np.random.default_rng(21)


def _t4_problem():
    m = torus(4)
    s = GeometricStructure("symplectic_pair", {"omega": m.form(2, {(1, 2): "1 + t*0.5*cos(th1)"}),
                                                "eta": m.form(2, {(3, 4): 1})}, 1, 1)
    prims = {"alpha": m.form(1, {2: "0.5*sin(th1)"}), "beta": m.form(1, {})}
    return MoserProblem(s, prims)


def test_symplectic_pair_field_closed_form():
    p = _t4_problem()
    pts = p.model.random_points(RNG, 20)
    for t in (0.0, 0.4, 1.0):
        X = moser_field(p, pts, t)
        th1 = pts[:, 0]
        expected = np.zeros_like(pts)
        expected[:, 0] = -0.5 * np.sin(th1) / (1 + 0.5 * t * np.cos(th1))
        np.testing.assert_allclose(X, expected, atol=1e-13)


def test_suspension_field_splits():
    sc = builtin("suspension-hamiltonian")
    p = MoserProblem(sc.structure(), {"beta": sc.forms["beta_t"]})
    pts = sc.model.random_points(RNG, 30)
    _, diag = moser_field(p, pts, 0.5, diagnostics=True)
    assert diag["residual"] <= 1e-10
    assert diag["split_omega"] <= 1e-8 and diag["split_eta"] <= 1e-8


def test_rotation_flow_matches_closed_form():
    def rotate(p, t):
        return np.stack([-p[:, 1], p[:, 0]], axis=1)

    seeds = RNG.normal(size=(6, 2))
    res = integrate_flow(rotate, seeds, steps=100)
    c, s = np.cos(1.0), np.sin(1.0)
    R = np.array([[c, -s], [s, c]])
    np.testing.assert_allclose(res.trajectories[-1], seeds @ R.T, atol=1e-9)
    np.testing.assert_allclose(res.frames[-1], np.broadcast_to(R, (6, 2, 2)), atol=1e-9)


def test_integration_error_at_step_floor():
    def wild(p, t):
        return 50.0 * np.sin(50.0 * p)

    with pytest.raises(IntegrationError):
        integrate_flow(wild, np.array([[0.1, 0.2]]), steps=2, tol=1e-12, min_step=0.1)


@pytest.mark.parametrize("name", ["t5-cs-structure", "t3-cs-pair"])
def test_cs_field_diagnostics(name):
    sc = builtin(name)
    s = sc.structure()
    prims = {"beta": sc.forms["beta_t"]} if "beta_t" in sc.forms else {}
    p = MoserProblem(s, prims)
    pts = sc.model.random_points(RNG, 20)
    X, diag = moser_field(p, pts, 0.5, diagnostics=True)
    assert diag["shortcut_gap"] <= 1e-10
    assert diag["consistency"] <= 1e-9
    assert diag["residual"] <= 1e-10


@pytest.mark.parametrize("name", ["t6-cc-structure", "t4-contact-pair"])
def test_cc_field_diagnostics(name):
    sc = builtin(name)
    p = MoserProblem(sc.structure())
    pts = sc.model.random_points(RNG, 20)
    _, diag = moser_field(p, pts, 0.3, diagnostics=True)
    assert diag["shortcut_gap"] <= 1e-10 and diag["consistency"] <= 1e-9
    assert diag["split_alpha"] <= 1e-9 and diag["split_beta"] <= 1e-9


def test_product_flow_factorizes():
    sc = builtin("t6-cc-structure")
    p = MoserProblem(sc.structure())
    seeds = quasi_random_seeds(sc.model, 5)
    res = integrate_isotopy(p, seeds, steps=40)
    rep = verify_isotopy(res, p, stride=10)
    assert rep.proportionality_sup <= 1e-6
    assert rep.factor_mismatch <= 1e-6


def test_spectral_and_given_primitives_both_verify():
    sc = builtin("t4-exact")
    given = MoserProblem(sc.structure(), {"alpha": sc.forms["alpha_t"], "beta": sc.forms["beta_t"]})
    spectral = MoserProblem(sc.structure())
    assert all(v["ok"] for v in spectral.check_primitives().values())
    seeds = quasi_random_seeds(sc.model, 5)
    for p in (given, spectral):
        rep = verify_isotopy(integrate_isotopy(p, seeds, steps=50), p, stride=10)
        assert rep.pullback_sup <= 1e-6


def test_step_halving_is_fourth_order():
    sc = builtin("t4-exact")
    p = MoserProblem(sc.structure(), {"alpha": sc.forms["alpha_t"], "beta": sc.forms["beta_t"]})
    study = step_halving_study(p, quasi_random_seeds(sc.model, 5), coarse=10)
    assert study["ratio"] >= 12


@pytest.mark.parametrize("name, verdict", [("t4-exact", "pass"), ("ghys-nil", "fail"), ("fol-drift", "inapplicable")])
def test_necessity_outcomes(name, verdict):
    rep = necessity_check(builtin(name).structure(), order=2)
    assert rep.verdict == verdict, rep.reason


def test_periods_constant_on_twisted_example():
    rep = necessity_check(builtin("ghys-nil").structure(), order=2)
    assert rep.period_variation <= 1e-9


def test_seeds_are_deterministic():
    m = torus(4)
    a, b = quasi_random_seeds(m, 10), quasi_random_seeds(m, 10)
    np.testing.assert_array_equal(a, b)
    assert np.all((a > 0) & (a < 2 * np.pi))
