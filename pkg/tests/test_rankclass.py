import numpy as np
import pytest

from moserpairs.gallery import base_documents, builtin_scenarios, mutation_documents
from moserpairs.manifold import exterior_derivative, wedge
from moserpairs.models import heisenberg_circle, torus
from moserpairs.rankclass import (
    DimensionError,
    FrameSpan,
    GeometricStructure,
    KernelOf,
    StructureError,
    characteristic_distribution,
    class_of_1form,
    class_report,
    frobenius_check,
    matrix_rank_2form,
    pointwise_rank_2form,
    rank_2form,
    validate_structure,
)
from moserpairs.scenario import scenario_from_dict


def test_rank_of_basic_two_forms():
    m = torus(4)
    assert pointwise_rank_2form(m.form(2, {(1, 2): 1}), np.zeros(4)) == 2
    assert pointwise_rank_2form(m.form(2, {(1, 2): 1, (3, 4): 1}), np.zeros(4)) == 4
    assert pointwise_rank_2form(m.form(2, {}), np.zeros(4)) == 0


def test_rank_matches_matrix_oracle():
    m = torus(4)
    eta = m.form(2, {(1, 2): "1 + 0.5*cos(th1)", (1, 3): 0.1})
    pts = m.random_points(np.random.default_rng(2), 20)
    assert np.all(rank_2form(eta, pts) == 2)
    np.testing.assert_array_equal(rank_2form(eta, pts), matrix_rank_2form(eta, pts))
    generic = m.form(2, {(1, 2): "cos(th1)", (3, 4): "sin(th2)", (1, 4): 0.2})
    np.testing.assert_array_equal(rank_2form(generic, pts), matrix_rank_2form(generic, pts))


def test_class_examples():
    t3 = torus(3)
    assert class_of_1form(t3.e(3), np.zeros(3)) == 1
    contact = t3.form(1, {1: "cos(th3)", 2: "sin(th3)"})
    pts = t3.random_points(np.random.default_rng(0), 10)
    assert all(class_of_1form(contact, p) == 3 for p in pts)
    nil = heisenberg_circle()
    assert class_of_1form(nil.e(3), np.zeros(4)) == 3
    zero = class_of_1form(t3.form(1, {}), np.zeros(3))
    assert zero == 0 and zero.degenerate


def test_even_class():
    # alpha = th-free closed-plus-exact: x e^2 style forms need a chart, so use d alpha of rank 2 with alpha ^ d alpha = 0
    m = torus(4)
    alpha = m.form(1, {1: "sin(th2)"})  # d alpha = -cos(th2) e^1^e^2, alpha ^ d alpha = 0
    assert class_of_1form(alpha, [0, 0, 0, 0]) == 2


def test_class_report_witness():
    m = torus(3)
    alpha = m.form(1, {3: "1", 1: "sin(th2)"})  # class varies where cos(th2) vanishes
    rep = class_report(alpha, m.grid(8))
    assert not rep.constant_class and rep.witness is not None
    steady = class_report(m.e(3), m.grid(4))
    assert steady.constant_class and steady.witness is None


def test_characteristic_distributions():
    m = torus(4)
    cd = characteristic_distribution(m.form(2, {(1, 2): 1}), m.grid(3))
    assert isinstance(cd.foliation, FrameSpan) and cd.foliation.indices == {3, 4}
    nil = heisenberg_circle()
    cd = characteristic_distribution(nil.form(2, {(2, 3): 1}), nil.grid(3))
    assert cd.foliation.indices == {1, 4}
    t3 = torus(3)
    cd = characteristic_distribution(t3.form(1, {1: "cos(th3)", 2: "sin(th3)"}), t3.grid(4))
    assert cd.dimension == 0


def test_characteristic_distribution_needs_constant_class():
    m = torus(3)
    with pytest.raises(StructureError):
        characteristic_distribution(m.form(1, {3: "1", 1: "sin(th2)"}), m.grid(8))


def test_frobenius_examples():
    t4 = torus(4)
    assert frobenius_check(FrameSpan([3, 4]), model=t4)[0]
    nil = heisenberg_circle()
    ok, worst = frobenius_check(FrameSpan([1, 2]), model=nil)
    assert not ok and worst == 1.0
    assert frobenius_check(KernelOf(t4.form(2, {(1, 2): 1})), t4.grid(3))[0]


def test_frobenius_kernel_of_contact_volume_is_integrable():
    m = torus(5)
    gamma = m.form(1, {3: "cos(th1)", 2: "sin(th1)"})
    rho = wedge(gamma, exterior_derivative(gamma))
    assert frobenius_check(KernelOf(rho), m.grid(5))[0]


def test_valid_examples():
    t3 = torus(3)
    s = GeometricStructure("contact_symplectic_pair", {"alpha": t3.e(3), "eta": t3.form(2, {(1, 2): 1})}, 0, 1)
    assert validate_structure(s, grid_k=5).valid
    t4 = torus(4)
    cp = GeometricStructure("contact_pair", {"alpha": t4.form(1, {1: "cos(th3)", 2: "sin(th3)"}), "beta": t4.e(4)}, 1, 0)
    assert validate_structure(cp, grid_k=9).valid
    t5 = torus(5)
    cs = GeometricStructure("cs_structure", {"alpha": t5.form(1, {3: "cos(th1)", 2: "sin(th1)"}),
                                             "eta": t5.form(2, {(4, 5): 1})}, 1, 1)
    assert validate_structure(cs, grid_k=9).valid


def test_symplectic_pair_rank_sum_and_nondegeneracy():
    t4 = torus(4)
    w = t4.form(2, {(1, 2): "1 + 0.5*cos(th1)"})
    e = t4.form(2, {(3, 4): 1})
    pts = t4.grid(6)
    assert np.all(rank_2form(w, pts) + rank_2form(e, pts) == 4)
    assert np.all(rank_2form(w + e, pts) == 4)


def test_dimension_errors():
    t5 = torus(5)
    with pytest.raises(DimensionError):
        GeometricStructure("contact_pair", {"alpha": t5.e(1), "beta": t5.e(2)}, 1, 0)
    t4 = torus(4)
    with pytest.raises(DimensionError):
        GeometricStructure("cs_structure", {"alpha": t4.e(1), "eta": t4.form(2, {(2, 3): 1})}, 1)


def test_builtin_structures_validate():
    for sc in builtin_scenarios():
        rep = validate_structure(sc.structure(), grid_k=9, t_samples=(0.0, 0.5, 1.0))
        assert rep.valid, (sc.name, rep.failed)
        assert rep.certification


@pytest.mark.parametrize("name", sorted(mutation_documents()))
def test_mutations_are_rejected_with_their_condition(name):
    doc = mutation_documents()[name]
    sc = scenario_from_dict(doc)
    rep = validate_structure(sc.structure(), grid_k=9)
    target = doc["tasks"][0]["expect_failed"][0]
    assert not rep.valid
    assert target in rep.failed
    failing = [c for c in rep.conditions if c.name == target and not c.passed]
    assert failing[0].witness is not None or failing[0].kind == "foliation"


def test_mutation_bases_validate():
    for doc in base_documents().values():
        assert validate_structure(scenario_from_dict(doc).structure(), grid_k=9).valid


def test_periodicity_is_checked():
    nil = heisenberg_circle()
    s = GeometricStructure("symplectic_pair", {"omega": nil.form(2, {(2, 3): "1 + 0.1*x"}),
                                               "eta": nil.form(2, {(1, 4): 1})}, 1, 1)
    rep = validate_structure(s, grid_k=5)
    assert "periodic(omega)" in rep.failed
