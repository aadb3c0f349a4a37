import itertools
import math

import numpy as np
import pytest

from moserpairs.cohomology import (
    Mode,
    SpectralBasis,
    UnsupportedFoliation,
    basic_h2_dimension,
    de_rham_periods,
    find_basic_primitive,
    free_coords,
    half_frequencies,
    is_basic,
    is_in_ideal,
    lattice_fixed,
    lemma_incl_test,
    mode_function,
    random_closed_basic,
    reeb_class,
    trig_modes,
)
from moserpairs.manifold import exterior_derivative, wedge
from moserpairs.models import heisenberg_circle, torus
from moserpairs.rankclass import FrameSpan, KernelOf, StructureError

TWO_PI = 2 * math.pi


def test_ideal_membership():
    m = torus(4)
    fol = FrameSpan([3, 4])
    assert is_in_ideal(m.form(2, {(1, 2): 1}), fol)[0]
    assert is_in_ideal(m.form(2, {(1, 3): 1}), fol)[0]
    ok, res = is_in_ideal(m.form(2, {(3, 4): 1}), fol)
    assert not ok and res == pytest.approx(1.0)


def test_basic_forms():
    m = torus(4)
    fol = FrameSpan([3, 4])
    assert is_basic(m.form(2, {(1, 2): "1 + 0.5*cos(th1)"}), fol)
    assert not is_basic(m.form(2, {(1, 2): "cos(th3)"}), fol)
    nil = heisenberg_circle()
    assert is_basic(nil.form(2, {(2, 3): 1}), FrameSpan([1, 4]))
    with pytest.raises(UnsupportedFoliation):
        is_basic(m.form(2, {(1, 2): 1}), KernelOf(m.form(2, {(1, 2): 1})))


def test_reeb_class_examples():
    t3 = torus(3)
    assert reeb_class(t3.e(3)).vanishes
    with pytest.raises(StructureError):
        reeb_class(heisenberg_circle().e(3))
    t5 = torus(5)
    gamma = t5.form(1, {3: "cos(th1)", 2: "sin(th1)"})
    assert reeb_class(wedge(gamma, exterior_derivative(gamma))).vanishes


def test_primitive_found_and_sound():
    m = torus(4)
    fol = FrameSpan([3, 4])
    target = m.form(2, {(1, 2): "cos(th1)"})
    res = find_basic_primitive(target, fol)
    assert res.found and res.residual <= 1e-12
    assert (exterior_derivative(res.primitive) - target).sup_norm(m.grid(9)) <= 1e-10
    assert is_basic(res.primitive, fol)


def test_constant_mode_has_no_primitive():
    m = torus(4)
    res = find_basic_primitive(m.form(2, {(1, 2): 1}), FrameSpan([3, 4]))
    assert not res.found and res.residual == pytest.approx(1.0)
    assert res.witness and "1" in str(res.witness[0])


def test_twisted_fiber_residual_stays_large():
    nil = heisenberg_circle()
    target = nil.form(2, {(2, 3): "cos(y)"})
    res = find_basic_primitive(target, FrameSpan([1, 4]), order=2, convergence=True)
    assert not res.found
    assert all(r >= 0.5 for r in res.residual_by_order.values())


def test_residual_is_monotone_in_order():
    nil = heisenberg_circle()
    target = nil.form(2, {(2, 3): "cos(y) + 0.3*sin(2*y)"})
    rs = [find_basic_primitive(target, FrameSpan([1, 4]), order=N).residual for N in (1, 2, 3)]
    assert all(b <= a + 1e-12 for a, b in zip(rs, rs[1:]))


def test_periods_on_flat_torus():
    m = torus(4)
    full = TWO_PI ** 2
    assert de_rham_periods(m.form(2, {(1, 2): 1}), [(1, 2)])[0, 0] == pytest.approx(full)
    assert abs(de_rham_periods(m.form(2, {(1, 2): "cos(th1)"}), [(1, 2)])[0, 0]) <= 1e-12
    p = de_rham_periods(m.form(2, {(1, 2): "1 + t*cos(th1)"}), [(1, 2)], t_samples=(0.0, 0.5, 1.0))
    np.testing.assert_allclose(p[:, 0], full, rtol=1e-12)


def test_periods_on_heisenberg_fiber():
    nil = heisenberg_circle()
    omega = nil.form(2, {(2, 3): "1 + 0.5*t*cos(y)"})
    p = de_rham_periods(omega, [(2, 3)], t_samples=(0.0, 1.0))
    np.testing.assert_allclose(p[:, 0], 8 * math.pi ** 3, rtol=1e-12)
    with pytest.raises(ValueError):
        de_rham_periods(omega, [(1, 2)])


def test_inclusion_holds_on_random_targets():
    m = torus(4)
    fol = FrameSpan([3, 4])
    basis = SpectralBasis(m, fol, 2)
    rng = np.random.default_rng(5)
    targets = [(f"case{i}", random_closed_basic(basis, rng, exact=bool(i % 2))) for i in range(20)]
    rep = lemma_incl_test(targets, fol, order=2)
    assert rep.holds, rep.artifacts


def test_basic_h2_dimensions():
    t4 = torus(4)
    assert [basic_h2_dimension(t4, FrameSpan([3, 4]), N) for N in (1, 2, 3)] == [1, 1, 1]
    nil = heisenberg_circle()
    dims = [basic_h2_dimension(nil, FrameSpan([1, 4]), N) for N in (2, 4)]
    assert dims[1] > dims[0] > 1


def _orbit_is_trivial(freq, steps=3):
    """Apply the fiber monodromy on (m_y, m_z) frequencies; a well-defined mode is a fixed point."""
    cur = freq
    for _ in range(steps):
        cur = (cur[0] + cur[1], cur[1])
        if cur != freq:
            return False
    return True


@pytest.mark.parametrize("order", [1, 2, 4, 6])
def test_mode_bookkeeping_matches_orbit_oracle(order):
    nil = heisenberg_circle()
    coords = free_coords(nil, FrameSpan([1, 4]))
    assert [nil.coords[j] for j in coords] == ["y", "z"]
    for freq in itertools.product(range(-order, order + 1), repeat=2):
        assert lattice_fixed(nil, coords, freq) == _orbit_is_trivial(freq)
    kept = {md.freq for md in trig_modes(nil, coords, order)}
    expected = {f for f in half_frequencies(2, order) if _orbit_is_trivial(f)}
    assert kept == expected


def test_kept_modes_are_lattice_invariant_functions():
    nil = heisenberg_circle()
    coords = free_coords(nil, FrameSpan([1, 4]))
    pts = nil.random_points(np.random.default_rng(4), 8)
    shifted = pts.copy()
    shifted[:, 0] += TWO_PI
    shifted[:, 2] += TWO_PI * pts[:, 1]
    names = nil.variables
    for freq in half_frequencies(2, 3):
        for kind in ("cos", "sin"):
            f = mode_function(nil, coords, Mode(freq, kind)).compile(names)
            same = np.allclose(f(*shifted.T, 0.0), f(*pts.T, 0.0), atol=1e-9)
            if lattice_fixed(nil, coords, freq):
                assert same
            elif kind == "cos":
                assert not same
