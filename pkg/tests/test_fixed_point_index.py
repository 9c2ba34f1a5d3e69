from fractions import Fraction

import numpy as np
import pytest

from eqfuller.dynamics import build_poincare_system
from eqfuller.errors import DegenerateFixedPoint, NonIntegralSolution
from eqfuller.fixed_point_index import (DiscGeometry, FixedPoint, equivariant_index,
                                        equivariant_index_of_points, index_from_counts,
                                        local_index_on_stratum)
from eqfuller.group_theory import (antipodal_action, apply_marks, class_leq,
                                   reflection_action, trivial_action, trivial_group)
from eqfuller.systems import hopf, hopf_z2
from eqfuller.tomdieck import TomDieckVector


def test_local_index_examples():
    one = np.eye(1)
    assert local_index_on_stratum([[np.exp(-4 * np.pi)]], one) == 1
    assert local_index_on_stratum(np.eye(3), np.zeros((3, 0))) == 1
    assert local_index_on_stratum([[3.0]], one) == -1
    with pytest.raises(DegenerateFixedPoint):
        local_index_on_stratum([[1.0 + 1e-10]], one)


def test_hopf_z2_two_copy_disc():
    s = hopf_z2()
    ps = build_poincare_system(s, [1.0, 0.0])
    idx = equivariant_index(ps, s, None, 1)
    lat = s.action.group.lattice
    assert idx == TomDieckVector.basis(lat, lat.by_name("e"))
    _, report = equivariant_index_of_points(
        DiscGeometry.from_poincare(ps), [FixedPoint(np.zeros(1), np.array([[0.01]]))])
    assert report.counts == {lat.by_name("Z2"): 0, lat.by_name("e"): 2}


def test_reflection_disc_gives_full_class():
    geom = DiscGeometry.from_action(reflection_action(2))
    lat = geom.lattice
    idx, report = equivariant_index_of_points(
        geom, [FixedPoint(np.zeros(2), np.diag([0.5, 0.3]))])
    assert idx == TomDieckVector.basis(lat, lat.by_name("Z2"))
    assert report.counts == {lat.by_name("Z2"): 1, lat.by_name("e"): 1}
    assert report.coefficients.get(lat.by_name("e"), 0) == 0


def test_trivial_group_reduces_to_classical_index():
    geom = DiscGeometry.from_action(trivial_action(trivial_group(), 1))
    lat = geom.lattice
    idx, _ = equivariant_index_of_points(geom, [FixedPoint(np.zeros(1), np.array([[0.5]]))])
    assert idx == TomDieckVector.basis(lat, 0)
    geom2 = DiscGeometry.from_action(trivial_action(trivial_group(), 2))
    pts = [FixedPoint(np.array([0.1, 0.0]), np.diag([0.5, 0.2])),
           FixedPoint(np.array([-0.1, 0.0]), np.diag([2.0, 0.2])),
           FixedPoint(np.array([0.0, 0.2]), np.diag([3.0, 0.2]))]
    idx, _ = equivariant_index_of_points(geom2, pts)
    classical = sum(int(np.sign(np.linalg.det(np.eye(2) - p.jac))) for p in pts)
    assert idx == TomDieckVector.basis(geom2.lattice, 0, classical)


def test_roundtrip_and_solution_property_on_map_level():
    geom = DiscGeometry.from_action(antipodal_action(2))
    lat = geom.lattice
    pts = [FixedPoint(np.zeros(2), np.diag([0.5, 2.0])),
           FixedPoint(np.array([0.2, 0.0]), np.diag([0.3, 0.1])),
           FixedPoint(np.array([-0.2, 0.0]), np.diag([0.3, 0.1]))]
    idx, report = equivariant_index_of_points(geom, pts)
    n = [idx.project(c) for c in range(len(lat))]
    assert apply_marks(lat, n) == [Fraction(report.counts[c]) for c in range(len(lat))]
    isos = [lat.class_of(geom.point_isotropy(p.u)) for p in pts]
    for cid in idx.support():
        assert any(class_leq(lat, cid, i) for i in isos)


def test_non_integral_counts_rejected():
    lat = antipodal_action(1).group.lattice
    with pytest.raises(NonIntegralSolution):
        index_from_counts(lat, {lat.by_name("Z2"): 1, lat.by_name("e"): 0})


def test_copy_relabelling_does_not_change_index():
    s = hopf_z2()
    a = equivariant_index(build_poincare_system(s, [1.0, 0.0]), s, None, 1)
    b = equivariant_index(build_poincare_system(s, [-1.0, 0.0]), s, None, 1)
    c = equivariant_index(build_poincare_system(s, [0.0, 1.0]), s, None, 1)
    assert a == b == c


def test_second_iterate_and_unstable_point():
    s = hopf()
    ps = build_poincare_system(s, [1.0, 0.0])
    assert equivariant_index(ps, s, None, 2) == TomDieckVector.basis(s.action.group.lattice, 0)
    geom = DiscGeometry.from_action(trivial_action(trivial_group(), 1))
    idx, _ = equivariant_index_of_points(geom, [FixedPoint(np.zeros(1), np.array([[4.0]]))])
    assert idx.to_json() == {"(e)": "-1/1"}
