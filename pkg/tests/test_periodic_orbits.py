import csv
import io
from fractions import Fraction

import numpy as np
import pytest

from eqfuller.dynamics import flow
from eqfuller.errors import AmbiguousPeriod, WindowRejected
from eqfuller.fuller_index import fuller_from_orbits
from eqfuller.periodic_orbits import (classify_multiplicity, multiplicity_from_periods,
                                      orbits_to_csv, orbits_to_json, shoot_periodic,
                                      sweep_seeds)
from eqfuller.regions import EssentialWindow, Region
from eqfuller.systems import builtin_system, hopf, hopf_param, hopf_z2, ring_zn
from eqfuller.tomdieck import TomDieckVector

from oracles import ring_rotating_wave_states, ring_wave_stratum_signs

TWO_PI = 2 * np.pi
W48 = EssentialWindow(Region.ball(3.0), 4.0, 8.0)


def test_shoot_hopf():
    o = shoot_periodic(hopf(), None, [1.3, 0.0], 6.0, W48)
    assert abs(o.minimal_period - TWO_PI) < 1e-6
    assert o.multiplicity == 1
    assert o.residual < 1e-8


def test_shoot_hopf_param_at_one():
    o = shoot_periodic(hopf_param(), [1.0], [1.3, 0.0], 6.0, W48)
    assert abs(o.period - TWO_PI) < 1e-6
    assert W48.contains_period(o.period)


def test_shoot_outside_window_rejected():
    with pytest.raises(WindowRejected):
        shoot_periodic(hopf(), None, [1.3, 0.0], 6.0, EssentialWindow(Region.ball(3.0), 1, 2))


def test_doubled_window_gives_multiplicity_two():
    window = EssentialWindow(Region.ball(3.0), 10.0, 14.0)
    o = shoot_periodic(hopf(), None, [1.0, 0.0], 12.5, window)
    assert o.multiplicity == 2
    assert abs(o.minimal_period - TWO_PI) < 1e-6
    assert abs(o.period - 4 * np.pi) < 1e-6


def test_classify_multiplicity():
    o = shoot_periodic(hopf(), None, [1.0, 0.0], 6.0, W48)
    p, k = classify_multiplicity(o.psys, hopf(), None, o.anchor, TWO_PI)
    assert abs(p - TWO_PI) < 1e-6 and k == 1
    assert multiplicity_from_periods(2 * TWO_PI, TWO_PI) == 2
    with pytest.raises(AmbiguousPeriod):
        multiplicity_from_periods(1.5 * TWO_PI, TWO_PI)


def test_sweep_hopf_z2_single_orbit():
    orbits = sweep_seeds(hopf_z2(), None, W48)
    assert len(orbits) == 1
    o = orbits[0]
    assert o.hops == 2
    assert not o.warnings


def test_center_is_rejected():
    center = builtin_system("center")
    assert sweep_seeds(center, None, EssentialWindow(Region.ball(3.0), 4.0, 6.0)) == []
    # the centre's orbits all have period 2pi but none is isolated
    assert sweep_seeds(center, None, W48) == []


def test_reintegration_and_isotropy():
    for name in ("hopf_z2", "axis_z2", "vdp"):
        s = builtin_system(name)
        window = W48 if name != "vdp" else EssentialWindow(Region.ball(4.0), 4.0, 10.0)
        for o in sweep_seeds(s, None, window):
            x = flow(s, o.anchor, o.period).x_final
            assert np.linalg.norm(x - o.anchor) < 1e-7, name
            assert not any("isotropy" in w for w in o.warnings), name


def test_group_covariance_of_seeds():
    s = hopf_z2()
    y0 = np.array([1.4, 0.3])
    a = sweep_seeds(s, None, W48, {"points": [y0], "period_seeds": [6.0]})
    b = sweep_seeds(s, None, W48, {"points": [-y0], "period_seeds": [6.0]})
    assert len(a) == len(b) == 1
    assert np.allclose(a[0].anchor, b[0].anchor, atol=1e-8)


def test_thread_count_does_not_change_result():
    s = builtin_system("two_cycles")
    window = EssentialWindow(Region.ball(2.5), 4.0, 8.0)
    one = sweep_seeds(s, None, window, threads=1)
    two = sweep_seeds(s, None, window, threads=2)
    assert orbits_to_json(one) == orbits_to_json(two)


def test_ring_against_rotating_wave_oracle():
    s = ring_zn(3)
    lattice = s.action.group.lattice
    states = ring_rotating_wave_states()
    spec = {"points": [x for _, x in states], "period_seeds": sorted({T for T, _ in states})}
    orbits = sweep_seeds(s, None, W48, spec)
    assert len(orbits) == len(states)
    expected = TomDieckVector.zero(lattice)
    full = lattice.by_name("Z3")
    e = lattice.by_name("e")
    for T, x in states:
        sign_e, sign_sync = ring_wave_stratum_signs(x, T)
        if sign_sync is None:
            expected = expected + TomDieckVector.basis(lattice, e, sign_e)
        else:
            # I_Z3 = n_Z3, I_e = n_Z3 + 3 n_e
            expected = expected + TomDieckVector(
                lattice, {full: sign_sync, e: Fraction(sign_e - sign_sync, 3)})
        match = [o for o in orbits if abs(o.minimal_period - T) < 1e-5
                 and any(np.linalg.norm(M @ x - o.samples, axis=1).min() < 1e-2
                         for M in s.action.matrices)]
        assert len(match) == 1, T
        o = match[0]
        assert o.isotropy == (full if sign_sync is not None else e)
        trivial = [sd for sd in o.strata if sd.class_id == e][0]
        assert int(np.sign(trivial.det)) == sign_e
    index = fuller_from_orbits(lattice, orbits, W48).index
    assert index == expected
    assert index.to_json() == {"(Z3)": "1/1", "(e)": "2/1"}


def test_ring_default_seeding_finds_subset_of_oracle():
    s = ring_zn(3)
    states = ring_rotating_wave_states()
    orbits = sweep_seeds(s, None, W48, {"per_axis": 5, "random": 24, "periods": 3})
    assert any(o.isotropy == s.action.group.lattice.by_name("Z3") for o in orbits)
    for o in orbits:
        assert any(abs(o.minimal_period - T) < 1e-5 and
                   any(np.linalg.norm(M @ x - o.samples, axis=1).min() < 1e-2
                       for M in s.action.matrices) for T, x in states)


def test_serialization():
    orbits = sweep_seeds(hopf_z2(), None, W48)
    data = orbits_to_json(orbits)
    assert data[0]["k"] == 1 and data[0]["isotropy"] == "(e)"
    rows = list(csv.DictReader(io.StringIO(orbits_to_csv(orbits))))
    assert len(rows) == 1
    assert abs(float(rows[0]["p"]) - TWO_PI) < 1e-6
    assert orbits_to_csv([]) == ""
