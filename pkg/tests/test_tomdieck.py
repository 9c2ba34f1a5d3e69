import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from eqfuller.errors import LatticeMismatch
from eqfuller.group_theory import FiniteGroup, builtin_group
from eqfuller.tomdieck import TomDieckVector, td_add, td_project, td_scale, td_sum

Z2 = builtin_group("cyclic", 2).lattice
E = Z2.by_name("e")
FULL = Z2.by_name("Z2")


def vec(**kw):
    return TomDieckVector(Z2, {Z2.by_name(k): v for k, v in kw.items()})


def test_add_examples():
    assert td_add(vec(e=1), vec(e=1)) == vec(e=2)
    assert td_add(vec(e=Fraction(1, 2)), vec(e=Fraction(-1, 2))).is_zero()
    s = td_add(vec(Z2=1), vec(e=Fraction(1, 3)))
    assert s.coeffs == {FULL: 1, E: Fraction(1, 3)}


def test_scale_examples():
    assert td_scale(Fraction(1, 2), vec(e=2)) == vec(e=1)
    assert td_scale(0, vec(e=5, Z2=1)).is_zero()
    assert td_scale(Fraction(1, 3), vec(Z2=1)) == vec(Z2=Fraction(1, 3))


def test_project_examples():
    x = vec(Z2=1, e=Fraction(1, 3))
    assert td_project(x, FULL) == 1
    assert td_project(TomDieckVector.zero(Z2), E) == 0
    assert td_project(vec(e=Fraction(1, 2)), FULL) == 0


def test_lattice_mismatch():
    other = FiniteGroup(((0, 1), (1, 0))).lattice
    with pytest.raises(LatticeMismatch):
        td_add(vec(e=1), TomDieckVector.basis(other, 0))


def test_no_ring_product_and_no_floats():
    with pytest.raises(TypeError):
        vec(e=1) * vec(e=1)
    with pytest.raises(TypeError):
        vec(e=0.5)
    with pytest.raises(TypeError):
        td_scale(0.5, vec(e=1))


def test_json_roundtrip_and_canonical_sign():
    x = vec(Z2=Fraction(-2, 4), e=3)
    data = x.to_json()
    assert data == {"(Z2)": "-1/2", "(e)": "3/1"}
    assert TomDieckVector.from_json(Z2, json.loads(json.dumps(data))) == x
    assert TomDieckVector.zero(Z2).to_json() == {}


def test_td_sum():
    assert td_sum(Z2, [vec(e=1), vec(e=Fraction(1, 2)), vec(Z2=1)]) == \
        vec(e=Fraction(3, 2), Z2=1)


fractions = st.fractions(min_value=-50, max_value=50, max_denominator=12)
vectors = st.builds(lambda a, b: vec(Z2=a, e=b), fractions, fractions)


@settings(max_examples=200, deadline=None)
@given(vectors, vectors, vectors)
def test_additive_group_laws(x, y, z):
    zero = TomDieckVector.zero(Z2)
    assert (x + y) + z == x + (y + z)
    assert x + y == y + x
    assert x + zero == x
    assert (x - x).is_zero()


@settings(max_examples=100, deadline=None)
@given(vectors, fractions, fractions)
def test_scaling_distributes(x, p, q):
    assert td_scale(p + q, x) == td_scale(p, x) + td_scale(q, x)
    assert td_scale(p, td_scale(q, x)) == td_scale(p * q, x)
