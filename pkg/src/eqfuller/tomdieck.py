"""Exact rational combinations of isotropy classes.

Only the additive structure is provided.  Multiplying two vectors raises
``TypeError``: the Burnside ring product is deliberately absent.
"""
from fractions import Fraction
from numbers import Rational

from .errors import LatticeMismatch
from .group_theory import IsotropyLattice


def _frac(q):
    if isinstance(q, float):
        raise TypeError("floating coefficients are not allowed; pass a Fraction or int")
    if isinstance(q, str):
        return Fraction(q)
    if isinstance(q, Rational):
        return Fraction(q)
    raise TypeError(f"cannot use {type(q).__name__} as an exact coefficient")


class TomDieckVector:
    __slots__ = ("lattice", "_coeffs")

    def __init__(self, lattice: IsotropyLattice, coeffs=None):
        self.lattice = lattice
        clean = {}
        for k, v in (coeffs or {}).items():
            k = int(k)
            if not 0 <= k < len(lattice):
                raise KeyError(f"class id {k} not in lattice")
            v = _frac(v)
            if v:
                clean[k] = v
        self._coeffs = clean

    @classmethod
    def zero(cls, lattice):
        return cls(lattice)

    @classmethod
    def basis(cls, lattice, class_id, q=1):
        return cls(lattice, {class_id: q})

    @property
    def coeffs(self) -> dict:
        return dict(sorted(self._coeffs.items()))

    def project(self, class_id: int) -> Fraction:
        return self._coeffs.get(int(class_id), Fraction(0))

    def support(self) -> list:
        return sorted(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def _check(self, other):
        if not isinstance(other, TomDieckVector):
            return NotImplemented
        if other.lattice is not self.lattice:
            raise LatticeMismatch("vectors belong to different isotropy lattices")
        return None

    def __add__(self, other):
        bad = self._check(other)
        if bad is NotImplemented:
            return bad
        out = dict(self._coeffs)
        for k, v in other._coeffs.items():
            out[k] = out.get(k, Fraction(0)) + v
        return TomDieckVector(self.lattice, out)

    def __neg__(self):
        return TomDieckVector(self.lattice, {k: -v for k, v in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, q) -> "TomDieckVector":
        q = _frac(q)
        return TomDieckVector(self.lattice, {k: q * v for k, v in self._coeffs.items()})

    def __mul__(self, q):
        if isinstance(q, TomDieckVector):
            raise TypeError("ring multiplication of tom Dieck vectors is not implemented")
        return self.scale(q)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TomDieckVector):
            return NotImplemented
        return other.lattice is self.lattice and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((id(self.lattice), tuple(sorted(self._coeffs.items()))))

    def to_json(self) -> dict:
        return {self.lattice.name(k): f"{v.numerator}/{v.denominator}"
                for k, v in sorted(self._coeffs.items())}

    @classmethod
    def from_json(cls, lattice, data: dict):
        return cls(lattice, {lattice.by_name(k): Fraction(v) for k, v in data.items()})

    def __repr__(self):
        if not self._coeffs:
            return "0"
        return " + ".join(f"{v}*{self.lattice.name(k)}" for k, v in sorted(self._coeffs.items()))


def td_add(a: TomDieckVector, b: TomDieckVector) -> TomDieckVector:
    return a + b


def td_scale(q, a: TomDieckVector) -> TomDieckVector:
    return a.scale(q)


def td_project(a: TomDieckVector, H: int) -> Fraction:
    return a.project(H)


def td_sum(lattice, vectors) -> TomDieckVector:
    total = TomDieckVector.zero(lattice)
    for v in vectors:
        total = total + v
    return total
