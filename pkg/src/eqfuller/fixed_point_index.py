"""Equivariant fixed-point index of a return map on an equivariant disc.

The disc is ``G x_H B`` realised as copies ``g_i B`` over coset
representatives ``g_i`` of the isotropy group ``H``.  For a class ``(K)`` the
K-fixed part of copy ``i`` is nonempty only when ``g_i^-1 K g_i`` lies in
``H``, and is then the fixed space of that conjugate in copy-0 coordinates.
Summing local indices over those strata gives the integers ``I_K``; the index
is the unique ``sum n_L (L)`` with ``sum_L n_L |(G/L)^K| = I_K``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import AmbiguousIsotropy, DegenerateFixedPoint, NonIntegralSolution
from .group_theory import (FiniteGroup, OrthogonalAction, RANK_CUT, all_subgroups,
                           apply_marks, solve_marks)
from .tomdieck import TomDieckVector

TOL_DET = 1e-8
ISO_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class DiscGeometry:
    """Group bookkeeping of an equivariant disc, independent of any flow."""
    group: FiniteGroup
    isotropy_subgroup: frozenset
    copies: tuple
    disc_matrices: dict

    @property
    def lattice(self):
        return self.group.lattice

    @property
    def dim(self) -> int:
        return next(iter(self.disc_matrices.values())).shape[0]

    @classmethod
    def from_poincare(cls, psys):
        return cls(psys.action.group, psys.isotropy_subgroup, psys.copies,
                   psys.disc_action_matrices())

    @classmethod
    def from_action(cls, action: OrthogonalAction):
        """A single disc on which the whole group acts linearly."""
        G = action.group
        return cls(G, frozenset(range(G.order)), (G.identity,),
                   {g: action.matrices[g] for g in range(G.order)})

    def pulled_back(self, K: frozenset, copy: int) -> Optional[frozenset]:
        """g^-1 K g for the copy's representative g, if it lies in H."""
        g = self.copies[copy]
        Kc = self.group.conjugate(self.group.inv(g), K)
        return Kc if Kc <= self.isotropy_subgroup else None

    def fixed_basis(self, K: frozenset) -> np.ndarray:
        return disc_fixed_basis(self.disc_matrices, K)

    def point_isotropy(self, u, tol=ISO_TOL) -> frozenset:
        u = np.asarray(u, dtype=float)
        d = {h: float(np.linalg.norm(A @ u - u)) for h, A in self.disc_matrices.items()}
        if any(tol <= v < 10 * tol for v in d.values()):
            raise AmbiguousIsotropy("fixed point too close to a stratum boundary")
        sub = frozenset(h for h, v in d.items() if v < tol)
        if not self.group.is_subgroup(sub):
            raise AmbiguousIsotropy("disc isotropy is not a subgroup")
        return sub


def disc_fixed_basis(disc_matrices: dict, K) -> np.ndarray:
    mats = [disc_matrices[h] for h in sorted(K)]
    P = np.mean(mats, axis=0)
    P = 0.5 * (P + P.T)
    w, v = np.linalg.eigh(P)
    return v[:, w > RANK_CUT]


def stratum_determinant(DP, basis) -> float:
    if basis.shape[1] == 0:
        return 1.0
    M = basis.T @ np.asarray(DP, dtype=float) @ basis
    return float(np.linalg.det(np.eye(M.shape[0]) - M))


def local_index_on_stratum(DP, basis, tol_det=TOL_DET) -> int:
    """sign det(I - DP) on the stratum spanned by ``basis`` (+1 if empty)."""
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[1] == 0:
        return 1
    det = stratum_determinant(DP, basis)
    if abs(det) <= tol_det:
        raise DegenerateFixedPoint(f"|det(I - DP)| = {abs(det):.3g} on a stratum")
    return 1 if det > 0 else -1


@dataclass
class FixedPoint:
    u: np.ndarray
    jac: np.ndarray


@dataclass
class StratumIndexReport:
    counts: dict                       # class id -> I_K
    coefficients: dict                 # class id -> n_L (Fraction)
    entries: dict = field(default_factory=dict)   # class id -> list of point records

    def to_json(self, lattice) -> dict:
        out = {}
        for cid in sorted(self.counts):
            out[lattice.name(cid)] = {
                "I_K": int(self.counts[cid]),
                "n": str(self.coefficients.get(cid, Fraction(0))),
                "points": self.entries.get(cid, []),
            }
        return out


def stratum_counts(geometry: DiscGeometry, fixed_points, tol_det=TOL_DET):
    lattice = geometry.lattice
    isos = [geometry.point_isotropy(fp.u) for fp in fixed_points]
    counts = {}
    entries = {}
    for cls in lattice.classes:
        total = 0
        recs = []
        for copy in range(len(geometry.copies)):
            Kc = geometry.pulled_back(cls.representative, copy)
            if Kc is None:
                continue
            basis = geometry.fixed_basis(Kc)
            for fp, iso in zip(fixed_points, isos):
                if not Kc <= iso:
                    continue
                idx = local_index_on_stratum(fp.jac, basis, tol_det)
                total += idx
                recs.append({"copy": copy, "u": [float(v) for v in fp.u],
                             "stratum_dim": int(basis.shape[1]), "index": idx,
                             "det": stratum_determinant(fp.jac, basis)})
        counts[cls.class_id] = total
        if recs:
            entries[cls.class_id] = recs
    return counts, entries


def index_from_counts(lattice, counts) -> TomDieckVector:
    vec = [counts.get(c, 0) for c in range(len(lattice))]
    n = solve_marks(lattice, vec)
    if any(q.denominator != 1 for q in n):
        raise NonIntegralSolution(
            f"stratum counts {vec} do not come from an integral orbit-type vector")
    if apply_marks(lattice, n) != [Fraction(v) for v in vec]:
        raise AssertionError("marks roundtrip failed")
    return TomDieckVector(lattice, dict(enumerate(n)))


def equivariant_index_of_points(geometry: DiscGeometry, fixed_points, tol_det=TOL_DET):
    """(index, report) for the given fixed points of a map on copy 0."""
    counts, entries = stratum_counts(geometry, fixed_points, tol_det)
    idx = index_from_counts(geometry.lattice, counts)
    return idx, StratumIndexReport(counts, idx.coeffs, entries)


def equivariant_index(psys, system, lam, k: int, fixed_points=None, tol_det=TOL_DET,
                      scheme="variational") -> TomDieckVector:
    """Index of the k-th iterate of the pointwise return map on ``psys``.

    Without ``fixed_points`` the disc centre is taken as the only fixed point
    (the situation for a Poincare system centred on a hyperbolic orbit).
    """
    from .dynamics import return_map_jacobian

    if fixed_points is None:
        DP = return_map_jacobian(psys, system, psys.base_point, lam, scheme)
        fixed_points = [FixedPoint(np.zeros(psys.disc_dim), np.linalg.matrix_power(DP, k))]
    geometry = DiscGeometry.from_poincare(psys)
    return equivariant_index_of_points(geometry, fixed_points, tol_det)[0]


def subgroups_of(group: FiniteGroup, H: frozenset) -> list:
    return sorted((K for K in all_subgroups(group) if K <= H),
                  key=lambda K: (-len(K), tuple(sorted(K))))
