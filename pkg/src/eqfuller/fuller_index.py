"""The equivariant Fuller index and the iterate-sum identity.

The index of a field over (region, a, b) sums, over essential orbit
instances ``j`` (a group-orbit together with a multiplicity ``k_j``), the
equivariant fixed-point index of the ``k_j``-th pointwise return map weighted
by ``1/k_j``.

Return maps enter :func:`iterate_index_sum` through a small disc-map
interface, so the same code runs on flow-defined Poincare maps and on maps
given directly (:class:`MapHarness`).
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .dynamics import (DEFAULT_OPTIONS, PoincareSystem, pointwise_return_map,
                       return_map_jacobian)
from .errors import (DegenerateField, DegenerateFixedPoint, EqFullerError,
                     PreconditionUnverified)
from .fixed_point_index import (DiscGeometry, FixedPoint, StratumIndexReport,
                                equivariant_index_of_points)
from .group_theory import class_leq
from .periodic_orbits import boundary_warnings, orbits_to_json, sweep_seeds
from .regions import EssentialWindow, Region
from .tomdieck import TomDieckVector


@dataclass
class OrbitContribution:
    orbit: object
    index: TomDieckVector
    weight: Fraction
    contribution: TomDieckVector
    report: StratumIndexReport

    def to_json(self) -> dict:
        lattice = self.index.lattice
        out = self.orbit.to_json()
        out.update({"orbit_index": self.index.to_json(), "weight": str(self.weight),
                    "contribution": self.contribution.to_json(),
                    "strata_counts": self.report.to_json(lattice)})
        return out


@dataclass
class FullerResult:
    index: TomDieckVector
    contributions: list
    window: EssentialWindow
    warnings: list = field(default_factory=list)

    @property
    def orbits(self):
        return [c.orbit for c in self.contributions]

    def to_json(self) -> dict:
        return {"index": self.index.to_json(),
                "orbits": [c.to_json() for c in self.contributions],
                "window": [self.window.a, self.window.b],
                "region": self.window.region.to_json(),
                "warnings": list(self.warnings)}


def orbit_index(orbit):
    """(index of the k-th pointwise return map, stratum report) for one orbit instance."""
    geometry = DiscGeometry.from_poincare(orbit.psys)
    DPk = np.linalg.matrix_power(orbit.DP, orbit.multiplicity)
    fp = FixedPoint(np.zeros(orbit.psys.disc_dim), DPk)
    return equivariant_index_of_points(geometry, [fp])


def fuller_from_orbits(lattice, orbits, window) -> FullerResult:
    degenerate = [o for o in orbits if o.degenerate]
    if degenerate:
        raise DegenerateField(
            f"{len(degenerate)} detected orbit(s) are degenerate; index indeterminate, perturb",
            {"orbits": orbits_to_json(degenerate), "window": [window.a, window.b]})
    total = TomDieckVector.zero(lattice)
    contributions = []
    for o in orbits:
        idx, report = orbit_index(o)
        w = Fraction(1, o.multiplicity)
        c = idx.scale(w)
        total = total + c
        contributions.append(OrbitContribution(o, idx, w, c, report))
    return FullerResult(total, contributions, window, boundary_warnings(orbits))


def fuller_index(system, lam, window: EssentialWindow, orbits=None, grid_spec=None,
                 threads: int = 1, options=DEFAULT_OPTIONS) -> FullerResult:
    """Equivariant Fuller index over the window, with a per-orbit breakdown."""
    if orbits is None:
        orbits = sweep_seeds(system, lam, window, grid_spec, threads, options)
    return fuller_from_orbits(system.action.group.lattice, orbits, window)


def solution_property_holds(result: FullerResult) -> bool:
    """Every nonzero (H)-component is backed by an orbit of isotropy >= (H)."""
    lattice = result.index.lattice
    for cid in result.index.support():
        if not any(class_leq(lattice, cid, o.isotropy) for o in result.orbits):
            return False
    return True


# -- disc maps and iterate sums ------------------------------------------------------

class DiscMap:
    """A self-map of copy 0 of an equivariant disc, in disc coordinates."""
    geometry: DiscGeometry
    radius_Dp: float

    def __call__(self, u, n: int = 1) -> np.ndarray:
        for _ in range(n):
            u = self.step(u)
        return u

    def step(self, u) -> np.ndarray:
        raise NotImplementedError

    def step_jacobian(self, u) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, u, n: int = 1) -> np.ndarray:
        return self.iterate(u, n)[1]

    def iterate(self, u, n: int = 1):
        """(P^n(u), DP^n(u)) in one pass along the orbit."""
        u = np.asarray(u, dtype=float)
        J = np.eye(self.geometry.dim)
        for _ in range(n):
            J = self.step_jacobian(u) @ J
            u = self.step(u)
        return u, J

    def seeds(self) -> np.ndarray:
        d = self.geometry.dim
        per = {0: 1, 1: 17, 2: 9, 3: 5}.get(d, 3)
        axis = np.linspace(-self.radius_Dp, self.radius_Dp, per + 2)[1:-1] if per > 1 \
            else np.zeros(1)
        grid = np.array(np.meshgrid(*([axis] * d), indexing="ij")).reshape(d, -1).T
        grid = grid[np.linalg.norm(grid, axis=1) < self.radius_Dp]
        return np.concatenate([np.zeros((1, d)), grid])

    def fixed_points(self, n: int, tol: float = 1e-8, merge: float = 1e-7) -> list:
        """Fixed points of the n-th iterate inside D', by Newton from seeds (cached)."""
        cache = self.__dict__.setdefault("_fp_cache", {})
        if n not in cache:
            cache[n] = self._find_fixed_points(n, merge)
        found = cache[n]
        for fp in found:
            if np.linalg.norm(self(fp.u, n) - fp.u) >= tol:
                raise DegenerateFixedPoint("fixed point residual above tolerance", n)
        return found

    def _find_fixed_points(self, n, merge):
        found = []
        d = self.geometry.dim
        if d == 0:
            return [FixedPoint(np.zeros(0), np.zeros((0, 0)))]
        for u0 in self.seeds():
            u = self._newton(u0, n)
            if u is None or np.linalg.norm(u) >= self.radius_Dp:
                continue
            if any(np.linalg.norm(u - v.u) < merge for v in found):
                continue
            found.append(FixedPoint(u, self.jacobian(u, n)))
        found.sort(key=lambda fp: tuple(fp.u))
        return found

    def _newton(self, u, n, iters=60):
        u = np.asarray(u, dtype=float).copy()
        eye = np.eye(u.size)
        for _ in range(iters):
            try:
                un, J = self.iterate(u, n)
                r = un - u
                if not np.any(r):
                    return u
                du = np.linalg.solve(J - eye, -r)
            except (EqFullerError, np.linalg.LinAlgError):
                return None
            if not np.all(np.isfinite(du)):
                return None
            u = u + du
            if np.linalg.norm(u) > 2 * self.radius_Dp:
                return None
            if np.linalg.norm(du) < 1e-13 * max(1.0, np.linalg.norm(u)):
                break
        try:
            if np.linalg.norm(self(u, n) - u) < 1e-10:
                return u
        except EqFullerError:
            pass
        return None


class PoincareDiscMap(DiscMap):
    """The pointwise return map of a Poincare system on its copy 0."""

    def __init__(self, psys: PoincareSystem, system, lam=None, options=DEFAULT_OPTIONS):
        self.psys = psys
        self.system = system
        self.lam = lam
        self.options = options
        self.geometry = DiscGeometry.from_poincare(psys)
        self.radius_Dp = psys.radius_Dp

    def step(self, u):
        y = self.psys.from_disc(u, 0)
        return pointwise_return_map(self.psys, self.system, y, self.lam,
                                    options=self.options, check_start=False).image

    def step_jacobian(self, u):
        y = self.psys.from_disc(u, 0)
        return return_map_jacobian(self.psys, self.system, y, self.lam, options=self.options)


class MapHarness(DiscMap):
    """A map given directly by ``f(u, lam)`` and its Jacobian, with no flow behind it."""

    def __init__(self, f: Callable, jac: Callable, geometry: DiscGeometry, lam=None,
                 radius_Dp: float = 0.5):
        self.f = f
        self.jac = jac
        self.geometry = geometry
        self.lam = lam
        self.radius_Dp = float(radius_Dp)

    def at(self, lam) -> "MapHarness":
        return MapHarness(self.f, self.jac, self.geometry, lam, self.radius_Dp)

    def step(self, u):
        return np.atleast_1d(np.asarray(self.f(np.asarray(u, dtype=float), self.lam),
                                        dtype=float))

    def step_jacobian(self, u):
        return np.atleast_2d(np.asarray(self.jac(np.asarray(u, dtype=float), self.lam),
                                        dtype=float))


def flip_map_harness(lam=0.0, radius_Dp: float = 0.5) -> MapHarness:
    """Q(y) = -(1 + lam) y + y^3 on a 1-D disc with trivial symmetry."""
    from .group_theory import trivial_action

    def f(u, lam_):
        return -(1.0 + lam_) * u + u ** 3

    def jac(u, lam_):
        return np.array([[-(1.0 + lam_) + 3.0 * u[0] ** 2]])

    geometry = DiscGeometry.from_action(trivial_action(_trivial(), 1))
    return MapHarness(f, jac, geometry, lam, radius_Dp)


def _trivial():
    from .group_theory import trivial_group
    return trivial_group()


def iterate_terms(dmap: DiscMap, p: float, window) -> list:
    """[(n, fixed points of P^n, index of P^n)] for every n with n*p in [a, b]."""
    a, b = window
    if p <= 0:
        raise ValueError("p must be positive")
    terms = []
    for n in range(max(1, int(np.ceil(a / p - 1e-12))), int(np.floor(b / p + 1e-12)) + 1):
        fps = dmap.fixed_points(n)
        try:
            idx, _ = equivariant_index_of_points(dmap.geometry, fps)
        except DegenerateFixedPoint as exc:
            raise DegenerateFixedPoint(f"iterate n={n}: {exc}", n) from exc
        terms.append((n, fps, idx))
    return terms


def iterate_index_sum(dmap, p: float, window, system=None, lam=None) -> TomDieckVector:
    """sum over n with n*p in [a, b] of (1/n) * index(P^n) on D'.

    ``dmap`` is a :class:`DiscMap`, or a :class:`PoincareSystem` together with
    ``system`` and ``lam``.
    """
    if isinstance(dmap, PoincareSystem):
        dmap = PoincareDiscMap(dmap, system, lam)
    total = TomDieckVector.zero(dmap.geometry.lattice)
    for n, _, idx in iterate_terms(dmap, p, window):
        total = total + idx.scale(Fraction(1, n))
    return total


# -- additivity ------------------------------------------------------------------------

def _restricted(window: EssentialWindow, region: Region) -> EssentialWindow:
    return EssentialWindow(region, window.a, window.b)


def additivity_check(system, lam, window: EssentialWindow, region1: Optional[Region],
                     region2: Optional[Region], grid_spec=None, threads: int = 1):
    """(holds, report): index over the window's region against the two subregions.

    A missing subregion stands for the empty set.  Every orbit found in the
    full region must lie inside one of the subregions.
    """
    full = fuller_index(system, lam, window, grid_spec=grid_spec, threads=threads)
    subs = [r for r in (region1, region2) if r is not None]
    for o in full.orbits:
        inside = [r for r in subs if np.all(r.boundary_distance(o.samples) > 0)]
        if len(inside) != 1:
            raise PreconditionUnverified(
                f"orbit with p={o.minimal_period:.6g} does not lie in exactly one subregion")
    lattice = system.action.group.lattice
    parts = []
    for r in (region1, region2):
        if r is None:
            parts.append(TomDieckVector.zero(lattice))
            continue
        parts.append(fuller_index(system, lam, _restricted(window, r), grid_spec=grid_spec,
                                  threads=threads).index)
    holds = full.index == parts[0] + parts[1]
    report = {"index": full.index.to_json(),
              "parts": [v.to_json() for v in parts],
              "regions": [r.to_json() if r is not None else None for r in (region1, region2)],
              "holds": bool(holds)}
    return holds, report
