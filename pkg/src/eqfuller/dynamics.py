"""Flows, equivariant Poincare systems, return maps and their linearizations.

The ambient manifold is R^n with an orthogonal action.  For a point ``x0``
with isotropy ``H`` the equivariant disc is the union of the translated
hyperplane discs ``g (x0 + span(B))`` over left coset representatives ``g``
of ``H``, where ``B`` spans the orthogonal complement of the flow direction.
Each translate is a *copy*; copy 0 always belongs to the identity.

The map used for indices is the *pointwise* return map: first returns are
composed until the trajectory lands in the copy it started from, so fixed
points are exactly points on genuinely periodic orbits.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from ._jit import pure_module, python_version
from .errors import (EquilibriumPoint, EscapedTube, HopLimit, NoReturn,
                     PreconditionViolation, StepFailure, TransversalityFailure)
from .group_theory import isotropy_subgroup
from .systems import VectorFieldSystem

TRANSVERSALITY_MARGIN = 0.1


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-11
    atol: float = 1e-12
    h_max: float = np.inf
    max_steps: int = 2_000_000


DEFAULT_OPTIONS = IntegratorOptions()


def _kernel(system, name):
    fn = getattr(kernels, name)
    if system.compiled:
        return fn, system.rhs, system.jac
    fn = getattr(pure_module(kernels.__name__), name)
    return fn, python_version(system.rhs), python_version(system.jac)


def _check_status(status, t, y, n):
    if status == kernels.STATUS_UNDERFLOW:
        raise StepFailure(f"step size underflow at t={t:.6g}", y[:n].copy(), t)
    if status == kernels.STATUS_MAX_STEPS:
        raise StepFailure(f"step limit reached at t={t:.6g}", y[:n].copy(), t)
    if status == kernels.STATUS_ESCAPED:
        raise EscapedTube(f"trajectory left the admissible region at t={t:.6g}")
    if status == kernels.STATUS_NO_RETURN:
        raise NoReturn(f"no return to the disc before t={t:.6g}")


@dataclass
class Trajectory:
    t_final: float
    x_final: np.ndarray
    stm: Optional[np.ndarray]
    t_eval: np.ndarray
    samples: np.ndarray
    steps: int


def flow(system: VectorFieldSystem, x0, t_final, lam=None, rtol=None, atol=None,
         t_eval=None, with_stm=False, escape_radius=None,
         options: IntegratorOptions = DEFAULT_OPTIONS, backward=False) -> Trajectory:
    """Integrate ``x0`` over [0, t_final]; ``t_eval`` gives dense samples.

    With ``backward`` the flow runs in reverse time, so the result is the
    state at time ``-t_final`` (``t_eval`` then counts backwards too).
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    rtol = options.rtol if rtol is None else rtol
    atol = options.atol if atol is None else atol
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    y0 = np.concatenate([x0, np.eye(n).ravel()]) if with_stm else x0.copy()
    te = np.zeros(0) if t_eval is None else np.sort(np.asarray(t_eval, dtype=float))
    esc = system.escape_radius if escape_radius is None else escape_radius
    fn, rhs, jac = _kernel(system, "integrate")
    status, t, y, out, steps = fn(rhs, jac, y0, system.params(lam), n, with_stm,
                                  float(t_final), rtol, atol, options.h_max, te,
                                  esc * esc, options.max_steps, -1.0 if backward else 1.0)
    _check_status(status, t, y, n)
    stm = y[n:].reshape(n, n).copy() if with_stm else None
    return Trajectory(t, y[:n].copy(), stm, te, out[:, :n].copy(), steps)


def check_equivariance(system: VectorFieldSystem, n_samples=64, lam=None, seed=0,
                       scale=2.0) -> float:
    """Max over samples and group elements of |M(g) f(x) - f(M(g) x)|."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-scale, scale, size=(n_samples, system.dim))
    worst = 0.0
    mats = system.action.matrices
    for x in pts:
        fx = system(x, lam)
        for M in mats:
            worst = max(worst, float(np.max(np.abs(M @ fx - system(M @ x, lam)))))
    return worst


# -- Poincare systems ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PoincareSystem:
    base_point: np.ndarray
    isotropy: int
    isotropy_subgroup: frozenset
    flow_dir: np.ndarray
    disc_basis: np.ndarray
    radius_D: float
    radius_Dp: float
    copies: tuple
    centers: np.ndarray
    normals: np.ndarray
    t_min: float
    t_max: float
    escape_radius: float
    action: object = field(repr=False)

    @property
    def n_copies(self) -> int:
        return len(self.copies)

    @property
    def disc_dim(self) -> int:
        return self.disc_basis.shape[1]

    def basis(self, copy: int) -> np.ndarray:
        return self.action.matrices[self.copies[copy]] @ self.disc_basis

    def to_disc(self, z, copy: int = 0) -> np.ndarray:
        return self.basis(copy).T @ (np.asarray(z, dtype=float) - self.centers[copy])

    def from_disc(self, u, copy: int = 0) -> np.ndarray:
        return self.centers[copy] + self.basis(copy) @ np.asarray(u, dtype=float)

    def locate(self, z, tol=1e-9):
        """(copy, disc coordinates) of a point on the disc, or None."""
        z = np.asarray(z, dtype=float)
        for j in range(self.n_copies):
            off = z - self.centers[j]
            if abs(off @ self.normals[j]) <= tol * max(1.0, np.linalg.norm(z)):
                u = self.basis(j).T @ off
                if np.linalg.norm(u) <= self.radius_D:
                    return j, u
        return None

    def copy_after(self, g: int, copy: int) -> int:
        """Index of the copy containing g applied to copy ``copy``."""
        group = self.action.group
        target = group.mul[g][self.copies[copy]]
        for j, c in enumerate(self.copies):
            if group.mul[group.inv(c)][target] in self.isotropy_subgroup:
                return j
        raise AssertionError("coset bookkeeping failed")

    def disc_matrix(self, g: int, copy: int = 0):
        """Matrix of g from copy ``copy`` coordinates to its image copy's coordinates."""
        j = self.copy_after(g, copy)
        return j, self.basis(j).T @ self.action.matrices[g] @ self.basis(copy)

    def disc_action_matrices(self) -> dict:
        """h -> B^T M(h) B for h in the isotropy subgroup (action on copy 0)."""
        B = self.disc_basis
        return {h: B.T @ self.action.matrices[h] @ B for h in sorted(self.isotropy_subgroup)}


def _coset_representatives(group, sub):
    reps = [group.identity]
    covered = {group.mul[group.identity][h] for h in sub}
    for g in range(group.order):
        if g in covered:
            continue
        reps.append(g)
        covered |= {group.mul[g][h] for h in sub}
    return tuple(reps)


def _complement_basis(f):
    _, _, vh = np.linalg.svd(f[None, :])
    B = vh[1:].T.copy()
    for j in range(B.shape[1]):
        i = np.argmax(np.abs(B[:, j]))
        if B[i, j] < 0:
            B[:, j] = -B[:, j]
    return B


def _transversality_ok(system, lam, centers, normals, bases, radius, seed=0):
    n = centers.shape[1]
    d = n - 1
    dirs = [np.zeros(d)]
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        dirs += [e, -e, 0.5 * e, -0.5 * e]
    rng = np.random.default_rng(seed)
    for _ in range(4):
        v = rng.normal(size=d)
        dirs.append(rng.uniform(0, 1) * v / np.linalg.norm(v))
    for c, nu, B in zip(centers, normals, bases):
        for u in dirs:
            y = c + radius * (B @ u)
            fy = system(y, lam)
            if fy @ nu < TRANSVERSALITY_MARGIN * np.linalg.norm(fy):
                return False
    return True


def build_poincare_system(system: VectorFieldSystem, x0, lam=None, radius_D=None,
                          radius_Dp=None, window=None, t_min=None, t_max=None,
                          region=None, iso_tol=1e-7, max_shrink=6) -> PoincareSystem:
    """Equivariant Poincare system through ``x0``.

    Default radius is a tenth of the smallest distance between copy centres
    (or of ``2|x0|`` for a single copy), halved up to ``max_shrink`` times
    until the flow is transverse to every copy.
    """
    x0 = np.asarray(x0, dtype=float)
    f = system(x0, lam)
    speed = np.linalg.norm(f)
    if speed <= 1e-8:
        raise EquilibriumPoint(f"|f(x0)| = {speed:.3g}: x0 is an equilibrium")
    action = system.action
    group = action.group
    H = isotropy_subgroup(action, x0, iso_tol * max(1.0, np.linalg.norm(x0)))
    flow_dir = f / speed
    B = _complement_basis(flow_dir)
    copies = _coset_representatives(group, H)
    centers = np.array([action.matrices[g] @ x0 for g in copies])
    normals = np.array([action.matrices[g] @ flow_dir for g in copies])
    bases = [action.matrices[g] @ B for g in copies]

    auto = radius_D is None
    if auto:
        if len(copies) > 1:
            dists = [np.linalg.norm(centers[i] - centers[j])
                     for i in range(len(copies)) for j in range(i)]
            scale = min(dists)
        else:
            scale = 2.0 * np.linalg.norm(x0) if np.linalg.norm(x0) > 0 else 1.0
        radius_D = 0.1 * scale
    tries = max_shrink if auto else 0
    while True:
        if _transversality_ok(system, lam, centers, normals, bases, radius_D):
            break
        if tries == 0:
            raise TransversalityFailure(
                f"flow nearly tangent to the disc of radius {radius_D:.3g}; shrink it")
        radius_D *= 0.5
        tries -= 1
    if len(copies) > 1:
        sep = min(np.linalg.norm(centers[i] - centers[j])
                  for i in range(len(copies)) for j in range(i))
        if sep < 2.5 * radius_D:
            raise TransversalityFailure("disc copies are not separated; shrink the radius")
    if radius_Dp is None:
        radius_Dp = radius_D / 2
    if not 0 < radius_Dp < radius_D:
        raise ValueError("need 0 < radius_Dp < radius_D")
    if t_min is None:
        t_min = 0.05 * window[0] if window is not None else radius_D / speed
    if t_max is None:
        t_max = 10.0 * window[1] if window is not None else 1e3
    escape = system.escape_radius
    if region is not None:
        escape = 2.0 * region.bounding_radius()
    return PoincareSystem(x0.copy(), group.lattice.class_of(H), H, flow_dir, B,
                          float(radius_D), float(radius_Dp), copies, centers, normals,
                          float(t_min), float(t_max), float(escape), action)


@dataclass
class ReturnRecord:
    start: np.ndarray
    landing: np.ndarray
    copy_index: int
    time: float
    stm: Optional[np.ndarray] = None


def first_return(psys: PoincareSystem, system: VectorFieldSystem, y, lam=None,
                 with_stm=False, stm0=None, check_start=True,
                 options: IntegratorOptions = DEFAULT_OPTIONS) -> ReturnRecord:
    y = np.asarray(y, dtype=float)
    n = y.size
    if check_start:
        loc = psys.locate(y)
        if loc is None or np.linalg.norm(loc[1]) > psys.radius_Dp * (1 + 1e-12):
            raise PreconditionViolation("start point is not in the subdisc D'")
    if with_stm:
        phi = np.eye(n) if stm0 is None else np.asarray(stm0, dtype=float)
        y0 = np.concatenate([y, phi.ravel()])
    else:
        y0 = y.copy()
    fn, rhs, jac = _kernel(system, "integrate_to_section")
    status, t, yc, j, _ = fn(rhs, jac, y0, system.params(lam), n, with_stm,
                             psys.centers, psys.normals, psys.radius_D, psys.t_min,
                             psys.t_max, options.rtol, options.atol, options.h_max,
                             0.5 * psys.radius_D, psys.escape_radius ** 2,
                             options.max_steps)
    _check_status(status, t, yc, n)
    stm = yc[n:].reshape(n, n).copy() if with_stm else None
    return ReturnRecord(y.copy(), yc[:n].copy(), int(j), float(t), stm)


@dataclass
class PointwiseReturn:
    image: np.ndarray        # disc coordinates in the starting copy
    t_total: float
    hops: int
    landing: np.ndarray
    copy_index: int
    stm: Optional[np.ndarray]
    records: list


def pointwise_return_map(psys: PoincareSystem, system: VectorFieldSystem, y, lam=None,
                         with_stm=False, options: IntegratorOptions = DEFAULT_OPTIONS,
                         check_start=True) -> PointwiseReturn:
    y = np.asarray(y, dtype=float)
    loc = psys.locate(y)
    if loc is None:
        raise PreconditionViolation("start point is not on the disc")
    start_copy = loc[0]
    limit = 4 * psys.action.group.order
    records = []
    z, stm, t_total = y, None, 0.0
    while True:
        rec = first_return(psys, system, z, lam, with_stm, stm, check_start and not records,
                           options)
        records.append(rec)
        t_total += rec.time
        z, stm = rec.landing, rec.stm
        if rec.copy_index == start_copy:
            break
        if len(records) >= limit:
            raise HopLimit(f"no return to the starting copy within {limit} hops")
    return PointwiseReturn(psys.to_disc(z, start_copy), t_total, len(records), z,
                           start_copy, stm, records)


def disc_return_map(psys, system, u, lam=None, copy=0, options=DEFAULT_OPTIONS,
                    check_start=True):
    """Pointwise return map in disc coordinates of one copy."""
    return pointwise_return_map(psys, system, psys.from_disc(u, copy), lam,
                                options=options, check_start=check_start).image


def return_map_jacobian(psys: PoincareSystem, system: VectorFieldSystem, y, lam=None,
                        scheme="variational", options: IntegratorOptions = DEFAULT_OPTIONS,
                        fd_step=None) -> np.ndarray:
    """Jacobian of the pointwise return map at ``y`` in disc coordinates."""
    y = np.asarray(y, dtype=float)
    if scheme == "variational":
        ret = pointwise_return_map(psys, system, y, lam, with_stm=True, options=options,
                                   check_start=False)
        j = ret.copy_index
        z = ret.landing
        fz = system(z, lam)
        nu = psys.normals[j]
        proj = np.eye(y.size) - np.outer(fz, nu) / (nu @ fz)
        B = psys.basis(j)
        return B.T @ proj @ ret.stm @ B
    if scheme == "fd":
        # central differences at h and h/2 combined by one Richardson step, so the
        # truncation error is O(h^4); plain O(h^2) differences are too coarse on
        # strongly unstable orbits where the map has large curvature
        loc = psys.locate(y)
        if loc is None:
            raise PreconditionViolation("start point is not on the disc")
        j, u = loc
        h = 4e-5 * psys.radius_D if fd_step is None else fd_step
        d = psys.disc_dim

        def central(step):
            J = np.empty((d, d))
            for i in range(d):
                e = np.zeros(d)
                e[i] = step
                up = disc_return_map(psys, system, u + e, lam, j, options, check_start=False)
                um = disc_return_map(psys, system, u - e, lam, j, options, check_start=False)
                J[:, i] = (up - um) / (2 * step)
            return J
        return (4 * central(h / 2) - central(h)) / 3
    raise ValueError(f"unknown scheme {scheme!r}")
