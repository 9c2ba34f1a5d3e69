"""Locating periodic group-orbits by shooting, and deduplicating them.

Shooting solves ``phi(y, T) = y`` together with a phase condition
``<f(y0), y - y0> = 0`` anchored at the seed.  A converged orbit is moved to a
canonical anchor (the point of largest first coordinate over the orbit and
all its group translates), which makes the representative of a group-orbit
independent of the seed it was found from.
"""
import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dynamics import (DEFAULT_OPTIONS, IntegratorOptions, PoincareSystem,
                       build_poincare_system, flow, pointwise_return_map,
                       return_map_jacobian)
from .errors import (AmbiguousIsotropy, AmbiguousPeriod, EqFullerError, NotFound,
                     StepFailure, TransversalityFailure, WindowRejected)
from .fixed_point_index import (TOL_DET, disc_fixed_basis, stratum_determinant,
                                subgroups_of)
from .group_theory import isotropy_subgroup
from .regions import EssentialWindow

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
MAX_NEWTON = 40
STALL_ITER = 10
EQUILIBRIUM_SPEED = 1e-6
COARSE = IntegratorOptions(rtol=1e-8, atol=1e-10)
RETURN_TOL = 1e-7
PERIOD_TOL = 1e-4
DEDUP_TOL = 1e-5
BOUNDARY_TOL = 1e-3
N_SAMPLES = 256
ISO_TOL = 1e-7


@dataclass
class StratumDet:
    subgroup: tuple
    class_id: int
    dim: int
    det: float


@dataclass
class PeriodicOrbit:
    anchor: np.ndarray
    minimal_period: float
    period: float
    multiplicity: int
    isotropy: int
    psys: PoincareSystem
    DP: np.ndarray
    residual: float
    lam: Optional[np.ndarray] = None
    samples: np.ndarray = field(default=None, repr=False)
    strata: list = field(default_factory=list)
    hops: int = 1
    warnings: list = field(default_factory=list)

    @property
    def multipliers(self) -> np.ndarray:
        if self.DP.size == 0:
            return np.zeros(0, dtype=complex)
        ev = np.linalg.eigvals(self.DP)
        return ev[np.lexsort((ev.imag, -np.abs(ev)))]

    def region_margin(self, region) -> float:
        """Smallest signed distance of the sampled orbit to the region boundary."""
        return float(np.min(region.boundary_distance(self.samples)))

    @property
    def degenerate(self) -> bool:
        return any(abs(s.det) <= TOL_DET for s in self.strata)

    def with_multiplicity(self, k: int) -> "PeriodicOrbit":
        """The same geometric orbit traversed k times."""
        strata = stratum_dets(self.psys, self.DP, k)
        return replace(self, period=k * self.minimal_period, multiplicity=k,
                       strata=strata, warnings=list(self.warnings))

    def to_json(self) -> dict:
        lattice = self.psys.action.group.lattice
        mu = self.multipliers
        return {
            "anchor": [float(v) for v in self.anchor],
            "p": float(self.minimal_period),
            "T": float(self.period),
            "k": int(self.multiplicity),
            "isotropy": lattice.name(self.isotropy),
            "hops": int(self.hops),
            "multipliers": [[float(z.real), float(z.imag)] for z in mu],
            "residual": float(self.residual),
            "strata": [{"subgroup": list(s.subgroup), "class": lattice.name(s.class_id),
                        "dim": s.dim, "det": s.det} for s in self.strata],
            "degenerate": self.degenerate,
            "warnings": list(self.warnings),
        }


def stratum_dets(psys: PoincareSystem, DP, k: int) -> list:
    """det(I - DP^k) on the fixed space of every subgroup of the isotropy."""
    group = psys.action.group
    mats = psys.disc_action_matrices()
    DPk = np.linalg.matrix_power(DP, k)
    out = []
    for K in subgroups_of(group, psys.isotropy_subgroup):
        Q = disc_fixed_basis(mats, K)
        out.append(StratumDet(tuple(sorted(K)), group.lattice.class_of(K), int(Q.shape[1]),
                              stratum_determinant(DPk, Q)))
    return out


def multiplicity_from_periods(T: float, p: float, tol: float = PERIOD_TOL) -> int:
    if p <= 0:
        raise ValueError("minimal period must be positive")
    r = T / p
    k = int(round(r))
    if k < 1 or abs(r - k) > tol:
        raise AmbiguousPeriod(f"T/p = {r:.6f} is not an integer")
    return k


# -- Newton shooting ------------------------------------------------------------

def _residual(system, lam, y, T, y0, f0, opts):
    x = flow(system, y, T, lam, options=opts).x_final
    return np.concatenate([x - y, [f0 @ (y - y0)]])


def _newton(system, lam, y0, T0, t_cap=np.inf, options=DEFAULT_OPTIONS,
            max_iter=MAX_NEWTON, on_coarse=None):
    """Solve phi(y, T) = y with the phase fixed at the seed.  Returns (y, T, |F|).

    Damped Newton with backtracking on |F|; fails fast when the line search
    cannot make progress.
    """
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    f0 = system(y0, lam)
    if np.linalg.norm(f0) <= 1e-8:
        raise NotFound("seed is an equilibrium")
    y, T = y0.copy(), float(T0)
    fine = False
    first = None
    try:
        for it in range(max_iter):
            opts = options if fine else COARSE
            tr = flow(system, y, T, lam, with_stm=True, options=opts)
            F = np.concatenate([tr.x_final - y, [f0 @ (y - y0)]])
            nF = np.linalg.norm(F)
            if not np.isfinite(nF):
                raise NotFound("shooting diverged")
            first = nF if first is None else first
            if it >= STALL_ITER and nF > 0.5 * first:
                raise NotFound("Newton stalled")
            if fine and nF < NEWTON_TOL:
                if np.linalg.norm(system(y, lam)) <= EQUILIBRIUM_SPEED:
                    raise NotFound("shooting converged to an equilibrium")
                return y, T, nF
            if not fine and nF < 1e-6:
                if np.linalg.norm(system(y, lam)) <= EQUILIBRIUM_SPEED:
                    raise NotFound("shooting converged to an equilibrium")
                if on_coarse is not None:
                    on_coarse(y)
                fine = True
                continue
            if np.linalg.norm(system(y, lam)) <= 1e-8:
                raise NotFound("shooting converged to an equilibrium")
            J = np.zeros((n + 1, n + 1))
            J[:n, :n] = tr.stm - np.eye(n)
            J[:n, n] = system(tr.x_final, lam)
            J[n, :n] = f0
            if np.linalg.cond(J) > 1e12:
                raise NotFound("singular shooting Jacobian")
            d = np.linalg.solve(J, -F)
            s = 1.0
            lim = 0.5 * (1.0 + np.linalg.norm(y))
            if np.linalg.norm(d[:n]) > lim:
                s = lim / np.linalg.norm(d[:n])
            if abs(d[n]) > 0.25 * T:
                s = min(s, 0.25 * T / abs(d[n]))
            while True:
                yt, Tt = y + s * d[:n], T + s * d[n]
                if Tt <= 1e-2 * T0 or Tt > t_cap:
                    raise NotFound("period left the search range")
                if nF < 1e-6:
                    break
                try:
                    nt = np.linalg.norm(_residual(system, lam, yt, Tt, y0, f0, opts))
                except (StepFailure, EqFullerError):
                    # a trial step that escapes is treated like one that overshoots
                    nt = np.inf
                if nt <= (1 - 1e-4 * s) * nF:
                    break
                s *= 0.5
                if s < 1e-3:
                    raise NotFound("Newton line search failed")
            y, T = yt, Tt
    except StepFailure as exc:
        raise NotFound(f"integration failed during shooting: {exc}") from exc
    except NotFound:
        raise
    except EqFullerError as exc:
        raise NotFound(f"integration failed during shooting: {exc}") from exc
    raise NotFound(f"Newton did not converge in {max_iter} iterations")


def _non_isolated(system, lam, y, T, options=DEFAULT_OPTIONS) -> bool:
    """True if nearby points transverse to the flow are also periodic (a centre)."""
    f = system(y, lam)
    f = f / np.linalg.norm(f)
    rng = np.random.default_rng(0)
    v = rng.normal(size=y.size)
    v -= (v @ f) * f
    if np.linalg.norm(v) == 0:
        return False
    v *= 1e-3 * max(1.0, np.linalg.norm(y)) / np.linalg.norm(v)
    try:
        res = np.linalg.norm(flow(system, y + v, T, lam, options=options).x_final - (y + v))
    except EqFullerError:
        return False
    return res < 1e-9


# -- canonical anchor -------------------------------------------------------------

def _orbit_samples(system, lam, x, p, count=N_SAMPLES, options=DEFAULT_OPTIONS):
    ts = np.linspace(0.0, p, count, endpoint=False)
    return flow(system, x, p, lam, t_eval=ts, options=options).samples


def _refine_extremum(system, lam, base, span, options=DEFAULT_OPTIONS):
    """Point of maximal first coordinate on the trajectory of ``base`` within ``span``."""
    tau = 0.5 * span
    x = flow(system, base, tau, lam, options=options).x_final
    for _ in range(30):
        fx = system(x, lam)
        J = system.jacobian(x, lam)
        h2 = J[0] @ fx
        if h2 >= 0:
            break
        step = -fx[0] / h2
        step = float(np.clip(step, -tau, 2 * span - tau))
        tau += step
        x = flow(system, base, tau, lam, options=options).x_final if tau > 1e-14 else base.copy()
        if abs(step) < 1e-13 * max(1.0, span):
            break
    return x


def canonical_anchor(system, lam, x, p, options=DEFAULT_OPTIONS):
    """The lexicographically largest extremum of x_0 over the group-orbit of the cycle."""
    mats = system.action.matrices
    pts = _orbit_samples(system, lam, x, p, options=options)
    imgs = np.concatenate([pts @ M.T for M in mats])
    x0 = imgs[:, 0]
    spread = np.ptp(x0) if np.ptp(x0) > 0 else 1.0
    cand = np.flatnonzero(x0 >= x0.max() - 0.05 * spread)
    dt = p / len(pts)
    best = None
    for idx in cand:
        s = idx % len(pts)
        g = idx // len(pts)
        # only refine local maxima of the sampled sequence
        prev_i = g * len(pts) + (s - 1) % len(pts)
        next_i = g * len(pts) + (s + 1) % len(pts)
        if x0[idx] < x0[prev_i] or x0[idx] < x0[next_i]:
            continue
        base = imgs[prev_i]
        z = _refine_extremum(system, lam, base, 2 * dt, options)
        if best is None or _lex_greater(z, best):
            best = z
    return best if best is not None else imgs[np.argmax(x0)]


def _lex_greater(a, b, tol=1e-7):
    for u, v in zip(a, b):
        if u > v + tol:
            return True
        if u < v - tol:
            return False
    return False


def orbit_distance(system, lam, samples, x, p, options=DEFAULT_OPTIONS) -> float:
    """min over group elements and phases of |M(g) phi(x1, t) - x| for sampled x1."""
    best = np.inf
    n = len(samples)
    dt = p / n
    for M in system.action.matrices:
        imgs = samples @ M.T
        d = np.linalg.norm(imgs - x, axis=1)
        i = int(np.argmin(d))
        if d[i] > 10 * dt * (1 + np.max(np.abs(imgs))) + 1e-3:
            best = min(best, d[i])
            continue
        # Gauss-Newton on the phase from the sample before the nearest one
        base = imgs[(i - 1) % n]
        tau = dt
        z = flow(system, base, tau, lam, options=options).x_final
        for _ in range(8):
            fz = system(z, lam)
            step = fz @ (x - z) / (fz @ fz)
            tau = float(np.clip(tau + step, 0.0, 2 * dt))
            z = flow(system, base, tau, lam, options=options).x_final if tau > 1e-14 else base
            if abs(step) < 1e-13:
                break
        best = min(best, float(np.linalg.norm(z - x)), float(d[i]))
    return best


# -- classification ------------------------------------------------------------------

def _orbit_psys(system, lam, x, p, window, region, radius_D=None):
    """Poincare system at x whose pointwise return of x is x itself at time p."""
    radius = radius_D
    for _ in range(6):
        psys = build_poincare_system(system, x, lam, radius_D=radius, window=window,
                                     region=region)
        ret = pointwise_return_map(psys, system, x, lam, check_start=False)
        if abs(ret.t_total - p) < 1e-6 * max(1.0, p) and np.linalg.norm(ret.image) < 1e-6:
            return psys, ret
        radius = 0.5 * psys.radius_D
    raise NotFound("orbit crosses its own disc near the anchor")


def classify_multiplicity(psys, system, lam, anchor, T, options=DEFAULT_OPTIONS):
    """(p, k): first time the pointwise return comes back to the anchor."""
    z = np.asarray(anchor, dtype=float)
    t = 0.0
    while t <= T * (1 + 1e-6):
        ret = pointwise_return_map(psys, system, z, lam, options=options, check_start=False)
        t += ret.t_total
        if np.linalg.norm(ret.landing - anchor) < RETURN_TOL:
            return t, multiplicity_from_periods(T, t)
        z = ret.landing
    raise AmbiguousPeriod(f"no return to the anchor within T = {T:.6g}")


def _finish_orbit(system, lam, x, p, window, region, options=DEFAULT_OPTIONS,
                  radius_D=None, check_region=True):
    lam_arr = None if lam is None else np.atleast_1d(np.asarray(lam, dtype=float))
    psys, ret = _orbit_psys(system, lam, x, p, window, region, radius_D)
    DP = return_map_jacobian(psys, system, x, lam, options=options)
    samples = _orbit_samples(system, lam, x, p, options=options)
    residual = float(np.linalg.norm(flow(system, x, p, lam, options=options).x_final - x))
    orbit = PeriodicOrbit(x.copy(), p, p, 1, psys.isotropy, psys, DP, residual, lam_arr,
                          samples, stratum_dets(psys, DP, 1), ret.hops)
    if check_region:
        _check_region(orbit, window)
    _check_isotropy(orbit, system)
    return orbit


def reanchor(orbit, system, phase: float, window=None, options=DEFAULT_OPTIONS):
    """The same orbit with a new anchor flowed ``phase * p`` along it, and a fresh disc."""
    p = orbit.minimal_period
    x = orbit.anchor.copy()
    t = (phase % 1.0) * p
    if t > 0:
        x = flow(system, x, t, orbit.lam, options=options).x_final
    out = _finish_orbit(system, orbit.lam, x, p, window, None if window is None else
                        window.region, options, check_region=False)
    return out if orbit.multiplicity == 1 else out.with_multiplicity(orbit.multiplicity)


def _check_region(orbit, window):
    if window is None:
        return
    dist = window.region.boundary_distance(orbit.samples)
    if np.min(dist) <= 0:
        raise WindowRejected("orbit leaves the region")
    if np.min(dist) < BOUNDARY_TOL:
        orbit.warnings.append("orbit within 1e-3 of the region boundary")


def _check_isotropy(orbit, system):
    action = system.action
    H = orbit.psys.isotropy_subgroup
    for x in orbit.samples[:: max(1, len(orbit.samples) // 16)]:
        try:
            K = isotropy_subgroup(action, x, ISO_TOL * max(1.0, np.linalg.norm(x)))
        except AmbiguousIsotropy:
            K = None
        if K != H:
            orbit.warnings.append("isotropy changes along the sampled orbit")
            return


def shoot_periodic(system, lam, y0, T0, window: Optional[EssentialWindow] = None,
                   options: IntegratorOptions = DEFAULT_OPTIONS) -> PeriodicOrbit:
    """Newton shooting from (y0, T0); the result carries its minimal period and k.

    ``T0`` may lie outside the window: the window is applied to the converged
    period, which is rejected with :class:`WindowRejected` if it falls outside.
    """
    y0 = np.asarray(y0, dtype=float)
    region = window.region if window is not None else None
    if T0 <= 0:
        raise ValueError("T0 must be positive")
    if region is not None and not region.contains(y0):
        raise ValueError("seed must lie inside the region")
    y, T, _ = _newton(system, lam, y0, T0, np.inf, options)
    base = build_poincare_system(system, y, lam, window=window, region=region)
    p, k = classify_multiplicity(base, system, lam, y, T, options)
    if abs(np.linalg.det(np.eye(base.disc_dim) - _quick_dp(base, system, y, lam, options))) < 1e-6 \
            and _non_isolated(system, lam, y, p, options):
        raise NotFound("periodic orbit is not isolated")
    orbit = _finish_orbit(system, lam, y, p, window, region, options)
    orbit = orbit.with_multiplicity(k)
    if window is not None and not window.contains_period(orbit.period):
        raise WindowRejected(f"period {orbit.period:.6g} outside ({window.a}, {window.b})")
    return orbit


def _quick_dp(psys, system, y, lam, options):
    try:
        return return_map_jacobian(psys, system, y, lam, options=options)
    except EqFullerError:
        return np.zeros((psys.disc_dim, psys.disc_dim))


# -- seed sweeps -------------------------------------------------------------------------

def seed_points(system, window: EssentialWindow, grid_spec=None) -> tuple:
    """(spatial seeds, period seeds) from a grid specification."""
    spec = dict(grid_spec or {})
    dim = system.dim
    region = window.region
    if "points" in spec:
        pts = np.atleast_2d(np.asarray(spec["points"], dtype=float))
    else:
        per_axis = int(spec.get("per_axis", 5))
        n_random = int(spec.get("random", 0 if per_axis ** dim <= 4096 else 32 * dim))
        pts = region.grid(dim, per_axis) if per_axis ** dim <= 4096 else np.zeros((0, dim))
        if n_random:
            rng = np.random.default_rng(int(spec.get("seed", 0)))
            pts = np.concatenate([pts, region.sample(dim, n_random, rng)])
    if "period_seeds" in spec:
        periods = np.asarray(spec["period_seeds"], dtype=float)
    else:
        m = int(spec.get("periods", 8))
        periods = np.exp(np.linspace(np.log(window.a), np.log(window.b), m + 2)[1:-1])
    return pts, periods


class _AlreadyKnown(Exception):
    pass


def _solve_seed(system, lam, window, y0, T0, options, known):
    """Shoot from the seed relaxed along the flow for time a, forwards, then
    backwards, then from the raw seed.

    Relaxing forwards moves far seeds towards attracting orbits so that the
    phase plane through the seed meets them; relaxing backwards does the same
    for repelling orbits.  The raw attempt is kept for saddle-type orbits.
    """
    def check(y):
        if any(orbit_distance(system, lam, o.samples, y, o.minimal_period, options) < 1e-4
               for o in known):
            raise _AlreadyKnown

    starts = []
    for backward in (False, True):
        try:
            y1 = flow(system, y0, window.a, lam, options=COARSE, backward=backward).x_final
            if window.region.contains(y1):
                starts.append(y1)
        except EqFullerError:
            pass
    starts.append(np.asarray(y0, dtype=float))
    for y in starts:
        try:
            y, T, _ = _newton(system, lam, y, T0, 4.0 * window.b, options, on_coarse=check)
            return y, T
        except _AlreadyKnown:
            return None
        except EqFullerError as exc:
            log.debug("seed %s, T0=%.4g: %s", y, T0, exc)
    return None


def sweep_seeds(system, lam, window: EssentialWindow, grid_spec=None, threads: int = 1,
                options: IntegratorOptions = DEFAULT_OPTIONS, known=()) -> list:
    """All essential orbit instances found from the seeds, one per (group-orbit, k)."""
    geometric = find_geometric_orbits(system, lam, window, grid_spec, threads, options, known)
    return essential_instances(geometric, window)


def find_geometric_orbits(system, lam, window: EssentialWindow, grid_spec=None,
                          threads: int = 1, options: IntegratorOptions = DEFAULT_OPTIONS,
                          known=()) -> list:
    """Distinct group-orbits (with k = 1) found from the seeds, known ones first.

    Seeds are shot in chunks (in parallel when ``threads > 1``); classification
    and deduplication run sequentially in seed order after each chunk.  A seed
    whose coarse solution already matches a known orbit is dropped early, which
    never changes the result, so the output does not depend on ``threads``.
    ``known`` supplies geometric orbits found earlier (e.g. by continuation).
    """
    pts, periods = seed_points(system, window, grid_spec)
    seeds = [(y, T) for y in pts for T in periods]
    geometric = [o.with_multiplicity(1) for o in known]
    chunk = max(1, 4 * threads)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for start in range(0, len(seeds), chunk):
            batch = seeds[start:start + chunk]
            snapshot = list(geometric)
            run = lambda sd: _solve_seed(system, lam, window, sd[0], sd[1], options, snapshot)
            solved = list(pool.map(run, batch)) if pool else [run(sd) for sd in batch]
            for sol in solved:
                if sol is not None:
                    _absorb(system, lam, window, sol, geometric, options)
    finally:
        if pool:
            pool.shutdown()
    return geometric


def _absorb(system, lam, window, sol, geometric, options):
    y, T = sol
    if any(orbit_distance(system, lam, o.samples, y, o.minimal_period, options) < DEDUP_TOL
           for o in geometric):
        return
    try:
        orbit = geometric_orbit(system, lam, y, T, window, options)
    except EqFullerError as exc:
        log.debug("dropping candidate at %s: %s", y, exc)
        return
    if any(orbit_distance(system, lam, o.samples, orbit.anchor, o.minimal_period,
                          options) < DEDUP_TOL for o in geometric):
        return
    geometric.append(orbit)


def geometric_orbit(system, lam, y, T, window, options=DEFAULT_OPTIONS,
                    check_region=True) -> PeriodicOrbit:
    """Classify a converged shooting solution and move it to its canonical anchor."""
    region = window.region if window is not None else None
    base = build_poincare_system(system, y, lam, window=window, region=region)
    p, _ = classify_multiplicity(base, system, lam, y, T, options)
    if abs(np.linalg.det(np.eye(base.disc_dim) - _quick_dp(base, system, y, lam, options))) < 1e-6 \
            and _non_isolated(system, lam, y, p, options):
        raise NotFound("periodic orbit is not isolated")
    x = canonical_anchor(system, lam, y, p, options)
    x, p, _ = _newton(system, lam, x, p, np.inf, options)
    return _finish_orbit(system, lam, x, p, window, region, options,
                         check_region=check_region)


def essential_instances(geometric, window) -> list:
    """Expand geometric orbits into their multiples k*p inside (a, b), sorted."""
    out = []
    for o in geometric:
        k_lo = int(np.floor(window.a / o.minimal_period)) + 1
        k_hi = int(np.ceil(window.b / o.minimal_period)) - 1
        for k in range(max(1, k_lo), k_hi + 1):
            if not window.contains_period(k * o.minimal_period):
                continue
            inst = o.with_multiplicity(k)
            T = inst.period
            if min(T - window.a, window.b - T) < BOUNDARY_TOL:
                inst.warnings.append("period within 1e-3 of the window boundary")
            out.append(inst)
    out.sort(key=sort_key)
    return out


def sort_key(orbit):
    return (round(orbit.minimal_period, 6), tuple(np.round(-orbit.anchor, 6)),
            orbit.multiplicity)


def boundary_warnings(orbits) -> list:
    out = []
    for o in orbits:
        for w in o.warnings:
            out.append(f"orbit p={o.minimal_period:.6g} k={o.multiplicity}: {w}")
    return out


def orbits_to_json(orbits) -> list:
    return [o.to_json() for o in orbits]


def orbits_to_csv(orbits) -> str:
    buf = io.StringIO()
    if not orbits:
        return ""
    dim = orbits[0].anchor.size
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(dim)] + ["p", "T", "k", "isotropy", "hops",
                                                "mult_abs_max", "residual", "degenerate"])
    for o in orbits:
        mu = o.multipliers
        w.writerow([f"{v:.12g}" for v in o.anchor] + [
            f"{o.minimal_period:.12g}", f"{o.period:.12g}", o.multiplicity,
            o.psys.action.group.lattice.name(o.isotropy), o.hops,
            f"{np.max(np.abs(mu)) if mu.size else 0.0:.12g}", f"{o.residual:.3g}",
            int(o.degenerate)])
    return buf.getvalue()
