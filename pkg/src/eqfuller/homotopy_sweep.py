"""Continuation of orbit branches across a one-parameter family, and the
invariance check for the Fuller index along it.

Orbits are followed by natural-parameter continuation on a grid in lambda.
Between grid points every branch is tested for sign changes of its stratum
determinants det(I - DP^n), for periods k*p crossing a window end and for
the orbit touching the region boundary; each change is bracketed by
bisection.  The grid is re-seeded periodically so branches that appear are
picked up, and such branches are continued backwards to their origin.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .dynamics import DEFAULT_OPTIONS
from .errors import (ContinuationStall, DegenerateField, DegenerateFixedPoint,
                     EqFullerError, Inadmissible, InvarianceViolation)
from .fixed_point_index import TOL_DET, equivariant_index_of_points
from .fuller_index import (PoincareDiscMap, fuller_from_orbits, iterate_index_sum,
                           iterate_terms)
from .periodic_orbits import (_newton, essential_instances, find_geometric_orbits,
                              geometric_orbit, orbit_distance)
from .regions import EssentialWindow
from .tomdieck import TomDieckVector

log = logging.getLogger(__name__)

BRACKET_TOL = 1e-4
RESEED_EVERY = 10
FOLD_DET = 0.05


@dataclass
class Branch:
    branch_id: int
    isotropy: int
    samples: dict = field(default_factory=dict)      # grid index -> orbit
    start_status: str = "boundary_of_[0,1]"
    end_status: str = "boundary_of_[0,1]"

    def indices(self):
        return sorted(self.samples)

    def last(self):
        return self.samples[max(self.samples)]


@dataclass
class BifurcationEvent:
    lam_lo: float
    lam_hi: float
    kind: str
    branches_in: list
    branches_out: list
    details: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.lam_hi - self.lam_lo

    def to_json(self) -> dict:
        return {"bracket": [self.lam_lo, self.lam_hi], "kind": self.kind,
                "branches_in": list(self.branches_in), "branches_out": list(self.branches_out),
                "details": self.details}


@dataclass
class TraceEntry:
    lam: float
    index: Optional[TomDieckVector]
    note: str = ""

    @property
    def regular(self) -> bool:
        return self.index is not None

    def to_json(self) -> dict:
        return {"lambda": self.lam,
                "index": None if self.index is None else self.index.to_json(),
                "note": self.note}


@dataclass
class SweepResult:
    name: str
    window: tuple
    grid: np.ndarray
    branches: list
    events: list
    trace: list
    admissible: bool = True
    violations: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    lattice: object = None

    def to_json(self) -> dict:
        return {"family": self.name, "window": list(self.window),
                "grid": [float(v) for v in self.grid],
                "admissible": self.admissible, "violations": list(self.violations),
                "events": [e.to_json() for e in self.events],
                "trace": [t.to_json() for t in self.trace],
                "certificates": self.certificates,
                "branches": [{"id": b.branch_id,
                              "isotropy": self.lattice.name(b.isotropy) if self.lattice else
                              b.isotropy,
                              "lambda_range": [float(self.grid[min(b.samples)]),
                                               float(self.grid[max(b.samples)])]
                              if b.samples else None,
                              "start": b.start_status, "end": b.end_status}
                             for b in self.branches]}

    def branches_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        dim = max((_anchor(b.last()).size for b in self.branches if b.samples), default=0)
        w.writerow(["branch", "lambda"] + [f"x{i}" for i in range(dim)]
                   + ["p", "k", "isotropy", "mu1_abs", "mu2_abs", "det_per_stratum"])
        for b in self.branches:
            for i in b.indices():
                o = b.samples[i]
                mu = np.sort(np.abs(o.multipliers))[::-1] if hasattr(o, "multipliers") \
                    else np.abs(np.linalg.eigvals(o.jac))
                mu = list(mu[:2]) + [np.nan] * (2 - min(2, mu.size))
                w.writerow([b.branch_id, f"{self.grid[i]:.10g}"]
                           + [f"{v:.10g}" for v in _anchor(o)]
                           + [f"{_period(o):.10g}", 1,
                              self.lattice.name(b.isotropy) if self.lattice else b.isotropy]
                           + [f"{v:.6g}" for v in mu]
                           + [" ".join(f"{d:.6g}" for d in _dets(o))])
        return buf.getvalue()


def _anchor(o):
    return o.anchor if hasattr(o, "anchor") else o.u


def _period(o):
    return o.minimal_period if hasattr(o, "minimal_period") else o.n


def _dets(o):
    if hasattr(o, "strata"):
        return [s.det for s in o.strata]
    return [o.det(1)]


def default_grid(n: int = 101, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    return np.linspace(lo, hi, n)


def predicted_branch_dimension(s: int, dim_M_H: int = 0, dim_P_H: Optional[int] = None) -> int:
    """Expected dimension s - dim M^H + dim P^H of the H-fixed solution set.

    For a return map of an equivariant disc into itself both fixed spaces are
    the disc's H-fixed space, and the prediction reduces to ``s``.  A negative
    value means no fixed points of that type are expected generically.
    """
    if dim_P_H is None:
        dim_P_H = dim_M_H
    return int(s) - int(dim_M_H) + int(dim_P_H)


def disc_branch_dimension(psys, subgroup, s: int) -> int:
    """Prediction for a Poincare map of ``psys`` and a subgroup of its isotropy."""
    from .fixed_point_index import disc_fixed_basis
    d = disc_fixed_basis(psys.disc_action_matrices(), subgroup).shape[1]
    return predicted_branch_dimension(s, d, d)


# -- flow families -------------------------------------------------------------------------

def _signature(orbit, window):
    """Discrete features of an orbit whose change marks an event."""
    sig = {}
    n_max = max(1, int(np.floor(window.b / orbit.minimal_period)) + 1)
    for n in range(1, n_max + 1):
        inst = orbit.with_multiplicity(n)
        for sd in inst.strata:
            sig[("det", sd.subgroup, n)] = int(np.sign(sd.det))
        T = n * orbit.minimal_period
        sig[("window", n)] = int(window.a < T < window.b)
    sig[("region",)] = int(orbit.region_margin(window.region) > 0)
    sig[("isotropy",)] = orbit.isotropy
    return sig


def _track(system, lam, orbit, window, options=DEFAULT_OPTIONS):
    """Continue a geometric orbit to parameter ``lam``; None if that fails."""
    try:
        y, T, _ = _newton(system, lam, orbit.anchor, orbit.minimal_period, np.inf, options)
        new = geometric_orbit(system, lam, y, T, window, options, check_region=False)
    except EqFullerError as exc:
        log.debug("continuation to %.6g failed: %s", lam, exc)
        return None
    if abs(new.minimal_period - orbit.minimal_period) > 0.25 * orbit.minimal_period:
        return None
    if orbit_distance(system, lam, new.samples, orbit.anchor, new.minimal_period,
                      options) > 0.25 * (1 + np.linalg.norm(orbit.anchor)):
        return None
    return new


def _bisect(step, lo, hi, o_lo, same, tol=BRACKET_TOL):
    """Shrink [lo, hi] around the point where ``same(orbit)`` turns False."""
    o_hi = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        o = step(mid, o_lo)
        if o is not None and same(o):
            lo, o_lo = mid, o
        else:
            hi, o_hi = mid, o
    return lo, hi, o_lo, o_hi


def _classify(key, sig_lo, sig_hi):
    kind = key[0]
    if kind == "window":
        return "window_exit"
    if kind == "region":
        return "region_exit"
    if kind == "isotropy":
        return "other"
    _, sub, n = key
    if n == 1:
        return "fold"
    if n == 2 and sig_lo.get(("det", sub, 1)) == sig_hi.get(("det", sub, 1)):
        return "flip"
    return "other"


def _changed_keys(sig_a, sig_b):
    return sorted((k for k in sig_a if k in sig_b and sig_a[k] != sig_b[k]), key=str)


def sweep_family(family, window: EssentialWindow, lam_grid=None, grid_spec=None,
                 threads: int = 1, reseed_every: int = RESEED_EVERY,
                 bracket_tol: float = BRACKET_TOL, options=DEFAULT_OPTIONS) -> SweepResult:
    """Follow all orbit branches of a one-parameter family over ``lam_grid``."""
    if family.param_dim != 1:
        raise ValueError("sweep_family needs a one-parameter family")
    grid = default_grid() if lam_grid is None else np.asarray(lam_grid, dtype=float)
    lattice = family.action.group.lattice

    def step(lam, orbit):
        return _track(family, lam, orbit, window, options)

    branches = []
    events = []
    for o in find_geometric_orbits(family, grid[0], window, grid_spec, threads, options):
        branches.append(Branch(len(branches), o.isotropy, {0: o}))
    last_seed = 0
    for i in range(1, len(grid)):
        lam = grid[i]
        for br in branches:
            if (i - 1) not in br.samples or br.end_status != "boundary_of_[0,1]":
                continue
            prev = br.samples[i - 1]
            new = step(lam, prev)
            if new is None:
                lo, hi, o_lo, _ = _bisect(step, grid[i - 1], lam, prev, lambda o: True,
                                          bracket_tol)
                det_min = min(abs(s.det) for s in o_lo.strata)
                if det_min < FOLD_DET:
                    kind = "fold"
                elif o_lo.region_margin(window.region) < 1e-2:
                    kind = "region_exit"
                else:
                    raise ContinuationStall(
                        f"branch {br.branch_id} lost in [{lo:.6g}, {hi:.6g}] without a "
                        "recognisable cause")
                br.end_status = "bifurcation" if kind == "fold" else kind
                events.append(BifurcationEvent(lo, hi, kind, [br.branch_id], [],
                                               {"det_min": det_min}))
                continue
            br.samples[i] = new
            events.extend(_pair_events(step, br, grid[i - 1], lam, prev, new, window,
                                       bracket_tol))
        if i - last_seed >= reseed_every or i == len(grid) - 1:
            current = [b.samples[i] for b in branches if i in b.samples]
            found = find_geometric_orbits(family, lam, window, grid_spec, threads, options,
                                          known=current)
            for o in found[len(current):]:
                br = Branch(len(branches), o.isotropy, {i: o})
                branches.append(br)
                _extend_backwards(step, br, grid, i, window, events, bracket_tol)
            last_seed = i
    trace = [_trace_entry(lattice, grid, j, branches, window) for j in range(len(grid))]
    result = SweepResult(family.name, (window.a, window.b), grid, branches, events, trace,
                         lattice=lattice)
    _assess(result, family, window)
    return result


def _pair_events(step, br, lam0, lam1, o0, o1, window, tol):
    sig0, sig1 = _signature(o0, window), _signature(o1, window)
    out = []
    for key in _changed_keys(sig0, sig1):
        target = sig0[key]

        def same(o, key=key, target=target):
            return _signature(o, window).get(key) == target

        lo, hi, o_lo, o_hi = _bisect(step, lam0, lam1, o0, same, tol)
        kind = _classify(key, sig0, sig1)
        details = {"feature": [str(v) for v in key]}
        out.append(BifurcationEvent(lo, hi, kind, [br.branch_id], [br.branch_id], details))
    return out


def _extend_backwards(step, br, grid, i, window, events, tol):
    """Continue a newly found branch towards smaller lambda until it disappears."""
    j = i
    while j > 0:
        prev = step(grid[j - 1], br.samples[j])
        if prev is None:
            lo, hi, _, _ = _bisect_reverse(step, grid[j - 1], grid[j], br.samples[j], tol)
            br.start_status = "bifurcation"
            det_min = min(abs(s.det) for s in br.samples[j].strata)
            events.append(BifurcationEvent(lo, hi, "fold" if det_min < FOLD_DET else "other",
                                           [], [br.branch_id], {"det_min": det_min}))
            return
        br.samples[j - 1] = prev
        events.extend(_pair_events(step, br, grid[j - 1], grid[j], prev, br.samples[j],
                                   window, tol))
        j -= 1
    br.start_status = "boundary_of_[0,1]"


def _bisect_reverse(step, lo, hi, o_hi, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        o = step(mid, o_hi)
        if o is not None:
            hi, o_hi = mid, o
        else:
            lo = mid
    return lo, hi, None, o_hi


def _trace_entry(lattice, grid, j, branches, window):
    orbits = [b.samples[j] for b in branches if j in b.samples]
    inside = [o for o in orbits if o.region_margin(window.region) > 0]
    try:
        res = fuller_from_orbits(lattice, essential_instances(inside, window), window)
    except (DegenerateField, DegenerateFixedPoint) as exc:
        return TraceEntry(float(grid[j]), None, f"degenerate: {exc}")
    return TraceEntry(float(grid[j]), res.index)


def _assess(result, family, window):
    for e in result.events:
        if e.kind in ("window_exit", "region_exit"):
            result.admissible = False
            result.violations.append(
                f"{e.kind} in [{e.lam_lo:.6g}, {e.lam_hi:.6g}]")
    for j, b in ((j, b) for b in result.branches for j in b.indices()):
        o = b.samples[j]
        if 0 < o.region_margin(window.region) < 1e-3:
            result.admissible = False
            result.violations.append(f"orbit within 1e-3 of the region boundary at "
                                     f"lambda={result.grid[j]:.6g}")
    for e in result.events:
        if e.kind != "flip" or not result.admissible:
            continue
        result.certificates.append(_flow_flip_certificate(family, result, e, window))


def _flow_flip_certificate(family, result, event, window):
    br = result.branches[event.branches_in[0]]
    lo_i = max(j for j in br.indices() if result.grid[j] <= event.lam_lo)
    hi_i = min(j for j in br.indices() if result.grid[j] >= event.lam_hi)
    sums = []
    for j in (lo_i, hi_i):
        o = br.samples[j]
        dmap = PoincareDiscMap(o.psys, family, result.grid[j])
        sums.append(iterate_index_sum(dmap, o.minimal_period, (window.a, window.b)))
    return {"bracket": [event.lam_lo, event.lam_hi], "below": sums[0].to_json(),
            "above": sums[1].to_json(), "equal": sums[0] == sums[1],
            "_values": sums}


# -- map harness families -------------------------------------------------------------------

@dataclass
class MapPoint:
    """A periodic point of minimal period n of a harness map."""
    u: np.ndarray
    n: int
    jac: np.ndarray           # derivative of the n-th iterate

    def det(self, m: int) -> float:
        J = np.linalg.matrix_power(self.jac, m)
        return float(np.linalg.det(np.eye(J.shape[0]) - J))


def _map_points(harness, window):
    """Representatives of periodic-point orbits with n inside the window, by minimal n."""
    a, b = window
    out = []
    for n in range(1, int(np.floor(b)) + 1):
        for fp in harness.fixed_points(n):
            if any(_same_cycle(harness, fp.u, q) for q in out):
                continue
            out.append(MapPoint(fp.u, n, fp.jac))
    return out


def _same_cycle(harness, u, q, tol=1e-7):
    v = q.u
    for _ in range(q.n):
        if np.linalg.norm(v - u) < tol:
            return True
        v = harness(v)
    return False


def _track_point(harness, lam, point):
    h = harness.at(lam)
    u = h._newton(point.u, point.n)
    if u is None or np.linalg.norm(u) >= h.radius_Dp:
        return None
    if np.linalg.norm(u - point.u) > 0.1:
        return None
    return MapPoint(u, point.n, h.jacobian(u, point.n))


def _map_signature(point, window):
    m_max = int(np.floor(window[1] / point.n))
    return {("det", m * point.n): int(np.sign(point.det(m))) for m in range(1, m_max + 1)}


def sweep_map_family(harness, window, lam_grid, bracket_tol: float = BRACKET_TOL) -> SweepResult:
    """Continuation and iterate sums for a harness map family; the period unit is one iterate."""
    grid = np.asarray(lam_grid, dtype=float)
    lattice = harness.geometry.lattice
    branches = []
    events = []
    trace = []
    appearances = []

    def step(lam, point):
        return _track_point(harness, lam, point)

    for i, lam in enumerate(grid):
        h = harness.at(lam)
        try:
            pts = _map_points(h, window)
        except DegenerateFixedPoint:
            pts = []
        for br in branches:
            if (i - 1) not in br.samples:
                continue
            prev = br.samples[i - 1]
            new = step(lam, prev)
            if new is None:
                br.end_status = "bifurcation"
                continue
            br.samples[i] = new
            sig0, sig1 = _map_signature(prev, window), _map_signature(new, window)
            for key in _changed_keys(sig0, sig1):
                if sig1[key] == 0:
                    continue
                target = sig0[key]
                if target == 0:
                    continue
                lo, hi, _, _ = _bisect(step, grid[i - 1], lam, prev,
                                       lambda o, key=key, t=target:
                                       _map_signature(o, window).get(key) == t, bracket_tol)
                m = key[1] // prev.n
                kind = "fold" if m == 1 else (
                    "flip" if m == 2 and sig0.get(("det", prev.n)) == sig1.get(("det", prev.n))
                    else "other")
                events.append(BifurcationEvent(lo, hi, kind, [br.branch_id], [br.branch_id],
                                               {"iterate": key[1]}))
        for p in pts:
            if any(i in b.samples and b.samples[i].n == p.n and
                   _same_cycle(h, p.u, b.samples[i]) for b in branches):
                continue
            br = Branch(len(branches), 0, {i: p},
                        start_status="boundary_of_[0,1]" if i == 0 else "bifurcation")
            branches.append(br)
            if i > 0:
                appearances.append((br.branch_id, grid[i - 1], lam))
        try:
            idx = iterate_index_sum(h, 1.0, window)
            trace.append(TraceEntry(float(lam), idx))
        except DegenerateFixedPoint as exc:
            trace.append(TraceEntry(float(lam), None, f"degenerate: {exc}"))
    _merge_degenerate_flips(events, branches, grid, trace, harness, window, bracket_tol)
    for bid, lam_prev, lam in appearances:
        if _attach_to_flip(events, lam, lam_prev, bid) is None:
            events.append(BifurcationEvent(lam_prev, lam, "other", [], [bid], {}))
    result = SweepResult("map_harness", tuple(window), grid, branches, events, trace,
                         lattice=lattice)
    for e in result.events:
        if e.kind == "flip":
            result.certificates.append(_map_flip_certificate(harness, e, window))
    return result


def _attach_to_flip(events, lam, lam_prev, branch_id):
    reach = lam_prev - (lam - lam_prev)
    for e in events:
        if e.kind == "flip" and e.lam_hi >= reach and e.lam_lo <= lam:
            e.branches_out.append(branch_id)
            return e
    return None


def _merge_degenerate_flips(events, branches, grid, trace, harness, window, tol):
    """A flip exactly on a grid point shows as a degenerate trace entry; bracket it there.

    The branch signature is compared across the degenerate grid point, between
    its regular neighbours.
    """
    for j, entry in enumerate(trace):
        if entry.regular or j == 0 or j == len(trace) - 1:
            continue
        if not (trace[j - 1].regular and trace[j + 1].regular):
            continue
        if any(e.lam_lo >= grid[j - 1] and e.lam_hi <= grid[j + 1]
               for e in events if e.kind == "flip"):
            continue
        for br in branches:
            if (j - 1) not in br.samples or (j + 1) not in br.samples:
                continue
            p0, p1 = br.samples[j - 1], br.samples[j + 1]
            sig0, sig1 = _map_signature(p0, window), _map_signature(p1, window)
            for key in _changed_keys(sig0, sig1):
                m = key[1] // p0.n
                if m != 2 or sig0.get(("det", p0.n)) != sig1.get(("det", p0.n)):
                    continue
                t = sig0[key]
                lo, hi, _, _ = _bisect(lambda lam, o: _track_point(harness, lam, o),
                                       grid[j - 1], grid[j + 1], p0,
                                       lambda o, key=key, t=t:
                                       _map_signature(o, window).get(key) == t, tol)
                events.append(BifurcationEvent(lo, hi, "flip", [br.branch_id], [],
                                               {"iterate": key[1]}))
    events.sort(key=lambda e: (e.lam_lo, e.kind))


def _regular_sum(evaluate, lam, direction, width, tries=10):
    """Iterate sum at ``lam``, stepping outwards by ``width`` past degenerate values."""
    for i in range(tries):
        at = lam + direction * i * width
        try:
            return at, evaluate(at)
        except DegenerateFixedPoint:
            continue
    raise DegenerateFixedPoint(f"no regular parameter near {lam:.6g}", None)


def _map_flip_certificate(harness, event, window):
    evaluate = lambda lam: iterate_index_sum(harness.at(lam), 1.0, window)
    width = max(event.width, BRACKET_TOL)
    lo, below = _regular_sum(evaluate, event.lam_lo, -1, width)
    hi, above = _regular_sum(evaluate, event.lam_hi, +1, width)
    return {"bracket": [event.lam_lo, event.lam_hi], "evaluated_at": [lo, hi],
            "below": below.to_json(), "above": above.to_json(), "equal": below == above,
            "_values": [below, above]}


# -- verdict ----------------------------------------------------------------------------------

def verify_invariance(result: SweepResult) -> dict:
    """Check that the index trace is constant and every flip certificate balances."""
    if not result.admissible:
        raise Inadmissible("homotopy is not admissible: " + "; ".join(result.violations))
    regular = [t for t in result.trace if t.regular]
    if not regular:
        raise InvarianceViolation("no regular parameter value in the trace", None, None, None)
    ref = regular[0]
    for prev, cur in zip(regular, regular[1:]):
        if cur.index != prev.index:
            raise InvarianceViolation(
                f"index changes between lambda={prev.lam:.6g} and {cur.lam:.6g}",
                (prev.lam, cur.lam), prev.index, cur.index)
    for cert in result.certificates:
        below, above = cert["_values"]
        if below != above:
            raise InvarianceViolation(
                f"iterate sums differ across the flip in {cert['bracket']}",
                tuple(cert["bracket"]), below, above)
    return {"verdict": "pass", "index": ref.index.to_json(),
            "regular_points": len(regular), "events": len(result.events),
            "certificates": [{k: v for k, v in c.items() if not k.startswith("_")}
                             for c in result.certificates]}
