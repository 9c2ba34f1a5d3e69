"""Equivariant vector fields: the system wrapper and the builtin catalogue.

A field is ``rhs(x, p) -> R^n`` with a flat parameter vector ``p``; the
wrapper maps the homotopy/continuation parameter ``lam`` (length
``param_dim``) to ``p``.  Builtin fields and Jacobians are jitted so the
integrator runs compiled.  Library users may pass plain Python callables;
those run on the pure-numpy integrator path.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._jit import is_jitted, jit
from .errors import ConfigError
from .group_theory import (OrthogonalAction, antipodal_action, cyclic_shift_action,
                           reflection_action, trivial_action, trivial_group)


def _fd_jacobian(rhs):
    def jac(x, p):
        n = x.shape[0]
        J = np.empty((n, n))
        for j in range(n):
            h = 1e-6 * max(1.0, abs(x[j]))
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (rhs(xp, p) - rhs(xm, p)) / (2 * h)
        return J
    return jac


@dataclass(frozen=True, eq=False)
class VectorFieldSystem:
    action: OrthogonalAction
    rhs: Callable
    jac: Optional[Callable] = None
    param_dim: int = 0
    name: str = "custom"
    param_map: Optional[Callable] = None
    default_lam: tuple = ()
    escape_radius: float = 1e3
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.jac is None:
            object.__setattr__(self, "jac", _fd_jacobian(self.rhs))
        if not self.default_lam:
            object.__setattr__(self, "default_lam", (0.0,) * self.param_dim)

    @property
    def dim(self) -> int:
        return self.action.dim

    @property
    def compiled(self) -> bool:
        return is_jitted(self.rhs) and is_jitted(self.jac)

    def lam_vector(self, lam=None) -> np.ndarray:
        if lam is None:
            lam = self.default_lam
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if lam.size != self.param_dim:
            raise ValueError(f"{self.name} expects {self.param_dim} parameters, got {lam.size}")
        return lam

    def params(self, lam=None) -> np.ndarray:
        lam = self.lam_vector(lam)
        if self.param_map is None:
            return np.ascontiguousarray(lam, dtype=float)
        return np.ascontiguousarray(self.param_map(lam), dtype=float)

    def __call__(self, x, lam=None) -> np.ndarray:
        return np.asarray(self.rhs(np.ascontiguousarray(x, dtype=float), self.params(lam)))

    def jacobian(self, x, lam=None) -> np.ndarray:
        return np.asarray(self.jac(np.ascontiguousarray(x, dtype=float), self.params(lam)))


# -- field kernels ------------------------------------------------------------
# planar normal form: x' = x(mu - r^2) - w y, y' = y(mu - r^2) + w x;  p = [mu, w]

@jit
def planar_hopf_rhs(x, p):
    mu, w = p[0], p[1]
    g = mu - x[0] * x[0] - x[1] * x[1]
    out = np.empty(2)
    out[0] = x[0] * g - w * x[1]
    out[1] = x[1] * g + w * x[0]
    return out


@jit
def planar_hopf_jac(x, p):
    mu, w = p[0], p[1]
    g = mu - x[0] * x[0] - x[1] * x[1]
    J = np.empty((2, 2))
    J[0, 0] = g - 2 * x[0] * x[0]
    J[0, 1] = -2 * x[0] * x[1] - w
    J[1, 0] = -2 * x[0] * x[1] + w
    J[1, 1] = g - 2 * x[1] * x[1]
    return J


# two nested cycles: r' = eps r (1 - r^2)(a^2 - r^2), theta' = 1;  p = [eps, a]
@jit
def two_cycles_rhs(x, p):
    eps, a = p[0], p[1]
    r2 = x[0] * x[0] + x[1] * x[1]
    g = eps * (1.0 - r2) * (a * a - r2)
    out = np.empty(2)
    out[0] = x[0] * g - x[1]
    out[1] = x[1] * g + x[0]
    return out


@jit
def two_cycles_jac(x, p):
    eps, a = p[0], p[1]
    r2 = x[0] * x[0] + x[1] * x[1]
    g = eps * (1.0 - r2) * (a * a - r2)
    dg = eps * (2.0 * r2 - 1.0 - a * a)  # d g / d(r^2)
    J = np.empty((2, 2))
    J[0, 0] = g + 2 * x[0] * x[0] * dg
    J[0, 1] = 2 * x[0] * x[1] * dg - 1.0
    J[1, 0] = 2 * x[0] * x[1] * dg + 1.0
    J[1, 1] = g + 2 * x[1] * x[1] * dg
    return J


# cycle in the reflection-fixed plane z = 0;  p = [mu, coupling]
@jit
def axis_z2_rhs(x, p):
    mu, c = p[0], p[1]
    g = mu - x[0] * x[0] - x[1] * x[1]
    out = np.empty(3)
    out[0] = x[0] * g - x[1] + c * x[2] * x[2]
    out[1] = x[1] * g + x[0]
    out[2] = -x[2] * (1.0 + 0.5 * x[0])
    return out


@jit
def axis_z2_jac(x, p):
    mu, c = p[0], p[1]
    g = mu - x[0] * x[0] - x[1] * x[1]
    J = np.zeros((3, 3))
    J[0, 0] = g - 2 * x[0] * x[0]
    J[0, 1] = -2 * x[0] * x[1] - 1.0
    J[0, 2] = 2 * c * x[2]
    J[1, 0] = -2 * x[0] * x[1] + 1.0
    J[1, 1] = g - 2 * x[1] * x[1]
    J[2, 0] = -0.5 * x[2]
    J[2, 2] = -(1.0 + 0.5 * x[0])
    return J


# van der Pol: x' = y, y' = mu (1 - x^2) y - x;  p = [mu]
@jit
def vdp_rhs(x, p):
    out = np.empty(2)
    out[0] = x[1]
    out[1] = p[0] * (1.0 - x[0] * x[0]) * x[1] - x[0]
    return out


@jit
def vdp_jac(x, p):
    J = np.empty((2, 2))
    J[0, 0] = 0.0
    J[0, 1] = 1.0
    J[1, 0] = -2.0 * p[0] * x[0] * x[1] - 1.0
    J[1, 1] = p[0] * (1.0 - x[0] * x[0])
    return J


# ring of m Hopf oscillators z_j' = (alpha + i w) z_j - |z_j|^2 z_j + c (z_{j+1} - z_j)
# state (Re z_0, Im z_0, Re z_1, ...);  p = [alpha, w, c]
@jit
def ring_rhs(x, p):
    alpha, w, c = p[0], p[1], p[2]
    m = x.shape[0] // 2
    out = np.empty(x.shape[0])
    for j in range(m):
        a = x[2 * j]
        b = x[2 * j + 1]
        k = (j + 1) % m
        r2 = a * a + b * b
        out[2 * j] = (alpha - r2) * a - w * b + c * (x[2 * k] - a)
        out[2 * j + 1] = (alpha - r2) * b + w * a + c * (x[2 * k + 1] - b)
    return out


@jit
def ring_jac(x, p):
    alpha, w, c = p[0], p[1], p[2]
    m = x.shape[0] // 2
    J = np.zeros((x.shape[0], x.shape[0]))
    for j in range(m):
        a = x[2 * j]
        b = x[2 * j + 1]
        k = (j + 1) % m
        r2 = a * a + b * b
        J[2 * j, 2 * j] = alpha - r2 - 2 * a * a - c
        J[2 * j, 2 * j + 1] = -2 * a * b - w
        J[2 * j + 1, 2 * j] = -2 * a * b + w
        J[2 * j + 1, 2 * j + 1] = alpha - r2 - 2 * b * b - c
        J[2 * j, 2 * k] += c
        J[2 * j + 1, 2 * k + 1] += c
    return J


# linear field x' = A x with A stored row-major in p
@jit
def linear_rhs(x, p):
    n = x.shape[0]
    return np.dot(p[:n * n].copy().reshape((n, n)), x)


@jit
def linear_jac(x, p):
    n = x.shape[0]
    return p[:n * n].copy().reshape((n, n))


# -- catalogue ----------------------------------------------------------------

def _const(*values):
    vals = np.array(values, dtype=float)

    def pm(lam):
        return vals
    return pm


def _group_action(kind, dim):
    kind = (kind or "trivial").lower()
    if kind == "trivial":
        return trivial_action(trivial_group(), dim)
    if kind == "antipodal":
        return antipodal_action(dim)
    if kind == "reflection":
        return reflection_action(dim)
    raise ConfigError(f"unknown action {kind!r}")


def hopf(group="trivial", mu=1.0, omega=1.0):
    return VectorFieldSystem(_group_action(group, 2), planar_hopf_rhs, planar_hopf_jac, 0,
                             "hopf" if group == "trivial" else f"hopf_{group}",
                             _const(mu, omega))


def hopf_z2():
    """Odd planar Hopf field under the antipodal Z2 action."""
    s = hopf("antipodal")
    return VectorFieldSystem(s.action, s.rhs, s.jac, 0, "hopf_z2", s.param_map)


def hopf_param(group="antipodal", offset=0.0, scale=1.0):
    """r' = r(mu - r^2), theta' = 1 with mu = offset + scale*lam; one parameter."""
    default = ((1.0 - offset) / scale,)
    return VectorFieldSystem(_group_action(group, 2), planar_hopf_rhs, planar_hopf_jac, 1,
                             "hopf_param",
                             lambda lam: np.array([offset + scale * lam[0], 1.0]), default)


def hopf_detune(group="antipodal", slope=0.3):
    """Unit Hopf cycle whose angular speed is 1 - slope*lam (period grows with lam)."""
    return VectorFieldSystem(_group_action(group, 2), planar_hopf_rhs, planar_hopf_jac, 1,
                             "hopf_detune",
                             lambda lam: np.array([1.0, 1.0 - slope * lam[0]]), (0.0,))


def axis_z2(coupling=0.1):
    return VectorFieldSystem(reflection_action(3), axis_z2_rhs, axis_z2_jac, 0, "axis_z2",
                             _const(1.0, coupling))


def vdp(group="trivial", mu=1.0):
    return VectorFieldSystem(_group_action(group, 2), vdp_rhs, vdp_jac, 0,
                             "vdp" if group == "trivial" else f"vdp_{group}", _const(mu))


def ring_zn(n=3, alpha=1.0, omega=1.0, coupling=0.1):
    if not 2 <= n <= 4:
        raise ConfigError("ring_zn supports 2 <= n <= 4")
    return VectorFieldSystem(cyclic_shift_action(n, 2), ring_rhs, ring_jac, 0, f"ring_z{n}",
                             _const(alpha, omega, coupling))


def two_cycles(group="antipodal", eps=0.02, outer=2.0):
    """Attracting cycle at r=1, repelling cycle at r=outer, both of period 2pi."""
    return VectorFieldSystem(_group_action(group, 2), two_cycles_rhs, two_cycles_jac, 0,
                             "two_cycles", _const(eps, outer))


def two_cycles_moving(group="antipodal", eps=0.02):
    """two_cycles family with outer radius 2 + 0.25*lam."""
    return VectorFieldSystem(_group_action(group, 2), two_cycles_rhs, two_cycles_jac, 1,
                             "two_cycles_moving",
                             lambda lam: np.array([eps, 2.0 + 0.25 * lam[0]]), (0.0,))


def linear(A, action=None, name="linear"):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if action is None:
        action = trivial_action(trivial_group(), n)
    return VectorFieldSystem(action, linear_rhs, linear_jac, 0, name, _const(*A.ravel()))


def rotation_center(group="trivial"):
    return linear([[0.0, -1.0], [1.0, 0.0]], _group_action(group, 2), "center")


def zero_field(dim=2, group="trivial"):
    return linear(np.zeros((dim, dim)), _group_action(group, dim), "zero")


BUILTINS = {
    "hopf": lambda **kw: hopf(**kw),
    "hopf_z2": lambda **kw: hopf_z2(**kw),
    "hopf_param": lambda **kw: hopf_param(**kw),
    "hopf_detune": lambda **kw: hopf_detune(**kw),
    "axis_z2": lambda **kw: axis_z2(**kw),
    "vdp": lambda **kw: vdp(**kw),
    "ring_zn": lambda **kw: ring_zn(**kw),
    "two_cycles": lambda **kw: two_cycles(**kw),
    "two_cycles_moving": lambda **kw: two_cycles_moving(**kw),
    "center": lambda **kw: rotation_center(**kw),
}


def builtin_system(name: str, **options) -> VectorFieldSystem:
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin system {name!r}; choose from {sorted(BUILTINS)}")
    try:
        return BUILTINS[name](**options)
    except TypeError as exc:
        raise ConfigError(f"bad options for {name}: {exc}") from None


# -- equivariant perturbations -----------------------------------------------

def _make_perturbed(base_rhs, base_jac):
    @jit
    def rhs(x, p):
        # p = [n_base, base..., eps, |G|, mats..., c(n), A(n*n)]
        nb = int(p[0])
        base = p[1:1 + nb].copy()
        eps = p[1 + nb]
        ng = int(p[2 + nb])
        n = x.shape[0]
        off = 3 + nb
        mats = p[off:off + ng * n * n].copy().reshape((ng, n, n))
        off += ng * n * n
        c = p[off:off + n].copy()
        A = p[off + n:off + n + n * n].copy().reshape((n, n))
        out = base_rhs(x, base)
        pert = np.zeros(n)
        for g in range(ng):
            M = np.ascontiguousarray(mats[g])
            y = np.dot(M, x)
            q = c + np.dot(A, y) + np.sin(y)
            pert += np.dot(M.T.copy(), q)
        return out + eps * pert / ng

    @jit
    def jac(x, p):
        nb = int(p[0])
        base = p[1:1 + nb].copy()
        eps = p[1 + nb]
        ng = int(p[2 + nb])
        n = x.shape[0]
        off = 3 + nb
        mats = p[off:off + ng * n * n].copy().reshape((ng, n, n))
        off += ng * n * n
        A = p[off + n:off + n + n * n].copy().reshape((n, n))
        J = base_jac(x, base)
        dp = np.zeros((n, n))
        for g in range(ng):
            M = np.ascontiguousarray(mats[g])
            y = np.dot(M, x)
            Dq = A + np.diag(np.cos(y))
            dp += np.dot(M.T.copy(), np.dot(Dq, M))
        return J + eps * dp / ng

    return rhs, jac


_PERTURBED_CACHE = {}


def perturb(system: VectorFieldSystem, eps: float, seed: int = 0,
            scale: float = 3.0) -> VectorFieldSystem:
    """Add ``eps`` times a G-equivariant field of sup-norm <= 1 on the box [-scale, scale]^n.

    The perturbation is the group average of ``x -> c + A x + sin(x)`` with
    seeded random ``c, A``; the sup-norm bound is enforced on a sample grid.
    """
    rng = np.random.default_rng(seed)
    n = system.dim
    c = rng.normal(size=n)
    A = rng.normal(size=(n, n)) / (n * scale)
    mats = system.action.matrices

    def raw(x):
        tot = np.zeros(n)
        for M in mats:
            y = M @ x
            tot += M.T @ (c + A @ y + np.sin(y))
        return tot / len(mats)

    samples = rng.uniform(-scale, scale, size=(2000, n))
    sup = max(np.max(np.abs(raw(x))) for x in samples)
    norm = 1.0 / (1.25 * sup) if sup > 0 else 1.0
    key = (system.rhs, system.jac)
    if key not in _PERTURBED_CACHE:
        _PERTURBED_CACHE[key] = _make_perturbed(system.rhs, system.jac)
    prhs, pjac = _PERTURBED_CACHE[key]
    base_map = system.params
    flat_mats = np.ascontiguousarray(mats).ravel()
    eps_eff = float(eps) * norm

    def pm(lam):
        base = base_map(lam)
        return np.concatenate([[float(base.size)], base, [eps_eff, float(len(mats))],
                               flat_mats, c, A.ravel()])

    return VectorFieldSystem(system.action, prhs, pjac, system.param_dim,
                             f"{system.name}+pert({eps:g})", pm, system.default_lam,
                             system.escape_radius, {"perturbation_eps": eps, "seed": seed})
