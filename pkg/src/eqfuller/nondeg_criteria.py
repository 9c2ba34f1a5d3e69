"""Closed-form non-degeneracy tests for two symmetric model families.

* Z2 acting on R by v -> -v, maps f(v, lam) = v * h(v, lam): the trivial
  fixed point v = 0 is non-degenerate when h(0, lam) != 1, and the family is
  when h(0, lam) = 1 but the lam-gradient of h(0, .) does not vanish.
* S1 acting on R^2 by rotations, equivariant maps
  f(x, y, lam) = a F1 + b F2 with F1 = (x, y), F2 = (-y, x): at the origin
  the family is non-degenerate when (a, b) != (1, 0), or when the
  s x 2 matrix of lam-derivatives of (a, b) has rank 2, which needs s >= 2.

Derivatives are central differences refined once by Richardson
extrapolation.
"""
import numpy as np

VALUE_TOL = 1e-8
DERIV_TOL = 1e-6

NONDEG_H = "nondeg_via_h_ne_1"
NONDEG_PARAM = "nondeg_via_parameter"
NONDEG_LIN = "nondeg_via_linearization"
NONDEG_RANK2 = "nondeg_via_rank2"
DEGENERATE = "degenerate"


def richardson_gradient(fn, lam0, fd_step=1e-3) -> np.ndarray:
    """Gradient of a scalar function of lam by Richardson-refined central differences."""
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    grad = np.empty(lam0.size)
    for i in range(lam0.size):
        e = np.zeros(lam0.size)
        e[i] = 1.0

        def central(h):
            return (fn(lam0 + h * e) - fn(lam0 - h * e)) / (2 * h)

        grad[i] = (4 * central(fd_step / 2) - central(fd_step)) / 3
    return grad


def z2_nondegenerate(h, lam0, fd_step=1e-3) -> str:
    """Verdict for f(v, lam) = v h(v, lam) at v = 0, lam = lam0."""
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    if abs(float(h(0.0, lam0)) - 1.0) > VALUE_TOL:
        return NONDEG_H
    grad = richardson_gradient(lambda lam: float(h(0.0, lam)), lam0, fd_step)
    if np.linalg.norm(grad) > DERIV_TOL:
        return NONDEG_PARAM
    return DEGENERATE


def s1_nondegenerate(a_fn, b_fn, lam0, s=None, fd_step=1e-3) -> str:
    """Verdict for f = a F1 + b F2 at the origin, lam = lam0 (s parameters)."""
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    s = lam0.size if s is None else int(s)
    a0 = float(a_fn(0.0, 0.0, lam0))
    b0 = float(b_fn(0.0, 0.0, lam0))
    if max(abs(a0 - 1.0), abs(b0)) > VALUE_TOL:
        return NONDEG_LIN
    if s >= 2:
        da = richardson_gradient(lambda lam: float(a_fn(0.0, 0.0, lam)), lam0, fd_step)
        db = richardson_gradient(lambda lam: float(b_fn(0.0, 0.0, lam)), lam0, fd_step)
        M = np.column_stack([da, db])
        for i in range(s):
            for j in range(i + 1, s):
                if abs(M[i, 0] * M[j, 1] - M[j, 0] * M[i, 1]) > DERIV_TOL:
                    return NONDEG_RANK2
    return DEGENERATE


def _newton_1d(g, dg, x, iters=50, tol=1e-12):
    for _ in range(iters):
        d = dg(x)
        if abs(d) <= VALUE_TOL:
            return None
        step = g(x) / d
        x -= step
        if abs(step) < tol:
            return x
    return None


def z2_branch_spot_check(h, lam0, radius=1e-2, points=21, fd_step=1e-6) -> bool:
    """Follow the fixed-point branch of v h(v, lam) through (0, lam0) by 1-D Newton.

    For ``nondeg_via_h_ne_1`` the trivial branch v = 0 is continued in lam;
    for ``nondeg_via_parameter`` the branch h(v, lam) = 1 is continued in v,
    solving for the parameter with the largest derivative.  Returns True if
    every solve converges with a Jacobian bounded away from zero.
    """
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    verdict = z2_nondegenerate(h, lam0)
    ts = np.linspace(-radius, radius, points)
    if verdict == NONDEG_H:
        for t in ts:
            lam = lam0.copy()
            lam[0] += t
            g = lambda v: v * float(h(v, lam)) - v
            dg = lambda v: (g(v + fd_step) - g(v - fd_step)) / (2 * fd_step)
            v = _newton_1d(g, dg, 0.0)
            if v is None or abs(v) > radius:
                return False
        return True
    if verdict == NONDEG_PARAM:
        grad = richardson_gradient(lambda lam: float(h(0.0, lam)), lam0)
        i = int(np.argmax(np.abs(grad)))
        for v in ts:
            def g(mu, v=v):
                lam = lam0.copy()
                lam[i] = mu
                return float(h(v, lam)) - 1.0
            dg = lambda mu: (g(mu + fd_step) - g(mu - fd_step)) / (2 * fd_step)
            mu = _newton_1d(g, dg, lam0[i])
            if mu is None or abs(mu - lam0[i]) > 10 * radius:
                return False
        return True
    return False
