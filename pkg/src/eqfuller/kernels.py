"""Dormand-Prince 5(4) integration kernels.

Everything here runs either under numba (default) or as plain numpy when
``EQFULLER_DISABLE_NUMBA`` is set; see :mod:`eqfuller._jit`.  The right-hand
side ``rhs(x, p)`` and Jacobian ``jac(x, p)`` are passed in as arguments, so
they must themselves be jitted for the compiled path.

State vectors may be augmented with a row-major state transition matrix
(``with_stm``), in which case ``y = [x, vec(Phi)]`` and ``Phi' = J(x) Phi``.

Dense output is produced by re-stepping from the last accepted state with a
shorter step.  A single Runge-Kutta step is a polynomial in its length, so
values obtained this way are smooth in time, which the event refinement
relies on.
"""
import numpy as np

from ._jit import jit

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_ESCAPED = 2
STATUS_MAX_STEPS = 3
STATUS_NO_RETURN = 4

A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@jit
def augmented_rhs(rhs, jac, y, p, n, with_stm, sgn):
    x = y[:n].copy()
    f = sgn * rhs(x, p)
    out = np.empty(y.shape[0])
    out[:n] = f
    if with_stm:
        J = sgn * jac(x, p)
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += J[i, l] * y[n + l * n + j]
                out[n + i * n + j] = s
    return out


@jit
def dopri_step(rhs, jac, y, p, n, with_stm, h, k1, sgn):
    """One step of size ``h``; returns (y_new, f(y_new), error estimate)."""
    k2 = augmented_rhs(rhs, jac, y + h * (A21 * k1), p, n, with_stm, sgn)
    k3 = augmented_rhs(rhs, jac, y + h * (A31 * k1 + A32 * k2), p, n, with_stm, sgn)
    k4 = augmented_rhs(rhs, jac, y + h * (A41 * k1 + A42 * k2 + A43 * k3), p, n, with_stm,
                       sgn)
    k5 = augmented_rhs(rhs, jac, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                       p, n, with_stm, sgn)
    k6 = augmented_rhs(rhs, jac,
                       y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                       p, n, with_stm, sgn)
    y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
    k7 = augmented_rhs(rhs, jac, y_new, p, n, with_stm, sgn)
    err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
    return y_new, k7, err


@jit
def error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return np.sqrt(np.mean((err / scale) ** 2))


@jit
def initial_step(y, f, rtol, atol, h_max):
    scale = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f / scale) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    return min(h, h_max)


@jit
def _step_factor(en):
    if en == 0.0:
        return MAX_FACTOR
    fac = SAFETY * en ** -0.2
    return min(MAX_FACTOR, max(MIN_FACTOR, fac))


@jit
def integrate(rhs, jac, y0, p, n, with_stm, t_end, rtol, atol, h_max, t_eval,
              escape_r2, max_steps, sgn):
    """Integrate x' = sgn*f(x) from t=0 to ``t_end`` (sgn = -1 runs time backwards).

    ``t_eval`` must be sorted within [0, t_end].  Returns
    (status, t, y, values_at_t_eval, accepted_steps).
    """
    m = y0.shape[0]
    out = np.zeros((t_eval.shape[0], m))
    y = y0.copy()
    t = 0.0
    k1 = augmented_rhs(rhs, jac, y, p, n, with_stm, sgn)
    h = initial_step(y, k1, rtol, atol, h_max)
    ie = 0
    while ie < t_eval.shape[0] and t_eval[ie] <= 0.0:
        out[ie] = y
        ie += 1
    steps = 0
    status = STATUS_OK
    while t < t_end:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if h < 1e-14 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break
        last = False
        if h > h_max:
            h = h_max
        if t + h >= t_end * (1.0 - 1e-14):
            h = t_end - t
            last = True
        y_new, k7, err = dopri_step(rhs, jac, y, p, n, with_stm, h, k1, sgn)
        en = error_norm(err, y, y_new, rtol, atol)
        if not np.isfinite(en):
            h *= MIN_FACTOR
            continue
        if en <= 1.0:
            t_new = t_end if last else t + h
            while ie < t_eval.shape[0] and t_eval[ie] <= t_new:
                ys, _, _ = dopri_step(rhs, jac, y, p, n, with_stm, t_eval[ie] - t, k1,
                                      sgn)
                out[ie] = ys
                ie += 1
            t = t_new
            y = y_new
            k1 = k7
            steps += 1
            if np.sum(y[:n] ** 2) > escape_r2:
                status = STATUS_ESCAPED
                break
            h *= _step_factor(en)
        else:
            h *= max(MIN_FACTOR, SAFETY * en ** -0.2)
    return status, t, y, out, steps


@jit
def _plane_value(y, n, c, nu):
    s = 0.0
    for i in range(n):
        s += nu[i] * (y[i] - c[i])
    return s


@jit
def refine_crossing(rhs, jac, y, p, n, with_stm, k1, h, c, nu, g_lo, g_hi):
    """Crossing time in (0, h] of the plane <nu, x - c> = 0.

    Regula falsi start, then safeguarded Newton: a step that would leave the
    current bracket is replaced by bisection.
    """
    lo = 0.0
    hi = h
    if g_hi - g_lo != 0.0:
        tau = h * (-g_lo) / (g_hi - g_lo)
    else:
        tau = 0.5 * h
    tau = min(max(tau, 0.0), h)
    for _ in range(100):
        ys, _, _ = dopri_step(rhs, jac, y, p, n, with_stm, tau, k1, 1.0)
        gv = _plane_value(ys, n, c, nu)
        if gv < 0.0:
            lo = tau
        else:
            hi = tau
        fv = rhs(ys[:n].copy(), p)
        dg = 0.0
        for i in range(n):
            dg += nu[i] * fv[i]
        if dg != 0.0:
            tn = tau - gv / dg
        else:
            tn = 0.5 * (lo + hi)
        if not (tn > lo and tn < hi):
            tn = 0.5 * (lo + hi)
        if abs(tn - tau) <= 1e-15 * max(1.0, h) or hi - lo <= 1e-15 * max(1.0, h):
            tau = tn
            break
        tau = tn
    return tau


@jit
def integrate_to_section(rhs, jac, y0, p, n, with_stm, centers, normals, radius,
                         t_min, t_max, rtol, atol, h_max, max_disp, escape_r2,
                         max_steps):
    """Integrate until the first upward crossing of any disc.

    Disc j is the ball of ``radius`` around ``centers[j]`` inside the
    hyperplane with unit normal ``normals[j]``.  Crossings earlier than
    ``t_min`` are ignored.  Returns (status, t, y, disc_index, steps).
    """
    ncopy = centers.shape[0]
    y = y0.copy()
    t = 0.0
    k1 = augmented_rhs(rhs, jac, y, p, n, with_stm, 1.0)
    h = initial_step(y, k1, rtol, atol, h_max)
    g_prev = np.empty(ncopy)
    for j in range(ncopy):
        g_prev[j] = _plane_value(y, n, centers[j], normals[j])
    g_new = np.empty(ncopy)
    steps = 0
    while True:
        if steps >= max_steps:
            return STATUS_MAX_STEPS, t, y, -1, steps
        if t >= t_max:
            return STATUS_NO_RETURN, t, y, -1, steps
        if h < 1e-14 * max(1.0, abs(t)):
            return STATUS_UNDERFLOW, t, y, -1, steps
        if h > h_max:
            h = h_max
        y_new, k7, err = dopri_step(rhs, jac, y, p, n, with_stm, h, k1, 1.0)
        en = error_norm(err, y, y_new, rtol, atol)
        if not np.isfinite(en):
            h *= MIN_FACTOR
            continue
        if en > 1.0:
            h *= max(MIN_FACTOR, SAFETY * en ** -0.2)
            continue
        disp = np.sqrt(np.sum((y_new[:n] - y[:n]) ** 2))
        if disp > max_disp:
            h *= 0.5
            continue
        best_tau = np.inf
        best_j = -1
        best_y = y_new
        for j in range(ncopy):
            g_new[j] = _plane_value(y_new, n, centers[j], normals[j])
            if g_prev[j] < 0.0 and g_new[j] >= 0.0:
                d0 = np.sqrt(np.sum((y[:n] - centers[j]) ** 2))
                d1 = np.sqrt(np.sum((y_new[:n] - centers[j]) ** 2))
                if min(d0, d1) > radius + max_disp:
                    continue
                tau = refine_crossing(rhs, jac, y, p, n, with_stm, k1, h,
                                      centers[j], normals[j], g_prev[j], g_new[j])
                if t + tau < t_min or tau >= best_tau:
                    continue
                ys, _, _ = dopri_step(rhs, jac, y, p, n, with_stm, tau, k1, 1.0)
                if np.sqrt(np.sum((ys[:n] - centers[j]) ** 2)) <= radius:
                    best_tau = tau
                    best_j = j
                    best_y = ys
        if best_j >= 0:
            return STATUS_OK, t + best_tau, best_y, best_j, steps + 1
        t += h
        y = y_new
        k1 = k7
        steps += 1
        for j in range(ncopy):
            g_prev[j] = g_new[j]
        if np.sum(y[:n] ** 2) > escape_r2:
            return STATUS_ESCAPED, t, y, -1, steps
        h *= _step_factor(en)
