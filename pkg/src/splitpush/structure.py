"""Invariants and structure probes.

Observables (energy, the planar-field invariant, the adiabatic moment) work
on 6-vector states.  The map probes quantify, for one application of a step,
how far it is from being time-symmetric, volume preserving, and a Poisson map
for the bracket encoded by :func:`poisson_tensor`; Jacobians come from central
finite differences so the probes stay independent of the step internals.
"""

import numpy as np

from .fields import NoPotentialError  # re-exported for convenience
from .smallmat import skew

_FD_DELTA = float(np.finfo(float).eps) ** (1.0 / 3.0)


def energy(field, pp, y):
    """H = |p|^2 / 2m + c * phi(q)."""
    p = y[3:]
    return float(p @ p) / (2.0 * pp.m) + pp.c * field.potential(y[:3])


def invariant_I(y):
    """p_y + 1/x, conserved by the planar 1/x^2 field (needs x != 0)."""
    if y[0] == 0.0:
        raise ZeroDivisionError("invariant undefined at x = 0")
    return float(y[4] + 1.0 / y[0])


def magnetic_moment(field, pp, y):
    """Adiabatic moment mu = m |S(omega) p|^2 / (2 c^2 |b|^3)."""
    b = field.magnetic(y[:3])
    bn = float(np.linalg.norm(b))
    w = (pp.c / pp.m) * b
    sp = np.cross(y[3:], w)
    return pp.m * float(sp @ sp) / (2.0 * pp.c ** 2 * bn ** 3)


def poisson_tensor(field, pp, y):
    """Structure matrix [[0, I], [-I, m*S(omega(q))]] of the bracket."""
    out = np.zeros((6, 6))
    out[:3, 3:] = np.eye(3)
    out[3:, :3] = -np.eye(3)
    out[3:, 3:] = pp.m * skew(field.omega(pp, y[:3]))
    return out


def jacobian_fd(step_fn, y, delta=_FD_DELTA):
    """Central-difference Jacobian of a map R^6 -> R^6 at y.

    Per-component offsets scale with the state: delta_i = delta*(1 + |y_i|).
    """
    y = np.asarray(y, dtype=float)
    jac = np.empty((6, 6))
    for i in range(6):
        d = delta * (1.0 + abs(y[i]))
        yp = y.copy()
        ym = y.copy()
        yp[i] += d
        ym[i] -= d
        jac[:, i] = (step_fn(yp) - step_fn(ym)) / (2.0 * d)
    return jac


def symmetry_defect(step_fn, y, h):
    """max-norm of y - step(step(y, h), -h): zero for time-symmetric maps."""
    rt = step_fn(step_fn(y, h), -h)
    return float(np.max(np.abs(rt - y)))


def volume_defect(step_fn, y):
    """|det J - 1| of the FD Jacobian."""
    return abs(float(np.linalg.det(jacobian_fd(step_fn, y))) - 1.0)


def poisson_defect(step_fn, field, pp, y):
    """max-norm of J B(y) J^T - B(step(y)): zero for Poisson maps."""
    jac = jacobian_fd(step_fn, y)
    b0 = poisson_tensor(field, pp, y)
    b1 = poisson_tensor(field, pp, step_fn(y))
    return float(np.max(np.abs(jac @ b0 @ jac.T - b1)))


def divergence_fd(vec_fn, q, delta=_FD_DELTA):
    """Central-difference divergence of a vector field at q (the bracket
    satisfies the Jacobi identity exactly when this vanishes for b)."""
    q = np.asarray(q, dtype=float)
    acc = 0.0
    for i in range(3):
        d = delta * (1.0 + abs(q[i]))
        qp = q.copy()
        qm = q.copy()
        qp[i] += d
        qm[i] -= d
        acc += (vec_fn(qp)[i] - vec_fn(qm)[i]) / (2.0 * d)
    return float(acc)


def windowed(values, window, reduce=np.max):
    """Reduce a series over consecutive windows; trailing partial windows
    are dropped.  Returns an array of length len(values)//window."""
    values = np.asarray(values)
    n = values.size // window
    if n == 0:
        return np.empty(0)
    return reduce(values[:n * window].reshape(n, window), axis=1)


def unwrap_angle(xy):
    """Continuous polar angle about the z axis from (n, >=2) samples."""
    return np.unwrap(np.arctan2(xy[:, 1], xy[:, 0]))


def drift_and_period(ts, qs, x_mid):
    """Average drift speed and period from upward x-crossings of x_mid.

    Crossing times and the y positions there come from linear interpolation
    between samples; the averages span the first to last crossing (an
    integer number of periods).  Returns (v_drift, period, n_periods).
    """
    x = qs[:, 0]
    y = qs[:, 1]
    up = np.nonzero((x[:-1] < x_mid) & (x[1:] >= x_mid))[0]
    if up.size < 2:
        raise ValueError("need at least two upward crossings to measure "
                         "a period; sample longer or denser")
    frac = (x_mid - x[up]) / (x[up + 1] - x[up])
    t_cross = ts[up] + frac * (ts[up + 1] - ts[up])
    y_cross = y[up] + frac * (y[up + 1] - y[up])
    span = t_cross[-1] - t_cross[0]
    n_per = up.size - 1
    return (y_cross[-1] - y_cross[0]) / span, span / n_per, n_per
