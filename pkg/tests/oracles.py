"""Independent numerical oracles used by the test suite.

These deliberately avoid the closed-form kernels under test: matrix phi
functions are summed as extended-precision power series, and ODE flows are
integrated with a classical RK4 at a step small enough that its own error is
negligible against the tolerance being checked.
"""

import math

import numpy as np


def phi_series(ell, a):
    """phi_ell(A) = sum_j A^j / (j + ell)! summed in long double.

    Term count adapts to ||A||: summation stops once the rigorous tail bound
    ||A||^j / j! falls below 1e-22 relative to the leading term.  phi_0 is the
    matrix exponential.
    """
    if ell < 0:
        raise ValueError("ell must be >= 0")
    a = np.asarray(a, dtype=np.longdouble)
    n = a.shape[0]
    norm = np.longdouble(np.linalg.norm(np.asarray(a, dtype=float), 2))
    acc = np.eye(n, dtype=np.longdouble) / math.factorial(ell)
    term = np.eye(n, dtype=np.longdouble)
    j = 0
    while True:
        j += 1
        term = term @ a
        acc = acc + term / np.longdouble(math.factorial(j + ell))
        # crude tail bound: remaining terms are < ||A||^j/j! once j > ||A||
        if j > norm and float(norm) ** j / math.factorial(j) < 1e-22:
            break
        if j > 200:
            raise RuntimeError("phi series did not converge")
    return np.asarray(acc, dtype=np.longdouble)


def rk4(f, y0, t_span, n_steps):
    """Classical fixed-step RK4 for y' = f(y); returns the final state."""
    y = np.array(y0, dtype=float)
    h = (t_span[1] - t_span[0]) / n_steps
    for _ in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def rk4_dense(f, y0, t_span, n_steps):
    """RK4 keeping every step; returns (times, states)."""
    y = np.array(y0, dtype=float)
    t0, t1 = t_span
    h = (t1 - t0) / n_steps
    ts = np.empty(n_steps + 1)
    ys = np.empty((n_steps + 1, y.size))
    ts[0], ys[0] = t0, y
    for i in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ts[i + 1] = t0 + (i + 1) * h
        ys[i + 1] = y
    return ts, ys
