"""Exactly solvable subflows of the charged-particle system.

State vectors are length-6 arrays ``y = [q, p]``.  Each function returns a new
array and leaves its input untouched.  Flows that depend on the fields take
*precomputed* vectors (``omega``, ``force``) so that the choice of evaluation
point — the essence of each splitting method — stays at the call site:

``flow_T``           free drift                      q' = p/m
``flow_E``           electric kick                   p' = F
``flow_B``           rotation at frozen omega        p' = S(omega) p
``flow_TB``          drift + rotation, frozen omega  q' = p/m, p' = S p
``flow_EB``          kick + rotation (exact: q is constant, so omega and F
                     evaluated at q solve it exactly) p' = S p + F
``flow_full``        uniform-b full flow with constant force
"""

import numpy as np

from .smallmat import phi1_mat, phi2_mat, rodrigues_exp


def flow_T(h, m, y):
    out = y.copy()
    out[:3] += (h / m) * y[3:]
    return out


def flow_E(h, force, y):
    out = y.copy()
    out[3:] += h * force
    return out


def flow_B(h, omega, y):
    out = y.copy()
    out[3:] = rodrigues_exp(h, omega) @ y[3:]
    return out


def flow_TB(h, m, omega, y):
    out = np.empty(6)
    out[:3] = y[:3] + (h / m) * (phi1_mat(h, omega) @ y[3:])
    out[3:] = rodrigues_exp(h, omega) @ y[3:]
    return out


def flow_EB(h, omega, force, y):
    out = y.copy()
    out[3:] = rodrigues_exp(h, omega) @ y[3:] + h * (phi1_mat(h, omega) @ force)
    return out


def flow_full(h, m, omega, force, y):
    q, p = y[:3], y[3:]
    out = np.empty(6)
    out[:3] = q + (h / m) * (phi1_mat(h, omega) @ p) \
        + (h * h / m) * (phi2_mat(h, omega) @ force)
    out[3:] = rodrigues_exp(h, omega) @ p + h * (phi1_mat(h, omega) @ force)
    return out
