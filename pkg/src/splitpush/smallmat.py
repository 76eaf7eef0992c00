"""Closed-form 3x3 matrix kernels built on a skew-symmetric gyration matrix.

Conventions used throughout the package: for a vector ``omega`` the matrix
``skew(omega)`` satisfies ``skew(omega) @ p == cross(p, omega)``, i.e. the sign
is opposite to the usual hat operator.  Every kernel below is a quadratic
polynomial in ``skew(omega)`` because powers of a 3x3 skew matrix close over
{I, S, S^2} (Cayley-Hamilton: S^3 = -|omega|^2 S).

The scalar coefficients are even functions of ``x = h*|omega|``.  Each one has
a removable singularity at x = 0, so below ``_X_SWITCH`` they are evaluated by
a truncated power series; above it, by trig expressions arranged to avoid
subtractive cancellation (half-angle forms instead of ``1 - cos(x)``).  Both
branches are accurate to ~1e-15 relative at the crossover.
"""

import math

import numpy as np

# Series/closed-form crossover for x = h*|omega|.  At 0.6 the worst direct
# formula (_s4) still has relative error ~3e-15, and nine series terms reach
# round-off, so the branches agree to well below 1e-13.
_X_SWITCH = 0.6
_N_TERMS = 9

# Coefficients of s_ell(x) = sum_j (-1)^j x^(2j) / (2j + ell)!, ell = 1..4.
_SERIES = tuple(
    tuple((-1.0) ** j / math.factorial(2 * j + ell) for j in range(_N_TERMS))
    for ell in (1, 2, 3, 4)
)


def _series_eval(ell, x):
    """Power series for s_ell at small x (Horner in u = x^2)."""
    u = x * x
    coeffs = _SERIES[ell - 1]
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * u + c
    return acc


def _s1(x):
    # sin(x)/x
    if x < _X_SWITCH:
        return _series_eval(1, x)
    return math.sin(x) / x


def _s2(x):
    # (1 - cos(x))/x^2, computed as 2 sin^2(x/2)/x^2
    if x < _X_SWITCH:
        return _series_eval(2, x)
    s = math.sin(0.5 * x)
    return 2.0 * s * s / (x * x)


def _s3(x):
    # (x - sin(x))/x^3
    if x < _X_SWITCH:
        return _series_eval(3, x)
    return (x - math.sin(x)) / (x * x * x)


def _s4(x):
    # (cos(x) - 1 + x^2/2)/x^4, computed as (x^2/2 - 2 sin^2(x/2))/x^4
    if x < _X_SWITCH:
        return _series_eval(4, x)
    s = math.sin(0.5 * x)
    x2 = x * x
    return (0.5 * x2 - 2.0 * s * s) / (x2 * x2)


def skew(omega):
    """Matrix S with S @ p = cross(p, omega)."""
    w1, w2, w3 = omega
    return np.array([[0.0, w3, -w2], [-w3, 0.0, w1], [w2, -w1, 0.0]])


def _omega_mats(omega):
    """(|omega|, S, S^2) for a gyration vector."""
    om = skew(omega)
    return math.sqrt(float(omega[0]) ** 2 + float(omega[1]) ** 2 + float(omega[2]) ** 2), om, om @ om


def rodrigues_exp(h, omega):
    """exp(h*S): Rodrigues rotation, I + h s1 S + h^2 s2 S^2."""
    wc, om, om2 = _omega_mats(omega)
    x = abs(h) * wc
    return np.eye(3) + (h * _s1(x)) * om + (h * h * _s2(x)) * om2


def phi1_mat(h, omega):
    """phi_1(h*S) = (exp(h*S) - I)/(h*S): I + h s2 S + h^2 s3 S^2."""
    wc, om, om2 = _omega_mats(omega)
    x = abs(h) * wc
    return np.eye(3) + (h * _s2(x)) * om + (h * h * _s3(x)) * om2


def phi2_mat(h, omega):
    """phi_2(h*S) = (phi_1(h*S) - I)/(h*S): I/2 + h s3 S + h^2 s4 S^2."""
    wc, om, om2 = _omega_mats(omega)
    x = abs(h) * wc
    return 0.5 * np.eye(3) + (h * _s3(x)) * om + (h * h * _s4(x)) * om2


def resolvent(hhalf, omega):
    """(I - hhalf*S)^(-1) = I + kappa (hhalf S + hhalf^2 S^2), closed form."""
    wc, om, om2 = _omega_mats(omega)
    kappa = 1.0 / (1.0 + (hhalf * wc) ** 2)
    return np.eye(3) + (kappa * hhalf) * om + (kappa * hhalf * hhalf) * om2


def cayley(hhalf, omega):
    """(I - hhalf*S)^(-1) (I + hhalf*S): rotation by 2*atan(hhalf*|omega|).

    Equals I + 2 kappa (hhalf S + hhalf^2 S^2) with
    kappa = 1/(1 + hhalf^2 |omega|^2).
    """
    wc, om, om2 = _omega_mats(omega)
    kappa = 1.0 / (1.0 + (hhalf * wc) ** 2)
    return np.eye(3) + (2.0 * kappa * hhalf) * om + (2.0 * kappa * hhalf * hhalf) * om2
