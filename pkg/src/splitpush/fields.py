"""Static field configurations and particle parameters.

A :class:`FieldModel` bundles evaluators for the electric field ``e(q)``, the
magnetic field ``b(q)`` and (when available) an electrostatic potential
``phi(q)`` with ``e = -grad(phi)``.  The built-in models are all divergence
free in ``b``; the ones with quadrupole electric fields share

    e(q) = kappa (x, y, -2z),    phi(q) = -kappa (x^2 + y^2)/2 + kappa z^2.

Built-in kinds:

``uniform``         constant b, no electric field
``gradb2d``         b = (0, 0, 1/x^2) on the half-space x > 0, no e-field
``penning_ideal``   uniform b = (0, 0, b_z) plus the quadrupole e-field
``penning_bottle``  ideal trap plus an axisymmetric quadratic bottle term
                    beta (-xz, -yz, z^2 - (x^2+y^2)/2)
``penning_asym``    tilted uniform part b_z (1/3, 0, 1) plus the linear
                    non-axisymmetric term beta (y-z, x+z, y-x), with the
                    quadrupole e-field
"""

from dataclasses import dataclass

import numpy as np

# integer codes shared with the compiled kernels
FIELD_CODES = {
    "uniform": 0,
    "gradb2d": 1,
    "penning_ideal": 2,
    "penning_bottle": 3,
    "penning_asym": 4,
}
CUSTOM_CODE = -1


class FieldDomainError(ValueError):
    """Field evaluated outside its domain of definition."""


class NoPotentialError(ValueError):
    """Requested a potential from a model that does not define one."""


@dataclass(frozen=True)
class ParticleParams:
    """Mass and charge (or charge-to-mass scaling constant) of the particle."""

    m: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not self.m > 0.0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.c == 0.0:
            raise ValueError("charge constant c must be nonzero")


class FieldModel:
    """Electric/magnetic field pair with optional potential.

    Parameters
    ----------
    kind : str
        Model name; one of FIELD_CODES or anything else for custom models.
    e, b : callable(q) -> array(3)
    phi : callable(q) -> float, optional
    uniform_b : bool
        True when b(q) is constant in space (enables exact constant-field
        steps and the full-flow method).
    params : dict
        Scalar parameters, kept for hashing/reporting.
    """

    def __init__(self, kind, e, b, phi=None, uniform_b=False, params=None):
        self.kind = kind
        self._e = e
        self._b = b
        self._phi = phi
        self.uniform_b = bool(uniform_b)
        self.params = dict(params or {})
        self.code = FIELD_CODES.get(kind, CUSTOM_CODE)
        # parameter vector for the compiled kernels (fixed width)
        self.coeffs = np.zeros(4)
        for i, key in enumerate(("kappa", "b_z", "beta")):
            if key in self.params:
                self.coeffs[i] = self.params[key]
        if kind == "uniform":
            self.coeffs[:3] = self.params["b"]

    @property
    def has_potential(self):
        return self._phi is not None

    def electric(self, q):
        return self._e(np.asarray(q, dtype=float))

    def magnetic(self, q):
        return self._b(np.asarray(q, dtype=float))

    def potential(self, q):
        if self._phi is None:
            raise NoPotentialError(f"field model {self.kind!r} has no potential")
        return float(self._phi(np.asarray(q, dtype=float)))

    def force(self, pp, q):
        """Electric force c*e(q) entering p' = S(q) p + force."""
        return pp.c * self.electric(q)

    def omega(self, pp, q):
        """Gyration vector (c/m) b(q)."""
        return (pp.c / pp.m) * self.magnetic(q)

    def __repr__(self):
        ps = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"FieldModel({self.kind}, {ps})"


def _check_halfspace(q):
    if q[0] <= 0.0:
        raise FieldDomainError(f"gradb2d is defined for x > 0, got x = {q[0]}")


def _zero3(q):
    return np.zeros(3)


def uniform_field(b):
    b = np.array(b, dtype=float)

    def bfun(q):
        return b.copy()

    return FieldModel("uniform", _zero3, bfun, phi=lambda q: 0.0,
                      uniform_b=True, params={"b": tuple(b)})


def gradb2d_field():
    def bfun(q):
        _check_halfspace(q)
        return np.array([0.0, 0.0, 1.0 / (q[0] * q[0])])

    def efun(q):
        _check_halfspace(q)
        return np.zeros(3)

    return FieldModel("gradb2d", efun, bfun, phi=lambda q: 0.0)


def _quadrupole(kappa):
    def efun(q):
        return kappa * np.array([q[0], q[1], -2.0 * q[2]])

    def phifun(q):
        return -0.5 * kappa * (q[0] ** 2 + q[1] ** 2) + kappa * q[2] ** 2

    return efun, phifun


def penning_ideal_field(kappa=10.0, b_z=100.0):
    efun, phifun = _quadrupole(kappa)

    def bfun(q):
        return np.array([0.0, 0.0, b_z])

    return FieldModel("penning_ideal", efun, bfun, phi=phifun, uniform_b=True,
                      params={"kappa": kappa, "b_z": b_z})


def penning_bottle_field(kappa=10.0, b_z=100.0, beta=200.0):
    efun, phifun = _quadrupole(kappa)

    def bfun(q):
        x, y, z = q
        return np.array([
            -beta * x * z,
            -beta * y * z,
            b_z + beta * (z * z - 0.5 * (x * x + y * y)),
        ])

    return FieldModel("penning_bottle", efun, bfun, phi=phifun,
                      params={"kappa": kappa, "b_z": b_z, "beta": beta})


def penning_asym_field(kappa=10.0, b_z=100.0, beta=50.0):
    efun, phifun = _quadrupole(kappa)

    def bfun(q):
        x, y, z = q
        return np.array([
            b_z / 3.0 + beta * (y - z),
            beta * (x + z),
            b_z + beta * (y - x),
        ])

    return FieldModel("penning_asym", efun, bfun, phi=phifun,
                      params={"kappa": kappa, "b_z": b_z, "beta": beta})


FIELD_BUILDERS = {
    "uniform": uniform_field,
    "gradb2d": gradb2d_field,
    "penning_ideal": penning_ideal_field,
    "penning_bottle": penning_bottle_field,
    "penning_asym": penning_asym_field,
}


def build_field(kind, **params):
    """Construct a built-in field model by name."""
    try:
        builder = FIELD_BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown field kind {kind!r}; "
                         f"known: {sorted(FIELD_BUILDERS)}") from None
    return builder(**params)
