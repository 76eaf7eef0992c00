"""One-step maps: Boris variants, exponential splittings, implicit mid-step
schemes and their symmetric compositions.

Every step function maps ``(field, pp, y, h) -> y1`` for a 6-vector state
``y = [q, p]``; negative ``h`` steps backwards.  The implicit schemes take a
fixed iteration count (no early exit), which keeps the maps deterministic and
exactly time-symmetric up to the order of the iteration.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import FieldDomainError, FieldModel
from .flows import flow_E, flow_EB, flow_T, flow_TB
from .smallmat import cayley, phi1_mat, phi2_mat, rodrigues_exp

METHOD_IDS = (
    "boris_cayley",
    "boris_exp",
    "chin_a",
    "chin_b",
    "scovel",
    "impl_strang",
    "impl_midpoint",
    "composed",
    "spreiter_walter",
    "velocity_verlet",
)

# fixed-point sweeps used when the config does not pin them
DEFAULT_FP_ITERS = {"impl_strang": 5, "impl_midpoint": 6, "composed": 16}

# classic 4th-order triple jump (gamma, 1-2*gamma, gamma)
_TJ = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))

# 15 palindromic substeps: the five-stage 4th-order pattern run through a
# three-stage 5th-root jump, giving order 6 with max |gamma| < 0.9 (much
# gentler substeps than the triple jump, which matters on rough fields)
_A4 = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))
_G6 = 1.0 / (2.0 - 2.0 ** (1.0 / 5.0))

COMPOSITIONS = {
    "triple_jump": (_TJ, 1.0 - 2.0 * _TJ, _TJ),
    "fifteen_stage": tuple(
        go * gi
        for go in (_G6, 1.0 - 2.0 * _G6, _G6)
        for gi in (_A4, _A4, 1.0 - 4.0 * _A4, _A4, _A4)),
}


class UniformFieldRequired(ValueError):
    """Method is only defined for spatially constant magnetic fields."""


def boris_rotate_cross(h, omega, p_plus):
    """Classic cross-product form of the Boris momentum rotation.

    t = (h/2) omega, p' = p + p x t, p'' = p + p' x s with s = 2t/(1+|t|^2);
    algebraically identical to applying cayley(h/2, omega).
    """
    t = 0.5 * h * np.asarray(omega, dtype=float)
    s = 2.0 * t / (1.0 + t @ t)
    p_prime = p_plus + np.cross(p_plus, t)
    return p_plus + np.cross(p_prime, s)


def _boris_generic(field, pp, y, h, rotate):
    hm = 0.5 * h / pp.m
    q_mid = y[:3] + hm * y[3:]
    f = field.force(pp, q_mid)
    w = field.omega(pp, q_mid)
    p = y[3:] + (0.5 * h) * f
    p = rotate(w, p)
    p = p + (0.5 * h) * f
    out = np.empty(6)
    out[:3] = q_mid + hm * p
    out[3:] = p
    return out


def boris_cayley_step(field, pp, y, h):
    """Drift/kick/Cayley-rotation/kick/drift; the classic Boris push."""
    return _boris_generic(field, pp, y, h,
                          lambda w, p: cayley(0.5 * h, w) @ p)


def boris_exp_step(field, pp, y, h):
    """Boris layout with the exact Rodrigues rotation over the full step."""
    return _boris_generic(field, pp, y, h,
                          lambda w, p: rodrigues_exp(h, w) @ p)


def velocity_verlet_step(field, pp, y, h):
    """Zero-rotation limit of the Boris layout: drift / full kick / drift,
    ignoring the magnetic field entirely."""
    hm = 0.5 * h / pp.m
    q_mid = y[:3] + hm * y[3:]
    p = y[3:] + h * field.force(pp, q_mid)
    out = np.empty(6)
    out[:3] = q_mid + hm * p
    out[3:] = p
    return out


def chin_a_step(field, pp, y, h):
    """Exact kick-rotation halves around a full drift."""
    w = field.omega(pp, y[:3])
    f = field.force(pp, y[:3])
    y1 = flow_EB(0.5 * h, w, f, y)
    y1 = flow_T(h, pp.m, y1)
    w = field.omega(pp, y1[:3])
    f = field.force(pp, y1[:3])
    return flow_EB(0.5 * h, w, f, y1)


def chin_b_step(field, pp, y, h):
    """Drift halves around a full exact kick-rotation at the midpoint."""
    y1 = flow_T(0.5 * h, pp.m, y)
    w = field.omega(pp, y1[:3])
    f = field.force(pp, y1[:3])
    y1 = flow_EB(h, w, f, y1)
    return flow_T(0.5 * h, pp.m, y1)


def scovel_step(field, pp, y, h):
    """Electric kick halves around the drift-rotation flow.

    The inner flow uses omega frozen at the entry position, which is exact
    (and the step time-symmetric) only for uniform b; on nonuniform fields
    this is the cheap non-symmetric variant the implicit schemes improve on.
    """
    f = field.force(pp, y[:3])
    y1 = flow_E(0.5 * h, f, y)
    y1 = flow_TB(h, pp.m, field.omega(pp, y1[:3]), y1)
    f = field.force(pp, y1[:3])
    return flow_E(0.5 * h, f, y1)


def _mid_strang(field, pp, w, h, fp_iters):
    """Strang-form mid-step: two frozen half-flows, omega of the second
    relaxed by fixed-point sweeps toward the half-step position."""
    pred = flow_TB(0.5 * h, pp.m, field.omega(pp, w[:3]), w)
    v = pred
    for _ in range(fp_iters):
        v = flow_TB(0.5 * h, pp.m, field.omega(pp, v[:3]), pred)
    return v


def _mid_midpoint(field, pp, w, h, fp_iters):
    """Midpoint-form mid-step: full frozen flow with omega relaxed toward
    the average of entry and exit positions."""
    v = w
    for _ in range(fp_iters):
        v = flow_TB(h, pp.m, field.omega(pp, 0.5 * (v[:3] + w[:3])), w)
    return v


def impl_strang_step(field, pp, y, h, fp_iters):
    f = field.force(pp, y[:3])
    w = flow_E(0.5 * h, f, y)
    w = _mid_strang(field, pp, w, h, fp_iters)
    f = field.force(pp, w[:3])
    return flow_E(0.5 * h, f, w)


def impl_midpoint_step(field, pp, y, h, fp_iters):
    f = field.force(pp, y[:3])
    w = flow_E(0.5 * h, f, y)
    w = _mid_midpoint(field, pp, w, h, fp_iters)
    f = field.force(pp, w[:3])
    return flow_E(0.5 * h, f, w)


_MID_MAPS = {"impl_strang": _mid_strang, "impl_midpoint": _mid_midpoint}


def composed_step(field, pp, y, h, gammas, inner, fp_iters):
    """Symmetric composition of the implicit mid-step inside one kick shell.

    Only the mid-step map is composed (with substeps gamma_i * h), so the
    electric force is still evaluated once per step; the composition raises
    the order to which the mid-step reproduces the exact drift-rotation flow.
    """
    mid = _MID_MAPS[inner]
    f = field.force(pp, y[:3])
    w = flow_E(0.5 * h, f, y)
    for g in gammas:
        w = mid(field, pp, w, g * h, fp_iters)
    f = field.force(pp, w[:3])
    return flow_E(0.5 * h, f, w)


def spreiter_walter_step(field, pp, y, h):
    """Taylor-form constant-b step: exact rotation plus a force update that
    reuses the field at the new position.  Requires uniform b."""
    if not field.uniform_b:
        raise UniformFieldRequired(
            f"spreiter_walter needs a uniform magnetic field, "
            f"got model {field.kind!r}")
    q, p = y[:3], y[3:]
    w = field.omega(pp, q)
    f0 = field.force(pp, q)
    exp_m = rodrigues_exp(h, w)
    phi1 = phi1_mat(h, w)
    phi2 = phi2_mat(h, w)
    q1 = q + (h / pp.m) * (phi1 @ p) + (h * h / pp.m) * (phi2 @ f0)
    f1 = field.force(pp, q1)
    p1 = exp_m @ p + h * (phi1 @ f0) + h * (phi2 @ (f1 - f0))
    out = np.empty(6)
    out[:3] = q1
    out[3:] = p1
    return out


@dataclass
class StepperConfig:
    """Method id plus the knobs that select a concrete one-step map."""

    method: str
    fp_iters: int | None = None
    composition: object = "triple_jump"   # name or explicit gamma sequence
    inner: str = "impl_midpoint"

    def resolved_fp_iters(self):
        if self.fp_iters is not None:
            return int(self.fp_iters)
        return DEFAULT_FP_ITERS.get(self.method, 0)


def resolve_composition(table):
    """Return a validated gamma tuple from a name or explicit sequence."""
    if isinstance(table, str):
        try:
            gammas = COMPOSITIONS[table]
        except KeyError:
            raise ValueError(f"unknown composition table {table!r}; "
                             f"known: {sorted(COMPOSITIONS)}") from None
    else:
        gammas = tuple(float(g) for g in table)
    if not gammas:
        raise ValueError("composition table is empty")
    if abs(sum(gammas) - 1.0) > 1e-12:
        raise ValueError(f"composition weights must sum to 1, got {sum(gammas)}")
    for a, b in zip(gammas, reversed(gammas)):
        if abs(a - b) > 1e-12:
            raise ValueError("composition table must be palindromic")
    return gammas


class Stepper:
    """A configured one-step map ``step(field, pp, y, h) -> y1``."""

    def __init__(self, config):
        if config.method not in METHOD_IDS:
            raise ValueError(f"unknown method {config.method!r}; "
                             f"known: {METHOD_IDS}")
        self.config = config
        self.method = config.method
        self.fp_iters = config.resolved_fp_iters()
        if self.method in ("impl_strang", "impl_midpoint", "composed"):
            if self.fp_iters < 1:
                raise ValueError(f"{self.method} needs fp_iters >= 1, "
                                 f"got {self.fp_iters}")
        if self.method == "composed":
            self.gammas = resolve_composition(config.composition)
            if config.inner not in _MID_MAPS:
                raise ValueError(f"composed inner must be one of "
                                 f"{sorted(_MID_MAPS)}, got {config.inner!r}")
            self.inner = config.inner
        else:
            self.gammas = None
            self.inner = None

    def step(self, field, pp, y, h):
        m = self.method
        if m == "boris_cayley":
            return boris_cayley_step(field, pp, y, h)
        if m == "boris_exp":
            return boris_exp_step(field, pp, y, h)
        if m == "chin_a":
            return chin_a_step(field, pp, y, h)
        if m == "chin_b":
            return chin_b_step(field, pp, y, h)
        if m == "scovel":
            return scovel_step(field, pp, y, h)
        if m == "impl_strang":
            return impl_strang_step(field, pp, y, h, self.fp_iters)
        if m == "impl_midpoint":
            return impl_midpoint_step(field, pp, y, h, self.fp_iters)
        if m == "composed":
            return composed_step(field, pp, y, h, self.gammas, self.inner,
                                 self.fp_iters)
        if m == "spreiter_walter":
            return spreiter_walter_step(field, pp, y, h)
        return velocity_verlet_step(field, pp, y, h)

    def omega_evals_per_step(self):
        """Magnetic-field evaluations one step costs (analytic count)."""
        m = self.method
        if m in ("boris_cayley", "boris_exp", "chin_b", "scovel",
                 "spreiter_walter"):
            return 1
        if m == "chin_a":
            return 2
        if m == "impl_strang":
            return self.fp_iters + 1
        if m == "impl_midpoint":
            return self.fp_iters
        if m == "composed":
            per = self.fp_iters + (1 if self.inner == "impl_strang" else 0)
            return len(self.gammas) * per
        return 0

    def symmetric_for(self, field):
        """Whether the step is time-symmetric on this field (up to round-off
        for the explicit maps, up to the iteration order for implicit ones)."""
        if self.method in ("scovel", "spreiter_walter"):
            return field.uniform_b
        return True

    def __repr__(self):
        bits = [self.method]
        if self.method in ("impl_strang", "impl_midpoint", "composed"):
            bits.append(f"fp_iters={self.fp_iters}")
        if self.method == "composed":
            bits.append(f"inner={self.inner}, stages={len(self.gammas)}")
        return f"Stepper({', '.join(bits)})"


def make_stepper(config):
    if isinstance(config, str):
        config = StepperConfig(method=config)
    return Stepper(config)


@dataclass
class Trajectory:
    """Sampled states of one integration run."""

    ts: np.ndarray
    ys: np.ndarray
    status: str = "ok"
    n_done: int = 0
    final: np.ndarray | None = None
    notes: list = dc_field(default_factory=list)

    @property
    def y_final(self):
        """State after the last completed step (not necessarily sampled)."""
        return self.final if self.final is not None else self.ys[-1]


def integrate(stepper, field, pp, y0, h, n_steps, sample_stride=1):
    """Advance n_steps of size h, sampling every ``sample_stride`` steps.

    The t=0 state is always the first sample.  If the state leaves IEEE range
    the run stops and the remaining samples are NaN with status "diverged".
    """
    y = np.asarray(y0, dtype=float).copy()
    if y.shape != (6,):
        raise ValueError(f"state must have shape (6,), got {y.shape}")
    n_samples = n_steps // sample_stride + 1
    ts = np.arange(n_samples) * (h * sample_stride)
    ys = np.full((n_samples, 6), np.nan)
    ys[0] = y
    traj = Trajectory(ts=ts, ys=ys)
    if stepper.method == "scovel" and not field.uniform_b:
        traj.notes.append("scovel on nonuniform b: frozen-omega step is "
                          "not time-symmetric")
    for i in range(1, n_steps + 1):
        try:
            y = stepper.step(field, pp, y, h)
        except FieldDomainError as exc:
            traj.status = "diverged"
            traj.n_done = i - 1
            traj.notes.append(f"left the field domain at step {i}: {exc}")
            return traj
        if not np.all(np.isfinite(y)):
            traj.status = "diverged"
            traj.n_done = i - 1
            return traj
        if i % sample_stride == 0:
            ys[i // sample_stride] = y
    traj.n_done = n_steps
    traj.final = y.copy()
    return traj
