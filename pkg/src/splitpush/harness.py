"""Experiment harness: named setups, reference orbits, step-size sweeps,
windowed long runs, and deterministic CSV output.

Output contract
---------------
Every CSV produced here shares the header ::

    experiment,method,h,fp_iters,observable,t_or_window,value,config_hash

with floats rendered by ``%.17g`` so a rerun of the same configuration is
byte identical.  A ``<name>.meta.json`` sidecar written next to each CSV
records the fully resolved run (configuration, snapped steps, reference
quality) with no timestamps or environment state.

Row kinds:

sweep      ``pos_err`` / ``energy_err`` (and ``inv_err`` on the planar
           1/x^2 field) per method and step size at ``t_or_window`` equal to
           the sweep horizon, plus per-method ``*_slope`` rows fitted on the
           resolvable error range (``t_or_window = -1``, ``h = 0``).
longrun    per-window rows ``energy_err_max``, ``mu_max``, ``mu_min``,
           ``mu_mean``, ``alpha_end`` with ``t_or_window`` the 0-based
           window index.
reference  the reference states themselves: observables ``qx .. pz`` at each
           comparison time, method ``reference``.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field as dc_field, fields as dc_fields, replace

import numpy as np

from . import fastpath
from .fields import FieldModel, ParticleParams, build_field
from .integrators import (
    COMPOSITIONS,
    METHOD_IDS,
    StepperConfig,
    chin_b_step,
    integrate,
    make_stepper,
)
from .structure import (
    energy,
    magnetic_moment,
    poisson_defect,
    symmetry_defect,
    unwrap_angle,
    volume_defect,
)

TOOL_VERSION = "0.1.0"

CSV_HEADER = "experiment,method,h,fp_iters,observable,t_or_window,value,config_hash"

# sweep points with at most this many steps keep the full trajectory in
# memory (48 bytes/step); larger runs fall back to two streaming kernel calls
_FULL_SAMPLE_LIMIT = 2_500_000

# log-log slope fits use only errors inside (floor, cap): below the floor is
# round-off, above the cap the step map is outside its asymptotic regime
SLOPE_FLOOR = 1e-11
SLOPE_CAP = 1e-2
SLOPE_MIN_POINTS = 3


class ConfigError(ValueError):
    """Invalid experiment configuration or CLI parameters."""


class NumericalFailure(RuntimeError):
    """An integration left IEEE range where a finite result was required."""


class ReferenceConvergenceError(RuntimeError):
    """Reference orbit failed its self-convergence check after refinement."""


# --------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a field, a particle, a start state, and a sweep plan.

    ``h_values`` are target step sizes; runs snap them to ``tau / k`` with
    ``tau = duration / n_compare`` so every comparison time is hit exactly.
    ``ref_refine`` sets the reference step to roughly ``h_min / ref_refine``.
    """

    experiment: str
    field_kind: str          # built-in kind name, or a FieldModel instance
    m: float
    c: float
    q0: tuple
    p0: tuple
    methods: tuple
    h_values: tuple
    duration: float
    n_compare: int = 20
    ref_refine: int = 50
    field_params: dict = dc_field(default_factory=dict)

    def field(self):
        if isinstance(self.field_kind, FieldModel):
            return self.field_kind
        try:
            return build_field(self.field_kind, **dict(self.field_params))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad field for {self.experiment!r}: {exc}") from exc

    def particle(self):
        try:
            return ParticleParams(m=self.m, c=self.c)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def y0(self):
        return np.array([*self.q0, *self.p0], dtype=float)

    def as_dict(self):
        """JSON-ready canonical form (used for hashing and meta files)."""
        if isinstance(self.field_kind, FieldModel):
            kind = self.field_kind.kind
            fparams = self.field_kind.params
        else:
            kind = self.field_kind
            fparams = self.field_params
        return {
            "experiment": self.experiment,
            "field_kind": kind,
            "field_params": {
                k: (list(map(float, v)) if isinstance(v, (tuple, list))
                    else float(v))
                for k, v in sorted(fparams.items())
            },
            "m": float(self.m),
            "c": float(self.c),
            "q0": [float(x) for x in self.q0],
            "p0": [float(x) for x in self.p0],
            "methods": list(self.methods),
            "h_values": [float(x) for x in self.h_values],
            "duration": float(self.duration),
            "n_compare": int(self.n_compare),
            "ref_refine": int(self.ref_refine),
        }


def config_hash(payload):
    """12-hex-digit digest of a canonical-JSON payload."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:12]


def _validate(config):
    """Resolve (field, particle, y0) and reject inconsistent configs."""
    if not isinstance(config.experiment, str) or not config.experiment:
        raise ConfigError("experiment name must be a non-empty string")
    field = config.field()
    pp = config.particle()
    if len(config.q0) != 3 or len(config.p0) != 3:
        raise ConfigError("q0 and p0 must have three components each")
    if not config.methods:
        raise ConfigError("methods list is empty")
    for m in config.methods:
        if m not in METHOD_IDS:
            raise ConfigError(f"unknown method {m!r}; known: {METHOD_IDS}")
        if m == "spreiter_walter" and not field.uniform_b:
            raise ConfigError("spreiter_walter requires a uniform magnetic "
                              f"field; {config.field_kind!r} is nonuniform")
    if not config.h_values:
        raise ConfigError("h_values is empty")
    for h in config.h_values:
        if not (math.isfinite(h) and h > 0.0):
            raise ConfigError(f"step sizes must be positive, got {h}")
    if not (math.isfinite(config.duration) and config.duration > 0.0):
        raise ConfigError(f"duration must be positive, got {config.duration}")
    if int(config.n_compare) < 1:
        raise ConfigError("n_compare must be >= 1")
    if int(config.ref_refine) < 2:
        raise ConfigError("ref_refine must be >= 2")
    return field, pp, config.y0()


# ------------------------------------------------- characteristic times

def gyro_time(field, pp, q0):
    """Local gyration period 2*pi/|omega(q0)|."""
    w = field.omega(pp, np.asarray(q0, dtype=float))
    wn = float(np.linalg.norm(w))
    if wn == 0.0:
        raise ConfigError("magnetic field vanishes at the start position")
    return 2.0 * math.pi / wn


def magnetron_period(field, pp, q0):
    """Slow-drift orbit period of a quadrupole trap.

    Uses the local gyration frequency w_c = |omega(q0)| and the axial
    frequency w_z^2 = 2*kappa*c/m of the quadrupole potential:
    w_minus = (w_c - sqrt(w_c^2 - 2 w_z^2)) / 2.
    """
    if "kappa" not in field.params:
        raise ConfigError(f"field {field.kind!r} has no quadrupole strength")
    w = field.omega(pp, np.asarray(q0, dtype=float))
    wc = float(np.linalg.norm(w))
    wz2 = 2.0 * field.params["kappa"] * pp.c / pp.m
    disc = wc * wc - 2.0 * wz2
    if disc <= 0.0:
        raise ConfigError("trap is not in the magnetized regime "
                          f"(w_c^2 = {wc * wc:g} <= 2 w_z^2 = {2 * wz2:g})")
    wm = 0.5 * (wc - math.sqrt(disc))
    return 2.0 * math.pi / wm


# ------------------------------------------------------ named setups

#: bounce period of the built-in planar 1/x^2 orbit (x oscillates through
#: [0.5, 1] with drift speed 1/6; value measured against the reference run)
GRADB_PERIOD = 3.0 * math.pi / (2.0 * math.sqrt(2.0))

_EXPLICIT5 = ("boris_cayley", "boris_exp", "chin_a", "chin_b", "scovel")
_CORE7 = ("boris_cayley", "boris_exp", "chin_a", "chin_b",
          "impl_strang", "impl_midpoint", "composed")
_UNIFORM9 = ("boris_cayley", "boris_exp", "chin_a", "chin_b", "scovel",
             "impl_strang", "impl_midpoint", "composed", "spreiter_walter")

BUILTIN_EXPERIMENTS = (
    "gradb2d",
    "gradb2d_convergence",
    "penning_ideal",
    "penning_ideal_convergence",
    "penning_bottle",
    "penning_asym",
)


def _geom(lo, hi, n):
    return tuple(float(x) for x in np.geomspace(lo, hi, n))


def builtin_experiment(name):
    """Named experiment setups with frozen horizons and step grids.

    Step grids are in units of the local gyration period at the start
    position; horizons are two slow-orbit cycles for the traps, multiples of
    the bounce period for the planar field, and short multi-gyration windows
    for the convergence variants.
    """
    if name in ("gradb2d", "gradb2d_convergence"):
        conv = name.endswith("_convergence")
        return ExperimentConfig(
            experiment=name,
            field_kind="gradb2d",
            m=1.0, c=-1.0,
            q0=(1.0, 0.0, 0.0), p0=(0.0, 0.5, 0.0),
            methods=_CORE7,
            h_values=tuple(f * GRADB_PERIOD for f in (
                _geom(0.002, 0.05, 8) if conv else _geom(0.0005, 0.05, 11))),
            duration=(2.0 if conv else 100.0) * GRADB_PERIOD,
        )
    if name in ("penning_ideal", "penning_ideal_convergence",
                "penning_bottle", "penning_asym"):
        kind = "penning_ideal" if name.startswith("penning_ideal") else name
        params = {"kappa": 10.0, "b_z": 100.0}
        if kind == "penning_bottle":
            params["beta"] = 200.0
        elif kind == "penning_asym":
            params["beta"] = 50.0
        field = build_field(kind, **params)
        pp = ParticleParams(m=1.0, c=1.0)
        q0, p0 = (1.0 / 3.0, 0.0, 0.5), (0.0, 1.0, 0.0)
        f0 = gyro_time(field, pp, q0)
        if name == "penning_ideal_convergence":
            duration = 2.0 * f0
            factors = _geom(0.002, 0.1, 8)
        else:
            duration = 2.0 * magnetron_period(field, pp, q0)
            factors = {
                "penning_ideal": _geom(0.002, 2.4, 32),
                "penning_bottle": _geom(0.002, 0.4, 24),
                "penning_asym": _geom(0.001, 0.1, 21),
            }[name]
        return ExperimentConfig(
            experiment=name,
            field_kind=kind,
            field_params=params,
            m=1.0, c=1.0,
            q0=q0, p0=p0,
            methods=(_UNIFORM9 if kind == "penning_ideal" else _CORE7),
            h_values=tuple(f * f0 for f in factors),
            duration=duration,
        )
    raise ConfigError(f"unknown experiment {name!r}; "
                      f"built-ins: {BUILTIN_EXPERIMENTS}")


_CONFIG_KEYS = tuple(f.name for f in dc_fields(ExperimentConfig))


def config_from_dict(data):
    """Build an ExperimentConfig from a plain dict (e.g. parsed JSON).

    ``experiment`` is required.  A built-in name loads that setup and applies
    the remaining keys as overrides; any other name must spell out the full
    configuration.  Unknown keys are rejected.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; "
                          f"allowed: {sorted(_CONFIG_KEYS)}")
    if "experiment" not in data:
        raise ConfigError("config needs an 'experiment' name")
    name = data["experiment"]
    overrides = {}
    for key, value in data.items():
        if key == "experiment":
            continue
        if key in ("q0", "p0", "h_values", "methods"):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{key} must be a list")
            overrides[key] = tuple(value)
        elif key == "field_params":
            if not isinstance(value, dict):
                raise ConfigError("field_params must be an object")
            overrides[key] = dict(value)
        elif key in ("n_compare", "ref_refine"):
            overrides[key] = int(value)
        elif key in ("m", "c", "duration"):
            overrides[key] = float(value)
        else:
            overrides[key] = value
    if name in BUILTIN_EXPERIMENTS:
        config = replace(builtin_experiment(name), **overrides)
    else:
        required = {"field_kind", "m", "c", "q0", "p0", "methods",
                    "h_values", "duration"}
        missing = sorted(required - set(overrides))
        if missing:
            raise ConfigError(f"custom experiment {name!r} is missing keys "
                              f"{missing}")
        config = ExperimentConfig(experiment=name, **overrides)
    _validate(config)
    return config


def load_config(path):
    """Load an ExperimentConfig from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)


# ----------------------------------------------------------- snapping

def snap_step(duration, n_compare, h_target):
    """Snap a target step to tau/k with tau = duration/n_compare.

    Returns (h, k); k >= 1, so targets above tau snap to tau itself.
    """
    tau = duration / n_compare
    k = max(1, int(round(tau / h_target)))
    return tau / k, k


def _snapped_grid(config):
    """Sorted, de-duplicated [(h, steps_per_interval)] for the sweep grid."""
    grid = {}
    for target in config.h_values:
        h, k = snap_step(config.duration, config.n_compare, target)
        grid[k] = h
    return sorted(((h, k) for k, h in grid.items()), key=lambda p: p[0])


# ------------------------------------------------------------ running

def _stepper_for(method, fp_iters=None, composition="triple_jump",
                 inner="impl_midpoint"):
    try:
        return make_stepper(StepperConfig(method, fp_iters=fp_iters,
                                          composition=composition,
                                          inner=inner))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _run_sampled(stepper, field, pp, y0, h, n_steps, stride):
    """(ok, n_done, samples) via the compiled kernel when available.

    ``samples`` has shape (n_steps//stride + 1, 6) with NaN rows after a
    blow-up; row 0 is the start state.
    """
    args = fastpath.kernel_args(stepper, field, pp)
    if args is None:
        traj = integrate(stepper, field, pp, y0, h, n_steps, stride)
        return traj.status == "ok", traj.n_done, traj.ys
    out = np.empty((n_steps // stride + 1, 6))
    res = fastpath.run_samples(*args, h, np.asarray(y0, dtype=float),
                               n_steps, stride, out)
    status, n_done = int(res[0]), int(res[1])
    if status != fastpath.STATUS_OK:
        out[n_done // stride + 1:] = np.nan
    return status == fastpath.STATUS_OK, n_done, out


class _ReferenceStepper:
    """Adapter running the reference composition through integrate()."""

    method = "reference"
    fp_iters = 0

    def step(self, field, pp, y, h):
        return reference_step(field, pp, y, h)


def reference_step(field, pp, y, h):
    """One reference step: triple-jump composition of the exponential
    drift/kick splitting (order 4, exact on the magnetic rotation)."""
    for g in COMPOSITIONS["triple_jump"]:
        y = chin_b_step(field, pp, y, g * h)
    return y


def _run_reference_sampled(field, pp, y0, h, n_steps, stride):
    if field.code >= 0:
        gammas = np.asarray(COMPOSITIONS["triple_jump"], dtype=float)
        out = np.empty((n_steps // stride + 1, 6))
        res = fastpath.run_samples(
            fastpath.REF_CODE, 0, gammas, 0, field.code,
            field.coeffs[0], field.coeffs[1], field.coeffs[2],
            pp.c, pp.m, h, np.asarray(y0, dtype=float), n_steps, stride, out)
        status, n_done = int(res[0]), int(res[1])
        if status != fastpath.STATUS_OK:
            out[n_done // stride + 1:] = np.nan
        return status == fastpath.STATUS_OK, n_done, out
    traj = integrate(_ReferenceStepper(), field, pp, y0, h, n_steps, stride)
    return traj.status == "ok", traj.n_done, traj.ys


@dataclass
class ReferenceResult:
    """Reference states at the comparison times plus convergence evidence."""

    ts: np.ndarray
    ys: np.ndarray
    h_ref: float
    deviation: float
    refinements: int
    tol: float


def make_reference(config, tol=1e-10, max_refinements=3):
    """Reference orbit sampled at the comparison times.

    Integrates with the reference composition at a step near
    ``h_min / ref_refine`` and accepts it only if rerunning at half the step
    moves no sampled component by more than ``tol``; otherwise the step is
    halved, up to ``max_refinements`` times.
    """
    field, pp, y0 = _validate(config)
    n_cmp = int(config.n_compare)
    tau = config.duration / n_cmp
    h_min = min(h for h, _ in _snapped_grid(config))
    k_ref = max(1, math.ceil(tau * config.ref_refine / h_min))
    for attempt in range(max_refinements + 1):
        ok1, _, ys1 = _run_reference_sampled(
            field, pp, y0, tau / k_ref, n_cmp * k_ref, k_ref)
        ok2, _, ys2 = _run_reference_sampled(
            field, pp, y0, tau / (2 * k_ref), 2 * n_cmp * k_ref, 2 * k_ref)
        if not (ok1 and ok2):
            raise NumericalFailure(
                f"reference run for {config.experiment!r} left IEEE range "
                f"at h_ref = {tau / k_ref:g}")
        deviation = float(np.max(np.abs(ys1 - ys2)))
        if deviation <= tol:
            return ReferenceResult(
                ts=np.arange(n_cmp + 1) * tau, ys=ys1, h_ref=tau / k_ref,
                deviation=deviation, refinements=attempt, tol=tol)
        k_ref *= 2
    raise ReferenceConvergenceError(
        f"reference for {config.experiment!r} still moves {deviation:g} "
        f"> {tol:g} between step halvings after {max_refinements} "
        f"refinements (last h_ref = {tau / k_ref:g})")


def reference_rows(config, ref):
    """CSV rows carrying the reference states themselves."""
    chash = config_hash({"op": "reference", "config": config.as_dict()})
    names = ("qx", "qy", "qz", "px", "py", "pz")
    rows = []
    for j, t in enumerate(ref.ts):
        for k, name in enumerate(names):
            rows.append((config.experiment, "reference", ref.h_ref, 0,
                         name, float(t), float(ref.ys[j, k]), chash))
    return rows


def reference_meta(config, ref):
    return {
        "op": "reference",
        "config": config.as_dict(),
        "config_hash": config_hash({"op": "reference",
                                    "config": config.as_dict()}),
        "h_ref": float(ref.h_ref),
        "deviation": float(ref.deviation),
        "refinements": int(ref.refinements),
        "tol": float(ref.tol),
        "tool_version": TOOL_VERSION,
    }


# ------------------------------------------------------------- sweeps

def fit_loglog_slope(hs, errs, floor=SLOPE_FLOOR, cap=SLOPE_CAP,
                     min_points=SLOPE_MIN_POINTS):
    """Least-squares slope of log(err) against log(h).

    Only resolvable points participate: finite errors strictly between
    ``floor`` (round-off) and ``cap`` (outside the asymptotic regime).
    Returns (slope, mask); slope is NaN with fewer than ``min_points``.
    """
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    mask = np.isfinite(errs) & (errs > floor) & (errs < cap)
    if int(mask.sum()) < min_points:
        return float("nan"), mask
    slope = np.polyfit(np.log(hs[mask]), np.log(errs[mask]), 1)[0]
    return float(slope), mask


def _energy_series(field, pp, ys):
    """Vectorized H(y) over an (n, 6) sample array; NaN when the model has
    no potential."""
    ke = 0.5 * np.einsum("ij,ij->i", ys[:, 3:], ys[:, 3:]) / pp.m
    kind = field.kind
    if kind in ("uniform", "gradb2d"):
        return ke
    if kind in ("penning_ideal", "penning_bottle", "penning_asym"):
        kap = field.params["kappa"]
        pot = -0.5 * kap * (ys[:, 0] ** 2 + ys[:, 1] ** 2) + kap * ys[:, 2] ** 2
        return ke + pp.c * pot
    if field.has_potential:
        return ke + pp.c * np.array([field.potential(q) for q in ys[:, :3]])
    return np.full(len(ys), np.nan)


def _max_rel(series):
    ref = series[0]
    scale = abs(ref)
    if scale == 0.0 or not math.isfinite(scale):
        scale = 1.0
    return float(np.max(np.abs(series - ref))) / scale


def _sweep_point(stepper, field, pp, config, h, k_sub, ref):
    """Error observables for one (method, h) sweep point."""
    n_steps = k_sub * int(config.n_compare)
    want_inv = field.kind == "gradb2d"
    obs = {}
    kernel = fastpath.kernel_args(stepper, field, pp) is not None
    if not kernel or n_steps <= _FULL_SAMPLE_LIMIT:
        ok, _, ys = _run_sampled(stepper, field, pp, config.y0(), h,
                                 n_steps, 1)
        if not ok:
            obs["pos_err"] = math.inf
            obs["energy_err"] = math.inf
            if want_inv:
                obs["inv_err"] = math.inf
            return obs
        diff = ys[::k_sub, :3] - ref.ys[:, :3]
        obs["pos_err"] = float(np.max(np.linalg.norm(diff, axis=1)))
        obs["energy_err"] = _max_rel(_energy_series(field, pp, ys))
        if want_inv:
            obs["inv_err"] = _max_rel(ys[:, 4] + 1.0 / ys[:, 0])
        return obs
    # streaming path for long runs: sampled positions + one-window energy
    ok, _, ys = _run_sampled(stepper, field, pp, config.y0(), h,
                             n_steps, k_sub)
    args = fastpath.kernel_args(stepper, field, pp)
    w_e = np.empty(1)
    w_scratch = [np.empty(1) for _ in range(4)]
    res = fastpath.run_windows(*args, h, config.y0(), n_steps, n_steps,
                               w_e, *w_scratch)
    ok = ok and int(res[0]) == fastpath.STATUS_OK
    if not ok:
        obs["pos_err"] = math.inf
        obs["energy_err"] = math.inf
        if want_inv:
            obs["inv_err"] = math.inf
        return obs
    diff = ys[:, :3] - ref.ys[:, :3]
    obs["pos_err"] = float(np.max(np.linalg.norm(diff, axis=1)))
    obs["energy_err"] = float(w_e[0])
    if want_inv:
        inv = ys[:, 4] + 1.0 / ys[:, 0]
        obs["inv_err"] = _max_rel(inv)
    return obs


@dataclass
class SweepResult:
    """Rows plus structured access to the per-point errors and slopes."""

    config: ExperimentConfig
    rows: list
    meta: dict
    reference: ReferenceResult
    errors: dict      # (method, h) -> {observable: value}
    slopes: dict      # (method, observable) -> slope


def run_sweep(config, ref_tol=1e-10, max_refinements=3):
    """Run the step-size sweep of an experiment against its reference.

    For every configured method and snapped step size this measures the
    maximum position error against the reference over the comparison times,
    the maximum relative energy error over all steps, and (on the planar
    1/x^2 field) the maximum relative error of the conserved p_y + 1/x.
    Diverged runs record inf.  Per-method log-log slopes are appended for
    each observable.
    """
    field, pp, _ = _validate(config)
    grid = _snapped_grid(config)
    ref = make_reference(config, tol=ref_tol, max_refinements=max_refinements)
    chash = config_hash({"op": "sweep", "config": config.as_dict()})
    horizon = float(config.duration)
    obs_names = ["pos_err", "energy_err"]
    if field.kind == "gradb2d":
        obs_names.append("inv_err")
    rows = []
    errors = {}
    slopes = {}
    for method in config.methods:
        stepper = _stepper_for(method)
        for h, k_sub in grid:
            point = _sweep_point(stepper, field, pp, config, h, k_sub, ref)
            errors[(method, h)] = point
            for name in obs_names:
                rows.append((config.experiment, method, h, stepper.fp_iters,
                             name, horizon, point[name], chash))
        hs = [h for h, _ in grid]
        for name in obs_names:
            slope, _ = fit_loglog_slope(hs, [errors[(method, h)][name]
                                             for h in hs])
            slopes[(method, name)] = slope
            rows.append((config.experiment, method, 0.0, stepper.fp_iters,
                         name + "_slope", -1.0, slope, chash))
    rows.sort(key=lambda r: (r[1], r[2], r[4], r[5]))
    meta = {
        "op": "sweep",
        "config": config.as_dict(),
        "config_hash": chash,
        "snapped_h": [[float(h), int(k)] for h, k in grid],
        "observables": obs_names,
        "slope_fit": {"floor": SLOPE_FLOOR, "cap": SLOPE_CAP,
                      "min_points": SLOPE_MIN_POINTS},
        "reference": {"h_ref": float(ref.h_ref),
                      "deviation": float(ref.deviation),
                      "refinements": int(ref.refinements),
                      "tol": float(ref.tol)},
        "tool_version": TOOL_VERSION,
    }
    return SweepResult(config=config, rows=rows, meta=meta, reference=ref,
                       errors=errors, slopes=slopes)


# ----------------------------------------------------------- long runs

_WINDOW_NAMES = ("energy_err_max", "mu_max", "mu_min", "mu_mean", "alpha_end")


def _windows_numpy(stepper, field, pp, y0, h, n_steps, window):
    """Pure-numpy twin of the compiled window driver (custom fields)."""
    n_win = n_steps // window
    w_emax = np.full(n_win, np.inf)
    w_mumax = np.full(n_win, np.nan)
    w_mumin = np.full(n_win, np.nan)
    w_mumean = np.full(n_win, np.nan)
    w_alpha = np.full(n_win, np.nan)
    traj = integrate(stepper, field, pp, y0, h, n_steps, 1)
    n_done = traj.n_done
    h0 = energy(field, pp, np.asarray(y0, dtype=float))
    habs = abs(h0) if h0 != 0.0 else 1.0
    ys = traj.ys[:n_done + 1]
    e_series = np.array([abs(energy(field, pp, y) - h0) / habs
                         for y in ys[1:]])
    mu_series = np.array([magnetic_moment(field, pp, y) for y in ys[1:]])
    alpha = unwrap_angle(ys[:, :2])
    for w in range(n_win):
        hi = (w + 1) * window
        if hi > n_done:
            break
        lo = w * window
        w_emax[w] = e_series[lo:hi].max()
        w_mumax[w] = mu_series[lo:hi].max()
        w_mumin[w] = mu_series[lo:hi].min()
        w_mumean[w] = mu_series[lo:hi].mean()
        w_alpha[w] = alpha[hi]
    status = "ok" if traj.status == "ok" else "diverged"
    return status, n_done, (w_emax, w_mumax, w_mumin, w_mumean, w_alpha)


@dataclass
class LongrunResult:
    """Windowed conservation record of one long integration."""

    config: ExperimentConfig
    method: str
    h: float
    fp_iters: int
    n_steps: int
    window: int
    status: str
    n_done: int
    windows: dict
    rows: list
    meta: dict


def run_longrun(config, method, n_steps, window=None, h=None, h_factor=None,
                fp_iters=None, composition="triple_jump",
                inner="impl_midpoint"):
    """Integrate one method for n_steps, recording per-window reductions.

    Exactly one of ``h`` (absolute) or ``h_factor`` (in units of the local
    gyration period at the start position) selects the step.  Each window of
    ``window`` steps (default ``n_steps // 1000``) records the maximum
    relative energy error, the max/min/mean adiabatic moment, and the
    unwrapped gyration angle at the window end.
    """
    field, pp, y0 = _validate(config)
    if method not in METHOD_IDS:
        raise ConfigError(f"unknown method {method!r}; known: {METHOD_IDS}")
    if method == "spreiter_walter" and not field.uniform_b:
        raise ConfigError("spreiter_walter requires a uniform magnetic field")
    if (h is None) == (h_factor is None):
        raise ConfigError("pass exactly one of h or h_factor")
    if h is None:
        h = float(h_factor) * gyro_time(field, pp, config.q0)
    h = float(h)
    if not (math.isfinite(h) and h > 0.0):
        raise ConfigError(f"step size must be positive, got {h}")
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    if window is None:
        window = max(1, n_steps // 1000)
    window = int(window)
    if not 1 <= window <= n_steps:
        raise ConfigError(f"window must be in [1, n_steps], got {window}")
    stepper = _stepper_for(method, fp_iters=fp_iters,
                           composition=composition, inner=inner)
    n_win = n_steps // window
    args = fastpath.kernel_args(stepper, field, pp)
    if args is not None:
        arrays = tuple(np.empty(n_win) for _ in range(5))
        res = fastpath.run_windows(*args, h, y0, n_steps, window, *arrays)
        status = "ok" if int(res[0]) == fastpath.STATUS_OK else "diverged"
        n_done = int(res[1])
    else:
        status, n_done, arrays = _windows_numpy(stepper, field, pp, y0, h,
                                                n_steps, window)
    gammas = list(stepper.gammas) if stepper.gammas is not None else None
    payload = {
        "op": "longrun",
        "config": config.as_dict(),
        "method": method,
        "h": h,
        "fp_iters": int(stepper.fp_iters),
        "composition": gammas,
        "inner": stepper.inner,
        "n_steps": n_steps,
        "window": window,
    }
    chash = config_hash(payload)
    rows = []
    for w in range(n_win):
        for name, arr in zip(_WINDOW_NAMES, arrays):
            rows.append((config.experiment, method, h, stepper.fp_iters,
                         name, float(w), float(arr[w]), chash))
    meta = dict(payload)
    meta.update({
        "config_hash": chash,
        "n_windows": n_win,
        "status": status,
        "n_done": n_done,
        "tool_version": TOOL_VERSION,
    })
    windows = dict(zip(_WINDOW_NAMES, arrays))
    return LongrunResult(config=config, method=method, h=h,
                         fp_iters=stepper.fp_iters, n_steps=n_steps,
                         window=window, status=status, n_done=n_done,
                         windows=windows, rows=rows, meta=meta)


# ------------------------------------------------------ structure checks

@dataclass(frozen=True)
class CheckRow:
    field_kind: str
    method: str
    probe: str
    value: float
    threshold: float

    @property
    def ok(self):
        return math.isfinite(self.value) and self.value <= self.threshold

POISSON_METHODS = ("scovel", "impl_strang", "impl_midpoint", "composed")

_CHECK_STATES = {
    "gradb2d": (1.0, 0.0, 0.0, 0.0, 0.5, 0.0),
}
_CHECK_STATE_DEFAULT = (1.0 / 3.0, 0.0, 0.5, 0.0, 1.0, 0.0)

_CHECK_FIELDS = (
    ("uniform", {"b": (30.0, -20.0, 90.0)}),
    ("gradb2d", {}),
    ("penning_ideal", {"kappa": 10.0, "b_z": 100.0}),
    ("penning_bottle", {"kappa": 10.0, "b_z": 100.0, "beta": 200.0}),
    ("penning_asym", {"kappa": 10.0, "b_z": 100.0, "beta": 50.0}),
)

VOLUME_TOL = 1e-5
SYMMETRY_TOL = 1e-12
POISSON_TOL = 1e-5


def run_check(h_factor=0.02):
    """Structure probes for the step maps; returns a list of CheckRow.

    All probes share one step size, ``h_factor`` gyration periods of the
    ideal trap (h = h_factor * 2*pi/100), so defects are comparable across
    field models.  Probes (finite-difference Jacobians, one step):

    - volume: |det J - 1| for the five explicit methods on every built-in
      field model (threshold 1e-5),
    - symmetry: round-trip defect |y - step(step(y, h), -h)| on the ideal
      trap (threshold 1e-12),
    - poisson: residual |J B J^T - B(step(y))| on a skew uniform field for
      the exact-rotation family including the iterated implicit maps
      (threshold 1e-5).
    """
    rows = []
    pp_pos = ParticleParams(m=1.0, c=1.0)
    pp_neg = ParticleParams(m=1.0, c=-1.0)
    h = h_factor * (2.0 * math.pi / 100.0)
    for kind, params in _CHECK_FIELDS:
        field = build_field(kind, **params)
        pp = pp_neg if kind == "gradb2d" else pp_pos
        y = np.array(_CHECK_STATES.get(kind, _CHECK_STATE_DEFAULT))
        for method in _EXPLICIT5:
            stepper = _stepper_for(method)
            one = lambda yy: stepper.step(field, pp, yy, h)
            rows.append(CheckRow(kind, method, "volume",
                                 volume_defect(one, y), VOLUME_TOL))
            if kind == "penning_ideal":
                two = lambda yy, hh: stepper.step(field, pp, yy, hh)
                rows.append(CheckRow(kind, method, "symmetry",
                                     symmetry_defect(two, y, h),
                                     SYMMETRY_TOL))
        if kind == "uniform":
            for method in POISSON_METHODS:
                stepper = _stepper_for(method)
                one = lambda yy: stepper.step(field, pp, yy, h)
                rows.append(CheckRow(kind, method, "poisson",
                                     poisson_defect(one, field, pp, y),
                                     POISSON_TOL))
    return rows


# ------------------------------------------------------------ writers

def _format_cell(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path, rows):
    """Write rows under the pinned header; output is byte deterministic."""
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join(_format_cell(cell) for cell in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def meta_path_for(csv_path):
    """Sidecar path: foo.csv -> foo.meta.json (appended otherwise)."""
    s = str(csv_path)
    if s.endswith(".csv"):
        return s[:-4] + ".meta.json"
    return s + ".meta.json"


def write_meta(path, meta):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")
