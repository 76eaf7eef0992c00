"""Equivalence of the compiled kernels with the numpy steppers and drivers.

The compiled path re-implements the same maps with scalar arithmetic, so
states must agree to round-off per step and the windowed reductions must
match recomputing them from a sampled trajectory.
"""

import numpy as np
import pytest

from splitpush.fastpath import (
    METHOD_CODES,
    STATUS_NONFINITE,
    STATUS_OK,
    kernel_args,
    run_samples,
    run_windows,
    step_compiled,
)
from splitpush.fields import (
    FieldModel,
    ParticleParams,
    gradb2d_field,
    penning_asym_field,
    penning_bottle_field,
    penning_ideal_field,
    uniform_field,
)
from splitpush.integrators import METHOD_IDS, StepperConfig, integrate, make_stepper
from splitpush.structure import energy, magnetic_moment, unwrap_angle, windowed

PP = ParticleParams()

UNIFORM = uniform_field(np.array([0.3, -0.2, 0.9]))
GRADB = gradb2d_field()
IDEAL = penning_ideal_field()
BOTTLE = penning_bottle_field()
ASYM = penning_asym_field()

FIELDS = [
    ("uniform", UNIFORM),
    ("gradb2d", GRADB),
    ("penning_ideal", IDEAL),
    ("penning_bottle", BOTTLE),
    ("penning_asym", ASYM),
]

CONFIGS = [
    StepperConfig("boris_cayley"),
    StepperConfig("boris_exp"),
    StepperConfig("chin_a"),
    StepperConfig("chin_b"),
    StepperConfig("scovel"),
    StepperConfig("impl_strang", fp_iters=3),
    StepperConfig("impl_midpoint", fp_iters=3),
    StepperConfig("composed", fp_iters=2),
    StepperConfig("composed", fp_iters=2, inner="impl_strang"),
    StepperConfig("spreiter_walter"),
    StepperConfig("velocity_verlet"),
]


def _cfg_id(cfg):
    if cfg.method == "composed":
        return f"composed-{cfg.inner}"
    return cfg.method


def _state(field):
    if field is GRADB:
        return np.array([1.0, 0.0, 0.0, 0.0, 0.5, 0.0])
    return np.array([1.0 / 3.0, 0.0, 0.5, 0.0, 1.0, 0.0])


def test_method_codes_cover_all_methods():
    assert set(METHOD_CODES) == set(METHOD_IDS)
    assert sorted(METHOD_CODES.values()) == list(range(10))


@pytest.mark.parametrize("h", [1e-3, -1e-3, 0.05])
@pytest.mark.parametrize("cfg", CONFIGS, ids=_cfg_id)
@pytest.mark.parametrize("fname,field", FIELDS)
def test_single_step_matches_numpy(fname, field, cfg, h):
    stepper = make_stepper(cfg)
    if cfg.method == "spreiter_walter" and not field.uniform_b:
        assert kernel_args(stepper, field, PP) is None
        return
    y = _state(field)
    ref = stepper.step(field, PP, y, h)
    fast = step_compiled(stepper, field, PP, y, h)
    np.testing.assert_allclose(fast, ref, rtol=0.0, atol=5e-13)


def test_no_compiled_path_for_custom_fields():
    custom = FieldModel("mine", e=lambda q: np.zeros(3),
                        b=lambda q: np.array([0.0, 0.0, 1.0]), uniform_b=True)
    stepper = make_stepper("boris_cayley")
    assert kernel_args(stepper, custom, PP) is None
    with pytest.raises(ValueError):
        step_compiled(stepper, custom, PP, np.zeros(6), 1e-3)


def test_run_samples_matches_integrate():
    field = BOTTLE
    stepper = make_stepper(StepperConfig("impl_strang", fp_iters=3))
    y0 = _state(field)
    h, n, stride = 1e-3, 400, 7
    traj = integrate(stepper, field, PP, y0, h, n, sample_stride=stride)
    args = kernel_args(stepper, field, PP)
    out = np.full((n // stride + 1, 6), np.nan)
    status, n_done, *yf = run_samples(*args, h, y0, n, stride, out)
    assert status == STATUS_OK
    assert n_done == n
    np.testing.assert_allclose(out, traj.ys, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(np.array(yf), traj.y_final,
                               rtol=1e-10, atol=1e-10)


def test_run_samples_is_deterministic():
    field = ASYM
    stepper = make_stepper(StepperConfig("composed", fp_iters=2))
    y0 = _state(field)
    args = kernel_args(stepper, field, PP)
    outs = []
    for _ in range(2):
        out = np.empty((51, 6))
        run_samples(*args, 2e-3, y0, 50, 1, out)
        outs.append(out)
    assert np.array_equal(outs[0], outs[1])


def test_run_samples_divergence_matches_numpy():
    field = IDEAL
    stepper = make_stepper("velocity_verlet")
    y0 = _state(field)
    h, n = 20.0, 120
    with np.errstate(over="ignore", invalid="ignore"):
        traj = integrate(stepper, field, PP, y0, h, n)
    assert traj.status == "diverged"
    args = kernel_args(stepper, field, PP)
    out = np.full((n + 1, 6), np.nan)
    status, n_done, *_ = run_samples(*args, h, y0, n, 1, out)
    assert status == STATUS_NONFINITE
    assert n_done == traj.n_done
    assert np.all(np.isnan(out[n_done + 1:]))


def test_domain_violation_stops_both_paths():
    # first drift lands exactly on the x = 0 wall of the planar model
    y0 = np.array([0.05, 0.0, 0.0, -1.0, 0.0, 0.0])
    stepper = make_stepper("boris_cayley")
    traj = integrate(stepper, GRADB, PP, y0, 0.1, 10)
    assert traj.status == "diverged"
    assert traj.n_done == 0
    assert any("domain" in note for note in traj.notes)
    args = kernel_args(stepper, GRADB, PP)
    out = np.full((11, 6), np.nan)
    status, n_done, *_ = run_samples(*args, 0.1, y0, 10, 1, out)
    assert status == STATUS_NONFINITE
    assert n_done == 0
    assert np.all(np.isnan(out[1:]))


def test_run_windows_matches_numpy_reductions():
    field = BOTTLE
    stepper = make_stepper("boris_cayley")
    y0 = _state(field)
    h, n, window = 1e-3, 300, 60
    n_win = n // window
    args = kernel_args(stepper, field, PP)
    w_emax, w_mumax, w_mumin, w_mumean, w_alpha = \
        (np.empty(n_win) for _ in range(5))
    status, n_done, *yf = run_windows(*args, h, y0, n, window,
                                      w_emax, w_mumax, w_mumin, w_mumean,
                                      w_alpha)
    assert status == STATUS_OK
    assert n_done == n

    traj = integrate(stepper, field, PP, y0, h, n)
    e0 = energy(field, PP, y0)
    errs = np.array([abs(energy(field, PP, yy) - e0) / abs(e0)
                     for yy in traj.ys[1:]])
    mus = np.array([magnetic_moment(field, PP, yy) for yy in traj.ys[1:]])
    alphas = unwrap_angle(traj.ys[:, :2])
    assert w_emax.max() > 0.0
    np.testing.assert_allclose(w_emax, windowed(errs, window),
                               rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(w_mumax, windowed(mus, window), rtol=1e-8)
    np.testing.assert_allclose(w_mumin, windowed(mus, window, np.min),
                               rtol=1e-8)
    np.testing.assert_allclose(w_mumean, windowed(mus, window, np.mean),
                               rtol=1e-8)
    np.testing.assert_allclose(w_alpha, alphas[window::window],
                               rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(np.array(yf), traj.y_final,
                               rtol=1e-10, atol=1e-11)


def test_run_windows_blowup_leaves_inf_and_nan_windows():
    field = IDEAL
    stepper = make_stepper("velocity_verlet")
    y0 = _state(field)
    h, n, window = 20.0, 100, 20
    n_win = n // window
    args = kernel_args(stepper, field, PP)
    arrs = [np.empty(n_win) for _ in range(5)]
    status, n_done, *_ = run_windows(*args, h, y0, n, window, *arrs)
    assert status == STATUS_NONFINITE
    assert n_done < n
    w_emax = arrs[0]
    done = n_done // window          # fully completed windows
    # the error may hit inf before the state itself goes non-finite, so
    # completed windows are only guaranteed non-NaN; unreached ones keep
    # their inf/NaN fill
    assert np.isfinite(w_emax[0])
    assert not np.any(np.isnan(w_emax[:done]))
    assert np.all(np.isinf(w_emax[done:]))
    for a in arrs[1:]:
        assert np.all(np.isnan(a[done:]))
