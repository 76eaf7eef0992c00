"""Acceptance gate: nine numbered end-to-end checks.

Each test prints exactly one ``CRITERION n: PASS/FAIL`` line (with the
measured numbers on indented detail lines) and then asserts the stated
clauses at the stated tolerances.  Run with ``pytest -v``; the project
config adds ``-rA`` so the printed verdict lines also appear in the
summary for passing tests.

Two checks fail by design and are left failing on purpose; the claims
they encode are not attainable by the schemes as built, and the tests
measure and print the actual behaviour instead of being weakened:

* Criterion 3, slope clause.  It expects the time-symmetry defect of
  the fixed-point implicit methods to shrink like h^k after k sweeps.
  Each sweep contracts the defect by a factor O(h^2) starting from an
  O(h) predictor, so the defect actually scales like h^(2k+1): the
  measured slopes are near 3, 5, 7, ... and never land within k +/- 0.3
  for any k in 1..5.  The structure probes in the same criterion
  (symmetry, volume, Poisson residual) all pass.

* Criterion 8, moment-drift clause.  It expects the plain Boris step to
  show an adiabatic-moment drift exceeding 10x its first-window spread
  within 2e7 steps at h = 0.1 gyration periods.  At this step size the
  drift onset sits roughly two orders of magnitude beyond that horizon
  (a few 1e8 steps); the measured drift-to-spread ratio at 2e7 steps is
  ~0.12.  The companion clause — the composed implicit method keeping
  windowed energy error and moment drift bounded over the same run —
  passes and is asserted.
"""

import math
import time

import numpy as np

from oracles import phi_series
from splitpush.fields import ParticleParams, build_field
from splitpush.harness import (
    GRADB_PERIOD,
    builtin_experiment,
    config_from_dict,
    fit_loglog_slope,
    gyro_time,
    run_check,
    run_longrun,
    run_sweep,
)
from splitpush.integrators import (
    StepperConfig,
    boris_rotate_cross,
    integrate,
    make_stepper,
)
from splitpush.smallmat import (
    cayley,
    phi1_mat,
    phi2_mat,
    resolvent,
    rodrigues_exp,
    skew,
)
from splitpush.structure import drift_and_period, symmetry_defect


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


_AXES = (
    _unit((0.0, 0.0, 1.0)),
    _unit((1.0, 0.0, 0.0)),
    _unit((0.3, -1.2, 0.5)),
    _unit((1.0, 1.0, 1.0)),
)


def test_criterion_1_kernel_exactness():
    """Closed-form 3x3 kernels vs. independent oracles on hw in [1e-8, 10].

    rodrigues_exp / phi1_mat / phi2_mat are checked against the long-double
    power series; cayley and resolvent are rational functions whose series
    diverges for hw >= 2, so they are checked against a direct linear solve
    of their defining systems.
    """
    t0 = time.perf_counter()
    worst = 0.0
    eye = np.eye(3)
    for x in (1e-8, 1e-4, 0.1, 1.0, 3.0, 10.0):
        for h in (1.0, 0.02):
            for axis in _AXES:
                omega = (x / h) * axis
                om = skew(omega)
                a = h * om
                worst = max(
                    worst,
                    np.max(np.abs(rodrigues_exp(h, omega) - phi_series(0, a))),
                    np.max(np.abs(phi1_mat(h, omega) - phi_series(1, a))),
                    np.max(np.abs(phi2_mat(h, omega) - phi_series(2, a))),
                )
                hh = 0.5 * h
                lhs = eye - hh * om
                worst = max(
                    worst,
                    np.max(np.abs(cayley(hh, omega)
                                  - np.linalg.solve(lhs, eye + hh * om))),
                    np.max(np.abs(resolvent(hh, omega)
                                  - np.linalg.solve(lhs, eye))),
                )
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    print(f"  max kernel deviation {worst:.3e} (tol 1e-12), "
          f"runtime {elapsed:.2f} s (limit 1 s)")
    print(f"CRITERION 1: {'PASS' if ok else 'FAIL'} — closed-form rotation "
          f"and phi kernels match independent oracles to {worst:.1e}")
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_criterion_2_rotation_algebra():
    """Cross-product rotation vs. Cayley; inverse and augmented identities."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260818)
    eye3 = np.eye(3)

    worst_boris = 0.0
    for _ in range(1000):
        h = rng.uniform(-1.5, 1.5)
        omega = rng.normal(size=3)
        p = rng.normal(size=3)
        dev = np.linalg.norm(boris_rotate_cross(h, omega, p)
                             - cayley(0.5 * h, omega) @ p)
        worst_boris = max(worst_boris, dev / max(1.0, np.linalg.norm(p)))

    worst_ident = 0.0
    for _ in range(200):
        hh = rng.uniform(-1.0, 1.0)
        omega = rng.normal(size=3) * rng.uniform(0.1, 5.0)
        om = skew(omega)
        res = resolvent(hh, omega)
        worst_ident = max(
            worst_ident,
            np.max(np.abs((eye3 - hh * om) @ res - eye3)),
            np.max(np.abs(cayley(hh, omega) - res @ (eye3 + hh * om))),
        )

    # Augmented 6x6 generator [[0, I/m], [0, S]]: its phi_l must have
    # blocks [[I/l!, (h/m) phi_{l+1}(hS)], [0, phi_l(hS)]].
    worst_aug = 0.0
    closed = {0: rodrigues_exp, 1: phi1_mat, 2: phi2_mat}
    for h, omega, m in ((0.3, np.array([1.1, -0.7, 2.0]), 1.7),
                        (1.0, np.array([-0.4, 2.5, 1.3]), 0.6)):
        om = skew(omega)
        a3 = h * om
        aug = np.zeros((6, 6))
        aug[:3, 3:] = (h / m) * eye3
        aug[3:, 3:] = a3
        for ell in (0, 1, 2):
            blocks = phi_series(ell, aug)
            worst_aug = max(
                worst_aug,
                np.max(np.abs(blocks[:3, :3] - eye3 / math.factorial(ell))),
                np.max(np.abs(blocks[3:, :3])),
                np.max(np.abs(blocks[3:, 3:] - closed[ell](h, omega))),
                np.max(np.abs(blocks[:3, 3:]
                              - (h / m) * phi_series(ell + 1, a3))),
            )
            if ell in (0, 1):
                worst_aug = max(
                    worst_aug,
                    np.max(np.abs(blocks[:3, 3:]
                                  - (h / m) * closed[ell + 1](h, omega))),
                )
    elapsed = time.perf_counter() - t0
    ok = (worst_boris <= 1e-14 and worst_ident <= 1e-13
          and worst_aug <= 1e-13 and elapsed < 1.0)
    print(f"  cross-product vs Cayley rotation: {worst_boris:.3e} (tol 1e-14, "
          f"1000 draws)")
    print(f"  inverse/product identities: {worst_ident:.3e} (tol 1e-13)")
    print(f"  augmented phi block identity (l=0,1,2): {worst_aug:.3e} "
          f"(tol 1e-13)")
    print(f"CRITERION 2: {'PASS' if ok else 'FAIL'} — rotation algebra and "
          f"augmented phi blocks verified (runtime {elapsed:.2f} s)")
    assert worst_boris <= 1e-14
    assert worst_ident <= 1e-13
    assert worst_aug <= 1e-13
    assert elapsed < 1.0


def test_criterion_3_structure_probes():
    """One-step structure probes pass; implicit symmetry-defect slope clause
    cannot: the defect contracts like h^(2k+1), not h^k (see module docstring).
    """
    t0 = time.perf_counter()
    rows = run_check(h_factor=0.02)
    failures = [r for r in rows if not r.ok]
    print(f"  structure probes: {len(rows) - len(failures)}/{len(rows)} pass "
          f"(symmetry <= 1e-12, |det J - 1| <= 1e-5, Poisson residual <= 1e-5)")
    for r in failures:
        print(f"    probe FAIL {r.field_kind} {r.method} {r.probe} "
              f"{r.value:.3e} > {r.threshold:g}")

    field = build_field("penning_bottle")
    pp = ParticleParams(1.0, 1.0)
    y0 = np.array([1.0 / 3.0, 0.0, 0.5, 0.0, 1.0, 0.0])
    hs = np.geomspace(0.02, 1.0, 9) * gyro_time(field, pp, y0[:3])
    slope_rows = []
    slopes_ok = True
    for method in ("impl_strang", "impl_midpoint"):
        for k in range(1, 6):
            stepper = make_stepper(StepperConfig(method, fp_iters=k))
            defects = np.array([
                symmetry_defect(lambda y, hh: stepper.step(field, pp, y, hh),
                                y0, h)
                for h in hs
            ])
            slope, _ = fit_loglog_slope(hs, defects, floor=1e-13, cap=1e-4)
            hit = abs(slope - k) <= 0.3
            slopes_ok = slopes_ok and hit
            slope_rows.append((method, k, slope, hit))
    print("  implicit symmetry-defect slopes (clause expects k +/- 0.3; "
          "actual scaling is h^(2k+1)):")
    for method, k, slope, hit in slope_rows:
        print(f"    {method:13s} k={k}  slope {slope:5.2f}  expected "
              f"{k}.0+/-0.3  {'ok' if hit else 'MISS'}")
    elapsed = time.perf_counter() - t0
    ok = not failures and slopes_ok and elapsed < 60.0
    print(f"CRITERION 3: {'PASS' if ok else 'FAIL'} — probes "
          f"{len(rows) - len(failures)}/{len(rows)}; slope clause "
          f"{'met' if slopes_ok else 'unattainable (defect ~ h^(2k+1))'} "
          f"(runtime {elapsed:.1f} s)")
    assert not failures
    assert elapsed < 60.0
    assert slopes_ok, (
        "symmetry-defect slope is ~2k+1 for k fixed-point sweeps "
        "(each sweep contracts the defect by O(h^2) from an O(h) "
        f"predictor); measured {[(m, k, round(s, 2)) for m, k, s, _ in slope_rows]}"
    )


def test_criterion_4_second_order_convergence():
    """Position-error slopes 2.0 +/- 0.2 for all second-order methods."""
    t0 = time.perf_counter()
    cfg = builtin_experiment("penning_ideal_convergence")
    res = run_sweep(cfg)
    slopes = {m: res.slopes[(m, "pos_err")] for m in cfg.methods}
    bad = {m: s for m, s in slopes.items() if not abs(s - 2.0) <= 0.2}
    elapsed = time.perf_counter() - t0
    for m in cfg.methods:
        print(f"  {m:15s} position-error slope {slopes[m]:.3f}")
    print(f"  reference self-convergence deviation "
          f"{res.reference.deviation:.2e} (tol {res.reference.tol:g})")
    ok = not bad
    print(f"CRITERION 4: {'PASS' if ok else 'FAIL'} — {len(slopes) - len(bad)}"
          f"/{len(slopes)} methods converge at order 2.0 +/- 0.2 "
          f"(runtime {elapsed:.1f} s)")
    assert not bad, f"slopes outside 2.0 +/- 0.2: {bad}"


def test_criterion_5_gradient_drift_reproduction():
    """Drift speed and bounce period on the planar 1/x^2 field, 100 periods.

    Tight clause: the 5-sweep implicit split at h = 0.0005 P reproduces
    v_d = 1/6 and P = 3 pi / (2 sqrt 2) to 1e-3 relative.  Ordinal clause at
    h = 0.02 P: the Boris step has the smallest drift-speed error and the
    largest period error of the four compared methods.
    """
    t0 = time.perf_counter()
    field = build_field("gradb2d")
    pp = ParticleParams(1.0, -1.0)
    y0 = np.array([1.0, 0.0, 0.0, 0.0, 0.5, 0.0])
    v_d = 1.0 / 6.0
    period = GRADB_PERIOD

    h = 0.0005 * period
    n = round(100.0 * period / h)
    stepper = make_stepper(StepperConfig("impl_strang", fp_iters=5))
    traj = integrate(stepper, field, pp, y0, h, n, sample_stride=2)
    assert traj.status == "ok"
    vd_m, p_m, n_per = drift_and_period(traj.ts, traj.ys[:, :3], x_mid=0.75)
    vd_rel = abs(vd_m - v_d) / v_d
    p_rel = abs(p_m - period) / period
    print(f"  impl_strang(k=5), h=0.0005P over 100P: v_d {vd_m:.8f} "
          f"(rel err {vd_rel:.2e}), period {p_m:.8f} (rel err {p_rel:.2e}), "
          f"{n_per} periods")

    h2 = 0.02 * period
    n2 = round(100.0 * period / h2)
    errs = {}
    for m in ("boris_cayley", "chin_b", "impl_strang", "impl_midpoint"):
        tr = integrate(make_stepper(m), field, pp, y0, h2, n2)
        assert tr.status == "ok"
        vd2, p2, _ = drift_and_period(tr.ts, tr.ys[:, :3], x_mid=0.75)
        errs[m] = (abs(vd2 - v_d) / v_d, abs(p2 - period) / period)
        print(f"  {m:15s} h=0.02P: v_d rel err {errs[m][0]:.2e}, "
              f"period rel err {errs[m][1]:.2e}")
    best_vd = min(errs, key=lambda m: errs[m][0])
    worst_p = max(errs, key=lambda m: errs[m][1])
    elapsed = time.perf_counter() - t0
    ok = (vd_rel <= 1e-3 and p_rel <= 1e-3
          and best_vd == "boris_cayley" and worst_p == "boris_cayley")
    print(f"CRITERION 5: {'PASS' if ok else 'FAIL'} — drift/period to 1e-3; "
          f"smallest v_d error: {best_vd}, largest period error: {worst_p} "
          f"(runtime {elapsed:.1f} s)")
    assert vd_rel <= 1e-3
    assert p_rel <= 1e-3
    assert best_vd == "boris_cayley"
    assert worst_p == "boris_cayley"


def _window_ratio(arr):
    """last/first windowed value; inf when the run left finite territory."""
    if not np.all(np.isfinite(arr)) or arr[0] == 0.0:
        return math.inf
    return float(arr[-1] / arr[0])


def test_criterion_6_stability_map():
    """Qualitative stability map on the ideal trap at 1e5 steps."""
    t0 = time.perf_counter()
    cfg = builtin_experiment("penning_ideal")

    # (a) at h = one gyration period the Cayley rotation keeps the energy
    # error bounded while the exact-rotation variants degenerate.
    emax = {}
    for m in ("boris_cayley", "boris_exp", "chin_b", "scovel"):
        lr = run_longrun(cfg, m, n_steps=100_000, window=100, h_factor=1.0)
        arr = lr.windows["energy_err_max"]
        emax[m] = float(np.max(arr)) if np.all(np.isfinite(arr)) else math.inf
        print(f"  h=1.0/f_c {m:13s} max windowed energy error {emax[m]:.3e}")
    bounded_ok = emax["boris_cayley"] < 1.0
    unstable_ok = all(emax[m] >= 1.0 for m in ("boris_exp", "chin_b", "scovel"))

    # (b) Boris position-error plateau in [0.01, 0.04] across >= half a
    # decade of step sizes.
    res = run_sweep(config_from_dict({"experiment": "penning_ideal",
                                      "methods": ["boris_cayley"]}))
    pts = sorted((h, v["pos_err"]) for (m, h), v in res.errors.items())
    hs = [h for h, _ in pts]
    in_band = [0.01 <= v <= 0.04 for _, v in pts]
    best_lo = best_hi = None
    i = 0
    while i < len(pts):
        if in_band[i]:
            j = i
            while j + 1 < len(pts) and in_band[j + 1]:
                j += 1
            if best_lo is None or hs[j] / hs[i] > hs[best_hi] / hs[best_lo]:
                best_lo, best_hi = i, j
            i = j + 1
        else:
            i += 1
    span = hs[best_hi] / hs[best_lo] if best_lo is not None else 0.0
    plateau_ok = span >= math.sqrt(10.0)
    if best_lo is not None:
        print(f"  plateau: pos err in [0.01, 0.04] for h in "
              f"[{hs[best_lo]:.3e}, {hs[best_hi]:.3e}] "
              f"(ratio {span:.2f}, need >= {math.sqrt(10.0):.2f})")
    else:
        print("  plateau: no step size lands in [0.01, 0.04]")

    # (c) the non-symmetric Taylor-based method drifts secularly while the
    # symmetric methods' windowed energy error stays flat.
    lr_sw = run_longrun(cfg, "spreiter_walter", n_steps=100_000, window=100,
                        h_factor=0.1)
    e_sw = lr_sw.windows["energy_err_max"]
    fin = np.isfinite(e_sw)
    sw_slope = (np.polyfit(np.arange(e_sw.size)[fin], e_sw[fin], 1)[0]
                if fin.sum() >= 10 else math.inf)
    sw_ok = sw_slope > 0.0
    print(f"  spreiter_walter h=0.1/f_c energy-error trend "
          f"{sw_slope:.3e} per window (need > 0)")
    ratios = {}
    for m in ("boris_cayley", "chin_a", "chin_b", "scovel", "impl_midpoint"):
        lr = run_longrun(cfg, m, n_steps=100_000, window=100, h_factor=0.1)
        ratios[m] = _window_ratio(lr.windows["energy_err_max"])
        print(f"  symmetric {m:13s} last/first window ratio {ratios[m]:.3f} "
              f"(need <= 2)")
    flat_ok = all(r <= 2.0 for r in ratios.values())

    elapsed = time.perf_counter() - t0
    ok = bounded_ok and unstable_ok and plateau_ok and sw_ok and flat_ok
    print(f"CRITERION 6: {'PASS' if ok else 'FAIL'} — resonant step: Cayley "
          f"bounded, exact-rotation variants unstable; plateau span "
          f"{span:.2f}x; secular vs flat windowed error as expected "
          f"(runtime {elapsed:.1f} s)")
    assert bounded_ok, emax
    assert unstable_ok, emax
    assert plateau_ok, pts
    assert sw_ok, sw_slope
    assert flat_ok, ratios


def test_criterion_7_bottle_longrun():
    """1e7-step runs in the mirror-field trap at h = 0.4 gyration periods."""
    t0 = time.perf_counter()
    cfg = builtin_experiment("penning_bottle")
    n = 10_000_000
    win = 10_000

    ratios = {}
    for method, k in (("impl_strang", 5), ("impl_midpoint", 6),
                      ("impl_strang", 1), ("impl_midpoint", 1)):
        lr = run_longrun(cfg, method, n_steps=n, window=win, h_factor=0.4,
                         fp_iters=k)
        r = _window_ratio(lr.windows["energy_err_max"])
        if lr.status != "ok":
            r = math.inf
        ratios[(method, k)] = r
        print(f"  {method:13s} k={k} status {lr.status:8s} "
              f"energy last/first ratio {r:.3f}")
    converged_ok = ratios[("impl_strang", 5)] <= 2.0 \
        and ratios[("impl_midpoint", 6)] <= 2.0
    growing_ok = ratios[("impl_strang", 1)] > 2.0 \
        and ratios[("impl_midpoint", 1)] > 2.0

    field = build_field("penning_bottle")
    pp = ParticleParams(1.0, 1.0)
    h = 0.4 * gyro_time(field, pp, (1.0 / 3.0, 0.0, 0.5))
    pos_cfg = config_from_dict({
        "experiment": "bottle_position",
        "field_kind": "penning_bottle",
        "m": 1.0, "c": 1.0,
        "q0": [1.0 / 3.0, 0.0, 0.5], "p0": [0.0, 1.0, 0.0],
        "methods": ["impl_midpoint", "composed"],
        "h_values": [h], "duration": 500.0 * h,
        "n_compare": 20, "ref_refine": 50,
    })
    res = run_sweep(pos_cfg)
    pos = {m: v["pos_err"] for (m, _h), v in res.errors.items()}
    print(f"  position error over 500 steps: composed {pos['composed']:.3e} "
          f"vs impl_midpoint {pos['impl_midpoint']:.3e} (ratio "
          f"{pos['impl_midpoint'] / pos['composed']:.3f}; the margin is "
          f"small because both share the same field-kick splitting error)")
    pos_ok = pos["composed"] < pos["impl_midpoint"]

    elapsed = time.perf_counter() - t0
    ok = converged_ok and growing_ok and pos_ok
    print(f"CRITERION 7: {'PASS' if ok else 'FAIL'} — converged implicit "
          f"runs flat, single-sweep runs grow, composition beats plain "
          f"midpoint on position (runtime {elapsed:.1f} s)")
    assert converged_ok, ratios
    assert growing_ok, ratios
    assert pos_ok, pos


def test_criterion_8_asym_adiabatic():
    """2e7-step runs in the tilted-mirror trap at h = 0.1 gyration periods.

    The composed-method boundedness clauses pass and are asserted.  The
    Boris moment-drift clause is expected to fail: the drift onset lies
    far beyond this horizon at this step size (module docstring).
    """
    t0 = time.perf_counter()
    cfg = builtin_experiment("penning_asym")
    n = 20_000_000
    win = 20_000

    lr_c = run_longrun(cfg, "composed", n_steps=n, window=win, h_factor=0.1,
                       composition="fifteen_stage")
    e_ratio = _window_ratio(lr_c.windows["energy_err_max"])
    if lr_c.status != "ok":
        e_ratio = math.inf
    mu_mean0 = float(lr_c.windows["mu_mean"][0])
    drift = np.maximum(np.abs(lr_c.windows["mu_max"] - mu_mean0),
                       np.abs(mu_mean0 - lr_c.windows["mu_min"]))
    mu_ratio = _window_ratio(drift)
    print(f"  composed (15-stage, k=16) status {lr_c.status}: energy "
          f"last/first {e_ratio:.3f}, moment-drift last/first {mu_ratio:.3f} "
          f"(both need <= 2)")
    composed_ok = e_ratio <= 2.0 and mu_ratio <= 2.0

    lr_b = run_longrun(cfg, "boris_cayley", n_steps=n, window=win,
                       h_factor=0.1)
    mu_mean = lr_b.windows["mu_mean"]
    spread0 = float(lr_b.windows["mu_max"][0] - lr_b.windows["mu_min"][0])
    b_drift = float(np.max(np.abs(mu_mean - mu_mean[0])))
    b_ratio = b_drift / spread0 if spread0 > 0 else math.inf
    boris_ok = np.all(np.isfinite(mu_mean)) and b_ratio > 10.0
    print(f"  boris_cayley moment drift {b_drift:.3e} vs first-window spread "
          f"{spread0:.3e}: ratio {b_ratio:.3f} (clause needs > 10; the "
          f"drift onset at this step size lies far beyond {n:.0e} steps)")

    elapsed = time.perf_counter() - t0
    ok = composed_ok and boris_ok
    print(f"CRITERION 8: {'PASS' if ok else 'FAIL'} — composed method "
          f"bounded; Boris moment-drift clause "
          f"{'met' if boris_ok else 'unattainable at this horizon'} "
          f"(runtime {elapsed:.1f} s)")
    assert composed_ok, (e_ratio, mu_ratio)
    assert boris_ok, (
        f"Boris moment drift reaches only {b_ratio:.3f}x the first-window "
        f"spread within {n} steps at h = 0.1 gyration periods; the >10x "
        f"growth sets in orders of magnitude later and is not reachable "
        f"at desk scale"
    )


def test_criterion_9_full_scale_flag():
    """The --full-scale escape hatch parses but is never exercised here."""
    from splitpush.cli import build_parser

    parser = build_parser()
    a1 = parser.parse_args(["sweep", "--experiment", "penning_ideal",
                            "--full-scale"])
    a2 = parser.parse_args(["longrun", "--experiment", "penning_bottle",
                            "--method", "impl_strang", "--full-scale"])
    a3 = parser.parse_args(["sweep", "--experiment", "penning_ideal"])
    ok = a1.full_scale and a2.full_scale and not a3.full_scale
    print("  --full-scale accepted by sweep and longrun; default off; "
          "not used by this test suite")
    print(f"CRITERION 9: {'PASS' if ok else 'FAIL'} — full-scale flag "
          f"present, off by default, outside the gate")
    assert ok
