"""Compiled kernels for long runs.

Scalar re-implementations of the built-in fields and one-step maps, plus two
drivers: a sampling driver (states every ``stride`` steps) and a windowed
driver that accumulates per-window reductions (max relative energy error,
min/max/mean adiabatic moment, unwrapped gyration angle) without storing the
trajectory.  The numpy implementations in :mod:`flows`/:mod:`integrators`
remain the reference; equivalence is covered by tests.

Only built-in field models (``FieldModel.code >= 0``) run here; drivers
return a status code instead of raising: 0 ok, 1 non-finite state (blow-up
or domain violation, which poisons the state with NaN).
"""

import math

import numpy as np
from numba import njit

METHOD_CODES = {
    "boris_cayley": 0,
    "boris_exp": 1,
    "chin_a": 2,
    "chin_b": 3,
    "scovel": 4,
    "impl_strang": 5,
    "impl_midpoint": 6,
    "composed": 7,
    "spreiter_walter": 8,
    "velocity_verlet": 9,
}

# internal step code for the reference integrator: a palindromic
# composition (weights in `gammas`) of full drift/kick-rotation steps
REF_CODE = 10

STATUS_OK = 0
STATUS_NONFINITE = 1

# rows: series coefficients of s_ell, ell = 1..4 (see smallmat)
_SER = np.array([
    [(-1.0) ** j / math.factorial(2 * j + ell) for j in range(9)]
    for ell in (1, 2, 3, 4)
])


@njit(cache=True, inline="always")
def _fs(ell, x):
    if x < 0.6:
        u = x * x
        acc = _SER[ell - 1, 8]
        for j in range(7, -1, -1):
            acc = acc * u + _SER[ell - 1, j]
        return acc
    if ell == 1:
        return math.sin(x) / x
    if ell == 2:
        s = math.sin(0.5 * x)
        return 2.0 * s * s / (x * x)
    if ell == 3:
        return (x - math.sin(x)) / (x * x * x)
    s = math.sin(0.5 * x)
    x2 = x * x
    return (0.5 * x2 - 2.0 * s * s) / (x2 * x2)


# ---------------------------------------------------------------- fields

@njit(cache=True, inline="always")
def _bfield(code, c0, c1, c2, qx, qy, qz):
    """Magnetic field of the built-in models (NaN outside the domain)."""
    if code == 0:
        return c0, c1, c2
    if code == 1:
        if qx <= 0.0:
            return np.nan, np.nan, np.nan
        return 0.0, 0.0, 1.0 / (qx * qx)
    if code == 2:
        return 0.0, 0.0, c1
    if code == 3:
        # c0 kappa, c1 b_z, c2 beta
        return (-c2 * qx * qz, -c2 * qy * qz,
                c1 + c2 * (qz * qz - 0.5 * (qx * qx + qy * qy)))
    # code == 4
    return (c1 / 3.0 + c2 * (qy - qz), c2 * (qx + qz), c1 + c2 * (qy - qx))


@njit(cache=True, inline="always")
def _force(code, c0, c1, c2, c, qx, qy, qz):
    """Electric force c*e(q) for the built-in models."""
    if code == 0 or code == 1:
        return 0.0, 0.0, 0.0
    k = c * c0
    return k * qx, k * qy, -2.0 * k * qz


@njit(cache=True, inline="always")
def _potential(code, c0, c1, c2, qx, qy, qz):
    if code == 0 or code == 1:
        return 0.0
    return -0.5 * c0 * (qx * qx + qy * qy) + c0 * qz * qz


@njit(cache=True, inline="always")
def _omega(code, c0, c1, c2, c, m, qx, qy, qz):
    bx, by, bz = _bfield(code, c0, c1, c2, qx, qy, qz)
    s = c / m
    return s * bx, s * by, s * bz


# ------------------------------------------------- rotation/phi actions

@njit(cache=True, inline="always")
def _rot(h, wx, wy, wz, vx, vy, vz):
    """exp(h*S(w)) v via the two scalar coefficients."""
    x = abs(h) * math.sqrt(wx * wx + wy * wy + wz * wz)
    a1 = h * _fs(1, x)
    a2 = h * h * _fs(2, x)
    sx = vy * wz - vz * wy
    sy = vz * wx - vx * wz
    sz = vx * wy - vy * wx
    tx = sy * wz - sz * wy
    ty = sz * wx - sx * wz
    tz = sx * wy - sy * wx
    return vx + a1 * sx + a2 * tx, vy + a1 * sy + a2 * ty, \
        vz + a1 * sz + a2 * tz


@njit(cache=True, inline="always")
def _phi1(h, wx, wy, wz, vx, vy, vz):
    x = abs(h) * math.sqrt(wx * wx + wy * wy + wz * wz)
    a1 = h * _fs(2, x)
    a2 = h * h * _fs(3, x)
    sx = vy * wz - vz * wy
    sy = vz * wx - vx * wz
    sz = vx * wy - vy * wx
    tx = sy * wz - sz * wy
    ty = sz * wx - sx * wz
    tz = sx * wy - sy * wx
    return vx + a1 * sx + a2 * tx, vy + a1 * sy + a2 * ty, \
        vz + a1 * sz + a2 * tz


@njit(cache=True, inline="always")
def _phi2(h, wx, wy, wz, vx, vy, vz):
    x = abs(h) * math.sqrt(wx * wx + wy * wy + wz * wz)
    a1 = h * _fs(3, x)
    a2 = h * h * _fs(4, x)
    sx = vy * wz - vz * wy
    sy = vz * wx - vx * wz
    sz = vx * wy - vy * wx
    tx = sy * wz - sz * wy
    ty = sz * wx - sx * wz
    tz = sx * wy - sy * wx
    return 0.5 * vx + a1 * sx + a2 * tx, 0.5 * vy + a1 * sy + a2 * ty, \
        0.5 * vz + a1 * sz + a2 * tz


@njit(cache=True, inline="always")
def _cayley_rot(hh, wx, wy, wz, vx, vy, vz):
    """(I - hh S)^-1 (I + hh S) v."""
    wc2 = wx * wx + wy * wy + wz * wz
    kap = 2.0 * hh / (1.0 + hh * hh * wc2)
    sx = vy * wz - vz * wy
    sy = vz * wx - vx * wz
    sz = vx * wy - vy * wx
    tx = sy * wz - sz * wy
    ty = sz * wx - sx * wz
    tz = sx * wy - sy * wx
    return vx + kap * (sx + hh * tx), vy + kap * (sy + hh * ty), \
        vz + kap * (sz + hh * tz)


@njit(cache=True, inline="always")
def _tb(h, m, wx, wy, wz, qx, qy, qz, px, py, pz):
    """Frozen-omega drift-rotation flow."""
    gx, gy, gz = _phi1(h, wx, wy, wz, px, py, pz)
    rx, ry, rz = _rot(h, wx, wy, wz, px, py, pz)
    s = h / m
    return qx + s * gx, qy + s * gy, qz + s * gz, rx, ry, rz


@njit(cache=True, inline="always")
def _eb(h, wx, wy, wz, fx, fy, fz, px, py, pz):
    """Exact kick-rotation: p <- exp(hS) p + h phi1(hS) F."""
    rx, ry, rz = _rot(h, wx, wy, wz, px, py, pz)
    gx, gy, gz = _phi1(h, wx, wy, wz, fx, fy, fz)
    return rx + h * gx, ry + h * gy, rz + h * gz


# ----------------------------------------------------------- mid-steps

@njit(cache=True)
def _mid_strang(code, c0, c1, c2, c, m, h, fp, qx, qy, qz, px, py, pz):
    wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
    aqx, aqy, aqz, apx, apy, apz = _tb(0.5 * h, m, wx, wy, wz,
                                       qx, qy, qz, px, py, pz)
    vqx, vqy, vqz, vpx, vpy, vpz = aqx, aqy, aqz, apx, apy, apz
    for _ in range(fp):
        wx, wy, wz = _omega(code, c0, c1, c2, c, m, vqx, vqy, vqz)
        vqx, vqy, vqz, vpx, vpy, vpz = _tb(0.5 * h, m, wx, wy, wz,
                                           aqx, aqy, aqz, apx, apy, apz)
    return vqx, vqy, vqz, vpx, vpy, vpz


@njit(cache=True)
def _mid_midpoint(code, c0, c1, c2, c, m, h, fp, qx, qy, qz, px, py, pz):
    vqx, vqy, vqz, vpx, vpy, vpz = qx, qy, qz, px, py, pz
    for _ in range(fp):
        mx = 0.5 * (vqx + qx)
        my = 0.5 * (vqy + qy)
        mz = 0.5 * (vqz + qz)
        wx, wy, wz = _omega(code, c0, c1, c2, c, m, mx, my, mz)
        vqx, vqy, vqz, vpx, vpy, vpz = _tb(h, m, wx, wy, wz,
                                           qx, qy, qz, px, py, pz)
    return vqx, vqy, vqz, vpx, vpy, vpz


# ----------------------------------------------------------- one step

@njit(cache=True, inline="always")
def _chin_b_one(code, c0, c1, c2, c, m, h, qx, qy, qz, px, py, pz):
    """Drift halves around a full kick-rotation at the midpoint."""
    hm = 0.5 * h / m
    qx += hm * px
    qy += hm * py
    qz += hm * pz
    wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
    fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
    px, py, pz = _eb(h, wx, wy, wz, fx, fy, fz, px, py, pz)
    return qx + hm * px, qy + hm * py, qz + hm * pz, px, py, pz


@njit(cache=True)
def _step(method, inner, gammas, fp, code, c0, c1, c2, c, m, h,
          qx, qy, qz, px, py, pz):
    if method <= 1 or method == 9:
        # Boris family: drift / kick / rotation / kick / drift
        hm = 0.5 * h / m
        qx += hm * px
        qy += hm * py
        qz += hm * pz
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        px += 0.5 * h * fx
        py += 0.5 * h * fy
        pz += 0.5 * h * fz
        if method != 9:
            wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
            if method == 0:
                px, py, pz = _cayley_rot(0.5 * h, wx, wy, wz, px, py, pz)
            else:
                px, py, pz = _rot(h, wx, wy, wz, px, py, pz)
        px += 0.5 * h * fx
        py += 0.5 * h * fy
        pz += 0.5 * h * fz
        return qx + hm * px, qy + hm * py, qz + hm * pz, px, py, pz

    if method == 2:
        # kick-rotation halves around a full drift
        wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        px, py, pz = _eb(0.5 * h, wx, wy, wz, fx, fy, fz, px, py, pz)
        s = h / m
        qx += s * px
        qy += s * py
        qz += s * pz
        wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        px, py, pz = _eb(0.5 * h, wx, wy, wz, fx, fy, fz, px, py, pz)
        return qx, qy, qz, px, py, pz

    if method == 3:
        return _chin_b_one(code, c0, c1, c2, c, m, h, qx, qy, qz, px, py, pz)

    if method == REF_CODE:
        for i in range(gammas.shape[0]):
            qx, qy, qz, px, py, pz = _chin_b_one(
                code, c0, c1, c2, c, m, gammas[i] * h,
                qx, qy, qz, px, py, pz)
        return qx, qy, qz, px, py, pz

    if method == 4:
        # electric kick halves around the frozen drift-rotation flow
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        px += 0.5 * h * fx
        py += 0.5 * h * fy
        pz += 0.5 * h * fz
        wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
        qx, qy, qz, px, py, pz = _tb(h, m, wx, wy, wz, qx, qy, qz, px, py, pz)
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        return qx, qy, qz, px + 0.5 * h * fx, py + 0.5 * h * fy, \
            pz + 0.5 * h * fz

    if method == 5 or method == 6 or method == 7:
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        px += 0.5 * h * fx
        py += 0.5 * h * fy
        pz += 0.5 * h * fz
        if method == 5:
            qx, qy, qz, px, py, pz = _mid_strang(
                code, c0, c1, c2, c, m, h, fp, qx, qy, qz, px, py, pz)
        elif method == 6:
            qx, qy, qz, px, py, pz = _mid_midpoint(
                code, c0, c1, c2, c, m, h, fp, qx, qy, qz, px, py, pz)
        else:
            for i in range(gammas.shape[0]):
                g = gammas[i] * h
                if inner == 5:
                    qx, qy, qz, px, py, pz = _mid_strang(
                        code, c0, c1, c2, c, m, g, fp, qx, qy, qz, px, py, pz)
                else:
                    qx, qy, qz, px, py, pz = _mid_midpoint(
                        code, c0, c1, c2, c, m, g, fp, qx, qy, qz, px, py, pz)
        fx, fy, fz = _force(code, c0, c1, c2, c, qx, qy, qz)
        return qx, qy, qz, px + 0.5 * h * fx, py + 0.5 * h * fy, \
            pz + 0.5 * h * fz

    # method == 8: constant-b Taylor-form step
    wx, wy, wz = _omega(code, c0, c1, c2, c, m, qx, qy, qz)
    f0x, f0y, f0z = _force(code, c0, c1, c2, c, qx, qy, qz)
    g1x, g1y, g1z = _phi1(h, wx, wy, wz, px, py, pz)
    g2x, g2y, g2z = _phi2(h, wx, wy, wz, f0x, f0y, f0z)
    s = h / m
    q1x = qx + s * g1x + h * s * g2x
    q1y = qy + s * g1y + h * s * g2y
    q1z = qz + s * g1z + h * s * g2z
    f1x, f1y, f1z = _force(code, c0, c1, c2, c, q1x, q1y, q1z)
    rx, ry, rz = _rot(h, wx, wy, wz, px, py, pz)
    h1x, h1y, h1z = _phi1(h, wx, wy, wz, f0x, f0y, f0z)
    h2x, h2y, h2z = _phi2(h, wx, wy, wz, f1x - f0x, f1y - f0y, f1z - f0z)
    return q1x, q1y, q1z, rx + h * (h1x + h2x), ry + h * (h1y + h2y), \
        rz + h * (h1z + h2z)


# ------------------------------------------------------------- drivers

@njit(cache=True)
def run_samples(method, inner, gammas, fp, code, c0, c1, c2, c, m, h,
                y0, n_steps, stride, out):
    """Integrate n_steps, writing every stride-th state into out.

    out must have shape (n_steps//stride + 1, 6); out[0] becomes y0.
    Returns (status, n_done, final_state_6...).
    """
    qx, qy, qz, px, py, pz = y0[0], y0[1], y0[2], y0[3], y0[4], y0[5]
    out[0, 0] = qx
    out[0, 1] = qy
    out[0, 2] = qz
    out[0, 3] = px
    out[0, 4] = py
    out[0, 5] = pz
    for i in range(1, n_steps + 1):
        qx, qy, qz, px, py, pz = _step(method, inner, gammas, fp, code,
                                       c0, c1, c2, c, m, h,
                                       qx, qy, qz, px, py, pz)
        if not (math.isfinite(qx) and math.isfinite(qy) and math.isfinite(qz)
                and math.isfinite(px) and math.isfinite(py)
                and math.isfinite(pz)):
            return STATUS_NONFINITE, i - 1, qx, qy, qz, px, py, pz
        if i % stride == 0:
            j = i // stride
            out[j, 0] = qx
            out[j, 1] = qy
            out[j, 2] = qz
            out[j, 3] = px
            out[j, 4] = py
            out[j, 5] = pz
    return STATUS_OK, n_steps, qx, qy, qz, px, py, pz


@njit(cache=True)
def run_windows(method, inner, gammas, fp, code, c0, c1, c2, c, m, h,
                y0, n_steps, window,
                w_emax, w_mumax, w_mumin, w_mumean, w_alpha):
    """Integrate n_steps accumulating per-window reductions.

    Arrays must have length n_steps//window.  Accumulated per window:
    max |H - H0|/|H0|, max/min/mean of the adiabatic moment, and the
    unwrapped xy gyration angle at the window end.  On blow-up the current
    and later windows keep inf (energy) / NaN (moment, angle).
    Returns (status, n_done, final_state_6...).
    """
    n_win = n_steps // window
    for w in range(n_win):
        w_emax[w] = math.inf
        w_mumax[w] = np.nan
        w_mumin[w] = np.nan
        w_mumean[w] = np.nan
        w_alpha[w] = np.nan
    qx, qy, qz, px, py, pz = y0[0], y0[1], y0[2], y0[3], y0[4], y0[5]
    p2 = px * px + py * py + pz * pz
    h0 = 0.5 * p2 / m + c * _potential(code, c0, c1, c2, qx, qy, qz)
    habs = abs(h0)
    if habs == 0.0:
        habs = 1.0    # degenerate start: report absolute error instead
    alpha = math.atan2(qy, qx)
    prev_ang = alpha
    emax = 0.0
    mumax = -math.inf
    mumin = math.inf
    musum = 0.0
    for i in range(1, n_steps + 1):
        qx, qy, qz, px, py, pz = _step(method, inner, gammas, fp, code,
                                       c0, c1, c2, c, m, h,
                                       qx, qy, qz, px, py, pz)
        if not (math.isfinite(qx) and math.isfinite(qy) and math.isfinite(qz)
                and math.isfinite(px) and math.isfinite(py)
                and math.isfinite(pz)):
            return STATUS_NONFINITE, i - 1, qx, qy, qz, px, py, pz
        # relative energy error
        p2 = px * px + py * py + pz * pz
        ham = 0.5 * p2 / m + c * _potential(code, c0, c1, c2, qx, qy, qz)
        err = abs(ham - h0) / habs
        if err > emax:
            emax = err
        # adiabatic moment from b at the current position
        bx, by, bz = _bfield(code, c0, c1, c2, qx, qy, qz)
        bn = math.sqrt(bx * bx + by * by + bz * bz)
        sc = c / m
        cx = (py * bz - pz * by) * sc
        cy = (pz * bx - px * bz) * sc
        cz = (px * by - py * bx) * sc
        mu = m * (cx * cx + cy * cy + cz * cz) / (2.0 * c * c * bn * bn * bn)
        if mu > mumax:
            mumax = mu
        if mu < mumin:
            mumin = mu
        musum += mu
        # unwrapped angle about the z axis
        ang = math.atan2(qy, qx)
        d = ang - prev_ang
        if d > math.pi:
            d -= 2.0 * math.pi
        elif d < -math.pi:
            d += 2.0 * math.pi
        alpha += d
        prev_ang = ang
        if i % window == 0:
            w = i // window - 1
            w_emax[w] = emax
            w_mumax[w] = mumax
            w_mumin[w] = mumin
            w_mumean[w] = musum / window
            w_alpha[w] = alpha
            emax = 0.0
            mumax = -math.inf
            mumin = math.inf
            musum = 0.0
    return STATUS_OK, n_steps, qx, qy, qz, px, py, pz


# ------------------------------------------------------------ wrappers

def kernel_args(stepper, field, pp):
    """(method, inner, gammas, fp, code, c0, c1, c2, c, m) for the kernels,
    or None when this stepper/field pair cannot run compiled."""
    if field.code < 0:
        return None
    if stepper.method == "spreiter_walter" and not field.uniform_b:
        return None
    method = METHOD_CODES[stepper.method]
    inner = METHOD_CODES.get(stepper.inner, 0) if stepper.inner else 0
    gammas = (np.asarray(stepper.gammas, dtype=float)
              if stepper.gammas is not None else np.empty(0))
    c0, c1, c2 = field.coeffs[0], field.coeffs[1], field.coeffs[2]
    return (method, inner, gammas, stepper.fp_iters, field.code,
            c0, c1, c2, pp.c, pp.m)


def step_compiled(stepper, field, pp, y, h):
    """Single compiled step (mainly for equivalence testing)."""
    args = kernel_args(stepper, field, pp)
    if args is None:
        raise ValueError("no compiled path for this stepper/field")
    method, inner, gammas, fp, code, c0, c1, c2, c, m = args
    return np.array(_step(method, inner, gammas, fp, code, c0, c1, c2, c, m,
                          h, y[0], y[1], y[2], y[3], y[4], y[5]))
