"""Compiled integration kernels for the 1D and 3D equations of motion.

Two drivers live here:

* an adaptive explicit Runge-Kutta of order 8 (the classic 13-stage scheme
  with 5th/3rd-order error estimate; coefficient tables reused from SciPy's
  vetted implementation) for deterministic runs.  Output samples are hit
  exactly by clamping step endpoints, so no interpolation error enters the
  uniformly sampled records.
* a fixed-step RK4 driver for stochastic runs, where the noise terms are
  drawn per step, held constant across the step (matching their definition
  as N(0, 1/dt) increments), and the relative rf-voltage random walk is an
  auxiliary slow state advanced with the same step.

State layout, 3D model: y = (x, y, z, vx, vy, vz, I, dI/dt); 1D model:
y = (x, vx).  All parameters arrive in a flat float64 array packed by
:func:`paratrap.dynamics.pack_params`; see the index constants below.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop853

# Parameter-array layout (shared by both models; unused slots are zero).
P_Q_SIGNED = 0      # signed electron charge (C)
P_MASS = 1          # electron mass (kg)
P_Q_OVER_M = 2      # q_signed / m
P_CX, P_CY, P_CZ = 3, 4, 5     # dc acceleration curvatures (1/s^2)
P_RF_AMP = 6        # rf quadrupole acceleration amplitude W (1/s^2)
P_OMEGA_RF = 7
P_PHI_RF = 8
P_DRIVE = 9         # parametric drive curvature scale (1/s^2)
P_OMEGA_D = 10
P_PHI_D = 11
P_EPS_MAX = 12
P_T_START = 13
P_T_RAMP = 14
P_L = 15            # inductance (H)
P_INV_LC = 16       # 1 / (L C)
P_L_OVER_R = 17     # L / R
P_DX0 = 18          # D_inv x-component polynomial a0..a4 (slots 18..22)
P_DY = 23
P_DZ = 24
P_ANH_X = 25        # C3..C6 per axis (slots 25..28, 29..32, 33..36)
P_ANH_Y = 29
P_ANH_Z = 33
P_ROI_X, P_ROI_Y, P_ROI_Z = 37, 38, 39
P_GAMMA_1D = 40
P_WX2_1D = 41
P_SIZE = 42

MODEL_1D = 0
MODEL_3D = 1

STATUS_OK = 0
STATUS_ESCAPE = 1
STATUS_NONFINITE = 2
STATUS_STEP_UNDERFLOW = 3

# Order-8 Runge-Kutta tableau with the combined 5th/3rd-order error estimate.
_N_STAGES = 12
_RK_A = np.ascontiguousarray(_dop853.A[:_N_STAGES, :_N_STAGES])
_RK_B = np.ascontiguousarray(_dop853.B)
_RK_C = np.ascontiguousarray(_dop853.C[:_N_STAGES])
_RK_E3 = np.ascontiguousarray(_dop853.E3)
_RK_E5 = np.ascontiguousarray(_dop853.E5)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERROR_EXPONENT = -1.0 / 8.0


@njit(cache=True, inline="always")
def _epsilon(t, P):
    t0 = P[P_T_START]
    if t < t0:
        return 0.0
    ramp = P[P_T_RAMP]
    if ramp <= 0.0 or t >= t0 + ramp:
        return P[P_EPS_MAX]
    return P[P_EPS_MAX] * (t - t0) / ramp


@njit(cache=True, inline="always")
def _anharmonic(base, s, P):
    # -sum_{i=3..6} i C_i s^(i-1)
    return -(s * s * (3.0 * P[base] + s * (4.0 * P[base + 1]
                                           + s * (5.0 * P[base + 2] + s * 6.0 * P[base + 3]))))


@njit(cache=True, inline="always")
def _coupling_x(x, P):
    return P[P_DX0] + x * (P[P_DX0 + 1] + x * (P[P_DX0 + 2]
                                               + x * (P[P_DX0 + 3] + x * P[P_DX0 + 4])))


@njit(cache=True)
def _rhs(model, t, y, P, ru, en_x, en_y, en_z, i_n, out):
    """Equations of motion; noise terms are held constant over a step.

    ``ru`` scales both rf-electrode field amplitudes (trapping rf and the
    parametric drive); ``en_*`` are uniform noise fields in V/m and ``i_n``
    a noise current in A injected in parallel with the resonator.
    """
    if model == MODEL_1D:
        x = y[0]
        eps = _epsilon(t, P)
        drive = 1.0 + eps * math.cos(P[P_OMEGA_D] * t + P[P_PHI_D])
        out[0] = y[1]
        out[1] = (-P[P_WX2_1D] * drive * x + _anharmonic(P_ANH_X, x, P)
                  - P[P_GAMMA_1D] * y[1])
        return

    x = y[0]
    yy = y[1]
    z = y[2]
    vx = y[3]
    vy = y[4]
    vz = y[5]
    qm = P[P_Q_OVER_M]

    crf = ru * math.cos(P[P_OMEGA_RF] * t + P[P_PHI_RF]) * P[P_RF_AMP]
    cd = ru * _epsilon(t, P) * math.cos(P[P_OMEGA_D] * t + P[P_PHI_D]) * P[P_DRIVE]

    d_x = _coupling_x(x, P)
    d_y = P[P_DY]
    d_z = P[P_DZ]
    # reaction of the resonator on the electron: (q/m) L dI/dt D_inv
    coup = qm * P[P_L] * y[7]

    out[0] = vx
    out[1] = vy
    out[2] = vz
    out[3] = (-(P[P_CX] + crf + cd) * x + _anharmonic(P_ANH_X, x, P)
              + coup * d_x + qm * en_x)
    out[4] = (-(P[P_CY] - crf - cd) * yy + _anharmonic(P_ANH_Y, yy, P)
              + coup * d_y + qm * en_y)
    out[5] = -P[P_CZ] * z + _anharmonic(P_ANH_Z, z, P) + coup * d_z + qm * en_z
    out[6] = y[7]
    out[7] = P[P_INV_LC] * (-P[P_L_OVER_R] * y[7] - y[6]
                            - P[P_Q_SIGNED] * (d_x * vx + d_y * vy + d_z * vz)
                            + i_n)


@njit(cache=True, inline="always")
def _out_of_roi(model, y, P):
    if abs(y[0]) > P[P_ROI_X]:
        return True
    if model == MODEL_3D:
        if abs(y[1]) > P[P_ROI_Y] or abs(y[2]) > P[P_ROI_Z]:
            return True
    return False


@njit(cache=True)
def _initial_step(model, P, t0, y0, f0, rtol, atol, max_step):
    n = y0.size
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y0[i])
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = np.empty(n)
    f1 = np.empty(n)
    for i in range(n):
        y1[i] = y0[i] + h0 * f0[i]
    _rhs(model, t0 + h0, y1, P, 1.0, 0.0, 0.0, 0.0, 0.0, f1)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y0[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.125
    return min(100.0 * h0, h1, max_step)


@njit(cache=True)
def ode_drive(model, P, y0, t0, sample_dt, n_samples, rtol, atol, max_step, out, last):
    """Adaptive order-8 integration with exact-hit uniform sampling.

    Fills ``out[k] = y(t0 + (k+1) sample_dt)``.  ``last`` receives
    (t, y...) of the final accepted state (the escape point on escape).
    Returns (status, accepted, rejected, samples_filled).
    """
    n = y0.size
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    f = np.empty(n)
    K = np.empty((_N_STAGES + 1, n))
    t = t0
    _rhs(model, t, y, P, 1.0, 0.0, 0.0, 0.0, 0.0, f)
    h = _initial_step(model, P, t0, y, f, rtol, atol, max_step)
    n_acc = 0
    n_rej = 0
    rejected_last = False
    status = STATUS_OK
    k = 0
    while k < n_samples:
        t_target = t0 + (k + 1) * sample_dt
        while t < t_target:
            min_step = 1e-14 * max(abs(t), sample_dt)
            if h < min_step:
                status = STATUS_STEP_UNDERFLOW
                break
            clamped = t + h >= t_target
            h_eff = t_target - t if clamped else h

            for i in range(n):
                K[0, i] = f[i]
            for s in range(1, _N_STAGES):
                for i in range(n):
                    acc = 0.0
                    for j in range(s):
                        acc += _RK_A[s, j] * K[j, i]
                    ytmp[i] = y[i] + h_eff * acc
                _rhs(model, t + _RK_C[s] * h_eff, ytmp, P, 1.0, 0.0, 0.0, 0.0, 0.0, K[s])
            for i in range(n):
                acc = 0.0
                for j in range(_N_STAGES):
                    acc += _RK_B[j] * K[j, i]
                ynew[i] = y[i] + h_eff * acc
            t_new = t_target if clamped else t + h_eff
            _rhs(model, t_new, ynew, P, 1.0, 0.0, 0.0, 0.0, 0.0, K[_N_STAGES])

            finite = True
            for i in range(n):
                if not math.isfinite(ynew[i]):
                    finite = False
                    break
            if not finite:
                n_rej += 1
                rejected_last = True
                h *= _MIN_FACTOR
                continue

            err5 = 0.0
            err3 = 0.0
            for i in range(n):
                sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                e5 = 0.0
                e3 = 0.0
                for j in range(_N_STAGES + 1):
                    e5 += _RK_E5[j] * K[j, i]
                    e3 += _RK_E3[j] * K[j, i]
                err5 += (e5 / sc) ** 2
                err3 += (e3 / sc) ** 2
            den = err5 + 0.01 * err3
            err_norm = 0.0
            if den > 0.0:
                err_norm = h_eff * err5 / math.sqrt(den * n)

            if err_norm < 1.0:
                factor = _MAX_FACTOR
                if err_norm > 0.0:
                    factor = min(_MAX_FACTOR, _SAFETY * err_norm ** _ERROR_EXPONENT)
                if rejected_last:
                    factor = min(1.0, factor)
                if not clamped:
                    h = h_eff * factor
                elif factor > 1.0:
                    h = max(h, h_eff * factor)
                h = min(h, max_step)
                t = t_new
                for i in range(n):
                    y[i] = ynew[i]
                    f[i] = K[_N_STAGES, i]
                n_acc += 1
                rejected_last = False
                if _out_of_roi(model, y, P):
                    status = STATUS_ESCAPE
                    break
            else:
                n_rej += 1
                rejected_last = True
                h = h_eff * max(_MIN_FACTOR, _SAFETY * err_norm ** _ERROR_EXPONENT)
        if status != STATUS_OK:
            break
        for i in range(n):
            out[k, i] = y[i]
        k += 1
    last[0] = t
    for i in range(n):
        last[1 + i] = y[i]
    return status, n_acc, n_rej, k


@njit(cache=True)
def sde_chunk(P, y, t_base, h, k0, n_steps, ru_in, en, i_n, dw, out, row0,
              out_every, store_voltage):
    """Advance ``n_steps`` fixed RK4 steps with per-step frozen noise.

    ``en`` is an (n_steps, 3) array of uniform noise fields (V/m), ``i_n``
    the Johnson current draws (A), ``dw`` the increments of the relative
    rf-voltage random walk.  Global step index ``k0`` keeps sample alignment
    across chunks: the state after global step g is stored when
    (g+1) % out_every == 0.  Returns (status, ru, steps_done, rows_written).
    """
    n = y.size
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    ytmp = np.empty(n)
    ru = ru_in
    rows = 0
    status = STATUS_OK
    for k in range(n_steps):
        g = k0 + k
        t = t_base + g * h
        ru += dw[k]
        ex = en[k, 0]
        ey = en[k, 1]
        ez = en[k, 2]
        cur = i_n[k]

        _rhs(MODEL_3D, t, y, P, ru, ex, ey, ez, cur, k1)
        for i in range(n):
            ytmp[i] = y[i] + 0.5 * h * k1[i]
        _rhs(MODEL_3D, t + 0.5 * h, ytmp, P, ru, ex, ey, ez, cur, k2)
        for i in range(n):
            ytmp[i] = y[i] + 0.5 * h * k2[i]
        _rhs(MODEL_3D, t + 0.5 * h, ytmp, P, ru, ex, ey, ez, cur, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * k3[i]
        _rhs(MODEL_3D, t + h, ytmp, P, ru, ex, ey, ez, cur, k4)
        for i in range(n):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

        if _out_of_roi(MODEL_3D, y, P):
            status = STATUS_ESCAPE
            return status, ru, k + 1, rows
        if (g + 1) % out_every == 0:
            finite = True
            for i in range(n):
                if not math.isfinite(y[i]):
                    finite = False
                    break
            if not finite:
                status = STATUS_NONFINITE
                return status, ru, k + 1, rows
            if store_voltage:
                out[row0 + rows, 0] = P[P_L] * y[7]
            else:
                for i in range(n):
                    out[row0 + rows, i] = y[i]
            rows += 1
    return status, ru, n_steps, rows


@njit(cache=True)
def johnson_chunk(inv_lc, l_over_r, inductance, y, h, n_steps, i_n, out, row0,
                  out_every, k0):
    """Resonator-only stochastic run: circuit state (I, dI/dt), noise current.

    Used for Johnson-noise floor calibration with the electron decoupled.
    Stores the node voltage L dI/dt every ``out_every`` steps.
    """
    cur = y[0]
    did = y[1]
    rows = 0
    for k in range(n_steps):
        inj = i_n[k]
        # RK4 on the linear circuit with constant injected current
        k1i = did
        k1d = inv_lc * (-l_over_r * did - cur + inj)
        i2 = cur + 0.5 * h * k1i
        d2 = did + 0.5 * h * k1d
        k2i = d2
        k2d = inv_lc * (-l_over_r * d2 - i2 + inj)
        i3 = cur + 0.5 * h * k2i
        d3 = did + 0.5 * h * k2d
        k3i = d3
        k3d = inv_lc * (-l_over_r * d3 - i3 + inj)
        i4 = cur + h * k3i
        d4 = did + h * k3d
        k4i = d4
        k4d = inv_lc * (-l_over_r * d4 - i4 + inj)
        cur += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
        did += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        if (k0 + k + 1) % out_every == 0:
            out[row0 + rows] = inductance * did
            rows += 1
    y[0] = cur
    y[1] = did
    return rows
