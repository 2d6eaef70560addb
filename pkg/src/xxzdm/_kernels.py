"""Hot loops of the master-equation integrator.

Everything here must stay inside the numba-compilable subset of numpy: no
Python objects, no keyword arguments, no exceptions. Failures are returned as
status codes and turned into exceptions by :mod:`xxzdm.dynamics`.
"""
import numpy as np

from ._accel import jit

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2

# Number of qubits in the decaying level for |00>, |10>, |01>, |11>; entry
# (i, j) of rho loses weight at rate r * (n_i + n_j) / 2.
_DECAY = np.array(
    [
        [2.0, 1.5, 1.5, 1.0],
        [1.5, 1.0, 1.0, 0.5],
        [1.5, 1.0, 1.0, 0.5],
        [1.0, 0.5, 0.5, 0.0],
    ]
)

# Dormand-Prince 5(4) tableau.
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order minus embedded fourth-order weights
_E1 = 71 / 57600
_E3 = -71 / 16695
_E4 = 71 / 1920
_E5 = -17253 / 339200
_E6 = 22 / 525
_E7 = -1 / 40


@jit
def damping_rate(t, gamma0, gamma):
    """Per-qubit jump rate ``gamma0 (1 - exp(-gamma t))``, i.e. twice R(t)."""
    return -gamma0 * np.expm1(-gamma * t)


@jit
def rhs(t, rho, ham, gamma0, gamma):
    r = damping_rate(t, gamma0, gamma)
    out = -1j * (ham @ rho - rho @ ham) - r * (_DECAY * rho)
    # jumps |0> -> |1> on either qubit: qubit 1 maps 1->2, 3->4; qubit 2 maps 1->3, 2->4
    out[1, 1] += r * rho[0, 0]
    out[2, 2] += r * rho[0, 0]
    out[3, 3] += r * (rho[1, 1] + rho[2, 2])
    out[1, 3] += r * rho[0, 2]
    out[3, 1] += r * rho[2, 0]
    out[2, 3] += r * rho[0, 1]
    out[3, 2] += r * rho[1, 0]
    return out


@jit
def _error_norm(err, y, y_new, rtol, atol):
    acc = 0.0
    for i in range(4):
        for j in range(4):
            scale = atol + rtol * max(abs(y[i, j]), abs(y_new[i, j]))
            e = abs(err[i, j]) / scale
            acc += e * e
    return np.sqrt(acc / 16.0)


@jit
def _initial_step(t, y, f0, ham, gamma0, gamma, rtol, atol):
    # Hairer & Wanner, Solving ODEs I, II.4
    d0 = _error_norm(y, y, y, rtol, atol)
    d1 = _error_norm(f0, y, y, rtol, atol)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y + h0 * f0
    f1 = rhs(t + h0, y1, ham, gamma0, gamma)
    d2 = _error_norm(f1 - f0, y, y, rtol, atol) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1)


@jit
def dopri_integrate(rho0, t0, times, ham, gamma0, gamma, rtol, atol, max_steps):
    """Integrate from ``(t0, rho0)`` through the sorted ``times``.

    Steps are clipped to land exactly on every requested time, so restarting
    from an output sample reproduces absolute time. Returns
    ``(states, accepted, rejected, max_err, status, t_reached)``.
    """
    n = times.shape[0]
    states = np.empty((n, 4, 4), dtype=np.complex128)
    y = rho0.copy()
    t = t0
    accepted = 0
    rejected = 0
    max_err = 0.0
    f = rhs(t, y, ham, gamma0, gamma)
    h = -1.0
    for k in range(n):
        target = times[k]
        if target <= t:
            states[k] = y
            continue
        if h <= 0.0:
            h = _initial_step(t, y, f, ham, gamma0, gamma, rtol, atol)
        while t < target:
            if accepted + rejected >= max_steps:
                return states, accepted, rejected, max_err, STATUS_MAX_STEPS, t
            min_h = 1e-14 * max(1.0, abs(t))
            if h < min_h:
                return states, accepted, rejected, max_err, STATUS_STEP_UNDERFLOW, t
            last = False
            if t + h >= target:
                h_try = target - t
                last = True
            else:
                h_try = h
            k1 = f
            k2 = rhs(t + _C2 * h_try, y + h_try * (_A21 * k1), ham, gamma0, gamma)
            k3 = rhs(t + _C3 * h_try, y + h_try * (_A31 * k1 + _A32 * k2), ham, gamma0, gamma)
            k4 = rhs(
                t + _C4 * h_try,
                y + h_try * (_A41 * k1 + _A42 * k2 + _A43 * k3),
                ham, gamma0, gamma,
            )
            k5 = rhs(
                t + _C5 * h_try,
                y + h_try * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4),
                ham, gamma0, gamma,
            )
            k6 = rhs(
                t + h_try,
                y + h_try * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
                ham, gamma0, gamma,
            )
            y_new = y + h_try * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            t_new = target if last else t + h_try
            k7 = rhs(t_new, y_new, ham, gamma0, gamma)
            err = h_try * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
            err_norm = _error_norm(err, y, y_new, rtol, atol)
            if err_norm <= 1.0:
                accepted += 1
                if err_norm > max_err:
                    max_err = err_norm
                t = t_new
                y = y_new
                f = k7
                if err_norm == 0.0:
                    fac = 5.0
                else:
                    fac = min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
                # keep the unclipped step size when the step was shortened to hit target
                if not last:
                    h = h_try * fac
                elif fac < 1.0:
                    h = min(h, h_try * fac)
            else:
                rejected += 1
                h = h_try * max(0.2, 0.9 * err_norm ** -0.2)
        states[k] = y
    return states, accepted, rejected, max_err, STATUS_OK, t
