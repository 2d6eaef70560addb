"""Built-in oracle cross-checks, run by ``xxzdm selfcheck``."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from .dynamics import (
    build_propagator_block,
    decay_exponent,
    evolve_closed_form,
    evolve_ode,
    rate,
)
from .model import ModelParams, build_hamiltonian, gibbs_state
from .observables import (
    concurrence,
    concurrence_xstate,
    specific_heat_closed_oracle,
    thermal_concurrence_analytic,
)

SEED = 20240611


def _random_params(rng, scale=3.0):
    J, Jz, Dz = rng.uniform(-scale, scale, 3)
    return ModelParams(J, Jz, Dz, rng.uniform(0.01, 0.5), rng.uniform(0.2, 3.0))


def check_gibbs(rng, n=50):
    worst = 0.0
    for _ in range(n):
        p = _random_params(rng)
        beta = rng.uniform(0.01, 50)
        H = build_hamiltonian(p)
        e0 = np.linalg.eigvalsh(H)[0]
        ref = expm(-beta * (H - e0 * np.eye(4)))
        ref /= np.trace(ref)
        worst = max(worst, float(np.max(np.abs(gibbs_state(p, beta) - ref))))
    return worst, 1e-9


def check_propagator_identity(rng, n=10):
    worst = 0.0
    for _ in range(n):
        M = build_propagator_block(0.0, _random_params(rng))
        worst = max(worst, float(np.max(np.abs(M - np.eye(6)))))
    return worst, 1e-12


def check_ode_vs_closed(rng, n_params=3, n_times=4):
    worst = 0.0
    for _ in range(n_params):
        p = _random_params(rng, 2.0)
        rho0 = gibbs_state(p, rng.uniform(0.1, 5))
        for t in rng.uniform(0, 20, n_times):
            a = evolve_ode(rho0, p, t).rho_t
            b = evolve_closed_form(rho0, p, t).rho_t
            worst = max(worst, float(np.max(np.abs(a - b))))
    return worst, 1e-6


def check_concurrence(rng, n=50):
    worst = 0.0
    for _ in range(n):
        p = _random_params(rng)
        beta = rng.uniform(0.01, 50)
        rho = gibbs_state(p, beta)
        c_w = concurrence(rho).concurrence
        c_x = concurrence_xstate(rho)
        c_a = thermal_concurrence_analytic(p, beta)
        worst = max(worst, abs(c_w - c_x), abs(c_x - c_a), abs(c_w - c_a))
    return worst, 1e-10


def check_decay_quadrature(rng, n=20):
    worst = 0.0
    for _ in range(n):
        p = _random_params(rng)
        t = rng.uniform(0, 30)
        ref, _ = quad(lambda s: rate(s, p), 0.0, t, epsabs=1e-13, epsrel=1e-13, limit=200)
        worst = max(worst, abs(decay_exponent(t, p) - ref))
    return worst, 1e-10


def check_closed_heat(rng, n=20):
    p = ModelParams()
    worst = 0.0
    for beta in np.geomspace(0.1, 20, n):
        c = specific_heat_closed_oracle(p, beta)
        worst = max(worst, abs(c.fluctuation - c.finite_difference))
    return worst, 1e-6


CHECKS = (
    ("gibbs vs matrix exponential", check_gibbs),
    ("propagator identity at t=0", check_propagator_identity),
    ("ode vs closed form", check_ode_vs_closed),
    ("wootters vs x-state vs thermal formula", check_concurrence),
    ("decay exponent vs quadrature", check_decay_quadrature),
    ("heat capacity fluctuation vs finite difference", check_closed_heat),
)


def run_all(seed: int = SEED):
    rng = np.random.default_rng(seed)
    lines = []
    ok = True
    for name, fn in CHECKS:
        err, tol = fn(rng)
        passed = math.isfinite(err) and err <= tol
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: max error {err:.3e} (tol {tol:.0e})")
    lines.append("selfcheck: " + ("all checks passed" if ok else "FAILURES"))
    return lines, ok
