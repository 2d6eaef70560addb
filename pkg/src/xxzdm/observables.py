"""Specific heat and entanglement of two-qubit density matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams, build_hamiltonian, derived_params, is_x_state, two_site, SY

LOG_FLOOR = 1e-300
HERMITIAN_INPUT_TOL = 1e-9
WOOTTERS_NEGATIVE_TOL = 1e-8

_YY = two_site(SY, SY).real  # sigma_y (x) sigma_y is real


class NumericalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SpecificHeatResult:
    c_n: float
    eigenvalues: np.ndarray
    clipped: bool


@dataclass(frozen=True)
class EntanglementResult:
    concurrence: float
    eof: float
    lambdas: np.ndarray


def eigenvalues_hermitian(rho) -> np.ndarray:
    """Real spectrum of a Hermitian 4x4 matrix, largest first."""
    rho = np.asarray(rho, dtype=complex)
    resid = float(np.max(np.abs(rho - rho.conj().T)))
    if resid > HERMITIAN_INPUT_TOL:
        raise ValueError(f"matrix is not Hermitian (max |rho - rho^H| = {resid:.3g})")
    return np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[::-1]


def specific_heat_from_spectrum(eigenvalues, beta: float) -> SpecificHeatResult:
    """``-beta^2 sum_i ln(eta_i)`` with eigenvalues below ``LOG_FLOOR`` clipped.

    A clipped eigenvalue marks the logarithmic divergence; the flag is set and
    the returned ``c_n`` is the (finite) value at the floor.
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    lam = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    clipped = bool(np.any(lam < LOG_FLOOR))
    c_n = -beta * beta * float(np.sum(np.log(np.maximum(lam, LOG_FLOOR))))
    return SpecificHeatResult(c_n=c_n, eigenvalues=lam, clipped=clipped)


def specific_heat_normalized(rho, beta: float) -> SpecificHeatResult:
    """Open-system specific heat per ``4 n k_B`` from the spectrum of ``rho``."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    return specific_heat_from_spectrum(eigenvalues_hermitian(rho), beta)


class ClosedSpecificHeat(NamedTuple):
    fluctuation: float
    finite_difference: float

    @property
    def value(self) -> float:
        return self.fluctuation


def specific_heat_closed_oracle(params: ModelParams, beta: float) -> ClosedSpecificHeat:
    """Canonical heat capacity of the isolated dimer, evaluated two ways.

    ``fluctuation`` is ``beta^2 Var(H)`` in the Gibbs state; ``finite_difference``
    is ``beta^2 d^2 ln Z / d beta^2`` by central differences with step
    ``1e-4 beta``. The linear part ``-beta E_0`` of ``ln Z`` has zero curvature
    and is removed before differencing to keep rounding out of the stencil.
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta!r}")
    energies = np.linalg.eigvalsh(build_hamiltonian(params))
    gaps = energies - energies[0]

    w = np.exp(-beta * gaps)
    p = w / w.sum()
    mean = float(p @ energies)
    var = float(p @ (energies - mean) ** 2)
    fluct = beta * beta * var

    def g(b):
        return math.log(float(np.sum(np.exp(-b * gaps))))

    h = 1e-4 * beta
    curv = (g(beta + h) - 2 * g(beta) + g(beta - h)) / (h * h)
    return ClosedSpecificHeat(fluct, beta * beta * curv)


def _wootters_lambdas(rho: np.ndarray) -> np.ndarray:
    # lambda_i are the singular values of tau = W^T (Y(x)Y) W for any rho = W W^H;
    # with W = V sqrt(D) their small values carry absolute, not square-root, error
    d, V = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    W = V * np.sqrt(np.clip(d, 0.0, None))
    tau = W.T @ _YY @ W
    return np.linalg.svd(tau, compute_uv=False)


def concurrence(rho) -> EntanglementResult:
    """Wootters concurrence and entanglement of formation of a two-qubit state.

    ``lambda_i`` are the square roots of the eigenvalues of ``rho rho~`` with
    ``rho~ = (Y(x)Y) rho* (Y(x)Y)``. That product's eigenvalues are checked
    for negativity; the lambdas themselves are taken as singular values of
    the equivalent symmetric matrix, which resolves small values to machine
    precision instead of its square root.
    """
    rho = np.asarray(rho, dtype=complex)
    rho_tilde = _YY @ rho.conj() @ _YY
    mu = np.linalg.eigvals(rho @ rho_tilde)
    if np.min(mu.real) < -WOOTTERS_NEGATIVE_TOL:
        raise NumericalError(
            f"rho rho~ has eigenvalue with real part {np.min(mu.real):.3g} < -{WOOTTERS_NEGATIVE_TOL}"
        )
    lam = np.sort(_wootters_lambdas(rho))[::-1]
    c = float(np.clip(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0))
    return EntanglementResult(concurrence=c, eof=eof(c), lambdas=lam)


def concurrence_xstate(rho, tol: float = 1e-10) -> float:
    """Closed-form concurrence of an X state.

    ``2 max(0, |rho23| - sqrt(rho11 rho44), |rho14| - sqrt(rho22 rho33))``.
    """
    rho = np.asarray(rho, dtype=complex)
    if not is_x_state(rho, tol):
        raise ValueError("concurrence_xstate needs an X state (off-X entries <= tol)")
    p = np.clip(np.diag(rho).real, 0.0, None)
    c = 2.0 * max(
        0.0,
        abs(rho[1, 2]) - math.sqrt(p[0] * p[3]),
        abs(rho[0, 3]) - math.sqrt(p[1] * p[2]),
    )
    return min(c, 1.0)


def thermal_concurrence_analytic(params: ModelParams, beta: float) -> float:
    """Concurrence of the Gibbs state, ``(2/Z) max(0, |v| - exp(-beta Jz))``."""
    d = derived_params(params, beta)
    return 2.0 * max(0.0, abs(d.v_scaled) - d.diag_scaled) / d.Z_scaled


def _binary_entropy(x: float) -> float:
    out = 0.0
    for p in (x, 1.0 - x):
        if p > 0.0:
            out -= p * math.log2(p)
    return out


def eof(c: float) -> float:
    """Entanglement of formation for concurrence ``c``."""
    if not (-1e-12 <= c <= 1 + 1e-12):
        raise ValueError(f"concurrence must lie in [0, 1], got {c!r}")
    c = min(max(c, 0.0), 1.0)
    x = 0.5 * (1.0 + math.sqrt(1.0 - c * c))
    return _binary_entropy(x)


def entanglement(rho) -> EntanglementResult:
    """X-state shortcut when the structure is exact, full Wootters otherwise."""
    rho = np.asarray(rho, dtype=complex)
    if is_x_state(rho, 0.0):
        c = concurrence_xstate(rho)
        return EntanglementResult(concurrence=c, eof=eof(c), lambdas=np.full(4, np.nan))
    return concurrence(rho)
