"""Spin-dimer Hamiltonian, Gibbs state and density-matrix checks.

Basis ordering everywhere is ``|00>, |10>, |01>, |11>`` (first label = qubit 1),
so array index ``k`` corresponds to the one-based subscript ``k + 1``.
Units: hbar = k_B = 1, temperatures are given as ``kT`` in energy units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Pauli matrices and the permutation from the kron ordering (|q1 q2>: 00, 01,
# 10, 11) to the working ordering 00, 10, 01, 11.
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_PERM = np.array([0, 2, 1, 3])

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
EIGENVALUE_TOL = 1e-9


class ParameterError(ValueError):
    """A physical parameter violates its domain."""


def two_site(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a (x) b`` expressed in the working basis order."""
    m = np.kron(a, b)
    return m[np.ix_(_PERM, _PERM)]


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the dimer and of its two identical Lorentzian baths.

    ``J`` is the XX/YY exchange, ``Jz`` the ZZ exchange, ``Dz`` the
    Dzyaloshinskii-Moriya strength; ``gamma0`` sets the bath coupling scale and
    ``gamma`` the Lorentzian half-width.
    """

    J: float = 1.0
    Jz: float = 0.5
    Dz: float = 0.5
    gamma0: float = 0.1
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("J", "Jz", "Dz", "gamma0", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if not self.gamma > 0:
            raise ParameterError(f"invariant gamma > 0 violated (gamma={self.gamma!r})")
        if not self.gamma0 >= 0:
            raise ParameterError(f"invariant gamma0 >= 0 violated (gamma0={self.gamma0!r})")

    @property
    def eta(self) -> float:
        return math.hypot(self.J, self.Dz)

    def replace(self, **changes) -> "ModelParams":
        values = {k: getattr(self, k) for k in ("J", "Jz", "Dz", "gamma0", "gamma")}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class DerivedParams:
    """Closed-form Gibbs quantities.

    ``u``, ``v`` and ``Z`` are stored as ``*_scaled = value * exp(-shift)`` so
    that they stay finite for any beta; the unscaled properties may overflow to
    ``inf`` and are meant for moderate beta only.
    """

    eta: float
    theta: float
    shift: float
    u_scaled: float
    v_scaled: float
    Z_scaled: float
    diag_scaled: float  # exp(-beta*Jz - shift), weight of |00> and |11>
    pair_low_scaled: float = 0.0  # weight of the -Jz - 2 eta state, u - v
    pair_high_scaled: float = 0.0  # weight of the -Jz + 2 eta state, u + v

    @property
    def u(self) -> float:
        return _unscale(self.u_scaled, self.shift)

    @property
    def v(self) -> float:
        return _unscale(self.v_scaled, self.shift)

    @property
    def Z(self) -> float:
        return _unscale(self.Z_scaled, self.shift)

    @property
    def log_Z(self) -> float:
        return math.log(self.Z_scaled) + self.shift


def _unscale(x: float, shift: float) -> float:
    if x == 0.0:
        return 0.0
    with np.errstate(over="ignore"):
        return float(np.sign(x) * np.exp(math.log(abs(x)) + shift))


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not (beta >= 0 and math.isfinite(beta)):
        raise ParameterError(f"beta must be finite and >= 0, got {beta!r}")
    return beta


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    J, Jz, Dz = params.J, params.Jz, params.Dz
    H = (
        J * (two_site(SX, SX) + two_site(SY, SY))
        + Jz * two_site(SZ, SZ)
        + Dz * (two_site(SX, SY) - two_site(SY, SX))
    )
    # kill the 1e-17 imaginary dust on the real diagonal
    return 0.5 * (H + H.conj().T)


def theta_of(J: float, Dz: float) -> float:
    """``arctan(Dz/J)`` with the limits used by the library.

    ``J == 0`` gives ``sign(Dz) pi/2`` (the ``J -> 0+`` limit) and
    ``J == Dz == 0`` gives 0.
    """
    if J == 0.0:
        return math.copysign(math.pi / 2, Dz) if Dz != 0.0 else 0.0
    return math.atan(Dz / J)


def derived_params(params: ModelParams, beta: float) -> DerivedParams:
    beta = _check_beta(beta)
    eta = params.eta
    Jz = params.Jz
    # Spectrum: Jz (twice), -Jz - 2 eta, -Jz + 2 eta.
    hi = beta * (Jz + 2 * eta)
    lo = beta * (Jz - 2 * eta)
    shift = max(-beta * Jz, hi)
    e_hi = math.exp(hi - shift)
    e_lo = math.exp(lo - shift)
    diag = math.exp(-beta * Jz - shift)
    u = 0.5 * (e_hi + e_lo)
    v = -0.5 * (e_hi - e_lo)
    Z = 2 * diag + 2 * u
    return DerivedParams(
        eta=eta,
        theta=theta_of(params.J, params.Dz),
        shift=shift,
        u_scaled=u,
        v_scaled=v,
        Z_scaled=Z,
        diag_scaled=diag,
        pair_low_scaled=e_hi,
        pair_high_scaled=e_lo,
    )


def gibbs_state(params: ModelParams, beta: float) -> np.ndarray:
    """Thermal state ``exp(-beta H)/Z`` built from its X-shaped closed form."""
    d = derived_params(params, beta)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = d.diag_scaled / d.Z_scaled
    rho[1, 1] = rho[2, 2] = d.u_scaled / d.Z_scaled
    # The phase is that of H[1,2] = 2(J - i Dz), i.e. exp(-i theta) up to
    # sgn(J); taken from (J - i Dz)/eta directly so no quadrant is lost.
    if d.eta > 0:
        phase = complex(params.J, -params.Dz) / d.eta
        coh = d.v_scaled / d.Z_scaled
        rho[1, 2] = coh * phase
        rho[2, 1] = coh * phase.conjugate()
    return rho


@dataclass(frozen=True)
class DensityReport:
    trace_residual: float
    hermiticity_residual: float
    min_eigenvalue: float

    @property
    def valid(self) -> bool:
        return (
            self.trace_residual <= TRACE_TOL
            and self.hermiticity_residual <= HERMITICITY_TOL
            and self.min_eigenvalue >= -EIGENVALUE_TOL
        )


def validate_density(rho) -> DensityReport:
    """Diagnose a candidate density matrix; never raises on bad content."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4) or not np.all(np.isfinite(rho)):
        return DensityReport(math.inf, math.inf, -math.inf)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = float(abs(np.trace(rho) - 1.0))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return DensityReport(tr, herm, min_eig)


def is_x_state(rho, tol: float = 0.0) -> bool:
    """True when every entry off the diagonal and anti-diagonal is within ``tol``."""
    rho = np.asarray(rho)
    mask = np.ones((4, 4), dtype=bool)
    idx = np.arange(4)
    mask[idx, idx] = False
    mask[idx, 3 - idx] = False
    return bool(np.all(np.abs(rho[mask]) <= tol))
