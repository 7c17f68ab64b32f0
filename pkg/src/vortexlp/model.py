"""Core data types and coordinate conventions for trapped point vortices.

Positions are complex numbers inside the open unit disc (the trap rescaled
to its Thomas-Fermi radius).  Rotation-invariant shape data lives in a vector
of N^2 real coordinates encoding a Hermitian matrix: the first N entries are
its diagonal, the rest are (real, imaginary) parts of the strictly upper
triangle in lexicographic (row, column) order.  For N = 2 this ordering is
(m11, m22, Re m12, Im m12); the same pattern extends to any N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

__all__ = [
    "VortexError",
    "ConfigError",
    "StateValidationError",
    "DomainError",
    "ChargeConfig",
    "PhysicalParams",
    "ScaledUnits",
    "physical_to_scaled",
    "VortexState",
    "CoadjointPoint",
    "mu_pack",
    "mu_unpack",
    "momentum_map",
    "StateDiagnostics",
    "validate_state",
    "require_valid",
    "Verdict",
    "EquilibriumReport",
    "offdiag_pairs",
    "offdiag_indices",
    "state_to_real",
    "state_from_real",
]


class VortexError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(VortexError):
    """Invalid physical or numerical configuration."""


class StateValidationError(VortexError):
    """A vortex state violates the boundary or collision guards."""

    def __init__(self, diagnostics: "StateDiagnostics"):
        self.diagnostics = diagnostics
        super().__init__(str(diagnostics))


class DomainError(VortexError):
    """Evaluation outside the domain of a logarithmic energy term."""


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChargeConfig:
    """Topological charges and the dimensionless inter-vortex coupling.

    Parameters
    ----------
    charges : sequence of int
        Winding numbers, one per vortex; every entry must be nonzero.
    coupling_c : float
        Strength of the pairwise interaction relative to the single-vortex
        precession term; must be positive.
    """

    charges: np.ndarray
    coupling_c: float

    def __init__(self, charges, coupling_c):
        charges = np.asarray(charges)
        if charges.ndim != 1 or charges.size == 0:
            raise ConfigError("charges must be a non-empty 1-D sequence")
        if not np.issubdtype(charges.dtype, np.integer):
            rounded = np.rint(charges)
            if not np.array_equal(rounded, charges):
                raise ConfigError("charges must be integers")
            charges = rounded.astype(int)
        if np.any(charges == 0):
            raise ConfigError("charges must be nonzero")
        coupling_c = float(coupling_c)
        if not coupling_c > 0.0:
            raise ConfigError(f"coupling_c must be positive, got {coupling_c}")
        object.__setattr__(self, "charges", _frozen_array(charges, int))
        object.__setattr__(self, "coupling_c", coupling_c)

    @property
    def n(self) -> int:
        return self.charges.size

    @property
    def gamma(self) -> np.ndarray:
        """Charges promoted to floats for arithmetic."""
        return self.charges.astype(float)

    def charge_matrix(self) -> np.ndarray:
        """Diagonal matrix of charges."""
        return np.diag(self.gamma)

    def charge_matrix_inv(self) -> np.ndarray:
        return np.diag(1.0 / self.gamma)


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional trap parameters: chemical potential, trap frequency
    ratio, and the empirical interaction strength."""

    mu_chem: float
    omega_tr: float
    b: float

    def __post_init__(self):
        for name in ("mu_chem", "omega_tr", "b"):
            value = float(getattr(self, name))
            if not value > 0.0:
                raise ConfigError(f"{name} must be positive, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class ScaledUnits:
    """Dimensionless coupling plus the scales used for the rescaling."""

    coupling_c: float
    omega_pr0: float
    r_tf: float


def physical_to_scaled(params: PhysicalParams) -> ScaledUnits:
    """Convert dimensional trap parameters to the dimensionless coupling.

    Returns the coupling ``c = b / (2 ln(2 sqrt(2) pi mu/omega_tr))`` together
    with the central precession frequency and the Thomas-Fermi radius that
    define the time and length rescaling.

    Raises
    ------
    ConfigError
        If the logarithm's argument is <= 1, which would make the coupling
        nonpositive (or undefined).
    """
    log_arg = 2.0 * math.sqrt(2.0) * math.pi * params.mu_chem / params.omega_tr
    if log_arg <= 1.0:
        raise ConfigError(
            "nonpositive coupling: 2*sqrt(2)*pi*mu/omega_tr = "
            f"{log_arg:.6g} must exceed 1"
        )
    log_term = math.log(log_arg)
    r_tf = math.sqrt(2.0 * params.mu_chem) / params.omega_tr
    omega_pr0 = log_term / r_tf**2
    return ScaledUnits(
        coupling_c=params.b / (2.0 * log_term),
        omega_pr0=omega_pr0,
        r_tf=r_tf,
    )


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VortexState:
    """Vortex positions as complex numbers (x + iy), one per vortex."""

    positions: np.ndarray

    def __init__(self, positions):
        arr = np.asarray(positions, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigError("positions must be a non-empty 1-D sequence")
        object.__setattr__(self, "positions", _frozen_array(arr, complex))

    @property
    def n(self) -> int:
        return self.positions.size

    def rotated(self, angle: float) -> "VortexState":
        """State rotated rigidly about the origin by the given angle."""
        return VortexState(np.exp(1j * angle) * self.positions)


def state_to_real(state: VortexState) -> np.ndarray:
    """Flatten to the real layout (x_1..x_N, y_1..y_N)."""
    z = state.positions
    return np.concatenate([z.real, z.imag])


def state_from_real(vec) -> VortexState:
    vec = np.asarray(vec, dtype=float)
    if vec.size % 2 != 0:
        raise ConfigError("real state vector must have even length")
    n = vec.size // 2
    return VortexState(vec[:n] + 1j * vec[n:])


@dataclass(frozen=True)
class StateDiagnostics:
    """Result of the boundary/collision guards.

    ``boundary_violations`` lists vortex indices too close to the trap edge;
    ``collision_pairs`` lists index pairs closer than the collision guard.
    Indices are 0-based.
    """

    ok: bool
    boundary_violations: tuple = ()
    collision_pairs: tuple = ()

    def __str__(self):
        if self.ok:
            return "state ok"
        parts = []
        for i in self.boundary_violations:
            parts.append(f"vortex {i} at or beyond the trap boundary")
        for i, j in self.collision_pairs:
            parts.append(f"vortices {i} and {j} closer than the collision guard")
        return "; ".join(parts)


def validate_state(state: VortexState, eps_bound: float = 1e-9,
                   eps_coll: float = 1e-9) -> StateDiagnostics:
    """Check |z_i| <= 1 - eps_bound and pairwise separation >= eps_coll."""
    if not (eps_bound > 0.0 and eps_coll > 0.0):
        raise ConfigError("guard tolerances must be positive")
    z = state.positions
    boundary = tuple(int(i) for i in np.nonzero(np.abs(z) > 1.0 - eps_bound)[0])
    collisions = []
    for i in range(state.n):
        for j in range(i + 1, state.n):
            if abs(z[i] - z[j]) < eps_coll:
                collisions.append((i, j))
    ok = not boundary and not collisions
    return StateDiagnostics(ok=ok, boundary_violations=boundary,
                            collision_pairs=tuple(collisions))


def require_valid(state: VortexState, eps_bound: float = 1e-9,
                  eps_coll: float = 1e-9) -> None:
    diag = validate_state(state, eps_bound, eps_coll)
    if not diag.ok:
        raise StateValidationError(diag)


# --------------------------------------------------------------------------
# shape coordinates
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def offdiag_pairs(n: int) -> tuple:
    """Strictly-upper index pairs (i, j) in lexicographic order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def offdiag_indices(n: int, i: int, j: int) -> tuple:
    """Coordinate indices (re, im) of the (i, j) upper-triangle entry."""
    k = offdiag_pairs(n).index((i, j))
    return n + 2 * k, n + 2 * k + 1


@dataclass(frozen=True)
class CoadjointPoint:
    """Rotation-invariant shape coordinates: N^2 reals for a Hermitian matrix.

    The encoded Hermitian matrix plays the role of the outer product z z^*;
    its diagonal carries the squared radii and the off-diagonal entries the
    pairwise phase correlations.
    """

    coords: np.ndarray

    def __init__(self, coords):
        arr = np.asarray(coords, dtype=float)
        if arr.ndim != 1:
            raise ConfigError("coords must be 1-D")
        n = math.isqrt(arr.size)
        if n * n != arr.size or n == 0:
            raise ConfigError(
                f"coords length must be a positive perfect square, got {arr.size}")
        object.__setattr__(self, "coords", _frozen_array(arr, float))

    @property
    def n(self) -> int:
        return math.isqrt(self.coords.size)

    def hermitian(self) -> np.ndarray:
        """The encoded Hermitian matrix."""
        return hermitian_from_coords(self.coords)

    def matrix(self) -> np.ndarray:
        """The corresponding skew-Hermitian matrix (i times hermitian())."""
        return 1j * self.hermitian()


def hermitian_from_coords(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    n = math.isqrt(coords.size)
    m = np.zeros((n, n), dtype=complex)
    m[np.diag_indices(n)] = coords[:n]
    for k, (i, j) in enumerate(offdiag_pairs(n)):
        m[i, j] = coords[n + 2 * k] + 1j * coords[n + 2 * k + 1]
        m[j, i] = np.conj(m[i, j])
    return m


def coords_from_hermitian(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    coords = np.empty(n * n, dtype=float)
    coords[:n] = np.real(np.diagonal(m))
    for k, (i, j) in enumerate(offdiag_pairs(n)):
        coords[n + 2 * k] = m[i, j].real
        coords[n + 2 * k + 1] = m[i, j].imag
    return coords


def mu_pack(hermitian: np.ndarray, tol: float = 1e-12) -> CoadjointPoint:
    """Pack a Hermitian matrix into shape coordinates.

    Raises
    ------
    ConfigError
        If the input is not square or not Hermitian within ``tol``
        (absolute, relative to the largest entry).
    """
    m = np.asarray(hermitian, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if float(np.max(np.abs(m - m.conj().T))) > tol * scale:
        raise ConfigError("matrix is not Hermitian within tolerance")
    return CoadjointPoint(coords_from_hermitian(m))


def mu_unpack(mu: CoadjointPoint) -> np.ndarray:
    """Inverse of :func:`mu_pack`: shape coordinates to a Hermitian matrix."""
    return mu.hermitian()


def momentum_map(state: VortexState) -> CoadjointPoint:
    """Send positions to their rotation-invariant shape coordinates.

    The encoded Hermitian matrix is the outer product z z^*, so the result
    is invariant under rigid rotation of all positions and its matrix has
    rank at most one.
    """
    z = state.positions
    return CoadjointPoint(coords_from_hermitian(np.outer(z, z.conj())))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

class Verdict(str, Enum):
    """Outcome of the stability classification."""

    CERTIFIED_STABLE = "CertifiedStable"
    LINEARLY_UNSTABLE = "LinearlyUnstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class EquilibriumReport:
    """Everything a stability run learns about one steady rotation.

    ``rhs_residual`` is the sup-norm of the reduced vector field at ``mu0``;
    ``spectrum`` collects the eigenvalues of the linearized reduced dynamics;
    ``closed_form_values`` carries the analytic criterion values when the
    point belongs to a recognized family.
    """

    mu0: CoadjointPoint
    rhs_residual: float
    spectrum: tuple
    ec_verdict: Verdict
    z0: Optional[VortexState] = None
    omega: Optional[float] = None
    closed_form_values: dict = field(default_factory=dict)
    min_proj_hess_eig: Optional[float] = None
    max_re_eig: Optional[float] = None
    warnings: tuple = ()

    def to_dict(self) -> dict:
        """JSON-serializable view."""
        out = {
            "mu0": [float(v) for v in self.mu0.coords],
            "rhs_residual": float(self.rhs_residual),
            "spectrum": [[float(v.real), float(v.imag)] for v in self.spectrum],
            "ec_verdict": self.ec_verdict.value,
            "closed_form_values": {k: float(v) for k, v in self.closed_form_values.items()},
            "warnings": list(self.warnings),
        }
        if self.z0 is not None:
            out["z0"] = [[float(z.real), float(z.imag)] for z in self.z0.positions]
        if self.omega is not None:
            out["omega"] = float(self.omega)
        if self.min_proj_hess_eig is not None:
            out["min_proj_hess_eig"] = float(self.min_proj_hess_eig)
        if self.max_re_eig is not None:
            out["max_re_eig"] = float(self.max_re_eig)
        return out
