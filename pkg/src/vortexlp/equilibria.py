"""Steadily rotating configurations: closed-form families and a Newton solver.

Four closed-form families are provided: two collinear same-sign pairs on
opposite sides of the origin (equal radii, and unequal radii linked by a
co-rotation condition), the equilateral triangle of three equal charges, and
the equilateral triangle with an extra center vortex.  A damped Newton
iteration finds general rigid-rotation solutions from a user guess, with a
gauge row pinning the first vortex to the positive real axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import finitediff
from .coalgebra import lie_poisson_rhs
from .dynamics import vortex_rhs
from .model import (ChargeConfig, CoadjointPoint, ConfigError, DomainError,
                    VortexState, momentum_map, state_from_real, state_to_real,
                    VortexError)

__all__ = [
    "RelEqKind",
    "RelEqSpec",
    "pair_fixed_point_residual",
    "pair_family_b_condition",
    "pair_family_b_solve",
    "dipole_pair_condition",
    "dipole_family_curve",
    "family_a_point",
    "family_a_state",
    "family_b_point",
    "family_b_state",
    "equilateral3",
    "equilateral3_state",
    "equilateral_center4",
    "equilateral_center4_state",
    "NewtonError",
    "NewtonResult",
    "newton_relative_equilibrium",
    "EquilibriumBuild",
    "build_equilibrium",
]


class RelEqKind(str, Enum):
    PAIR_A = "pair_a"
    PAIR_B = "pair_b"
    EQUILATERAL3 = "equilateral3"
    EQUILATERAL_CENTER4 = "equilateral_center4"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class RelEqSpec:
    """A closed-form family member (kind plus its parameters)."""

    kind: RelEqKind
    params: dict

    def __post_init__(self):
        object.__setattr__(self, "kind", RelEqKind(self.kind))
        required = {
            RelEqKind.PAIR_A: ("r",),
            RelEqKind.PAIR_B: ("r1", "r2"),
            RelEqKind.EQUILATERAL3: ("r",),
            RelEqKind.EQUILATERAL_CENTER4: ("r",),
            RelEqKind.NUMERIC: (),
        }[self.kind]
        for name in required:
            if name not in self.params:
                raise ConfigError(f"{self.kind.value} requires parameter '{name}'")
            value = float(self.params[name])
            if not 0.0 < value < 1.0:
                raise ConfigError(f"parameter '{name}' must lie in (0, 1), got {value}")


# --------------------------------------------------------------------------
# two vortices of equal charge
# --------------------------------------------------------------------------

def _require_equal_pair(cfg: ChargeConfig):
    if cfg.n != 2:
        raise ConfigError("pair operations require exactly 2 vortices")
    if cfg.charges[0] != cfg.charges[1]:
        raise ConfigError("pair fixed-point analysis assumes equal charges")


def pair_fixed_point_residual(cfg: ChargeConfig, mu) -> np.ndarray:
    """Residual of the two-vortex fixed-point conditions.

    Returns the pair (co-rotation balance, out-of-line coordinate); both
    vanish exactly at steady rotations of an equal-charge pair.
    """
    _require_equal_pair(cfg)
    y = mu.coords if isinstance(mu, CoadjointPoint) else np.asarray(mu, dtype=float)
    if y.size != 4:
        raise ConfigError("expected 4 shape coordinates")
    m1, m2, m3, m4 = y
    d = m1 + m2 - 2.0 * m3
    if d == 0.0:
        raise DomainError("pair separation term vanishes")
    balance = cfg.coupling_c * (m1 - m2) / d + (1.0 / (1.0 - m1) - 1.0 / (1.0 - m2)) * m3
    return np.array([balance, m4])


def pair_family_b_condition(c: float, r1: float, r2: float) -> float:
    """Co-rotation condition for an equal-charge pair on opposite sides of
    the origin at unequal radii; zero exactly on the equilibrium curve."""
    return c * (1.0 - r1**2) * (1.0 - r2**2) - r1 * r2 * (r1 + r2) ** 2


def dipole_pair_condition(c: float, r1: float, r2: float) -> float:
    """Analogous co-rotation condition for an opposite-charge pair."""
    return c * (1.0 - r1**2) * (1.0 - r2**2) - r1 * r2 * (2.0 - r1**2 - r2**2)


def _scan_roots(g, exclude=None, grid_points: int = 10_000,
                lo: float = 1e-6, hi: float = 1.0 - 1e-6) -> np.ndarray:
    """All roots of g on (0, 1) by sign-change scan plus bracketed solves."""
    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([g(x) for x in grid])
    roots = []
    for k in range(grid.size - 1):
        a, b = grid[k], grid[k + 1]
        fa, fb = vals[k], vals[k + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(g, a, b, xtol=1e-15, rtol=1e-15))
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    out = []
    for r in roots:
        if exclude is not None and abs(r - exclude) <= 1e-9:
            continue
        if out and abs(r - out[-1]) <= 1e-12:
            continue
        out.append(r)
    return np.asarray(out)


def pair_family_b_solve(cfg: ChargeConfig, r1: float) -> np.ndarray:
    """Radii r2 pairing with r1 on the unequal-radii equilibrium curve.

    Roots are bracketed on a fine grid and polished to machine precision;
    the equal-radii solution is excluded (it belongs to the other family).
    May return an empty array.
    """
    _require_equal_pair(cfg)
    r1 = float(r1)
    if not 0.0 <= r1 < 1.0:
        raise ConfigError(f"r1 must lie in [0, 1), got {r1}")
    if r1 == 0.0:
        return np.asarray([])
    return _scan_roots(lambda r2: pair_family_b_condition(cfg.coupling_c, r1, r2),
                       exclude=r1)


def dipole_family_curve(cfg: ChargeConfig, r1: float) -> np.ndarray:
    """Radii r2 pairing with r1 on the opposite-charge equilibrium curve."""
    if cfg.n != 2 or cfg.charges[0] != -cfg.charges[1]:
        raise ConfigError("dipole curve requires two opposite charges")
    r1 = float(r1)
    if not 0.0 <= r1 < 1.0:
        raise ConfigError(f"r1 must lie in [0, 1), got {r1}")
    if r1 == 0.0:
        return np.asarray([])
    return _scan_roots(lambda r2: dipole_pair_condition(cfg.coupling_c, r1, r2),
                       exclude=r1)


def family_a_point(cfg: ChargeConfig, r: float) -> CoadjointPoint:
    """Shape point of the equal-radii pair: (r^2, r^2, -r^2, 0)."""
    _require_equal_pair(cfg)
    _check_radius(r)
    return CoadjointPoint([r * r, r * r, -r * r, 0.0])


def family_a_state(cfg: ChargeConfig, r: float):
    """Representative positions (r, -r) and the rigid rotation rate."""
    _require_equal_pair(cfg)
    _check_radius(r)
    gamma = float(cfg.charges[0])
    omega = gamma * (1.0 / (1.0 - r * r) + cfg.coupling_c / (2.0 * r * r))
    return VortexState([r, -r]), omega


def family_b_point(cfg: ChargeConfig, r1: float, r2: float) -> CoadjointPoint:
    """Shape point of the unequal-radii pair: (r1^2, r2^2, -r1 r2, 0)."""
    _require_equal_pair(cfg)
    _check_radius(r1)
    _check_radius(r2)
    return CoadjointPoint([r1 * r1, r2 * r2, -r1 * r2, 0.0])


def family_b_state(cfg: ChargeConfig, r1: float, r2: float):
    """Representative positions (r1, -r2) and the rigid rotation rate."""
    _require_equal_pair(cfg)
    _check_radius(r1)
    _check_radius(r2)
    gamma = float(cfg.charges[0])
    omega = gamma * (1.0 / (1.0 - r1 * r1)
                     + cfg.coupling_c / (r1 * (r1 + r2)))
    return VortexState([r1, -r2]), omega


def _check_radius(r):
    r = float(r)
    if not 0.0 < r < 1.0:
        raise ConfigError(f"radius must lie in (0, 1), got {r}")


# --------------------------------------------------------------------------
# equilateral families
# --------------------------------------------------------------------------

def _require_equal_outer(cfg: ChargeConfig, count: int):
    if cfg.n != count:
        raise ConfigError(f"expected {count} vortices, got {cfg.n}")
    if not np.all(cfg.charges[:3] == cfg.charges[0]):
        raise ConfigError(
            "not a relative equilibrium: the ring charges must be equal")


def equilateral3(cfg: ChargeConfig, r: float) -> CoadjointPoint:
    """Shape point of three equal charges on an equilateral triangle."""
    _require_equal_outer(cfg, 3)
    _check_radius(r)
    rr = r * r
    s = 0.5 * np.sqrt(3.0) * rr
    return CoadjointPoint([rr, rr, rr, -0.5 * rr, -s, -0.5 * rr, s, -0.5 * rr, -s])


def equilateral3_state(cfg: ChargeConfig, r: float):
    """Representative equilateral positions and the rigid rotation rate."""
    _require_equal_outer(cfg, 3)
    _check_radius(r)
    z = r * np.exp(2j * np.pi * np.arange(3) / 3.0)
    gamma = float(cfg.charges[0])
    omega = gamma * (1.0 / (1.0 - r * r) + cfg.coupling_c / (r * r))
    return VortexState(z), omega


def equilateral_center4(cfg: ChargeConfig, r: float) -> CoadjointPoint:
    """Shape point of an equal-charge equilateral triangle plus a vortex of
    arbitrary nonzero charge at the origin."""
    _require_equal_outer(cfg, 4)
    _check_radius(r)
    rr = r * r
    s = 0.5 * np.sqrt(3.0) * rr
    coords = np.zeros(16)
    coords[0] = coords[1] = coords[2] = rr
    coords[4], coords[5] = -0.5 * rr, -s     # pair (1,2)
    coords[6], coords[7] = -0.5 * rr, s      # pair (1,3)
    coords[10], coords[11] = -0.5 * rr, -s   # pair (2,3)
    return CoadjointPoint(coords)


def equilateral_center4_state(cfg: ChargeConfig, r: float):
    """Representative positions (triangle plus center) and rotation rate."""
    _require_equal_outer(cfg, 4)
    _check_radius(r)
    z = np.concatenate([r * np.exp(2j * np.pi * np.arange(3) / 3.0), [0.0 + 0.0j]])
    gamma = float(cfg.charges[0])
    gamma4 = float(cfg.charges[3])
    omega = (gamma / (1.0 - r * r)
             + cfg.coupling_c * (gamma + gamma4) / (r * r))
    return VortexState(z), omega


def rotation_rate(cfg: ChargeConfig, state: VortexState) -> float:
    """Rigid rotation rate read off the first vortex velocity.

    Meaningful only at steadily rotating configurations (where every vortex
    shares the rate); the first vortex must be away from the origin.
    """
    z1 = state.positions[0]
    if abs(z1) == 0.0:
        raise ConfigError("rotation rate needs the first vortex away from the origin")
    return float((vortex_rhs(cfg, state)[0] / (1j * z1)).real)


# --------------------------------------------------------------------------
# Newton solver for general rigid rotations
# --------------------------------------------------------------------------

class NewtonError(VortexError):
    """The Newton iteration failed to converge."""


@dataclass(frozen=True)
class NewtonResult:
    state: VortexState
    omega: float
    residual: float
    reduced_residual: float
    iterations: int


def newton_relative_equilibrium(cfg: ChargeConfig, z_guess: VortexState,
                                omega_guess: float, tol: float = 1e-12,
                                max_iter: int = 60) -> NewtonResult:
    """Solve for a rigidly rotating configuration near a guess.

    The unknowns are the 2N position components plus the rotation rate; the
    system imposes that every vortex velocity equals the rigid-rotation
    velocity, with an extra gauge row pinning the first vortex to the real
    axis (sign-normalized to the positive side).

    Returns the converged state, rate, and the final residual sup-norm
    (below ``1e-11``), plus the sup-norm of the reduced vector field at the
    corresponding shape point as an independent consistency check.

    Raises
    ------
    NewtonError
        On non-convergence or a singular Jacobian.
    """
    if cfg.n != z_guess.n:
        raise ConfigError("config and guess dimensions differ")
    if abs(z_guess.positions[0]) == 0.0:
        raise ConfigError("gauge requires the first vortex away from the origin")

    # rotate the guess so the gauge row starts satisfied
    phase = np.angle(z_guess.positions[0])
    z0 = z_guess.positions * np.exp(-1j * phase)
    u = np.concatenate([z0.real, z0.imag, [float(omega_guess)]])
    n = cfg.n

    def residual_vec(u_vec):
        state = state_from_real(u_vec[:2 * n])
        f = vortex_rhs(cfg, state) - 1j * u_vec[-1] * state.positions
        return np.concatenate([f.real, f.imag, [u_vec[n]]])

    g = residual_vec(u)
    norm_g = float(np.max(np.abs(g)))
    iteration = 0
    damping = 0.0
    for iteration in range(1, max_iter + 1):
        if norm_g < tol:
            break
        jac = finitediff.jacobian(residual_vec, u)
        if not np.all(np.isfinite(jac)):
            raise NewtonError(f"singular Jacobian at iteration {iteration}")
        # rigid rotations come in one-parameter families (radius scaling with
        # adjusted rate), so the Jacobian is structurally rank-deficient
        # along the family; adaptive damping of the normal equations keeps
        # the step transverse to it instead of sliding off
        jtj = jac.T @ jac
        jtg = jac.T @ g
        scale = float(np.max(np.diagonal(jtj)))
        if scale == 0.0:
            raise NewtonError(f"singular Jacobian at iteration {iteration}")
        if damping == 0.0:
            damping = 1e-10 * scale
        accepted = False
        for _ in range(40):
            try:
                step = np.linalg.solve(jtj + damping * np.eye(u.size), -jtg)
                g_new = residual_vec(u + step)
            except (DomainError, ConfigError, np.linalg.LinAlgError):
                damping = max(damping * 10.0, 1e-14 * scale)
                continue
            if float(np.max(np.abs(g_new))) < norm_g:
                accepted = True
                break
            damping = max(damping * 10.0, 1e-14 * scale)
        if not accepted:
            raise NewtonError(
                f"damping search stalled at iteration {iteration} "
                f"(residual {norm_g:.3e})")
        u = u + step
        g = g_new
        norm_g = float(np.max(np.abs(g_new)))
        damping = max(damping * 0.25, 1e-14 * scale)
    else:
        raise NewtonError(
            f"no convergence after {max_iter} iterations (residual {norm_g:.3e})")

    # snap the gauge row exactly and normalize the sign
    u[n] = 0.0
    z = u[:n] + 1j * u[n:2 * n]
    if z[0].real < 0.0:
        z = -z
    state = VortexState(z)
    omega = float(u[-1])
    final = float(np.max(np.abs(residual_vec(
        np.concatenate([z.real, z.imag, [omega]])))))
    if final > 1e-11:
        raise NewtonError(f"converged residual {final:.3e} above 1e-11")
    reduced = float(np.max(np.abs(lie_poisson_rhs(cfg, momentum_map(state)))))
    return NewtonResult(state=state, omega=omega, residual=final,
                        reduced_residual=reduced, iterations=iteration)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumBuild:
    """A family member realized as shape point + representative state."""

    kind: RelEqKind
    params: dict
    mu0: CoadjointPoint
    z0: VortexState
    omega: float


def build_equilibrium(cfg: ChargeConfig, spec: RelEqSpec) -> EquilibriumBuild:
    """Realize a closed-form family member for the given configuration."""
    kind = spec.kind
    if kind == RelEqKind.PAIR_A:
        r = float(spec.params["r"])
        state, omega = family_a_state(cfg, r)
        return EquilibriumBuild(kind, dict(spec.params), family_a_point(cfg, r),
                                state, omega)
    if kind == RelEqKind.PAIR_B:
        r1, r2 = float(spec.params["r1"]), float(spec.params["r2"])
        state, omega = family_b_state(cfg, r1, r2)
        return EquilibriumBuild(kind, dict(spec.params),
                                family_b_point(cfg, r1, r2), state, omega)
    if kind == RelEqKind.EQUILATERAL3:
        r = float(spec.params["r"])
        state, omega = equilateral3_state(cfg, r)
        return EquilibriumBuild(kind, dict(spec.params), equilateral3(cfg, r),
                                state, omega)
    if kind == RelEqKind.EQUILATERAL_CENTER4:
        r = float(spec.params["r"])
        state, omega = equilateral_center4_state(cfg, r)
        return EquilibriumBuild(kind, dict(spec.params),
                                equilateral_center4(cfg, r), state, omega)
    raise ConfigError(f"cannot build a closed-form point for kind {kind.value}")
