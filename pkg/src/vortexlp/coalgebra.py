"""Charge-weighted matrix algebra and the reduced (shape) dynamics.

The reduced state is a skew-Hermitian matrix expressed through N^2 real
coordinates (see :mod:`vortexlp.model`).  This module provides the weighted
bracket and pairing on such matrices, the reduced energy with analytic first
and second derivatives, the conserved charge-weighted trace, the rank-one
determinant residuals that cut out the image of the momentum map, and the
reduced evolution equation with its integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import finitediff
from .integrators import (AbortedIntegration, IntegratorSettings,
                          SingularityError, StepUnderflowError)
from .model import (ChargeConfig, CoadjointPoint, ConfigError, DomainError,
                    offdiag_pairs)

__all__ = [
    "AlgebraElement",
    "bracket_gamma",
    "inner_product",
    "reduced_hamiltonian",
    "reduced_hamiltonian_gradient",
    "reduced_hamiltonian_hessian",
    "variational_derivative",
    "casimir",
    "casimir_gradient",
    "RankResidual",
    "rank_residuals",
    "rank_residual_jacobian",
    "rank_residual_hessians",
    "coadjoint_action",
    "lie_poisson_rhs",
    "lie_poisson_jacobian",
    "lie_poisson_bracket",
    "ReducedTrajectory",
    "integrate_reduced",
]


# --------------------------------------------------------------------------
# index helpers (cached per matrix size)
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _pair_arrays(n: int):
    pairs = offdiag_pairs(n)
    i_idx = np.array([p[0] for p in pairs], dtype=int)
    j_idx = np.array([p[1] for p in pairs], dtype=int)
    re_idx = np.arange(n, n * n, 2)
    im_idx = re_idx + 1
    for a in (i_idx, j_idx, re_idx, im_idx):
        a.flags.writeable = False
    return i_idx, j_idx, re_idx, im_idx


def _hermitian(coords: np.ndarray, n: int) -> np.ndarray:
    i_idx, j_idx, re_idx, im_idx = _pair_arrays(n)
    m = np.zeros((n, n), dtype=complex)
    m[np.arange(n), np.arange(n)] = coords[:n]
    if i_idx.size:
        upper = coords[re_idx] + 1j * coords[im_idx]
        m[i_idx, j_idx] = upper
        m[j_idx, i_idx] = np.conj(upper)
    return m


def _coords(m: np.ndarray, n: int) -> np.ndarray:
    i_idx, j_idx, re_idx, im_idx = _pair_arrays(n)
    out = np.empty(n * n)
    out[:n] = np.real(np.diagonal(m))
    if i_idx.size:
        upper = m[i_idx, j_idx]
        out[re_idx] = upper.real
        out[im_idx] = upper.imag
    return out


def _as_coords(mu) -> np.ndarray:
    if isinstance(mu, CoadjointPoint):
        return mu.coords
    return np.asarray(mu, dtype=float)


# --------------------------------------------------------------------------
# algebra elements, bracket, pairing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AlgebraElement:
    """A skew-Hermitian matrix; the tolerance guards against drift when
    elements are assembled from numerical data."""

    matrix: np.ndarray

    def __init__(self, matrix, tol: float = 1e-12):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"expected a square matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if float(np.max(np.abs(m + m.conj().T))) > tol * scale:
            raise ConfigError("matrix is not skew-Hermitian within tolerance")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def bracket_gamma(cfg: ChargeConfig, xi: AlgebraElement,
                  eta: AlgebraElement) -> AlgebraElement:
    """Charge-weighted bracket xi Dinv eta - eta Dinv xi."""
    if not (cfg.n == xi.n == eta.n):
        raise ConfigError("dimension mismatch between config and elements")
    dinv = 1.0 / cfg.gamma
    a = xi.matrix * dinv[np.newaxis, :] @ eta.matrix
    b = eta.matrix * dinv[np.newaxis, :] @ xi.matrix
    return AlgebraElement(a - b)


def inner_product(xi: AlgebraElement, eta: AlgebraElement) -> float:
    """Half the trace pairing tr(xi^* eta); real on skew-Hermitian inputs."""
    if xi.n != eta.n:
        raise ConfigError("dimension mismatch")
    value = 0.5 * np.trace(xi.matrix.conj().T @ eta.matrix)
    return float(value.real)


# --------------------------------------------------------------------------
# reduced energy and derivatives
# --------------------------------------------------------------------------

def _check_domain(cfg: ChargeConfig, y: np.ndarray) -> None:
    n = cfg.n
    bad = np.nonzero(1.0 - y[:n] <= 0.0)[0]
    if bad.size:
        raise DomainError(f"boundary term {bad[0] + 1}: 1 - mu <= 0")
    i_idx, j_idx, re_idx, _ = _pair_arrays(n)
    if i_idx.size:
        d = y[i_idx] + y[j_idx] - 2.0 * y[re_idx]
        bad = np.nonzero(d <= 0.0)[0]
        if bad.size:
            k = bad[0]
            raise DomainError(
                f"pair term ({i_idx[k] + 1},{j_idx[k] + 1}): separation <= 0")


def reduced_hamiltonian(cfg: ChargeConfig, mu) -> float:
    """Reduced energy on shape coordinates; composes with the momentum map
    to reproduce the full energy."""
    y = _as_coords(mu)
    n = cfg.n
    if y.size != n * n:
        raise ConfigError("coordinate length does not match config")
    _check_domain(cfg, y)
    gamma = cfg.gamma
    total = float(np.sum(gamma**2 * np.log1p(-y[:n])))
    i_idx, j_idx, re_idx, _ = _pair_arrays(n)
    if i_idx.size:
        d = y[i_idx] + y[j_idx] - 2.0 * y[re_idx]
        total -= cfg.coupling_c * float(np.sum(gamma[i_idx] * gamma[j_idx] * np.log(d)))
    return 0.5 * total


def reduced_hamiltonian_gradient(cfg: ChargeConfig, mu) -> np.ndarray:
    """Analytic gradient of the reduced energy in shape coordinates."""
    y = _as_coords(mu)
    n = cfg.n
    _check_domain(cfg, y)
    gamma = cfg.gamma
    g = np.zeros(n * n)
    g[:n] = -0.5 * gamma**2 / (1.0 - y[:n])
    i_idx, j_idx, re_idx, im_idx = _pair_arrays(n)
    if i_idx.size:
        d = y[i_idx] + y[j_idx] - 2.0 * y[re_idx]
        pair_term = cfg.coupling_c * gamma[i_idx] * gamma[j_idx] / d
        np.add.at(g, i_idx, -0.5 * pair_term)
        np.add.at(g, j_idx, -0.5 * pair_term)
        g[re_idx] = pair_term
        g[im_idx] = 0.0
    return g


def reduced_hamiltonian_hessian(cfg: ChargeConfig, mu) -> np.ndarray:
    """Analytic Hessian of the reduced energy in shape coordinates."""
    y = _as_coords(mu)
    n = cfg.n
    _check_domain(cfg, y)
    gamma = cfg.gamma
    H = np.zeros((n * n, n * n))
    for i in range(n):
        H[i, i] = -0.5 * gamma[i] ** 2 / (1.0 - y[i]) ** 2
    i_idx, j_idx, re_idx, _ = _pair_arrays(n)
    for k in range(i_idx.size):
        i, j, re = int(i_idx[k]), int(j_idx[k]), int(re_idx[k])
        d = y[i] + y[j] - 2.0 * y[re]
        w = cfg.coupling_c * gamma[i] * gamma[j] / d**2
        H[i, i] += 0.5 * w
        H[j, j] += 0.5 * w
        H[i, j] += 0.5 * w
        H[j, i] += 0.5 * w
        H[i, re] = H[re, i] = -w
        H[j, re] = H[re, j] = -w
        H[re, re] = 2.0 * w
    return H


# --------------------------------------------------------------------------
# variations, conserved trace
# --------------------------------------------------------------------------

def _element_from_gradient(g: np.ndarray, n: int) -> AlgebraElement:
    """Matrix representative of a coordinate gradient: i times the Hermitian
    matrix with doubled diagonal."""
    i_idx, j_idx, re_idx, im_idx = _pair_arrays(n)
    m = np.zeros((n, n), dtype=complex)
    m[np.arange(n), np.arange(n)] = 2.0 * g[:n]
    if i_idx.size:
        upper = g[re_idx] + 1j * g[im_idx]
        m[i_idx, j_idx] = upper
        m[j_idx, i_idx] = np.conj(upper)
    return AlgebraElement(1j * m)


def variational_derivative(cfg: ChargeConfig, f, mu,
                           gradient=None) -> AlgebraElement:
    """Matrix derivative of a scalar field of the shape coordinates.

    Satisfies the pairing identity: the inner product of the result with any
    direction equals the directional derivative of ``f`` along it.  The
    coordinate gradient is formed by central differences unless an analytic
    ``gradient`` callable is supplied.
    """
    y = _as_coords(mu)
    if y.size != cfg.n * cfg.n:
        raise ConfigError("coordinate length does not match config")
    g = np.asarray(gradient(y) if gradient is not None else finitediff.gradient(f, y))
    return _element_from_gradient(g, cfg.n)


def casimir(cfg: ChargeConfig, mu) -> float:
    """Charge-weighted sum of the diagonal coordinates; conserved by the
    reduced flow and commuting with every observable."""
    y = _as_coords(mu)
    return float(np.dot(cfg.gamma, y[:cfg.n]))


def casimir_gradient(cfg: ChargeConfig) -> np.ndarray:
    g = np.zeros(cfg.n * cfg.n)
    g[:cfg.n] = cfg.gamma
    return g


# --------------------------------------------------------------------------
# rank-one residuals
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _entry_form(n: int, p: int, q: int):
    """Complex linear form (coefficients over coordinates) for entry (p, q)
    of the encoded Hermitian matrix."""
    v = np.zeros(n * n, dtype=complex)
    if p == q:
        v[p] = 1.0
    else:
        a, b = (p, q) if p < q else (q, p)
        k = offdiag_pairs(n).index((a, b))
        v[n + 2 * k] = 1.0
        v[n + 2 * k + 1] = 1j if p < q else -1j
    v.flags.writeable = False
    return v


@lru_cache(maxsize=None)
def _det_blocks(n: int):
    """2x2 determinant blocks sweeping rows (i, i+1), columns (j, j+1):
    j = i along the diagonal (real values), j > i above it (complex)."""
    if n < 2:
        raise ConfigError("rank residuals need at least 2 vortices")
    blocks = []
    index_pairs = [(i, i) for i in range(n - 1)] + \
        [(i, j) for i in range(n - 1) for j in range(i + 1, n - 1)]
    for (i, j) in index_pairs:
        blocks.append((
            i, j,
            _entry_form(n, i, j),
            _entry_form(n, i + 1, j + 1),
            _entry_form(n, i, j + 1),
            _entry_form(n, i + 1, j),
        ))
    return tuple(blocks)


@dataclass(frozen=True)
class RankResidual:
    """The (N-1)^2 determinant residuals, diagonal blocks first, then the
    (real, imaginary) parts of the off-diagonal blocks in lexicographic
    order.  All vanish exactly on momentum-map images."""

    values: np.ndarray

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        k = math.isqrt(arr.size)
        if k * k != arr.size:
            raise ConfigError("residual vector length must be a perfect square")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def inf_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def rank_residuals(mu) -> RankResidual:
    """Evaluate the determinant residuals at a shape point."""
    y = _as_coords(mu)
    n = math.isqrt(y.size)
    values = []
    for (i, j, v1, v2, v3, v4) in _det_blocks(n):
        det = (v1 @ y) * (v2 @ y) - (v3 @ y) * (v4 @ y)
        if i == j:
            values.append(det.real)
        else:
            values.extend([det.real, det.imag])
    return RankResidual(np.asarray(values))


def rank_residual_jacobian(mu) -> np.ndarray:
    """Jacobian of the residual vector, rows in the residual order."""
    y = _as_coords(mu)
    n = math.isqrt(y.size)
    rows = []
    for (i, j, v1, v2, v3, v4) in _det_blocks(n):
        grad = ((v2 @ y) * v1 + (v1 @ y) * v2
                - (v4 @ y) * v3 - (v3 @ y) * v4)
        if i == j:
            rows.append(grad.real)
        else:
            rows.append(grad.real)
            rows.append(grad.imag)
    return np.vstack(rows)


@lru_cache(maxsize=None)
def rank_residual_hessians(n: int):
    """Constant Hessians of the residual components, in the residual order."""
    out = []
    for (i, j, v1, v2, v3, v4) in _det_blocks(n):
        h = np.outer(v1, v2) + np.outer(v2, v1) - np.outer(v3, v4) - np.outer(v4, v3)
        if i == j:
            out.append(h.real)
        else:
            out.append(h.real)
            out.append(h.imag)
    for h in out:
        h.flags.writeable = False
    return tuple(out)


# --------------------------------------------------------------------------
# reduced evolution
# --------------------------------------------------------------------------

def coadjoint_action(cfg: ChargeConfig, xi: AlgebraElement, mu) -> CoadjointPoint:
    """Weighted coadjoint action mu xi Dinv - Dinv xi mu, returned in shape
    coordinates."""
    y = _as_coords(mu)
    n = cfg.n
    if xi.n != n or y.size != n * n:
        raise ConfigError("dimension mismatch")
    dinv = 1.0 / cfg.gamma
    mu_mat = 1j * _hermitian(y, n)
    res = mu_mat @ xi.matrix * dinv[np.newaxis, :] - dinv[:, np.newaxis] * xi.matrix @ mu_mat
    return CoadjointPoint(_coords(-1j * res, n))


def lie_poisson_rhs(cfg: ChargeConfig, mu) -> np.ndarray:
    """Reduced vector field in shape coordinates.

    Equals the coadjoint action of the energy's matrix derivative on the
    current point, oriented so that the momentum map intertwines the full
    vortex flow with this reduced flow; the matrix form keeps the result
    skew-Hermitian by construction.
    """
    y = _as_coords(mu)
    n = cfg.n
    g = reduced_hamiltonian_gradient(cfg, y)
    i_idx, j_idx, re_idx, im_idx = _pair_arrays(n)
    m = _hermitian(y, n)
    M = np.zeros((n, n), dtype=complex)
    M[np.arange(n), np.arange(n)] = 2.0 * g[:n]
    if i_idx.size:
        upper = g[re_idx] + 1j * g[im_idx]
        M[i_idx, j_idx] = upper
        M[j_idx, i_idx] = np.conj(upper)
    dinv = 1.0 / cfg.gamma
    mdot = 1j * (m @ M * dinv[np.newaxis, :] - dinv[:, np.newaxis] * M @ m)
    return _coords(mdot, n)


@lru_cache(maxsize=None)
def _basis_matrices(n: int):
    """Hermitian basis matrices dual to the coordinates."""
    out = []
    for k in range(n * n):
        e = np.zeros(n * n)
        e[k] = 1.0
        m = _hermitian(e, n)
        m.flags.writeable = False
        out.append(m)
    return tuple(out)


def lie_poisson_jacobian(cfg: ChargeConfig, mu) -> np.ndarray:
    """Analytic Jacobian of :func:`lie_poisson_rhs` in shape coordinates."""
    y = _as_coords(mu)
    n = cfg.n
    g = reduced_hamiltonian_gradient(cfg, y)
    Hh = reduced_hamiltonian_hessian(cfg, y)
    i_idx, j_idx, re_idx, im_idx = _pair_arrays(n)

    def m_of(vec):
        m = np.zeros((n, n), dtype=complex)
        m[np.arange(n), np.arange(n)] = vec[:n]
        if i_idx.size:
            upper = vec[re_idx] + 1j * vec[im_idx]
            m[i_idx, j_idx] = upper
            m[j_idx, i_idx] = np.conj(upper)
        return m

    m = m_of(y)
    M = m_of(g)
    M[np.arange(n), np.arange(n)] *= 2.0
    dinv = 1.0 / cfg.gamma
    basis = _basis_matrices(n)
    jac = np.empty((n * n, n * n))
    for l in range(n * n):
        El = basis[l]
        Ml = m_of(Hh[:, l])
        Ml[np.arange(n), np.arange(n)] *= 2.0
        dm = 1j * (
            El @ M * dinv[np.newaxis, :] + m @ Ml * dinv[np.newaxis, :]
            - dinv[:, np.newaxis] * Ml @ m - dinv[:, np.newaxis] * M @ El
        )
        jac[:, l] = _coords(dm, n)
    return jac


def lie_poisson_bracket(cfg: ChargeConfig, f, g, mu,
                        grad_f=None, grad_g=None) -> float:
    """Reduced bracket of two scalar fields at a shape point.

    Oriented so the momentum map is a Poisson map: composing both fields
    with it and taking the weighted canonical bracket upstairs gives the
    same value.  Consistently, ``d/dt f = bracket(f, h)`` along
    :func:`lie_poisson_rhs`.
    """
    y = _as_coords(mu)
    xi_f = variational_derivative(cfg, f, y, gradient=grad_f)
    xi_g = variational_derivative(cfg, g, y, gradient=grad_g)
    mu_elem = AlgebraElement(1j * _hermitian(y, cfg.n))
    return inner_product(mu_elem, bracket_gamma(cfg, xi_g, xi_f))


# --------------------------------------------------------------------------
# reduced trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedTrajectory:
    """Sampled reduced orbit with energy/trace/rank diagnostics."""

    times: np.ndarray
    points: tuple
    energy: np.ndarray
    casimir: np.ndarray
    rank_residual_inf: np.ndarray

    @property
    def n(self) -> int:
        return self.points[0].n if self.points else 0

    def final_point(self) -> CoadjointPoint:
        return self.points[-1]

    def write_csv(self, stream) -> None:
        """Rows ``t, mu_1..mu_{N^2}, h, C, rankres_inf`` with 17 significant
        digits."""
        n2 = self.n * self.n
        header = ["t"] + [f"mu_{k}" for k in range(1, n2 + 1)] + ["h", "C", "rankres_inf"]
        stream.write(",".join(header) + "\n")
        for k, t in enumerate(self.times):
            row = [t, *self.points[k].coords,
                   self.energy[k], self.casimir[k], self.rank_residual_inf[k]]
            stream.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _reduced_trajectory_from_samples(cfg, times, ys):
    points, energy, cas, rankres = [], [], [], []
    for y in ys:
        pt = CoadjointPoint(y)
        points.append(pt)
        energy.append(reduced_hamiltonian(cfg, y))
        cas.append(casimir(cfg, y))
        rankres.append(rank_residuals(y).inf_norm if cfg.n >= 2 else 0.0)
    return ReducedTrajectory(
        times=np.asarray(times, dtype=float),
        points=tuple(points),
        energy=np.asarray(energy),
        casimir=np.asarray(cas),
        rank_residual_inf=np.asarray(rankres),
    )


def integrate_reduced(cfg: ChargeConfig, mu0, t_span, settings=None,
                      t_eval=None) -> ReducedTrajectory:
    """Integrate the reduced equation from a shape point.

    Error behavior mirrors the full-system integrator: domain violations
    truncate the run and attach the partial trajectory to the raised
    :class:`SingularityError`.
    """
    from .integrators import run_ode

    y0 = _as_coords(mu0).copy()
    if y0.size != cfg.n * cfg.n:
        raise ConfigError("coordinate length does not match config")
    if settings is None:
        settings = IntegratorSettings()

    def rhs(t, y):
        return lie_poisson_rhs(cfg, y)

    def guard(t, y):
        _check_domain(cfg, y)

    try:
        times, ys = run_ode(rhs, y0, t_span, settings, t_eval=t_eval, guard=guard)
    except AbortedIntegration as exc:
        partial = _reduced_trajectory_from_samples(cfg, exc.times, exc.ys)
        if exc.reason == "singularity":
            raise SingularityError(exc.time, exc.detail, trajectory=partial) from exc
        raise StepUnderflowError(exc.time, exc.detail, trajectory=partial) from exc
    return _reduced_trajectory_from_samples(cfg, times, ys)
