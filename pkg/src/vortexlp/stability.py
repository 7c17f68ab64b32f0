"""Stability classification of steadily rotating configurations.

Two independent routes are combined: the spectrum of the linearized reduced
dynamics (instability when an eigenvalue has positive real part) and a
constrained second-derivative certificate (stability when an energy-based
function with matched multipliers is positive definite on the tangent space
of the conserved-quantity level set).  A catalog of closed-form criterion
polynomials for the known families is kept alongside for cross-validation
and sweep output.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import finitediff
from .coalgebra import (casimir_gradient, lie_poisson_jacobian,
                        lie_poisson_rhs, rank_residual_hessians,
                        rank_residual_jacobian, reduced_hamiltonian_gradient,
                        reduced_hamiltonian_hessian)
from .equilibria import (EquilibriumBuild, RelEqKind, RelEqSpec,
                         build_equilibrium, pair_family_b_condition)
from .model import (ChargeConfig, CoadjointPoint, ConfigError,
                    EquilibriumReport, Verdict, offdiag_pairs)

__all__ = [
    "NonEquilibriumWarning",
    "linearize_reduced",
    "SpectralVerdict",
    "spectral_verdict",
    "ECCertificate",
    "energy_casimir_certificate",
    "closed_form",
    "CLOSED_FORMS",
    "closed_form_values_for",
    "detect_family",
    "classify",
    "StabilitySweep",
    "sweep",
]


class NonEquilibriumWarning(UserWarning):
    """Linearization requested at a point that is not a fixed point."""


# --------------------------------------------------------------------------
# closed-form criterion catalog
# --------------------------------------------------------------------------

def _g1(c, r1):
    return 2.0 * c * (1.0 - r1**2) ** 2


def _g2(c, r1):
    return 4.0 * r1**4 - c * (1.0 - r1**2) ** 2


def _f1(r1, r2):
    s = r1**2 + r2**2
    return s**2 + s * (r1**2 * r2**2 + 4.0 * r1 * r2 - 3.0) + 2.0 * (r1 - r2) ** 2


def _f2(c, r):
    return 2.0 * r**4 - c * (1.0 - r**2) ** 2


def _f3(c, r):
    return 9.0 * r**4 - 5.0 * c * (1.0 - r**2) ** 2


def _f4(c, r):
    return r**4 + 2.0 * c * (1.0 - r**2)


def _f5(c, r):
    return (9.0 * r**8 + 2.0 * c * r**4 * (1.0 - r**2) * (7.0 * r**2 + 2.0)
            - 25.0 * c**2 * (1.0 - r**2) ** 3)


def _f6(c, r):
    return 2.0 * r**4 - c * (1.0 - r**2) * (2.0 - 3.0 * r**2)


CLOSED_FORMS = {
    "g1": _g1,
    "g2": _g2,
    "f1": _f1,
    "f2": _f2,
    "f3": _f3,
    "f4": _f4,
    "f5": _f5,
    "f6": _f6,
}


def closed_form(name: str, *args) -> float:
    """Evaluate a catalog criterion by name (case-insensitive)."""
    key = name.lower()
    if key not in CLOSED_FORMS:
        raise ConfigError(f"unknown closed form '{name}'; "
                          f"choices: {sorted(CLOSED_FORMS)}")
    return float(CLOSED_FORMS[key](*args))


# --------------------------------------------------------------------------
# linearization and spectrum
# --------------------------------------------------------------------------

def linearize_reduced(cfg: ChargeConfig, mu0, method: str = "fd") -> np.ndarray:
    """Jacobian of the reduced vector field at a fixed point.

    ``method`` selects central finite differences with per-coordinate step
    1e-7 * max(1, |mu_k|) (default) or the analytic Jacobian.  A warning is
    emitted when the point is not an equilibrium to working precision.
    """
    y0 = mu0.coords if isinstance(mu0, CoadjointPoint) else np.asarray(mu0, float)
    residual = float(np.max(np.abs(lie_poisson_rhs(cfg, y0))))
    scale = max(1.0, float(np.max(np.abs(y0))))
    if residual > 1e-8 * scale:
        warnings.warn(
            f"linearizing at a non-equilibrium point (residual {residual:.3e})",
            NonEquilibriumWarning, stacklevel=2)
    if method == "analytic":
        return lie_poisson_jacobian(cfg, y0)
    if method != "fd":
        raise ConfigError(f"unknown linearization method '{method}'")
    steps = 1e-7 * np.maximum(1.0, np.abs(y0))
    return finitediff.jacobian(lambda y: lie_poisson_rhs(cfg, y), y0, steps=steps)


class SpectralVerdict(str, Enum):
    UNSTABLE = "Unstable"
    SPECTRALLY_NEUTRAL = "SpectrallyNeutral"


def spectral_verdict(jac: np.ndarray, tol: Optional[float] = None) -> SpectralVerdict:
    """Unstable iff some eigenvalue's real part exceeds ``tol``
    (default 1e-7 times the matrix 2-norm)."""
    jac = np.asarray(jac, dtype=float)
    if tol is None:
        tol = 1e-7 * float(np.linalg.norm(jac, 2))
    eigs = np.linalg.eigvals(jac)
    if float(np.max(eigs.real)) > tol:
        return SpectralVerdict.UNSTABLE
    return SpectralVerdict.SPECTRALLY_NEUTRAL


# --------------------------------------------------------------------------
# energy-based certificate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ECCertificate:
    """Multipliers, tangent basis, and projected second-derivative spectrum.

    ``verdict`` is True when the multiplier system solved to the required
    residual and every projected eigenvalue clears ``delta_pd``.  The
    ``conditional`` flag marks a rank-deficient constraint Jacobian, in
    which case the certificate is relative to the numerically determined
    tangent space.
    """

    a0: float
    a1: float
    b: np.ndarray
    c_offdiag: np.ndarray
    d_offdiag: np.ndarray
    multiplier_residual: float
    tangent_basis: np.ndarray
    projected_hessian_eigs: np.ndarray
    verdict: bool
    constraint_rank: int
    conditional: bool
    delta_pd: float


def energy_casimir_certificate(cfg: ChargeConfig, mu0,
                               a0_values=(1.0, -1.0)) -> ECCertificate:
    """Attempt a Lyapunov-style stability certificate at a fixed point.

    The candidate function combines the reduced energy (weight ``a0``), the
    conserved charge-weighted trace, and the rank residuals.  Multipliers
    are found by least squares so the combination is critical at ``mu0``;
    its Hessian is then projected onto the orthonormal null space of the
    stacked constraint Jacobian and tested for positive definiteness.
    """
    y0 = mu0.coords if isinstance(mu0, CoadjointPoint) else np.asarray(mu0, float)
    n = cfg.n
    if n < 2:
        raise ConfigError("certificate requires at least 2 vortices")

    dh = reduced_hamiltonian_gradient(cfg, y0)
    dc = casimir_gradient(cfg)
    dr = rank_residual_jacobian(y0)
    design = np.column_stack([dc, dr.T])

    singular_values = np.linalg.svd(design, compute_uv=False)
    constraint_rank = int(np.sum(singular_values > 1e-10 * singular_values[0]))
    conditional = constraint_rank < design.shape[1]

    norm_dh = float(np.linalg.norm(dh))
    residual_limit = 1e-9 * max(norm_dh, np.finfo(float).tiny)
    chosen = None
    for a0 in a0_values:
        sol, *_ = np.linalg.lstsq(design, -a0 * dh, rcond=None)
        residual = float(np.linalg.norm(design @ sol + a0 * dh))
        if chosen is None or residual < chosen[2]:
            chosen = (a0, sol, residual)
        if residual <= residual_limit:
            break
    a0, sol, multiplier_residual = chosen
    multipliers_ok = multiplier_residual <= residual_limit

    n_diag = n - 1
    a1 = float(sol[0])
    b = sol[1:1 + n_diag].copy()
    off = sol[1 + n_diag:]
    c_offdiag = off[0::2].copy()
    d_offdiag = off[1::2].copy()

    hess = a0 * reduced_hamiltonian_hessian(cfg, y0)
    for coeff, r_hess in zip(sol[1:], rank_residual_hessians(n)):
        hess = hess + coeff * r_hess

    stacked = np.vstack([dr, dc[np.newaxis, :]])
    _, svals, vt = np.linalg.svd(stacked)
    rank = int(np.sum(svals > 1e-10 * svals[0]))
    basis = vt[rank:].T

    projected = basis.T @ hess @ basis
    eigs = np.linalg.eigvalsh(0.5 * (projected + projected.T))
    delta_pd = 1e-10 * float(np.max(np.abs(eigs))) if eigs.size else 0.0
    verdict = bool(multipliers_ok and eigs.size and float(eigs.min()) > delta_pd)

    return ECCertificate(
        a0=float(a0), a1=a1, b=b, c_offdiag=c_offdiag, d_offdiag=d_offdiag,
        multiplier_residual=multiplier_residual, tangent_basis=basis,
        projected_hessian_eigs=eigs, verdict=verdict,
        constraint_rank=constraint_rank, conditional=conditional,
        delta_pd=delta_pd,
    )


# --------------------------------------------------------------------------
# family recognition and closed-form attachment
# --------------------------------------------------------------------------

def closed_form_values_for(cfg: ChargeConfig, spec: RelEqSpec) -> dict:
    """Catalog values relevant to one family member."""
    c = cfg.coupling_c
    if spec.kind == RelEqKind.PAIR_A:
        r = float(spec.params["r"])
        return {"g1": _g1(c, r), "g2": _g2(c, r)}
    if spec.kind == RelEqKind.PAIR_B:
        r1, r2 = float(spec.params["r1"]), float(spec.params["r2"])
        return {"F1": _f1(r1, r2)}
    if spec.kind == RelEqKind.EQUILATERAL3:
        r = float(spec.params["r"])
        return {"F2": _f2(c, r), "F3": _f3(c, r)}
    if spec.kind == RelEqKind.EQUILATERAL_CENTER4:
        if np.all(np.abs(cfg.charges) == 1) and np.all(cfg.charges == cfg.charges[0]):
            r = float(spec.params["r"])
            return {"F4": _f4(c, r), "F5": _f5(c, r), "F6": _f6(c, r)}
        return {}
    return {}


def detect_family(cfg: ChargeConfig, mu0, tol: float = 1e-9) -> Optional[RelEqSpec]:
    """Recognize a shape point as a member of a closed-form family."""
    y = mu0.coords if isinstance(mu0, CoadjointPoint) else np.asarray(mu0, float)
    n = cfg.n
    scale = max(1.0, float(np.max(np.abs(y))))

    def match(reference):
        return float(np.max(np.abs(y - reference))) <= tol * scale

    if n == 2 and cfg.charges[0] == cfg.charges[1]:
        m1, m2, m3, m4 = y
        if abs(m4) <= tol * scale and m3 < 0.0 and 0.0 < m1 < 1.0 and 0.0 < m2 < 1.0:
            r1, r2 = float(np.sqrt(m1)), float(np.sqrt(m2))
            if abs(m3 + r1 * r2) <= tol * scale:
                if abs(r1 - r2) <= tol:
                    return RelEqSpec(RelEqKind.PAIR_A, {"r": r1})
                if abs(pair_family_b_condition(cfg.coupling_c, r1, r2)) <= 1e-8:
                    return RelEqSpec(RelEqKind.PAIR_B, {"r1": r1, "r2": r2})
    if n == 3 and np.all(cfg.charges == cfg.charges[0]) and y[0] > 0:
        from .equilibria import equilateral3
        r = float(np.sqrt(y[0]))
        if 0.0 < r < 1.0 and match(equilateral3(cfg, r).coords):
            return RelEqSpec(RelEqKind.EQUILATERAL3, {"r": r})
    if n == 4 and np.all(cfg.charges[:3] == cfg.charges[0]) and y[0] > 0:
        from .equilibria import equilateral_center4
        r = float(np.sqrt(y[0]))
        if 0.0 < r < 1.0 and match(equilateral_center4(cfg, r).coords):
            return RelEqSpec(RelEqKind.EQUILATERAL_CENTER4, {"r": r})
    return None


# --------------------------------------------------------------------------
# classification
# --------------------------------------------------------------------------

def classify(cfg: ChargeConfig, mu0, family: Optional[RelEqSpec] = None,
             z0=None, omega=None) -> EquilibriumReport:
    """Full stability report for one fixed point.

    The verdict is LinearlyUnstable when the spectrum has a growing mode,
    CertifiedStable when the second-derivative certificate succeeds, and
    Inconclusive otherwise (neutral spectrum without a certificate).
    """
    point = mu0 if isinstance(mu0, CoadjointPoint) else CoadjointPoint(mu0)
    residual = float(np.max(np.abs(lie_poisson_rhs(cfg, point))))

    report_warnings = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonEquilibriumWarning)
        jac = linearize_reduced(cfg, point)
        for w in caught:
            report_warnings.append(str(w.message))

    eigs = np.linalg.eigvals(jac)
    spec_v = spectral_verdict(jac)
    cert = energy_casimir_certificate(cfg, point)
    if cert.conditional:
        report_warnings.append(
            "constraint Jacobian is rank-deficient; certificate is conditional")

    if spec_v == SpectralVerdict.UNSTABLE:
        verdict = Verdict.LINEARLY_UNSTABLE
    elif cert.verdict:
        verdict = Verdict.CERTIFIED_STABLE
    else:
        verdict = Verdict.INCONCLUSIVE

    if family is None:
        family = detect_family(cfg, point)
    values = closed_form_values_for(cfg, family) if family is not None else {}

    return EquilibriumReport(
        mu0=point,
        rhs_residual=residual,
        spectrum=tuple(complex(v) for v in eigs),
        ec_verdict=verdict,
        z0=z0,
        omega=omega,
        closed_form_values=values,
        min_proj_hess_eig=float(cert.projected_hessian_eigs.min())
        if cert.projected_hessian_eigs.size else None,
        max_re_eig=float(np.max(eigs.real)),
        warnings=tuple(report_warnings),
    )


# --------------------------------------------------------------------------
# parameter sweeps
# --------------------------------------------------------------------------

_SWEEP_AXES = {
    RelEqKind.PAIR_A: ("c", "r1"),
    RelEqKind.PAIR_B: ("r1", "r2"),
    RelEqKind.EQUILATERAL3: ("c", "r"),
    RelEqKind.EQUILATERAL_CENTER4: ("c", "r"),
}

_SWEEP_CRITERION = {
    RelEqKind.PAIR_A: "g2",
    RelEqKind.PAIR_B: "F1",
    RelEqKind.EQUILATERAL3: "F2",
    RelEqKind.EQUILATERAL_CENTER4: "F6",
}


@dataclass(frozen=True)
class StabilitySweep:
    """Grid of per-cell stability verdicts for one family."""

    kind: RelEqKind
    param_names: tuple
    values1: np.ndarray
    values2: np.ndarray
    records: tuple
    criterion: str

    def write_csv(self, stream) -> None:
        stream.write("param1,param2,closed_form_value,numeric_verdict,"
                     "min_proj_hess_eig,max_re_eig\n")
        for rec in self.records:
            stream.write(
                f"{rec['param1']:.17g},{rec['param2']:.17g},"
                f"{rec['closed_form_value']:.17g},{rec['numeric_verdict']},"
                f"{rec['min_proj_hess_eig']:.17g},{rec['max_re_eig']:.17g}\n")

    def verdict_grid(self) -> np.ndarray:
        """Records reshaped to (len(values1), len(values2))."""
        out = np.empty((self.values1.size, self.values2.size), dtype=object)
        for rec in self.records:
            out[rec["index1"], rec["index2"]] = rec["numeric_verdict"]
        return out

    def closed_form_grid(self) -> np.ndarray:
        out = np.empty((self.values1.size, self.values2.size))
        for rec in self.records:
            out[rec["index1"], rec["index2"]] = rec["closed_form_value"]
        return out


def _sweep_cell(cfg_template, kind, i, j, p1, p2):
    record = {
        "index1": i, "index2": j, "param1": float(p1), "param2": float(p2),
        "closed_form_value": np.nan, "numeric_verdict": "undefined",
        "min_proj_hess_eig": np.nan, "max_re_eig": np.nan,
    }
    try:
        if kind == RelEqKind.PAIR_B:
            r1, r2 = p1, p2
            if abs(r1 - r2) <= 1e-12:
                record["numeric_verdict"] = "family A overlap"
                record["closed_form_value"] = _f1(r1, r2)
                return record
            c_cell = (r1 * r2 * (r1 + r2) ** 2
                      / ((1.0 - r1**2) * (1.0 - r2**2)))
            cfg = ChargeConfig(cfg_template.charges, c_cell)
            spec = RelEqSpec(kind, {"r1": r1, "r2": r2})
        elif kind == RelEqKind.PAIR_A:
            cfg = ChargeConfig(cfg_template.charges, p1)
            spec = RelEqSpec(kind, {"r": p2})
        else:
            cfg = ChargeConfig(cfg_template.charges, p1)
            spec = RelEqSpec(kind, {"r": p2})
        built = build_equilibrium(cfg, spec)
        criterion = _SWEEP_CRITERION[kind]
        args = ((spec.params["r1"], spec.params["r2"])
                if kind == RelEqKind.PAIR_B
                else (cfg.coupling_c, spec.params["r"]))
        record["closed_form_value"] = closed_form(criterion, *args)
        report = classify(cfg, built.mu0, family=spec, z0=built.z0,
                          omega=built.omega)
        record["numeric_verdict"] = report.ec_verdict.value
        record["min_proj_hess_eig"] = report.min_proj_hess_eig
        record["max_re_eig"] = report.max_re_eig
    except Exception as exc:  # per-cell failures are recorded, not raised
        record["numeric_verdict"] = f"error:{type(exc).__name__}"
    return record


def sweep(cfg_template: ChargeConfig, kind, values1, values2,
          workers: int = 1) -> StabilitySweep:
    """Classify one family over a 2-D parameter grid.

    Axis meanings per family: equal-radii pair (c, r1); unequal-radii pair
    (r1, r2) with the coupling determined by the co-rotation condition;
    triangle and triangle-with-center (c, r).  Cells are independent; with
    ``workers > 1`` they are evaluated in a thread pool, output order is
    unchanged.
    """
    kind = RelEqKind(kind)
    if kind not in _SWEEP_AXES:
        raise ConfigError(f"kind {kind.value} does not define a sweep family")
    values1 = np.asarray(values1, dtype=float)
    values2 = np.asarray(values2, dtype=float)
    cells = [(i, j, p1, p2)
             for i, p1 in enumerate(values1)
             for j, p2 in enumerate(values2)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(
                lambda args: _sweep_cell(cfg_template, kind, *args), cells))
    else:
        records = [_sweep_cell(cfg_template, kind, *args) for args in cells]
    return StabilitySweep(
        kind=kind, param_names=_SWEEP_AXES[kind],
        values1=values1, values2=values2,
        records=tuple(records), criterion=_SWEEP_CRITERION[kind],
    )
