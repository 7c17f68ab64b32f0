"""Trapped point-vortex dynamics, rotational reduction, and stability tools."""

from .model import (ChargeConfig, CoadjointPoint, ConfigError, DomainError,
                    EquilibriumReport, PhysicalParams, ScaledUnits,
                    StateValidationError, Verdict, VortexError, VortexState,
                    momentum_map, mu_pack, mu_unpack, physical_to_scaled,
                    validate_state)
from .integrators import (IntegratorSettings, Scheme, SingularityError,
                          StepUnderflowError)
from .dynamics import (Trajectory, angular_impulse, hamiltonian, integrate,
                       poisson_bracket, vortex_rhs)
from .coalgebra import (AlgebraElement, RankResidual, ReducedTrajectory,
                        bracket_gamma, casimir, coadjoint_action,
                        inner_product, integrate_reduced, lie_poisson_bracket,
                        lie_poisson_rhs, rank_residuals, reduced_hamiltonian,
                        variational_derivative)
from .equilibria import (NewtonResult, RelEqKind, RelEqSpec,
                         build_equilibrium, dipole_family_curve, equilateral3,
                         equilateral_center4, newton_relative_equilibrium,
                         pair_family_b_solve, pair_fixed_point_residual)
from .stability import (ECCertificate, SpectralVerdict, StabilitySweep,
                        classify, closed_form, energy_casimir_certificate,
                        linearize_reduced, spectral_verdict, sweep)

__version__ = "0.1.0"
