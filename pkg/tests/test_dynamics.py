import math

import numpy as np
import pytest

from vortexlp import finitediff
from vortexlp.coalgebra import casimir
from vortexlp.dynamics import (IntegratorSettings, Scheme, SingularityError,
                               angular_impulse, hamiltonian, integrate,
                               poisson_bracket, vortex_rhs)
from vortexlp.model import (ChargeConfig, DomainError, VortexState,
                            momentum_map, state_from_real, state_to_real)

from conftest import random_charges, random_valid_state


def energy_by_loops(cfg, state):
    """Independent evaluation of the energy, term by term."""
    z = state.positions
    g = cfg.gamma
    total = 0.0
    for i in range(cfg.n):
        total += g[i] ** 2 * math.log(1.0 - abs(z[i]) ** 2)
    for i in range(cfg.n):
        for j in range(i + 1, cfg.n):
            total -= cfg.coupling_c * g[i] * g[j] * math.log(abs(z[i] - z[j]) ** 2)
    return 0.5 * total


class TestHamiltonian:
    def test_single_vortex_at_center(self):
        cfg = ChargeConfig([1], 0.1)
        assert hamiltonian(cfg, VortexState([0.0])) == 0.0

    def test_two_vortex_value(self):
        cfg = ChargeConfig([1, 1], 0.1)
        value = hamiltonian(cfg, VortexState([0.3, -0.3]))
        expected = math.log(0.91) - 0.05 * math.log(0.36)
        assert value == pytest.approx(expected, rel=1e-14)
        assert value == pytest.approx(-0.0432281, abs=5e-8)

    def test_matches_loop_evaluation(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 6))
            cfg = ChargeConfig(random_charges(rng, n), float(rng.uniform(0.05, 1.0)))
            state = random_valid_state(rng, n)
            assert hamiltonian(cfg, state) == pytest.approx(
                energy_by_loops(cfg, state), rel=1e-13)

    def test_rotation_invariance(self, rng):
        cfg = ChargeConfig([1, -1, 2], 0.2)
        state = random_valid_state(rng, 3)
        for theta in rng.uniform(0, 2 * np.pi, size=5):
            assert hamiltonian(cfg, state.rotated(theta)) == pytest.approx(
                hamiltonian(cfg, state), rel=1e-12)

    def test_domain_error_on_collision(self):
        cfg = ChargeConfig([1, 1], 0.1)
        with pytest.raises(DomainError):
            hamiltonian(cfg, VortexState([0.2, 0.2]))


class TestVortexRhs:
    def test_single_vortex_precession(self):
        cfg = ChargeConfig([1], 0.1)
        zdot = vortex_rhs(cfg, VortexState([0.5]))
        assert zdot[0] == pytest.approx(1j * 0.5 / 0.75, rel=1e-15)

    @staticmethod
    def _fd_symplectic_gradient(cfg, state):
        n = cfg.n
        grad = finitediff.gradient(
            lambda v: hamiltonian(cfg, state_from_real(v)), state_to_real(state))
        inv_g = 1.0 / cfg.gamma
        return inv_g * grad[n:] - 1j * inv_g * grad[:n]

    @pytest.mark.parametrize("charges,c,positions", [
        ([1, 1], 0.1, [0.3, -0.3]),
        ([1, -1], 0.1, [0.4, 0.4j]),
        ([1, -1, 1], 0.05, [0.35, 0.05j, -0.35]),
        ([1, 1, 1, 1], 0.05, [0.5, 0.5j, -0.5, -0.45j]),
    ])
    def test_hamiltonian_vector_field(self, charges, c, positions):
        # rhs must equal the symplectic gradient of the energy
        cfg = ChargeConfig(charges, c)
        state = VortexState(positions)
        fd = self._fd_symplectic_gradient(cfg, state)
        assert np.max(np.abs(vortex_rhs(cfg, state) - fd)) < 1e-10

    def test_hamiltonian_vector_field_random(self, rng):
        # wider random draws; the finite-difference oracle loses accuracy
        # with strong charges and close pairs, hence the scaled tolerance
        for _ in range(10):
            n = int(rng.integers(1, 5))
            cfg = ChargeConfig(random_charges(rng, n), float(rng.uniform(0.05, 0.8)))
            state = random_valid_state(rng, n, r_max=0.6, min_sep=0.2)
            fd = self._fd_symplectic_gradient(cfg, state)
            zdot = vortex_rhs(cfg, state)
            assert np.max(np.abs(zdot - fd)) < 1e-9 * max(1.0, np.max(np.abs(zdot)))

    def test_antisymmetric_dipole_translates(self):
        cfg = ChargeConfig([1, -1], 0.2)
        d = 0.35
        zdot = vortex_rhs(cfg, VortexState([d, -d]))
        assert np.max(np.abs(zdot.real)) < 1e-15
        assert zdot[0].imag == pytest.approx(zdot[1].imag, rel=1e-14)


class TestPoissonBracket:
    def test_coordinate_pairs(self, rng):
        cfg = ChargeConfig([2, -1], 0.1)
        state = random_valid_state(rng, 2)
        for i in range(2):
            value = poisson_bracket(cfg, lambda v, i=i: v[i],
                                    lambda v, i=i: v[2 + i], state)
            assert value == pytest.approx(1.0 / cfg.gamma[i], rel=1e-9)

    def test_antisymmetry_on_self(self, rng):
        cfg = ChargeConfig([1, 1, -1], 0.3)
        state = random_valid_state(rng, 3)

        def f(v):
            return float(np.sin(v[0]) * v[3] + v[1] ** 2)

        assert poisson_bracket(cfg, f, f, state) == pytest.approx(0.0, abs=1e-12)

    def test_energy_commutes_with_angular_impulse(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 5))
            cfg = ChargeConfig(random_charges(rng, n), float(rng.uniform(0.05, 0.5)))
            state = random_valid_state(rng, n)

            def h_field(v):
                return hamiltonian(cfg, state_from_real(v))

            def impulse_field(v):
                return angular_impulse(cfg, state_from_real(v))

            assert poisson_bracket(cfg, h_field, impulse_field, state) == \
                pytest.approx(0.0, abs=1e-9)


class TestAngularImpulse:
    def test_cancellation(self):
        cfg = ChargeConfig([1, -1], 0.1)
        assert angular_impulse(cfg, VortexState([0.4, 0.4j])) == pytest.approx(0.0)

    def test_value(self):
        cfg = ChargeConfig([1, 1], 0.1)
        assert angular_impulse(cfg, VortexState([0.3, -0.3])) == pytest.approx(0.18)

    def test_equals_conserved_trace_of_shape_point(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 5))
            cfg = ChargeConfig(random_charges(rng, n), 0.2)
            state = random_valid_state(rng, n)
            assert angular_impulse(cfg, state) == pytest.approx(
                casimir(cfg, momentum_map(state)), rel=1e-14)


class TestIntegrate:
    settings = IntegratorSettings(rel_tol=1e-12, abs_tol=1e-12, max_step=0.5)

    def test_single_vortex_period(self):
        cfg = ChargeConfig([1], 0.1)
        r = 0.5
        period = 2.0 * np.pi * (1.0 - r * r)
        traj = integrate(cfg, VortexState([r]), (0.0, period), self.settings,
                         t_eval=[0.0, period])
        assert abs(traj.states[-1].positions[0] - r) < 1e-8

    def test_conservation(self, rng):
        cfg = ChargeConfig([1, 1, -1], 0.1)
        state = VortexState([0.4, -0.3 + 0.2j, 0.1 - 0.5j])
        traj = integrate(cfg, state, (0.0, 30.0), self.settings,
                         t_eval=np.linspace(0.0, 30.0, 151))
        assert np.max(np.abs(traj.energy - traj.energy[0])) < 1e-8
        assert np.max(np.abs(traj.impulse - traj.impulse[0])) < 1e-8

    def test_equivariance(self):
        cfg = ChargeConfig([1, 2], 0.15)
        z0 = VortexState([0.45, -0.2 + 0.3j])
        theta = 0.7
        t_eval = np.linspace(0.0, 10.0, 51)
        plain = integrate(cfg, z0, (0.0, 10.0), self.settings, t_eval=t_eval)
        rotated = integrate(cfg, z0.rotated(theta), (0.0, 10.0), self.settings,
                            t_eval=t_eval)
        for a, b in zip(plain.states, rotated.states):
            assert np.max(np.abs(a.rotated(theta).positions - b.positions)) < 1e-8

    def test_truncates_on_guard_violation(self):
        cfg = ChargeConfig([1, 1], 0.1)
        z0 = VortexState([0.5, -0.35 + 0.1j])
        # artificially tight boundary guard forces a mid-flight abort
        with pytest.raises(SingularityError) as err:
            integrate(cfg, z0, (0.0, 20.0), self.settings, eps_bound=0.48)
        partial = err.value.trajectory
        assert partial.times.size >= 1
        assert partial.times[-1] < 20.0
        assert err.value.time >= partial.times[-1] - 1e-12

    def test_implicit_midpoint_conserves_roughly(self):
        cfg = ChargeConfig([1, 1], 0.1)
        settings = IntegratorSettings(rel_tol=1e-12, abs_tol=1e-13,
                                      max_step=0.01,
                                      scheme=Scheme.IMPLICIT_MIDPOINT)
        traj = integrate(cfg, VortexState([0.4, -0.4]), (0.0, 5.0), settings)
        assert np.max(np.abs(traj.energy - traj.energy[0])) < 1e-6
        assert np.max(np.abs(traj.impulse - traj.impulse[0])) < 1e-6

    def test_csv_layout(self, tmp_path):
        cfg = ChargeConfig([1, 1], 0.1)
        traj = integrate(cfg, VortexState([0.4, -0.4]), (0.0, 1.0),
                         self.settings, t_eval=[0.0, 0.5, 1.0])
        path = tmp_path / "traj.csv"
        with open(path, "w") as fh:
            traj.write_csv(fh)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,x1,y1,x2,y2,H,C,rankres"
        assert len(lines) == 4
        first = [float(v) for v in lines[1].split(",")]
        assert first[0] == 0.0
        assert first[1] == pytest.approx(0.4)
