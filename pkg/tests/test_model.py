import math

import numpy as np
import pytest

from vortexlp.model import (ChargeConfig, CoadjointPoint, ConfigError,
                            PhysicalParams, VortexState, momentum_map,
                            mu_pack, mu_unpack, physical_to_scaled,
                            validate_state)

from conftest import random_valid_state


class TestChargeConfig:
    def test_rejects_zero_charge(self):
        with pytest.raises(ConfigError):
            ChargeConfig([1, 0], 0.1)

    def test_rejects_nonpositive_coupling(self):
        with pytest.raises(ConfigError):
            ChargeConfig([1, 1], 0.0)
        with pytest.raises(ConfigError):
            ChargeConfig([1, 1], -0.5)

    def test_rejects_fractional_charges(self):
        with pytest.raises(ConfigError):
            ChargeConfig([1.5, 1], 0.1)

    def test_charge_matrix(self):
        cfg = ChargeConfig([2, -1, 1], 0.3)
        assert np.array_equal(cfg.charge_matrix(), np.diag([2.0, -1.0, 1.0]))
        assert np.allclose(cfg.charge_matrix() @ cfg.charge_matrix_inv(), np.eye(3))


class TestPhysicalToScaled:
    def test_unit_coupling_when_log_argument_is_e(self):
        omega_tr = 0.7
        mu = omega_tr * math.e / (2.0 * math.sqrt(2.0) * math.pi)
        scaled = physical_to_scaled(PhysicalParams(mu_chem=mu, omega_tr=omega_tr, b=2.0))
        assert scaled.coupling_c == pytest.approx(1.0, abs=1e-14)

    def test_empirical_interaction_strength(self):
        # direct arithmetic: c = b / (2 ln(2 sqrt(2) pi mu/omega_tr))
        scaled = physical_to_scaled(PhysicalParams(mu_chem=1.0, omega_tr=1.0, b=1.35))
        expected = 1.35 / (2.0 * math.log(2.0 * math.sqrt(2.0) * math.pi))
        assert scaled.coupling_c == pytest.approx(expected, rel=1e-15)
        assert 0.30 < scaled.coupling_c < 0.31

    def test_scales(self):
        p = PhysicalParams(mu_chem=2.0, omega_tr=0.5, b=1.35)
        scaled = physical_to_scaled(p)
        r_tf = math.sqrt(4.0) / 0.5
        assert scaled.r_tf == pytest.approx(r_tf, rel=1e-15)
        log_term = math.log(2.0 * math.sqrt(2.0) * math.pi * 4.0)
        assert scaled.omega_pr0 == pytest.approx(log_term / r_tf**2, rel=1e-15)

    def test_singular_boundary(self):
        omega_tr = 1.0
        mu = omega_tr / (2.0 * math.sqrt(2.0) * math.pi)
        with pytest.raises(ConfigError, match="nonpositive coupling"):
            physical_to_scaled(PhysicalParams(mu_chem=mu, omega_tr=omega_tr, b=1.0))
        with pytest.raises(ConfigError, match="nonpositive coupling"):
            physical_to_scaled(PhysicalParams(mu_chem=0.5 * mu, omega_tr=omega_tr, b=1.0))


class TestPackUnpack:
    def test_identity_matrix(self):
        mu = mu_pack(np.eye(2))
        assert np.array_equal(mu.coords, [1.0, 1.0, 0.0, 0.0])

    def test_shape_variable_layout(self):
        r1, r2, theta = 0.6, 0.3, 1.1
        coords = [r1**2, r2**2, r1 * r2 * math.cos(theta), r1 * r2 * math.sin(theta)]
        m = mu_unpack(CoadjointPoint(coords))
        assert m[0, 1] == pytest.approx(r1 * r2 * np.exp(1j * theta), rel=1e-15)
        assert m[1, 0] == pytest.approx(np.conj(m[0, 1]), rel=1e-15)
        assert m[0, 0] == pytest.approx(r1**2)
        assert m[1, 1] == pytest.approx(r2**2)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_round_trip_random_hermitian(self, rng, n):
        for _ in range(100):
            a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            h = 0.5 * (a + a.conj().T)
            again = mu_unpack(mu_pack(h))
            assert np.max(np.abs(again - h)) <= 1e-15 * max(1.0, np.max(np.abs(h)))
            coords = mu_pack(h).coords
            assert np.array_equal(mu_pack(mu_unpack(CoadjointPoint(coords))).coords,
                                  coords)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ConfigError, match="Hermitian"):
            mu_pack(np.array([[1.0, 2.0], [3.0, 1.0]]))

    def test_rejects_bad_length(self):
        with pytest.raises(ConfigError, match="perfect square"):
            CoadjointPoint([1.0, 2.0, 3.0])


class TestMomentumMap:
    def test_two_vortex_example(self):
        mu = momentum_map(VortexState([0.5, 0.5j]))
        assert np.allclose(mu.coords, [0.25, 0.25, 0.0, -0.25], atol=1e-16)

    def test_zero_state(self):
        mu = momentum_map(VortexState([0.0, 0.0]))
        assert np.array_equal(mu.coords, np.zeros(4))

    def test_rotation_invariance(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 6))
            state = random_valid_state(rng, n)
            theta = rng.uniform(0.0, 2.0 * np.pi)
            mu = momentum_map(state)
            mu_rot = momentum_map(state.rotated(theta))
            assert np.max(np.abs(mu.coords - mu_rot.coords)) <= 1e-14

    def test_rank_one(self, rng):
        for n in (2, 3, 4, 5):
            state = random_valid_state(rng, n)
            m = momentum_map(state).hermitian()
            svals = np.linalg.svd(m, compute_uv=False)
            assert svals[1] <= 1e-13 * max(1.0, svals[0])


class TestValidateState:
    def test_ok(self):
        assert validate_state(VortexState([0.3, -0.3]), 1e-6, 1e-6).ok

    def test_collision(self):
        diag = validate_state(VortexState([0.3, 0.3]))
        assert not diag.ok
        assert diag.collision_pairs == ((0, 1),)
        assert "0 and 1" in str(diag)

    def test_boundary(self):
        diag = validate_state(VortexState([1.0]))
        assert not diag.ok
        assert diag.boundary_violations == (0,)
        assert "boundary" in str(diag)

    def test_margin_is_respected(self):
        state = VortexState([0.95])
        assert validate_state(state, eps_bound=0.01).ok
        assert not validate_state(state, eps_bound=0.1).ok

    def test_rejects_nonpositive_margins(self):
        with pytest.raises(ConfigError):
            validate_state(VortexState([0.1]), eps_bound=0.0)
