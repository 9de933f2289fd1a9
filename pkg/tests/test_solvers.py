"""Tests for the power-capped least squares and the penalty-dual loop."""

import itertools

import numpy as np
import pytest

from risbeam.projections import DiscretePhaseVector, quantized_angle_index
from risbeam.solvers import (
    IpddConfig,
    QuadraticForm,
    ipdd_quadratic_discrete,
    power_constrained_ls,
    ridge_power_solve,
)


def random_quadratic(rng, n, s):
    """Least-squares instance ||a^H x - t||^2 folded into standard form."""
    a = (rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))) / np.sqrt(2)
    t = rng.standard_normal(s) + 1j * rng.standard_normal(s)
    return QuadraticForm(
        hessian=a @ a.conj().T,
        linear=a @ t,
        constant=float(np.vdot(t, t).real),
    )


def brute_force_minimum(q, bits):
    levels = 2**bits
    best = np.inf
    for combo in itertools.product(range(levels), repeat=q.dim):
        z = np.exp(2j * np.pi * np.array(combo) / levels)
        best = min(best, q.value(z))
    return best


class TestQuadraticForm:
    def test_value_matches_manual_expansion(self):
        rng = np.random.default_rng(0)
        q = random_quadratic(rng, 4, 6)
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        manual = (
            np.real(np.conj(x) @ q.hessian @ x)
            - 2.0 * np.real(np.conj(q.linear) @ x)
            + q.constant
        )
        assert abs(q.value(x) - manual) < 1e-10

    def test_least_squares_fold_is_exact(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        t = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        q = QuadraticForm(
            hessian=a @ a.conj().T,
            linear=a @ t,
            constant=float(np.vdot(t, t).real),
        )
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        residual = np.linalg.norm(a.conj().T @ x - t) ** 2
        assert abs(q.value(x) - residual) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            QuadraticForm(hessian=np.array([[0.0, 1.0], [0.0, 0.0]]),
                          linear=np.zeros(2))

    def test_rejects_mismatched_linear(self):
        with pytest.raises(ValueError):
            QuadraticForm(hessian=np.eye(2), linear=np.zeros(3))


class TestPowerConstrainedLs:
    def test_known_active_constraint_solution(self):
        w = power_constrained_ls(np.eye(2), np.array([2.0, 0.0]), 1.0)
        np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-7)

    def test_inactive_constraint_returns_plain_least_squares(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        t = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        exact = np.linalg.lstsq(a, t, rcond=None)[0]
        w = power_constrained_ls(a, t, np.linalg.norm(exact) ** 2 * 4.0)
        np.testing.assert_allclose(w, exact, atol=1e-10)

    def test_cap_is_tight_when_binding(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
        t = 10.0 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
        p_max = 0.5
        w = power_constrained_ls(a, t, p_max)
        power = np.linalg.norm(w) ** 2
        assert power <= p_max
        assert power >= p_max * (1.0 - 1e-6)

    def test_sampled_optimality(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
        t = 5.0 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
        p_max = 1.0
        w = power_constrained_ls(a, t, p_max)
        best = np.linalg.norm(a @ w - t) ** 2
        for _ in range(1000):
            cand = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            cand *= rng.uniform(0, 1) * np.sqrt(p_max) / np.linalg.norm(cand)
            assert best <= np.linalg.norm(a @ cand - t) ** 2 + 1e-9

    def test_rank_deficient_matrix(self):
        a = np.zeros((4, 3), dtype=complex)
        a[:, 0] = 1.0
        t = np.ones(4, dtype=complex)
        w = power_constrained_ls(a, t, 10.0)
        # minimum-norm fit: only the active direction is used
        np.testing.assert_allclose(w, [1.0, 0.0, 0.0], atol=1e-10)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            power_constrained_ls(np.eye(2), np.zeros(3), 1.0)
        with pytest.raises(ValueError):
            power_constrained_ls(np.eye(2), np.zeros(2), 0.0)


class TestRidgePowerSolve:
    def test_single_column_matches_ls_kernel(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((6, 4)) + 1j * rng.standard_normal((6, 4))
        t = 4.0 * (rng.standard_normal(6) + 1j * rng.standard_normal(6))
        p_max = 0.7
        direct = power_constrained_ls(a, t, p_max)
        w, lam = ridge_power_solve(a.conj().T @ a, a.conj().T @ t, p_max)
        assert lam > 0
        np.testing.assert_allclose(w, direct, atol=1e-6)

    def test_shared_multiplier_kkt(self):
        rng = np.random.default_rng(6)
        b = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        hess = b @ b.conj().T
        rhs = 10.0 * (rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3)))
        p_max = 2.0
        w, lam = ridge_power_solve(hess, rhs, p_max)
        total = np.linalg.norm(w) ** 2
        assert total <= p_max
        assert lam > 0
        assert total >= p_max * (1.0 - 1e-6)
        # every column satisfies the shifted normal equations with one lam
        for k in range(3):
            np.testing.assert_allclose(
                (hess + lam * np.eye(5)) @ w[:, k], rhs[:, k], atol=1e-6
            )

    def test_zero_rhs(self):
        w, lam = ridge_power_solve(np.eye(3), np.zeros((3, 2)), 1.0)
        assert lam == 0.0
        np.testing.assert_array_equal(w, 0.0)


def default_config(bits, **kw):
    return IpddConfig(bits=bits, **kw)


class TestIpdd:
    def test_identity_hessian_reaches_the_elementwise_optimum(self):
        rng = np.random.default_rng(7)
        for bits in (1, 2):
            b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            q = QuadraticForm(hessian=np.eye(6), linear=b)
            res = ipdd_quadratic_discrete(
                q, default_config(bits), DiscretePhaseVector.zeros(6, bits)
            )
            target = brute_force_minimum(q, bits)
            assert q.value(res.phases.values) <= target + 1e-9

    def test_single_variable_case(self):
        rng = np.random.default_rng(8)
        b = np.array([rng.standard_normal() + 1j * rng.standard_normal()])
        q = QuadraticForm(hessian=np.eye(1) * 2.0, linear=b)
        res = ipdd_quadratic_discrete(
            q, default_config(2), DiscretePhaseVector.zeros(1, 2)
        )
        expected = quantized_angle_index(b, 2)
        np.testing.assert_array_equal(res.phases.indices, expected)

    def test_output_is_exactly_feasible(self):
        rng = np.random.default_rng(9)
        q = random_quadratic(rng, 8, 10)
        res = ipdd_quadratic_discrete(
            q, default_config(2), DiscretePhaseVector.zeros(8, 2)
        )
        assert res.phases.bits == 2
        assert np.all((res.phases.indices >= 0) & (res.phases.indices < 4))
        np.testing.assert_allclose(np.abs(res.phases.values), 1.0, atol=1e-15)

    def test_consensus_gap_at_exit(self):
        rng = np.random.default_rng(10)
        q = random_quadratic(rng, 6, 8)
        res = ipdd_quadratic_discrete(
            q, default_config(1), DiscretePhaseVector.zeros(6, 1)
        )
        assert res.converged
        assert res.consensus_gap <= 1e-4
        assert res.iterations == len(res.gap_trace)

    def test_gap_non_increasing_over_the_final_stretch(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = random_quadratic(rng, 6, 8)
            res = ipdd_quadratic_discrete(
                q, default_config(1), DiscretePhaseVector.zeros(6, 1)
            )
            tail = np.array(res.gap_trace[-10:])
            assert np.all(np.diff(tail) <= 1e-12)

    def test_never_worse_than_the_init(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            q = random_quadratic(rng, 6, 8)
            init = DiscretePhaseVector.project(
                rng.standard_normal(6) + 1j * rng.standard_normal(6), 1
            )
            res = ipdd_quadratic_discrete(q, default_config(1), init)
            assert q.value(res.phases.values) <= q.value(init.values) + 1e-12

    def test_near_optimal_on_small_random_instances(self):
        rng = np.random.default_rng(13)
        cfg = default_config(1, penalty_decay=0.95, max_outer_iters=800)
        hits = 0
        for _ in range(25):
            q = random_quadratic(rng, 6, 12)
            start = np.linalg.solve(q.hessian + 1e-9 * np.eye(6), q.linear)
            init = DiscretePhaseVector.project(start, 1)
            res = ipdd_quadratic_discrete(q, cfg, init)
            achieved = q.value(res.phases.values)
            target = brute_force_minimum(q, 1)
            if achieved <= target + 0.05 * abs(target) + 1e-12:
                hits += 1
        assert hits >= 22

    def test_inner_step_minimizes_the_augmented_objective(self):
        # one continuous update: (A + I/(2 eta))^{-1} (b + zeta/(2 eta) + u/2)
        # must minimize f(phi) + ||phi - zeta - eta u||^2 / (2 eta)
        rng = np.random.default_rng(14)
        q = random_quadratic(rng, 5, 7)
        eta = 0.8
        zeta = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
        dual = rng.standard_normal(5) + 1j * rng.standard_normal(5)

        def augmented(phi):
            penalty = np.linalg.norm(phi - zeta - eta * dual) ** 2 / (2.0 * eta)
            return q.value(phi) + penalty

        shift = q.hessian + np.eye(5) / (2.0 * eta)
        rhs = q.linear + zeta / (2.0 * eta) + 0.5 * dual
        phi_star = np.linalg.solve(shift, rhs)
        best = augmented(phi_star)
        for _ in range(300):
            other = phi_star + 0.3 * (
                rng.standard_normal(5) + 1j * rng.standard_normal(5)
            )
            assert best <= augmented(other) + 1e-10

    def test_dimension_and_bits_mismatches(self):
        q = QuadraticForm(hessian=np.eye(3), linear=np.zeros(3))
        with pytest.raises(ValueError):
            ipdd_quadratic_discrete(
                q, default_config(1), DiscretePhaseVector.zeros(4, 1)
            )
        with pytest.raises(ValueError):
            ipdd_quadratic_discrete(
                q, default_config(2), DiscretePhaseVector.zeros(3, 1)
            )
        with pytest.raises(TypeError):
            ipdd_quadratic_discrete(
                np.eye(3), default_config(1), DiscretePhaseVector.zeros(3, 1)
            )


class TestIpddConfig:
    def test_defaults(self):
        cfg = IpddConfig(bits=2)
        assert cfg.consensus_tol == 1e-4
        assert cfg.penalty_init == 10.0
        assert cfg.penalty_decay == 0.8
        assert cfg.max_outer_iters == 200

    @pytest.mark.parametrize(
        "kw",
        [
            {"bits": 0},
            {"bits": 1, "penalty_init": 0.0},
            {"bits": 1, "penalty_decay": 1.0},
            {"bits": 1, "penalty_decay": 0.0},
            {"bits": 1, "consensus_tol": 0.0},
            {"bits": 1, "max_outer_iters": 0},
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            IpddConfig(**kw)
