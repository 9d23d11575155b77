"""Tests for the affine and peak/power projection operators."""

import math

import numpy as np
import pytest
from scipy.linalg import null_space

from lowpar.projections import (
    AffineSystem,
    ParPincBounds,
    determine_index_set,
    kkt_certificate,
    proj_affine,
    proj_par_only,
    proj_par_power,
    proj_power_ball,
)
from proj_oracle import reference_distance

SQ3 = math.sqrt(3.0)


def random_instance(rng, n_max=32):
    n = int(rng.integers(2, n_max + 1))
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    alpha = float(rng.uniform(1.0 / n, 1.0))
    if rng.random() < 0.5:
        cap = float(rng.uniform(0.2, 1.5)) * float(np.sum(np.abs(z) ** 2))
        xi = 2.0
    else:
        cap = math.inf
        xi = math.inf
    bounds = ParPincBounds(rho=alpha * n, xi=xi, alpha=alpha, power_cap=cap, dim=n)
    return z, bounds


class TestBounds:
    def test_from_linear(self):
        b = ParPincBounds.from_linear(2.0, 1.5, 4, ref_power=10.0)
        assert b.alpha == pytest.approx(0.5)
        assert b.power_cap == pytest.approx(15.0)

    def test_from_db(self):
        b = ParPincBounds.from_db(3.0103, 0.0, 4, ref_power=1.0)
        assert b.rho == pytest.approx(2.0, rel=1e-4)
        assert b.power_cap == pytest.approx(1.0)

    def test_par_only_has_no_cap(self):
        b = ParPincBounds.par_only(2.0, 8)
        assert math.isinf(b.power_cap) and math.isinf(b.xi)
        assert b.alpha == pytest.approx(0.25)

    def test_without_power_cap(self):
        b = ParPincBounds.from_linear(2.0, 1.5, 4, ref_power=10.0)
        stripped = b.without_power_cap()
        assert math.isinf(stripped.power_cap)
        assert stripped.rho == b.rho

    def test_validation(self):
        with pytest.raises(ValueError):
            ParPincBounds(rho=0.5, xi=2.0, alpha=0.25, power_cap=1.0, dim=2)
        with pytest.raises(ValueError):
            ParPincBounds(rho=2.0, xi=0.5, alpha=1.0, power_cap=1.0, dim=2)
        with pytest.raises(ValueError):
            ParPincBounds(rho=2.0, xi=2.0, alpha=1.0, power_cap=0.0, dim=2)
        with pytest.raises(ValueError):
            ParPincBounds(rho=2.0, xi=2.0, alpha=1.0, power_cap=1.0, dim=0)


class TestAffineProjection:
    def make_system(self, rng, m=6, n=14):
        a = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return AffineSystem.from_matrix(a, y)

    def test_zero_input_maps_to_min_power_solution(self):
        rng = np.random.default_rng(0)
        system = self.make_system(rng)
        out = proj_affine(system, np.zeros(system.cols, dtype=complex))
        np.testing.assert_allclose(out, system.x_ls, rtol=1e-12, atol=1e-14)

    def test_output_solves_system(self):
        rng = np.random.default_rng(1)
        system = self.make_system(rng)
        z = rng.standard_normal(system.cols) + 1j * rng.standard_normal(system.cols)
        out = proj_affine(system, z)
        resid = np.linalg.norm(system.a @ out - system.y)
        assert resid <= 1e-10 * np.linalg.norm(system.y)

    def test_fixed_point(self):
        rng = np.random.default_rng(2)
        system = self.make_system(rng)
        z = rng.standard_normal(system.cols) + 1j * rng.standard_normal(system.cols)
        once = proj_affine(system, z)
        twice = proj_affine(system, once)
        np.testing.assert_allclose(twice, once, rtol=1e-12, atol=1e-13)

    def test_displacement_orthogonal_to_null_space(self):
        rng = np.random.default_rng(3)
        system = self.make_system(rng, m=4, n=9)
        z = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        out = proj_affine(system, z)
        basis = null_space(system.a)
        overlap = np.abs(basis.conj().T @ (z - out))
        assert np.max(overlap) <= 1e-10 * np.linalg.norm(z)

    def test_min_power_solution_matches_direct_solve(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((3, 7)) + 1j * rng.standard_normal((3, 7))
        y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        system = AffineSystem.from_matrix(a, y)
        direct = a.conj().T @ np.linalg.solve(a @ a.conj().T, y)
        np.testing.assert_allclose(system.x_ls, direct, rtol=1e-11)


class TestPowerBall:
    def test_scales_onto_sphere(self):
        out = proj_power_ball(1.0, np.array([3.0, 4.0], dtype=complex))
        np.testing.assert_allclose(out, [0.6, 0.8], rtol=1e-14)

    def test_interior_point_unchanged(self):
        x = np.array([0.1, 0.2j])
        np.testing.assert_array_equal(proj_power_ball(1.0, x), x)

    def test_rejects_nonpositive_cap(self):
        with pytest.raises(ValueError):
            proj_power_ball(0.0, np.ones(2, dtype=complex))


class TestIndexSetSearch:
    def test_feasible_vector_has_empty_set(self):
        indices, size = determine_index_set(np.ones(4, dtype=complex), 0.5)
        assert size == 0 and indices.size == 0

    def test_single_peak(self):
        indices, size = determine_index_set(
            np.array([4.0, 1.0, 1.0, 1.0], dtype=complex), 0.5)
        assert size == 1
        np.testing.assert_array_equal(indices, [0])

    def test_tied_peaks_are_clipped_together(self):
        z = np.array([2.0, 2.0, 1, 1, 1, 1, 1, 1], dtype=complex)
        indices, size = determine_index_set(z, 0.25)
        assert size == 2
        np.testing.assert_array_equal(indices, [0, 1])

    def test_order_independence(self):
        z = np.array([1.0, 1, 1.5, 1, 6, 1], dtype=complex)
        indices, size = determine_index_set(z, 1.0 / 3.0)
        assert size == 1
        np.testing.assert_array_equal(indices, [4])

    def test_tied_run_resolved_by_acceptance_check(self):
        # A split of the tied pair fails the acceptance window; the size
        # closing the run is taken instead of raising.
        z = np.array([3.0, 3.0 - 1e-13, 0.1, 0.1], dtype=complex)
        indices, size = determine_index_set(z, 0.3)
        assert size == 2
        np.testing.assert_array_equal(indices, [0, 1])

    def test_boundary_tie_accepted_with_slack(self):
        # At alpha = 1/3 the size-2 window degenerates to a point
        # (bound == third magnitude); the comparison slack accepts it.
        z = np.array([1.0, 0.9, 0.6], dtype=complex)
        indices, size = determine_index_set(z, 1.0 / 3.0)
        assert size == 2
        np.testing.assert_array_equal(indices, [0, 1])

    def test_exhaustion_raises(self):
        # alpha sits just below the well-posed floor 1/n, so the largest
        # size is degenerate and the smaller ones fail the acceptance
        # window by more than the slack.
        z = np.array([1.0, 0.9, 0.6], dtype=complex)
        with pytest.raises(ValueError, match="clipped set"):
            determine_index_set(z, (1.0 - 8e-13) / 3.0)


class TestPeakPowerProjection:
    def test_zero_tail_example(self):
        z = np.array([4.0, 0.0, 0.0, 0.0], dtype=complex)
        bounds = ParPincBounds.par_only(2.0, 4)
        out, ws = proj_par_power(bounds, z, return_workspace=True)
        expected = np.array([2.0, math.sqrt(4.0 / 3.0),
                             math.sqrt(4.0 / 3.0), math.sqrt(4.0 / 3.0)])
        np.testing.assert_allclose(out, expected, rtol=1e-14)
        assert ws.case == "zero-tail"
        assert ws.size == 1
        assert ws.out_power == pytest.approx(8.0)
        assert np.max(np.abs(out)) ** 2 == pytest.approx(
            bounds.alpha * ws.out_power)

    def test_scaled_tail_example(self):
        z = np.array([3.0, 1.0, 1.0, 1.0], dtype=complex)
        bounds = ParPincBounds.par_only(2.0, 4)
        out, ws = proj_par_power(bounds, z, return_workspace=True)
        expected = np.array([(3.0 + SQ3) / 2.0, (1.0 + SQ3) / 2.0,
                             (1.0 + SQ3) / 2.0, (1.0 + SQ3) / 2.0])
        np.testing.assert_allclose(out, expected, rtol=1e-14)
        assert ws.case == "scaled-tail"
        assert ws.size == 1
        np.testing.assert_array_equal(ws.indices, [0])

    def test_zero_tail_with_cap(self):
        z = np.array([4.0, 0.0, 0.0, 0.0], dtype=complex)
        bounds = ParPincBounds(rho=2.0, xi=1.5, alpha=0.5, power_cap=6.0, dim=4)
        out, ws = proj_par_power(bounds, z, return_workspace=True)
        np.testing.assert_allclose(out, [SQ3, 1.0, 1.0, 1.0], rtol=1e-14)
        assert ws.out_power == pytest.approx(6.0)
        assert ws.v > 0.0

    def test_phases_preserved(self):
        rng = np.random.default_rng(6)
        mags = np.array([5.0, 1.0, 0.5, 0.25])
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=4))
        z = mags * phases
        bounds = ParPincBounds.par_only(1.5, 4)
        out = proj_par_power(bounds, z)
        nonzero = np.abs(out) > 0
        np.testing.assert_allclose(np.angle(out[nonzero]), np.angle(z[nonzero]),
                                   atol=1e-12)

    def test_feasible_input_unchanged(self):
        z = np.array([1.0, 1.0 + 0.1j, 0.9], dtype=complex)
        bounds = ParPincBounds.from_linear(1.5, 10.0, 3,
                                           ref_power=np.sum(np.abs(z) ** 2))
        out, ws = proj_par_power(bounds, z, return_workspace=True)
        np.testing.assert_array_equal(out, z)
        assert ws.case == "feasible"

    def test_zero_input_unchanged(self):
        bounds = ParPincBounds.par_only(2.0, 4)
        out, ws = proj_par_power(bounds, np.zeros(4, dtype=complex),
                                 return_workspace=True)
        np.testing.assert_array_equal(out, np.zeros(4))
        assert ws.case == "zero"

    def test_par_bound_of_dimension_only_caps_power(self):
        z = np.array([10.0, 1.0], dtype=complex)
        bounds = ParPincBounds.from_linear(2.0, 1.0, 2,
                                           ref_power=0.5 * np.sum(np.abs(z) ** 2))
        out, ws = proj_par_power(bounds, z, return_workspace=True)
        assert ws.case == "power-only"
        scale = math.sqrt(bounds.power_cap / np.sum(np.abs(z) ** 2))
        np.testing.assert_allclose(out, z * scale, rtol=1e-14)

    def test_dimension_mismatch_raises(self):
        bounds = ParPincBounds.par_only(2.0, 4)
        with pytest.raises(ValueError, match="length"):
            proj_par_power(bounds, np.ones(3, dtype=complex))

    def test_idempotence(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            z, bounds = random_instance(rng, n_max=16)
            once = proj_par_power(bounds, z)
            twice = proj_par_power(bounds, once)
            np.testing.assert_allclose(twice, once, rtol=0,
                                       atol=1e-12 * np.max(np.abs(once)))

    def test_par_only_homogeneity(self):
        rng = np.random.default_rng(8)
        z = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        base = proj_par_only(0.3, z)
        for c in (0.1, 2.0, 350.0):
            scaled = proj_par_only(0.3, c * z)
            np.testing.assert_allclose(
                scaled, c * base, rtol=1e-11,
                atol=1e-12 * c * float(np.max(np.abs(base))))

    def test_output_feasibility_sweep(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            z, bounds = random_instance(rng)
            out = proj_par_power(bounds, z)
            power = float(np.sum(np.abs(out) ** 2))
            assert np.max(np.abs(out)) ** 2 <= bounds.alpha * power * (1 + 1e-9)
            if math.isfinite(bounds.power_cap):
                assert power <= bounds.power_cap * (1 + 1e-9)


class TestKktCertificate:
    def certify(self, z, bounds, tol=1e-11):
        out, ws = proj_par_power(bounds, z, return_workspace=True)
        res = kkt_certificate(bounds, z, out, ws)
        scale = max(1.0, float(np.max(np.abs(z))))
        assert res.stationarity <= tol * scale
        assert res.clip_slackness <= tol * scale**2
        assert res.power_slackness <= tol * scale**2
        assert res.par_violation <= tol * scale**2
        assert res.power_violation <= tol * scale**2
        assert res.min_clip_multiplier >= -tol
        assert res.power_multiplier >= 0.0
        return out, ws

    def test_zero_tail_certificate(self):
        bounds = ParPincBounds.par_only(2.0, 4)
        self.certify(np.array([4.0, 0, 0, 0], dtype=complex), bounds)

    def test_zero_tail_capped_certificate(self):
        bounds = ParPincBounds(rho=2.0, xi=1.5, alpha=0.5, power_cap=6.0, dim=4)
        out, ws = self.certify(np.array([4.0, 0, 0, 0], dtype=complex), bounds)
        assert ws.v > 0.0

    def test_clip_multipliers_supported_on_clipped_set(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            z, bounds = random_instance(rng)
            out, ws = proj_par_power(bounds, z, return_workspace=True)
            if ws.size == 0:
                assert not ws.u.any()
                continue
            on = np.zeros(len(z), dtype=bool)
            on[ws.indices] = True
            assert np.all(ws.u[on] > 0.0)
            assert not ws.u[~on].any()

    def test_random_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            z, bounds = random_instance(rng)
            self.certify(z, bounds)


class TestCompositionIdentity:
    def test_matches_sequential_projections(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            z, bounds = random_instance(rng)
            joint = proj_par_power(bounds, z)
            sequential = proj_power_ball(bounds.power_cap,
                                         proj_par_only(bounds.alpha, z))
            np.testing.assert_allclose(
                joint, sequential, rtol=0,
                atol=1e-12 * max(1.0, float(np.max(np.abs(z)))))


class TestOracleEquivalence:
    def distance_matches(self, z, bounds):
        out = proj_par_power(bounds, z)
        d_impl = float(np.linalg.norm(z - out))
        d_ref = reference_distance(z, bounds.alpha, bounds.power_cap)
        tol = 1e-5 * max(d_ref, 1e-9 * float(np.linalg.norm(z)))
        assert abs(d_impl - d_ref) <= tol

    def test_worked_examples(self):
        bounds = ParPincBounds.par_only(2.0, 4)
        self.distance_matches(np.array([4.0, 0, 0, 0], dtype=complex), bounds)
        self.distance_matches(np.array([3.0, 1, 1, 1], dtype=complex), bounds)
        capped = ParPincBounds(rho=2.0, xi=1.5, alpha=0.5, power_cap=6.0, dim=4)
        self.distance_matches(np.array([4.0, 0, 0, 0], dtype=complex), capped)

    def test_random_desk_instances(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            n = int(rng.integers(3, 7))
            z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            alpha = float(rng.uniform(1.0 / n, 1.0))
            cap = float(rng.uniform(0.2, 1.5)) * float(np.sum(np.abs(z) ** 2))
            bounds = ParPincBounds(rho=alpha * n, xi=2.0, alpha=alpha,
                                   power_cap=cap, dim=n)
            self.distance_matches(z, bounds)
