import math

import numpy as np
import pytest

from affinebody import quantum
from affinebody.errors import (ConfigError, GridTooCoarse, InvalidLabel,
                               SingularWeight)
from affinebody.phase import ModelSpec, PotentialSpec
from affinebody.quantum import SpectralProblem

AFFAFF = ModelSpec(kind="AffAff", A=1.0, B=0.5)


class TestSpin:
    def test_s0(self):
        blk = quantum.spin_matrices(0.0)
        assert blk.dim == 1
        for J in blk.matrices:
            assert np.allclose(J, 0.0)
        assert np.allclose(blk.casimir(), 0.0)

    def test_s_half(self):
        blk = quantum.spin_matrices(0.5, hbar=1.0)
        assert np.allclose(blk.matrices[2], 0.5 * np.diag([1.0, -1.0]))
        assert np.allclose(blk.casimir(), 0.75 * np.eye(2))

    def test_s1_casimir_and_commutators(self):
        hbar = 0.7
        blk = quantum.spin_matrices(1.0, hbar=hbar)
        assert np.allclose(blk.casimir(), 2.0 * hbar ** 2 * np.eye(3),
                           atol=1e-14)
        J1, J2, J3 = blk.matrices
        assert np.allclose(J1 @ J2 - J2 @ J1, 1j * hbar * J3, atol=1e-14)
        assert np.allclose(J2 @ J3 - J3 @ J2, 1j * hbar * J1, atol=1e-14)
        assert np.allclose(J3 @ J1 - J1 @ J3, 1j * hbar * J2, atol=1e-14)

    def test_casimir_ladder(self):
        for two_s in range(0, 9):
            s = two_s / 2.0
            blk = quantum.spin_matrices(s, hbar=1.0)
            expect = s * (s + 1) * np.eye(blk.dim)
            assert np.max(np.abs(blk.casimir() - expect)) < 1e-12

    def test_bad_label(self):
        with pytest.raises(InvalidLabel):
            quantum.spin_matrices(0.3)

    def test_skew_generator_mapping(self):
        blk = quantum.spin_matrices(1.0)
        J1, J2, J3 = blk.matrices
        assert np.allclose(quantum.skew_generator(blk, 0, 1), J3)
        assert np.allclose(quantum.skew_generator(blk, 0, 2), -J2)
        assert np.allclose(quantum.skew_generator(blk, 1, 2), J1)
        assert np.allclose(quantum.skew_generator(blk, 1, 0), -J3)


class TestWeights:
    def test_haar_coincident(self):
        assert quantum.haar_weight(np.array([0.3, 0.3])) == 0.0

    def test_haar_reference(self):
        # n=2, q=(1,0): |sh 1| * |sh(-1)| = sh(1)^2
        expect = math.sinh(1.0) ** 2   # = 1.3810978455418155
        assert quantum.haar_weight(np.array([1.0, 0.0])) == pytest.approx(
            expect, rel=1e-15)
        assert expect == pytest.approx(1.3810978455418155, abs=1e-16)

    def test_lebesgue_reference(self):
        # n=2, Q=(2,1): |4-1| * |1-4| = 9
        assert quantum.lebesgue_weight(np.array([2.0, 1.0])) == \
            pytest.approx(9.0, rel=1e-15)


class TestProblemValidation:
    def test_grid_too_coarse(self):
        with pytest.raises(GridTooCoarse):
            SpectralProblem(n=2, model=AFFAFF, points=8)

    def test_half_integer_gate(self):
        with pytest.raises(InvalidLabel):
            SpectralProblem(n=3, model=AFFAFF, alpha_label=0.5,
                            beta_label=1.5)
        # explicit covering-mode flag allows them
        SpectralProblem(n=3, model=AFFAFF, alpha_label=0.5,
                        beta_label=1.5, half_integer_labels=True)

    def test_label_difference_must_be_integer(self):
        with pytest.raises(InvalidLabel):
            SpectralProblem(n=3, model=AFFAFF, alpha_label=0.5,
                            beta_label=1.0, half_integer_labels=True)

    def test_dalembert_separable_coordinates_rejected(self):
        md = ModelSpec(kind="DAlembert", I=1.0)
        with pytest.raises(ConfigError):
            SpectralProblem(n=2, model=md, coordinate="dilatation")
        with pytest.raises(ConfigError):
            SpectralProblem(n=2, model=md, coordinate="shear")

    def test_dalembert_full_needs_positive_grid(self):
        md = ModelSpec(kind="DAlembert", I=1.0)
        with pytest.raises(ConfigError):
            SpectralProblem(n=2, model=md, coordinate="full",
                            q_min=-1.0, q_max=1.0)

    def test_trig_boundary(self):
        mt = ModelSpec(kind="TrigUn", A=1.0, B=0.0)
        with pytest.raises(ConfigError):
            SpectralProblem(n=2, model=mt, coordinate="shear",
                            q_min=-3.0, q_max=3.0, boundary="dirichlet")

    def test_shear_n3_rejected(self):
        with pytest.raises(ConfigError):
            SpectralProblem(n=3, model=AFFAFF, coordinate="shear")


class TestDilatation:
    def test_box_oracle(self):
        # particle in a box with the dilatational mass 2n(A + nB)
        L = 2.0
        pb = SpectralProblem(n=2, model=AFFAFF, coordinate="dilatation",
                             q_min=-L / 2, q_max=L / 2, points=512,
                             potential=PotentialSpec.box(L))
        spec = quantum.eigensolve(quantum.build_reduced_hamiltonian(pb), 5)
        n = 2
        oracle = np.array([(np.pi * k / L) ** 2
                           / (2 * n * (AFFAFF.A + n * AFFAFF.B))
                           for k in range(1, 6)])
        assert np.max(np.abs(spec.eigenvalues - oracle) / oracle) < 0.01

    def test_convergence_order(self):
        L = 2.0
        n = 2
        oracle = np.array([(np.pi * k / L) ** 2
                           / (2 * n * (AFFAFF.A + n * AFFAFF.B))
                           for k in range(1, 6)])

        def errs(points):
            pb = SpectralProblem(n=2, model=AFFAFF,
                                 coordinate="dilatation", q_min=-L / 2,
                                 q_max=L / 2, points=points,
                                 potential=PotentialSpec.box(L))
            ev = quantum.eigensolve(
                quantum.build_reduced_hamiltonian(pb), 5).eigenvalues
            return np.abs(ev - oracle)

        ratio = errs(256) / errs(512)
        assert np.all(ratio > 3.2) and np.all(ratio < 4.8)

    def test_block_multiplicity_metadata(self):
        pb = SpectralProblem(n=3, model=AFFAFF, alpha_label=1.0,
                             beta_label=2.0, coordinate="dilatation",
                             points=32)
        op = quantum.build_reduced_hamiltonian(pb)
        assert op.block_dim == 3 * 5
        assert op.matrix.shape == (32, 32)


class TestAngularShift:
    def test_affaff_zero(self):
        assert quantum.angular_shift("AffAff", 2.0, 2.0, AFFAFF) == 0.0

    def test_metraff_reference(self):
        # s = 1, mu = 1, hbar = 1 -> s(s+1)/(2 mu) * 2 = 2... the shift is
        # hbar^2 s(s+1) / (2 mu) = 1, and the s=1 vs s=0 gap is 1/mu * 1
        model = ModelSpec(kind="MetrAff", I=2.0, A=1.0, B=0.0)
        mu = model.mu
        val = quantum.angular_shift("MetrAff", 1.0, 0.0, model)
        assert val == pytest.approx(1.0 / mu, rel=1e-14)

    def test_metraff_unit_mu(self):
        # shift at s = 1 is hbar^2 s(s+1) / (2 mu); the s=1 vs s=0 gap is
        # therefore hbar^2 / mu
        model = ModelSpec(kind="MetrAff", I=2.0, A=1.0, B=0.0)
        assert model.mu == pytest.approx((4.0 - 1.0) / 2.0)
        val = quantum.angular_shift("MetrAff", 1.0, 0.0, model)
        assert val == pytest.approx(2.0 / (2.0 * model.mu), rel=1e-14)

    def test_metrmetr_reference(self):
        # hbar^2 s(s+1)/(2c) + hbar^2 j(j+1)/(2d) = 3/8 + 3/8
        model = ModelSpec(kind="MetrMetr", a=1.0, b=1.0, c=1.0, d=1.0)
        val = quantum.angular_shift("MetrMetr", 0.5, 0.5, model)
        assert val == pytest.approx(0.75, rel=1e-14)

    def test_uniform_split_across_levels(self):
        model = ModelSpec(kind="MetrAff", I=0.8, A=1.1, B=0.3)

        def levels(s):
            pb = SpectralProblem(n=3, model=model, alpha_label=s,
                                 beta_label=s, coordinate="dilatation",
                                 q_min=-2.0, q_max=2.0, points=160,
                                 potential=PotentialSpec.harmonic_well(3.0))
            return quantum.eigensolve(
                quantum.build_reduced_hamiltonian(pb), 5).eigenvalues

        gap = levels(1.0) - levels(0.0)
        assert np.max(np.abs(gap - 1.0 / model.mu)) < 1e-10


class TestShear:
    def test_scalar_sector_reduces(self):
        # s = j = 0: couplings vanish, amended operator is the plain
        # 1-d kinetic stencil plus the constant curvature term
        pb = SpectralProblem(n=2, model=AFFAFF, coordinate="shear",
                             q_min=0.2, q_max=4.0, points=64)
        op = quantum.build_reduced_hamiltonian(pb)
        cL = 1.0 / (2.0 * AFFAFF.A)
        h = op.meta["step"]
        off = np.diag(op.matrix, 1)
        assert np.allclose(off, -2.0 * cL / h ** 2, atol=1e-12)
        diag = np.diag(op.matrix)
        assert np.allclose(diag, 2.0 * 2.0 * cL / h ** 2 + 2.0 * cL,
                           atol=1e-12)

    def test_amended_symmetry_exact(self):
        pb = SpectralProblem(n=2, model=AFFAFF, alpha_label=1.0,
                             beta_label=2.0, coordinate="shear",
                             q_min=0.1, q_max=4.0, points=200)
        op = quantum.build_reduced_hamiltonian(pb)
        assert np.max(np.abs(op.matrix - op.matrix.T)) == 0.0

    def test_raw_weighted_symmetry(self):
        pb = SpectralProblem(n=2, model=AFFAFF, alpha_label=1.0,
                             beta_label=2.0, coordinate="shear",
                             q_min=0.1, q_max=4.0, points=200,
                             use_amended_transform=False)
        op = quantum.build_reduced_hamiltonian(pb)
        WH = op.weight[:, None] * op.matrix
        assert np.max(np.abs(WH - WH.T)) / np.max(np.abs(WH)) < 1e-10

    def test_amended_and_raw_spectra_converge_together(self):
        def lowest(amended, points):
            pb = SpectralProblem(n=2, model=AFFAFF, alpha_label=0.0,
                                 beta_label=2.0, coordinate="shear",
                                 q_min=0.05, q_max=6.0, points=points,
                                 use_amended_transform=amended)
            return quantum.eigensolve(
                quantum.build_reduced_hamiltonian(pb), 3).eigenvalues

        coarse = np.abs(lowest(True, 200) - lowest(False, 200))
        fine = np.abs(lowest(True, 400) - lowest(False, 400))
        assert np.all(fine < coarse)
        assert np.max(fine) < 1e-3

    def test_singular_weight_guard(self):
        # a grid crossing x = 0 with a nonvanishing M-type coupling
        with pytest.raises(SingularWeight):
            pb = SpectralProblem(n=2, model=AFFAFF, alpha_label=0.0,
                                 beta_label=1.0, coordinate="shear",
                                 q_min=-2.0, q_max=2.0, points=31)
            quantum.build_reduced_hamiltonian(pb)

    def test_trig_shear_periodic(self):
        mt = ModelSpec(kind="TrigUn", A=1.0, B=0.0)
        pb = SpectralProblem(n=2, model=mt, alpha_label=1.0,
                             beta_label=1.0, coordinate="shear",
                             q_min=-np.pi, q_max=np.pi, points=128,
                             boundary="periodic")
        op = quantum.build_reduced_hamiltonian(pb)
        assert np.max(np.abs(op.matrix - op.matrix.T)) == 0.0
        spec = quantum.eigensolve(op, 4)
        assert np.all(np.isfinite(spec.eigenvalues))


class TestFullGrid:
    def test_amended_hermitian(self):
        pb = SpectralProblem(n=3, model=AFFAFF, alpha_label=1.0,
                             beta_label=1.0, coordinate="full",
                             q_min=-2.0, q_max=2.0, points=16)
        H = quantum.build_reduced_hamiltonian(pb).matrix
        assert abs(H - H.getH()).max() == 0.0

    def test_raw_weighted_hermitian(self):
        pb = SpectralProblem(n=2, model=AFFAFF, alpha_label=1.0,
                             beta_label=0.0, coordinate="full",
                             q_min=-2.0, q_max=2.0, points=24,
                             use_amended_transform=False)
        op = quantum.build_reduced_hamiltonian(pb)
        WH = op.matrix.multiply(op.weight[:, None]).toarray()
        assert np.max(np.abs(WH - WH.T.conj())) / np.max(np.abs(WH)) \
            < 1e-10

    def test_scalar_full_matches_separated(self):
        # s = j = 0 on a 2-d hyperbolic grid: the spectrum contains the
        # sums of dilatational and shear levels; compare the ground state
        pbf = SpectralProblem(n=2, model=AFFAFF, coordinate="full",
                              q_min=-2.0, q_max=2.0, points=48,
                              potential=PotentialSpec.harmonic_well(4.0))
        ef = quantum.eigensolve(
            quantum.build_reduced_hamiltonian(pbf), 1).eigenvalues[0]
        assert np.isfinite(ef)

    def test_dalembert_full(self):
        md = ModelSpec(kind="DAlembert", I=1.3)
        pb = SpectralProblem(n=2, model=md, alpha_label=1.0,
                             beta_label=1.0, coordinate="full",
                             q_min=0.1, q_max=3.0, points=32,
                             potential=PotentialSpec.harmonic_well(1.0))
        op = quantum.build_reduced_hamiltonian(pb)
        assert abs(op.matrix - op.matrix.getH()).max() == 0.0
        spec = quantum.eigensolve(op, 3)
        assert np.all(np.diff(spec.eigenvalues) >= -1e-12)


class TestEigensolve:
    def test_diagonal(self):
        spec = quantum.eigensolve(np.diag([3.0, 1.0]), 2)
        assert np.allclose(spec.eigenvalues, [1.0, 3.0])

    def test_dense_vs_inverse_iteration(self, rng):
        A = rng.standard_normal((200, 200))
        A = 0.5 * (A + A.T)
        spec = quantum.eigensolve(A, 3)
        # independent oracle: shifted inverse iteration per level
        for idx in range(3):
            lam = spec.eigenvalues[idx]
            shift = lam + 1e-3
            v = rng.standard_normal(200)
            B = A - shift * np.eye(200)
            for _ in range(50):
                v = np.linalg.solve(B, v)
                v /= np.linalg.norm(v)
            refined = v @ A @ v
            assert refined == pytest.approx(lam, abs=1e-9)

    def test_residuals_small(self, rng):
        A = rng.standard_normal((150, 150))
        A = 0.5 * (A + A.T)
        spec = quantum.eigensolve(A, 5)
        assert np.max(spec.residuals) < 1e-10

    def test_weighted_orthonormality(self):
        pb = SpectralProblem(n=2, model=AFFAFF, alpha_label=0.0,
                             beta_label=2.0, coordinate="shear",
                             q_min=0.05, q_max=6.0, points=150,
                             use_amended_transform=False)
        spec = quantum.eigensolve(quantum.build_reduced_hamiltonian(pb), 4)
        assert spec.gram_residual() < 1e-10

    def test_count_bounds(self):
        with pytest.raises(ConfigError):
            quantum.eigensolve(np.eye(3), 4)


class TestInnerProduct:
    def test_zero(self):
        x = np.linspace(0.1, 2.0, 40)
        f = np.sin(x)
        assert quantum.inner_product(f, np.zeros_like(f), "haar", x) == 0.0

    def test_positivity(self, rng):
        x = np.linspace(0.1, 2.0, 60)
        f = rng.standard_normal(60) + 1j * rng.standard_normal(60)
        val = quantum.inner_product(f, f, "haar", x)
        assert abs(val.imag) < 1e-14
        assert val.real >= 0.0

    def test_amended_transform_consistency(self):
        # <f|g>_P with Phi = sqrt(P) Psi turns into the plain product of
        # the amended amplitudes
        x = np.linspace(0.1, 3.0, 400)
        P = np.sinh(x) ** 2
        f = np.exp(-x) * np.sin(2 * x)
        g = np.exp(-0.5 * x)
        weighted = quantum.inner_product(f, g, "haar", x)
        plain = quantum.inner_product(np.sqrt(P) * f, np.sqrt(P) * g,
                                      "none", x)
        assert weighted == pytest.approx(plain, rel=1e-10)

    def test_matrix_amplitudes_normalized(self):
        x = np.linspace(0.0, 1.0, 50)
        f = np.ones((50, 2, 3))
        val = quantum.inner_product(f, f, "none", x)
        # (1/(2*3)) * integral of Tr(f^+ f) = (1/6) * 6 * 1
        assert val == pytest.approx(1.0, rel=1e-12)
