import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonode import tomography as tomo
from photonode.errors import BootstrapError, MLEConvergenceError
from photonode.states import MAXIMALLY_MIXED, TARGET_KETS, ket_to_dm, target_state


def random_state(rng, rank=4):
    a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_pure(rng):
    return random_state(rng, rank=1)


class TestProjectors:
    def test_count_and_order(self):
        assert len(tomo.SETTINGS) == 9
        assert tomo.SETTINGS[0] == ("X", "X") and tomo.SETTINGS[-1] == ("Z", "Z")
        assert tomo.all_projectors().shape == (36, 4, 4)

    @pytest.mark.parametrize("setting", tomo.SETTINGS)
    def test_completeness(self, setting):
        total = tomo.projectors(setting).sum(axis=0)
        assert np.max(np.abs(total - np.eye(4))) < 1e-14

    def test_rank_one(self):
        for p in tomo.all_projectors():
            np.testing.assert_allclose(p @ p, p, atol=1e-14)
            assert np.trace(p).real == pytest.approx(1.0)

    def test_zz_plus_plus_is_00(self):
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        np.testing.assert_allclose(tomo.projectors("ZZ")[0], expected, atol=1e-15)

    def test_informationally_complete(self):
        flat = tomo.all_projectors().reshape(36, 16)
        assert np.linalg.matrix_rank(flat) == 16


class TestBorn:
    def test_phi_plus_xx(self):
        np.testing.assert_allclose(tomo.born_probabilities(target_state("PhiPlus"), "XX"), [0.5, 0, 0, 0.5], atol=1e-15)

    def test_psi_minus_anticorrelated(self):
        for b in ("XX", "YY", "ZZ"):
            np.testing.assert_allclose(tomo.born_probabilities(target_state("PsiMinus"), b), [0, 0.5, 0.5, 0], atol=1e-15)

    def test_maximally_mixed_uniform(self):
        table = tomo.ideal_probabilities(MAXIMALLY_MIXED)
        np.testing.assert_allclose(table, 0.25, atol=1e-15)

    def test_invalid_state(self):
        with pytest.raises(ValueError, match="trace"):
            tomo.born_probabilities(2 * MAXIMALLY_MIXED, "XX")
        with pytest.raises(ValueError, match="Hermitian"):
            tomo.born_probabilities(MAXIMALLY_MIXED + 0.1j * np.triu(np.ones((4, 4)), 1), "XX")
        with pytest.raises(ValueError, match="positive"):
            tomo.born_probabilities(np.diag([1.5, -0.5, 0, 0]), "XX")
        with pytest.raises(ValueError, match="shape"):
            tomo.born_probabilities(np.eye(2) / 2, "XX")


class TestCounts:
    def test_exact_frequency(self):
        data = tomo.simulate_counts(target_state("HV"), 1000, exact_frequency=True)
        np.testing.assert_allclose(data.counts[8], [0, 1000, 0, 0])
        assert data.counts.sum() == pytest.approx(9000)

    def test_seeded_reproducible(self):
        a = tomo.simulate_counts(target_state("PM"), 5000, seed=3)
        b = tomo.simulate_counts(target_state("PM"), 5000, seed=3)
        np.testing.assert_array_equal(a.counts, b.counts)
        assert a.counts.dtype == np.int64

    def test_poisson_mean(self):
        data = tomo.simulate_counts(MAXIMALLY_MIXED, 400_000, seed=1)
        assert np.abs(data.counts / 100_000 - 1).max() < 0.02

    def test_bad_shots(self):
        with pytest.raises(ValueError):
            tomo.simulate_counts(MAXIMALLY_MIXED, 0)

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            tomo.CountsDataset(np.ones((8, 4)))
        with pytest.raises(ValueError):
            tomo.CountsDataset(-np.ones((9, 4)))


class TestCsv:
    def test_format(self, tmp_path):
        data = tomo.simulate_counts(target_state("PhiPlus"), 100, seed=2)
        path = tmp_path / "counts.csv"
        data.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "basis_q1,basis_q2,outcome,counts"
        assert len(lines) == 37
        assert lines[1].startswith("X,X,pp,")

    def test_round_trip_exact(self, tmp_path):
        for data in (
            tomo.simulate_counts(target_state("Cluster"), 1234, seed=9),
            tomo.simulate_counts(random_state(np.random.default_rng(0)), 1000, exact_frequency=True),
        ):
            data.to_csv(tmp_path / "c.csv")
            back = tomo.CountsDataset.from_csv(tmp_path / "c.csv")
            np.testing.assert_array_equal(back.counts, data.counts)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("a,b,c,d\n")
        with pytest.raises(ValueError, match="header"):
            tomo.CountsDataset.from_csv(path)

    def test_rejects_short_file(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("basis_q1,basis_q2,outcome,counts\nX,X,pp,3\n")
        with pytest.raises(ValueError, match="36"):
            tomo.CountsDataset.from_csv(path)

    def test_rejects_duplicates(self, tmp_path):
        rows = ["basis_q1,basis_q2,outcome,counts"] + ["X,X,pp,1"] * 36
        path = tmp_path / "c.csv"
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(ValueError, match="duplicate"):
            tomo.CountsDataset.from_csv(path)


class TestMle:
    @pytest.mark.parametrize("name", list(TARGET_KETS))
    def test_exact_frequency_recovers_target(self, name):
        target = target_state(name)
        rho = tomo.mle_reconstruct(tomo.simulate_counts(target, 1e6, exact_frequency=True))
        assert tomo.fidelity(rho, target) >= 1 - 1e-6

    def test_full_rank_recovery(self, rng):
        rho_true = random_state(rng)
        rho = tomo.mle_reconstruct(tomo.simulate_counts(rho_true, 1e6, exact_frequency=True), tol=1e-13)
        assert tomo.trace_distance(rho, rho_true) < 1e-4

    def test_likelihood_non_decreasing(self, rng):
        data = tomo.simulate_counts(random_pure(rng), 2000, seed=5)
        _, info = tomo.mle_reconstruct(data, full_output=True)
        assert np.all(np.diff(info["loglik"]) >= -1e-12)
        assert info["residual"] < 1e-10

    def test_beats_linear_inversion_state(self, rng):
        data = tomo.simulate_counts(target_state("PsiPlus"), 300, seed=8)
        rho = tomo.mle_reconstruct(data)
        assert tomo.log_likelihood(rho, data) >= tomo.log_likelihood(MAXIMALLY_MIXED, data)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31), shots=st.sampled_from([50, 500, 5000]))
    def test_output_is_physical(self, seed, shots):
        rng = np.random.default_rng(seed)
        data = tomo.simulate_counts(random_state(rng, rank=int(rng.integers(1, 5))), shots, seed=seed)
        rho = tomo.mle_reconstruct(data)
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(rho).min() > -1e-12

    def test_non_convergence(self):
        data = tomo.simulate_counts(target_state("PhiPlus"), 1000, seed=1)
        with pytest.raises(MLEConvergenceError) as info:
            tomo.mle_reconstruct(data, max_iter=2)
        assert info.value.iterations == 2
        assert info.value.last_iterate.shape == (4, 4)

    def test_empty_setting(self):
        counts = np.ones((9, 4))
        counts[3] = 0
        with pytest.raises(ValueError, match="without counts"):
            tomo.mle_reconstruct(tomo.CountsDataset(counts))


class TestMetrics:
    def test_identities(self):
        phi, psi = target_state("PhiPlus"), target_state("PsiPlus")
        assert tomo.fidelity(phi, phi) == pytest.approx(1.0, abs=1e-12)
        assert tomo.fidelity(phi, psi) == pytest.approx(0.0, abs=1e-12)
        assert tomo.fidelity(MAXIMALLY_MIXED, phi) == pytest.approx(0.25, abs=1e-12)
        assert tomo.purity(MAXIMALLY_MIXED) == pytest.approx(0.25)

    def test_shortcut_matches_uhlmann(self, rng):
        for _ in range(100):
            rho, pure = random_state(rng), random_pure(rng)
            assert abs(tomo.fidelity(rho, pure) - tomo.uhlmann_fidelity(rho, pure)) < 1e-10

    def test_uhlmann_symmetric(self, rng):
        a, b = random_state(rng), random_state(rng)
        assert tomo.uhlmann_fidelity(a, b) == pytest.approx(tomo.uhlmann_fidelity(b, a), abs=1e-12)

    def test_commuting_states(self):
        p, q = np.array([0.1, 0.2, 0.3, 0.4]), np.array([0.4, 0.3, 0.2, 0.1])
        expected = np.sum(np.sqrt(p * q)) ** 2
        assert tomo.fidelity(np.diag(p), np.diag(q)) == pytest.approx(expected, abs=1e-12)

    def test_fuchs_van_de_graaf(self, rng):
        for _ in range(20):
            a, b = random_state(rng), random_state(rng)
            f, d = tomo.uhlmann_fidelity(a, b), tomo.trace_distance(a, b)
            assert 1 - np.sqrt(f) <= d + 1e-12 <= np.sqrt(1 - f) + 2e-12

    def test_purity_range(self, rng):
        assert tomo.purity(target_state("Cluster")) == pytest.approx(1.0)
        assert 0.25 <= tomo.purity(random_state(rng)) <= 1.0

    def test_relative_fidelity(self):
        assert tomo.relative_fidelity(0.973, 0.99109) == pytest.approx(0.98175, abs=1e-5)
        with pytest.raises(ValueError):
            tomo.relative_fidelity(0.9, 0.0)


class TestBootstrap:
    def test_reproducible(self):
        data = tomo.simulate_counts(0.9 * target_state("PhiPlus") + 0.1 * MAXIMALLY_MIXED, 2000, seed=4)
        a = tomo.bootstrap_errors(data, target_state("PhiPlus"), 20, seed=6)
        b = tomo.bootstrap_errors(data, target_state("PhiPlus"), 20, seed=6)
        assert a == b
        assert a.used == 20 and a.skipped == 0
        assert 0 < a.sigma_fidelity < 0.05

    def test_seed_changes_result(self):
        data = tomo.simulate_counts(0.9 * target_state("PhiPlus") + 0.1 * MAXIMALLY_MIXED, 2000, seed=4)
        a = tomo.bootstrap_errors(data, target_state("PhiPlus"), 20, seed=6)
        b = tomo.bootstrap_errors(data, target_state("PhiPlus"), 20, seed=7)
        assert a.sigma_fidelity != b.sigma_fidelity

    def test_too_few_resamples(self):
        data = tomo.simulate_counts(MAXIMALLY_MIXED, 100, seed=1)
        with pytest.raises(ValueError):
            tomo.bootstrap_errors(data, MAXIMALLY_MIXED, 5, seed=1)

    def test_failure_budget(self):
        counts = np.zeros((9, 4))
        counts[:, 0] = 0.2
        data = tomo.CountsDataset(counts)
        with pytest.raises(BootstrapError):
            tomo.bootstrap_errors(data, MAXIMALLY_MIXED, 10, seed=1)


def test_ket_to_dm_normalizes():
    rho = ket_to_dm(np.array([1, 1, 0, 0]))
    assert np.trace(rho).real == pytest.approx(1.0)
