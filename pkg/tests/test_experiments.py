import json

import numpy as np
import pytest

from photonode import chip, experiments
from photonode.states import target_state

DELAYS = np.linspace(-8.0, 8.0, 33)


class TestHom:
    def test_perfect_dip(self):
        curve = experiments.run_hom_scan(DELAYS, gamma0=1.0)
        assert curve.fitted_visibility == pytest.approx(1.0, abs=1e-12)
        assert curve.coincidence_rates[len(DELAYS) // 2] <= 1e-12

    def test_partial_overlap(self):
        curve = experiments.run_hom_scan(DELAYS, gamma0=np.sqrt(0.995))
        assert curve.fitted_visibility == pytest.approx(0.995, abs=1e-9)

    def test_distinguishable_flat(self):
        curve = experiments.run_hom_scan(DELAYS, gamma0=0.0)
        np.testing.assert_allclose(curve.coincidence_rates, 0.5, atol=1e-14)
        assert curve.fitted_visibility == 0.0

    def test_symmetric_in_delay(self):
        rates = experiments.run_hom_scan(DELAYS, gamma0=0.9).coincidence_rates
        np.testing.assert_allclose(rates, rates[::-1], atol=1e-15)

    def test_width_follows_coherence_time(self):
        narrow = experiments.run_hom_scan(DELAYS, coherence_time=1.0).coincidence_rates
        wide = experiments.run_hom_scan(DELAYS, coherence_time=3.0).coincidence_rates
        assert np.all(wide <= narrow + 1e-15)

    def test_sampled_fit(self):
        curve = experiments.run_hom_scan(DELAYS, gamma0=np.sqrt(0.995), shots=10**7, seed=3)
        assert curve.fitted_visibility == pytest.approx(0.995, abs=5e-3)
        assert curve.coherence_time == pytest.approx(experiments.default_coherence_time_ps(), rel=0.05)

    def test_default_coherence_time(self):
        assert experiments.default_coherence_time_ps() == pytest.approx(2.0023, abs=1e-4)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(delays=[0, 1, 2]), dict(delays=DELAYS, gamma0=1.2), dict(delays=DELAYS, coherence_time=0.0),
         dict(delays=DELAYS, shots=1000)],
    )
    def test_errors(self, kwargs):
        with pytest.raises(ValueError):
            experiments.run_hom_scan(**kwargs)

    def test_csv(self, tmp_path):
        experiments.run_hom_scan(DELAYS).to_csv(tmp_path / "h.csv")
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert lines[0] == "delay_ps,rate" and len(lines) == 34


class TestStatePrep:
    def test_exact_noiseless(self):
        report = experiments.run_state_prep_experiment("Cluster", exact_frequency=True)
        assert report.fidelity >= 1 - 1e-6
        assert report.success_probability == pytest.approx(0.5)
        assert report.extras["reported_fidelity"] == 0.900

    def test_deterministic_with_seed(self):
        a = experiments.run_state_prep_experiment("PhiMinus", shots=10_000, resamples=10, seed=5)
        b = experiments.run_state_prep_experiment("PhiMinus", shots=10_000, resamples=10, seed=5)
        assert a.to_json() == b.to_json()
        assert a.sigma_fidelity > 0

    def test_seed_required(self):
        with pytest.raises(ValueError, match="seed"):
            experiments.run_state_prep_experiment("HV", shots=100)

    def test_basis_preset_rejected(self):
        with pytest.raises(KeyError):
            experiments.run_state_prep_experiment("XX", exact_frequency=True)

    def test_phase_noise_needs_seed_and_lowers_fidelity(self):
        noise = chip.NoiseParams(phase_error_sigma=0.1)
        with pytest.raises(ValueError):
            experiments.run_state_prep_experiment("PsiPlus", noise=noise, exact_frequency=True)
        report = experiments.run_state_prep_experiment("PsiPlus", noise=noise, exact_frequency=True, seed=1)
        assert report.fidelity < 1 - 1e-6

    def test_noise_ordering(self):
        fids = [
            experiments.run_state_prep_experiment(
                "PhiPlus", noise=chip.NoiseParams(crosstalk_epsilon=e, overlap_gamma=g), exact_frequency=True
            ).fidelity
            for e, g in [(0.0, 1.0), (0.01, 1.0), (0.01, 0.99), (0.05, 0.95)]
        ]
        assert fids == sorted(fids, reverse=True)

    def test_json_is_plain(self):
        report = experiments.run_state_prep_experiment("HV", exact_frequency=True)
        data = json.loads(report.to_json())
        assert data["label"] == "HV"
        assert len(data["state"]["real"]) == 4


class TestOnchip:
    def test_noiseless_relative_fidelity(self):
        report = experiments.run_onchip_tomography(exact_frequency=True)
        assert report.fidelity >= 1 - 1e-6
        assert report.extras["relative_fidelity"] == pytest.approx(1.0, abs=1e-6)

    def test_crosstalk_reduces_relative_fidelity(self):
        noise = chip.NoiseParams(crosstalk_epsilon=0.01)
        report = experiments.run_onchip_tomography(receiver_noise=noise, exact_frequency=True)
        assert 0.97 < report.extras["relative_fidelity"] < 0.99

    @pytest.mark.parametrize("name", ["HV", "PM", "PhiMinus", "Cluster"])
    def test_other_inputs(self, name):
        report = experiments.run_onchip_tomography(target_state(name), exact_frequency=True)
        assert report.fidelity >= 1 - 1e-6

    def test_receiver_table_is_normalized(self, flags):
        table = experiments.receive_probabilities(target_state("PsiPlus"), flags=flags)
        np.testing.assert_allclose(table.sum(axis=1), 1.0, atol=1e-12)


class TestChipToChip:
    def test_noiseless_cascade(self):
        report = experiments.run_chip_to_chip(exact_frequency=True)
        assert report.fidelity >= 0.999

    def test_noisy_cascade_below_single_chip(self):
        noise = chip.NoiseParams(crosstalk_epsilon=0.01)
        cascade = experiments.run_chip_to_chip(
            "Cluster", sender_noise=noise, receiver_noise=noise, exact_frequency=True
        ).fidelity
        single = experiments.run_state_prep_experiment("Cluster", noise=noise, exact_frequency=True).fidelity
        assert cascade < single < 1.0

    def test_channel_unitary_is_seen(self):
        z = np.diag([1.0, -1.0])
        report = experiments.run_chip_to_chip("PhiPlus", channel_unitaries=(z, np.eye(2)), exact_frequency=True)
        assert report.fidelity < 1e-6

    def test_compensated_channel_cancels(self):
        # the same phase on the H/V arms of both qubits maps PhiPlus to itself up to global phase
        rot = np.diag([1.0, 1j])
        rot_inv = rot.conj()
        report = experiments.run_chip_to_chip("PhiPlus", channel_unitaries=(rot, rot_inv), exact_frequency=True)
        assert report.fidelity >= 1 - 1e-6

    def test_bad_channel(self):
        with pytest.raises(ValueError):
            experiments.run_chip_to_chip(channel_unitaries=(np.ones((2, 2)), np.eye(2)), exact_frequency=True)
