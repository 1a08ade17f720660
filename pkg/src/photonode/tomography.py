"""Two-qubit Pauli tomography: projectors, count simulation, MLE and metrics."""

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BootstrapError, MLEConvergenceError
from .states import PAULI_EIGENSTATES

SETTINGS = tuple(itertools.product("XYZ", repeat=2))
OUTCOMES = ("pp", "pm", "mp", "mm")
CSV_HEADER = ("basis_q1", "basis_q2", "outcome", "counts")

DM_TOL = 1e-10
# eigenvalues below this are treated as exact zeros inside matrix square roots
SQRT_EIG_CUTOFF = 1e-13


def validate_density_matrix(rho, tol=DM_TOL):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def projectors(setting):
    """Rank-1 projectors for outcomes ``++, +-, -+, --`` of a basis pair."""
    b1, b2 = (str(b).upper() for b in setting)
    out = np.empty((4, 4, 4), dtype=complex)
    for n, (s1, s2) in enumerate(itertools.product((0, 1), repeat=2)):
        ket = np.kron(PAULI_EIGENSTATES[b1][s1], PAULI_EIGENSTATES[b2][s2])
        out[n] = np.outer(ket, ket.conj())
    return out


def all_projectors():
    """The 36 projectors stacked in ``SETTINGS`` x ``OUTCOMES`` order."""
    return np.concatenate([projectors(s) for s in SETTINGS])


def born_probabilities(rho, setting):
    rho = validate_density_matrix(rho)
    return np.einsum("ab,iba->i", rho, projectors(setting)).real


@dataclass
class CountsDataset:
    """Coincidence counts, shape (9, 4), rows in ``SETTINGS`` order.

    Counts are integers for sampled data; exact-frequency datasets carry the
    float expectations ``shots * p`` instead.
    """

    counts: np.ndarray
    shots_per_setting: float = 0.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (len(SETTINGS), len(OUTCOMES)):
            raise ValueError(f"counts must have shape (9, 4), got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    def frequencies(self):
        flat = self.counts.astype(float).ravel()
        return flat / flat.sum()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for (b1, b2), row in zip(SETTINGS, self.counts):
                for outcome, value in zip(OUTCOMES, row):
                    writer.writerow((b1, b2, outcome, _format_count(value)))

    @classmethod
    def from_csv(cls, path):
        counts = np.full((len(SETTINGS), len(OUTCOMES)), np.nan)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if tuple(h.strip() for h in header or ()) != CSV_HEADER:
                raise ValueError(f"counts CSV header must be {','.join(CSV_HEADER)}")
            rows = [r for r in reader if r]
        if len(rows) != 36:
            raise ValueError(f"counts CSV must have exactly 36 data rows, got {len(rows)}")
        for b1, b2, outcome, value in rows:
            i = SETTINGS.index((b1.strip().upper(), b2.strip().upper()))
            j = OUTCOMES.index(outcome.strip())
            if not np.isnan(counts[i, j]):
                raise ValueError(f"duplicate row {b1},{b2},{outcome}")
            counts[i, j] = float(value)
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        shots = float(counts.sum(axis=1).mean())
        return cls(counts, shots)


def _format_count(value):
    if float(value).is_integer():
        return str(int(value))
    return "%.17g" % value


def sample_counts(probabilities, shots_per_setting, seed=None, exact_frequency=False):
    """Poisson counts with means ``shots * p`` for a (9, 4) probability table."""
    means = shots_per_setting * np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    if exact_frequency:
        return CountsDataset(means, shots_per_setting)
    rng = np.random.default_rng(seed)
    return CountsDataset(rng.poisson(means).astype(np.int64), shots_per_setting)


def ideal_probabilities(rho):
    return np.array([born_probabilities(rho, s) for s in SETTINGS])


def simulate_counts(rho, shots_per_setting, seed=None, exact_frequency=False):
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be >= 1")
    return sample_counts(ideal_probabilities(rho), shots_per_setting, seed, exact_frequency)


def log_likelihood(rho, data):
    p = np.einsum("ab,iba->i", rho, all_projectors()).real
    n = data.counts.astype(float).ravel()
    mask = n > 0
    return float(np.sum(n[mask] * np.log(np.maximum(p[mask], _kernels.PROB_FLOOR))))


def mle_reconstruct(data, tol=1e-10, max_iter=100_000, full_output=False):
    """Maximum-likelihood state via the diluted R rho R iteration.

    Starts at I/4 with dilution 0.5, halving it whenever a step would lower
    the likelihood. With ``full_output`` also returns a dict holding the
    iteration count, final step size and the per-step log-likelihood of the
    normalized frequencies.
    """
    setting_totals = data.counts.sum(axis=1)
    if np.any(setting_totals <= 0):
        empty = [SETTINGS[i] for i in np.flatnonzero(setting_totals <= 0)]
        raise ValueError(f"settings without counts: {empty}")
    rho0 = np.eye(4, dtype=complex) / 4.0
    rho, iterations, residual, history = _kernels.mle_fixed_point(
        all_projectors(), data.frequencies(), rho0, tol, int(max_iter), 0.5
    )
    if iterations >= max_iter and residual >= tol:
        raise MLEConvergenceError(rho, residual, iterations)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    if full_output:
        return rho, {"iterations": int(iterations), "residual": float(residual), "loglik": np.asarray(history)}
    return rho


def _psd_sqrt(rho):
    w, v = np.linalg.eigh(rho)
    w = np.where(w > SQRT_EIG_CUTOFF * max(w.max(), 1.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def uhlmann_fidelity(rho, sigma):
    """``(tr sqrt(sqrt(sigma) rho sqrt(sigma)))**2`` as the squared nuclear norm of sqrt(sigma) sqrt(rho)."""
    s = np.linalg.svd(_psd_sqrt(sigma) @ _psd_sqrt(rho), compute_uv=False)
    return float(min(max(np.sum(s) ** 2, 0.0), 1.0))


def fidelity(rho_exp, rho_target):
    """Uhlmann fidelity; uses ``<psi|rho|psi>`` when the target is pure."""
    rho_exp = validate_density_matrix(rho_exp)
    rho_target = validate_density_matrix(rho_target)
    if purity(rho_target) > 1.0 - 1e-10:
        w, v = np.linalg.eigh(rho_target)
        psi = v[:, -1]
        return float(min(max(np.real(psi.conj() @ rho_exp @ psi), 0.0), 1.0))
    return uhlmann_fidelity(rho_exp, rho_target)


def purity(rho):
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho, rho)))


def trace_distance(rho, sigma):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma)))))


def relative_fidelity(f_on, f_off):
    if f_off <= 0:
        raise ValueError(f"reference fidelity must be positive, got {f_off}")
    return f_on / f_off


@dataclass(frozen=True)
class BootstrapResult:
    sigma_fidelity: float
    sigma_purity: float
    used: int
    skipped: int


def bootstrap_errors(data, target, resamples, seed, max_skip_fraction=0.1):
    """Poisson parametric bootstrap of fidelity and purity.

    Each resample redraws every count as Poisson(observed) with its own RNG
    stream spawned from ``seed``. Resamples whose reconstruction fails are
    skipped; more than ``max_skip_fraction`` skips raises BootstrapError.
    """
    if resamples < 10:
        raise ValueError("resamples must be >= 10")
    observed = data.counts.astype(float)
    streams = np.random.SeedSequence(seed).spawn(resamples)
    fids, purs = [], []
    skipped = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        resampled = CountsDataset(rng.poisson(observed), data.shots_per_setting)
        try:
            rho = mle_reconstruct(resampled)
        except (MLEConvergenceError, ValueError):
            skipped += 1
            continue
        fids.append(fidelity(rho, target))
        purs.append(purity(rho))
    if skipped > max_skip_fraction * resamples:
        raise BootstrapError(f"{skipped} of {resamples} bootstrap resamples failed")
    return BootstrapResult(
        float(np.std(fids, ddof=1)), float(np.std(purs, ddof=1)), len(fids), skipped
    )
