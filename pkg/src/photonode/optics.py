"""Mode-level linear optics and exact two-photon evolution.

Unitaries are plain ``complex128`` arrays acting on mode amplitudes
(``a_j^dagger -> sum_m U[m, j] a_m^dagger``). Two-photon states are stored on
unordered occupation patterns ``(j, k)`` with ``j <= k``; the bunched pattern
``(j, j)`` holds the coefficient of ``(a_j^dagger)^2 |0> / sqrt(2)`` so the
state norm is the plain Euclidean norm.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegeneratePostselectionError

UNITARY_TOL = 1e-12
POSTSELECT_FLOOR = 1e-12


def is_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def beamsplitter(transmissivity=0.5):
    """Symmetric coupler ``[[t, i r], [i r, t]]`` with power transmission ``transmissivity``."""
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    return np.array([[t, 1j * r], [1j * r, t]], dtype=np.complex128)


def embed_two_mode(u, modes, dim):
    """Place a 2x2 unitary on ``modes`` of a ``dim``-mode identity."""
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2) or not is_unitary(u):
        raise ValueError("embed_two_mode expects a 2x2 unitary")
    a, b = (int(m) for m in modes)
    if a == b:
        raise ValueError(f"duplicate mode index {a}")
    for m in (a, b):
        if not 0 <= m < dim:
            raise ValueError(f"mode index {m} out of range for dim {dim}")
    out = np.eye(dim, dtype=np.complex128)
    out[np.ix_([a, b], [a, b])] = u
    return out


def compose(unitaries):
    """Multiply unitaries in circuit order; the first element acts first."""
    unitaries = list(unitaries)
    if not unitaries:
        raise ValueError("compose needs at least one unitary")
    dim = unitaries[0].shape[0]
    total = np.eye(dim, dtype=np.complex128)
    for u in unitaries:
        if u.shape != (dim, dim):
            raise ValueError(f"dimension mismatch: {u.shape} vs ({dim}, {dim})")
        total = u @ total
    return total


def dilate(block):
    """Embed a subunitary ``block`` into a unitary of twice its size.

    The extra modes are loss modes; photons routed there never reach the
    signal detectors.
    """
    a = np.asarray(block, dtype=np.complex128)
    n = a.shape[0]
    if np.linalg.svd(a, compute_uv=False).max() > 1.0 + 1e-12:
        raise ValueError("block is not subunitary")

    def psd_sqrt(m):
        w, v = np.linalg.eigh(m)
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T

    eye = np.eye(n)
    top = np.hstack([a, psd_sqrt(eye - a @ a.conj().T)])
    bottom = np.hstack([psd_sqrt(eye - a.conj().T @ a), -a.conj().T])
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class TwoPhotonState:
    """Two photons on ``dim`` modes.

    ``amplitudes`` is the Fock-pattern vector of the fully indistinguishable
    component. ``joint`` holds the amplitude of labeled (distinguishable)
    photons, ``joint[m, n]`` for photon A in mode m and photon B in mode n; it
    supplies the classical contribution weighted by ``1 - |overlap|^2``.
    """

    dim: int
    amplitudes: np.ndarray
    joint: np.ndarray
    overlap: complex = 1.0
    patterns: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if abs(self.overlap) > 1.0 + 1e-12:
            raise ValueError("overlap must satisfy |gamma| <= 1")
        object.__setattr__(self, "patterns", _kernels.pattern_table(self.dim))

    @classmethod
    def from_modes(cls, j, k, dim, overlap=1.0):
        """One photon in mode ``j`` and one in mode ``k``."""
        j, k = int(j), int(k)
        table = _kernels.pattern_table(dim)
        amps = np.zeros(len(table), dtype=np.complex128)
        amps[pattern_index(min(j, k), max(j, k), dim)] = 1.0
        joint = np.zeros((dim, dim), dtype=np.complex128)
        joint[j, k] = 1.0
        return cls(dim, amps, joint, complex(overlap))

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, j, k):
        j, k = sorted((int(j), int(k)))
        return self.amplitudes[pattern_index(j, k, self.dim)]


def pattern_index(j, k, dim):
    """Position of unordered pattern ``(j, k)``, ``j <= k``, in the pattern table."""
    if not 0 <= j <= k < dim:
        raise ValueError(f"invalid pattern ({j}, {k}) for dim {dim}")
    return j * dim - j * (j - 1) // 2 + (k - j)


def two_photon_transfer(u):
    """Fock-pattern transfer matrix ``T[out, in]`` of a mode unitary."""
    u = np.ascontiguousarray(u, dtype=np.complex128)
    return _kernels.two_photon_transfer(u, _kernels.pattern_table(u.shape[0]))


def evolve_two_photon(u, state):
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (state.dim, state.dim):
        raise ValueError(f"unitary shape {u.shape} does not match state dim {state.dim}")
    amps = two_photon_transfer(u) @ state.amplitudes
    joint = u @ state.joint @ u.T
    return TwoPhotonState(state.dim, amps, joint, state.overlap)


def coincidence_probability(output, pattern):
    """Detection probability of ``pattern`` under the partial-distinguishability mixture."""
    j, k = sorted(int(m) for m in pattern)
    p_indist = abs(output.amplitude(j, k)) ** 2
    if j == k:
        p_dist = abs(output.joint[j, j]) ** 2
    else:
        p_dist = abs(output.joint[j, k]) ** 2 + abs(output.joint[k, j]) ** 2
    g2 = abs(output.overlap) ** 2
    return float(g2 * p_indist + (1.0 - g2) * p_dist)


@dataclass(frozen=True)
class TwoQubitOutcome:
    state: np.ndarray
    success_probability: float


def postselected_block(output, q1_modes, q2_modes):
    """Unnormalized logical density matrix kept by dual-rail post-selection."""
    modes = [int(m) for m in (*q1_modes, *q2_modes)]
    if len(set(modes)) != 4:
        raise ValueError("qubit modes must be four distinct modes")
    if max(modes) >= output.dim or min(modes) < 0:
        raise ValueError("qubit mode out of range")

    psi = np.empty(4, dtype=np.complex128)
    branch_a = np.empty(4, dtype=np.complex128)
    branch_b = np.empty(4, dtype=np.complex128)
    for x in range(2):
        for y in range(2):
            m, n = q1_modes[x], q2_modes[y]
            psi[2 * x + y] = output.amplitude(m, n)
            branch_a[2 * x + y] = output.joint[m, n]
            branch_b[2 * x + y] = output.joint[n, m]
    g2 = abs(output.overlap) ** 2
    rho = g2 * np.outer(psi, psi.conj())
    if g2 < 1.0:
        rho = rho + (1.0 - g2) * (
            np.outer(branch_a, branch_a.conj()) + np.outer(branch_b, branch_b.conj())
        )
    return rho


def postselect_dual_rail(output, q1_modes, q2_modes):
    """Keep events with one photon in each qubit's mode pair.

    Logical basis order is ``|00>, |01>, |10>, |11>`` with the first listed
    mode of each pair carrying ``|0>``.
    """
    rho = postselected_block(output, q1_modes, q2_modes)
    success = float(np.trace(rho).real)
    if success < POSTSELECT_FLOOR:
        raise DegeneratePostselectionError(success)
    rho = rho / success
    return TwoQubitOutcome(0.5 * (rho + rho.conj().T), success)
