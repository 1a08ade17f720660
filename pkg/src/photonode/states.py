"""Named single- and two-qubit states used as preparation and tomography targets.

Logical basis ordering is ``|00>, |01>, |10>, |11>`` (qubit 1 first).
"""

import numpy as np

_S = 1.0 / np.sqrt(2.0)

# +1 / -1 eigenvectors of the Pauli operators
PAULI_EIGENSTATES = {
    "X": (np.array([_S, _S], dtype=complex), np.array([_S, -_S], dtype=complex)),
    "Y": (np.array([_S, 1j * _S]), np.array([_S, -1j * _S])),
    "Z": (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
}

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

KET_0, KET_1 = PAULI_EIGENSTATES["Z"]
KET_PLUS, KET_MINUS = PAULI_EIGENSTATES["X"]
KET_PLUS_I, KET_MINUS_I = PAULI_EIGENSTATES["Y"]

TARGET_KETS = {
    "HV": np.kron(KET_0, KET_1),
    "PM": np.kron(KET_PLUS, KET_MINUS),
    "PiMi": np.kron(KET_PLUS_I, KET_MINUS_I),
    "PhiPlus": np.array([1, 0, 0, 1], dtype=complex) * _S,
    "PhiMinus": np.array([1, 0, 0, -1], dtype=complex) * _S,
    "PsiPlus": np.array([0, 1, 1, 0], dtype=complex) * _S,
    "PsiMinus": np.array([0, 1, -1, 0], dtype=complex) * _S,
    # normalized two-qubit cluster state
    "Cluster": np.array([1, 1, 1, -1], dtype=complex) / 2.0,
}

BELL_NAMES = ("PhiPlus", "PhiMinus", "PsiPlus", "PsiMinus")

MAXIMALLY_MIXED = np.eye(4, dtype=complex) / 4.0


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def target_state(name):
    """Density matrix of a named target state."""
    try:
        return ket_to_dm(TARGET_KETS[name])
    except KeyError:
        raise KeyError(f"unknown target state {name!r}; known: {sorted(TARGET_KETS)}") from None
