"""Hot numeric kernels.

Every kernel exists twice: a ``*_numba`` version compiled with ``@njit`` and a
``*_numpy`` version written with array operations. The public names
(``two_photon_transfer``, ``mle_fixed_point``) point at one or the other
depending on :data:`photonode._jit.JIT_ENABLED`.
"""

import numpy as np

from ._jit import JIT_ENABLED, njit

# floor applied to Born probabilities inside the MLE ratio operator
PROB_FLOOR = 1e-12


def pattern_table(dim):
    """Return an (n_patterns, 2) int array of unordered mode pairs ``j <= k``."""
    rows = [(j, k) for j in range(dim) for k in range(j, dim)]
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# two-photon transfer matrix
# ---------------------------------------------------------------------------


@njit(cache=True)
def two_photon_transfer_numba(u, patterns):
    n = patterns.shape[0]
    out = np.zeros((n, n), dtype=np.complex128)
    for a in range(n):
        m = patterns[a, 0]
        q = patterns[a, 1]
        w_out = 2.0 if m == q else 1.0
        for b in range(n):
            j = patterns[b, 0]
            k = patterns[b, 1]
            w_in = 2.0 if j == k else 1.0
            perm = u[m, j] * u[q, k] + u[m, k] * u[q, j]
            out[a, b] = perm / np.sqrt(w_out * w_in)
    return out


def two_photon_transfer_numpy(u, patterns):
    m = patterns[:, 0][:, None]
    q = patterns[:, 1][:, None]
    j = patterns[:, 0][None, :]
    k = patterns[:, 1][None, :]
    perm = u[m, j] * u[q, k] + u[m, k] * u[q, j]
    w_out = np.where(patterns[:, 0] == patterns[:, 1], 2.0, 1.0)[:, None]
    w_in = np.where(patterns[:, 0] == patterns[:, 1], 2.0, 1.0)[None, :]
    return perm / np.sqrt(w_out * w_in)


# ---------------------------------------------------------------------------
# diluted R rho R maximum-likelihood fixed point
# ---------------------------------------------------------------------------


@njit(cache=True)
def _probs_numba(rho, projectors):
    n = projectors.shape[0]
    d = rho.shape[0]
    p = np.empty(n)
    for i in range(n):
        acc = 0.0
        for a in range(d):
            for b in range(d):
                acc += (rho[a, b] * projectors[i, b, a]).real
        p[i] = acc
    return p


@njit(cache=True)
def _loglik_numba(p, freqs):
    total = 0.0
    for i in range(p.shape[0]):
        if freqs[i] > 0.0:
            total += freqs[i] * np.log(max(p[i], PROB_FLOOR))
    return total


@njit(cache=True)
def mle_fixed_point_numba(projectors, freqs, rho0, tol, max_iter, lam0):
    d = rho0.shape[0]
    rho = rho0.copy()
    history = np.empty(max_iter + 1)
    p = _probs_numba(rho, projectors)
    loglik = _loglik_numba(p, freqs)
    history[0] = loglik
    lam = lam0
    residual = np.inf
    it = 0
    while it < max_iter:
        r_op = np.zeros((d, d), dtype=np.complex128)
        for i in range(projectors.shape[0]):
            if freqs[i] > 0.0:
                r_op += (freqs[i] / max(p[i], PROB_FLOOR)) * projectors[i]
        rrr = r_op @ rho @ r_op
        cand = (1.0 - lam) * rho + lam * rrr
        cand = 0.5 * (cand + cand.conj().T)
        cand = cand / np.trace(cand).real
        p_new = _probs_numba(cand, projectors)
        ll_new = _loglik_numba(p_new, freqs)
        if ll_new < loglik - 1e-14 * abs(loglik):
            lam *= 0.5
            if lam < 1e-12:
                # no ascent direction left at working precision
                residual = 0.0
                break
            continue
        it += 1
        residual = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(cand - rho)))
        rho = cand
        p = p_new
        loglik = ll_new
        history[it] = loglik
        if residual < tol:
            break
    return rho, it, residual, history[: it + 1]


def mle_fixed_point_numpy(projectors, freqs, rho0, tol, max_iter, lam0):
    rho = rho0.copy()
    history = [0.0]
    mask = freqs > 0.0

    def probs(r):
        return np.einsum("ab,iba->i", r, projectors).real

    def loglik(pv):
        return float(np.sum(freqs[mask] * np.log(np.maximum(pv[mask], PROB_FLOOR))))

    p = probs(rho)
    ll = loglik(p)
    history[0] = ll
    lam = lam0
    residual = np.inf
    it = 0
    while it < max_iter:
        weights = np.where(mask, freqs / np.maximum(p, PROB_FLOOR), 0.0)
        r_op = np.einsum("i,iab->ab", weights, projectors)
        cand = (1.0 - lam) * rho + lam * (r_op @ rho @ r_op)
        cand = 0.5 * (cand + cand.conj().T)
        cand = cand / np.trace(cand).real
        p_new = probs(cand)
        ll_new = loglik(p_new)
        if ll_new < ll - 1e-14 * abs(ll):
            lam *= 0.5
            if lam < 1e-12:
                residual = 0.0
                break
            continue
        it += 1
        residual = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(cand - rho))))
        rho = cand
        p = p_new
        ll = ll_new
        history.append(ll)
        if residual < tol:
            break
    return rho, it, residual, np.array(history)


if JIT_ENABLED:
    two_photon_transfer = two_photon_transfer_numba
    mle_fixed_point = mle_fixed_point_numba
else:
    two_photon_transfer = two_photon_transfer_numpy
    mle_fixed_point = mle_fixed_point_numpy
