"""Finite-shot Pauli tomography of a few-qubit window.

Each of the ``3**k`` product settings in {X, Y, Z}^k is measured ``shots``
times. Every Pauli word is estimated from all settings that agree with it on
its non-identity positions, and the linear-inversion estimate is returned
unrepaired (callers project it back to a density matrix).
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import _kernels

_I = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (_I, _X, _Y, _Z)

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_SDG = np.diag([1, -1j])
# rotation taking the +1 eigenvector of X, Y, Z to |0>
_BASIS_CHANGE = {1: _H, 2: _H @ _SDG, 3: _I}


def settings(k: int) -> list[tuple[int, ...]]:
    """All measurement settings, letters encoded 1=X, 2=Y, 3=Z."""
    return list(itertools.product((1, 2, 3), repeat=k))


def _kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


@lru_cache(maxsize=8)
def _word_operators(k: int) -> np.ndarray:
    words = itertools.product(range(4), repeat=k)
    return np.array([_kron_all(PAULIS[w] for w in word) for word in words])


def _word_index(word) -> int:
    idx = 0
    for w in word:
        idx = 4 * idx + w
    return idx


def sample_counts(rho: np.ndarray, setting, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Outcome histogram for one product setting; outcome bit 0 means eigenvalue +1."""
    r = _kron_all(_BASIS_CHANGE[s] for s in setting)
    probs = np.clip(np.real(np.diag(r @ rho @ r.conj().T)), 0.0, None)
    return rng.multinomial(shots, probs / probs.sum())


def estimate_density_matrix(rho: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    k = int(round(np.log2(rho.shape[0])))
    sums = np.zeros(4**k)
    hits = np.zeros(4**k)
    masks = list(itertools.product((0, 1), repeat=k))
    for setting in settings(k):
        parities = _kernels.walsh_parities(sample_counts(rho, setting, shots, rng), k) / shots
        # mask bit for position j is the (k-1-j)-th bit, matching the outcome index
        for m, mask in enumerate(masks):
            word = _word_index(s if keep else 0 for s, keep in zip(setting, mask))
            sums[word] += parities[m]
            hits[word] += 1
    expectations = sums / hits
    return np.tensordot(expectations, _word_operators(k), axes=1) / 2**k
