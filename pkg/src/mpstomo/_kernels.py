"""Hot numeric kernels with a numba path and a pure-numpy path.

Every kernel exists twice: ``<name>_numba`` (``@njit``) and ``<name>_numpy``.
The public name dispatches on the active backend, chosen at import time from
the ``MPSTOMO_DISABLE_NUMBA`` environment variable (any non-empty value other
than ``0`` disables numba) and switchable at runtime with :func:`set_backend`.

Array layout used throughout: a dense state is viewed as ``(L, D, R)`` where
``D`` is the window being acted on, ``L`` the sites before it and ``R`` the
sites after it (site 1 is the most significant digit).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_env = os.environ.get("MPSTOMO_DISABLE_NUMBA", "").strip()
_backend = "numba" if HAVE_NUMBA and _env in ("", "0") else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` for subsequent kernel calls."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    _backend = name


# --------------------------------------------------------------------------
# numpy reference path


def apply_window_numpy(psi3: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("ab,lbr->lar", u, psi3, optimize=True)


def window_rdm_numpy(psi3: np.ndarray) -> np.ndarray:
    return np.einsum("lar,lbr->ab", psi3, psi3.conj(), optimize=True)


def walsh_parities_numpy(counts: np.ndarray, k: int) -> np.ndarray:
    # out[mask] = sum_x counts[x] * (-1)**popcount(x & mask)
    h = np.array([[1.0, 1.0], [1.0, -1.0]])
    t = np.asarray(counts, dtype=np.float64).reshape((2,) * k)
    for axis in range(k):
        t = np.moveaxis(np.tensordot(h, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def chain_amplitudes_numpy(
    left: np.ndarray, mats: np.ndarray, right: np.ndarray, strings: np.ndarray
) -> np.ndarray:
    # mats: (n, d, D, D); strings: (m, n)
    m, n = strings.shape
    rows = np.broadcast_to(left, (m, left.shape[0])).astype(np.complex128)
    for site in range(n):
        rows = np.einsum("mi,mij->mj", rows, mats[site][strings[:, site]])
    return rows @ right


# --------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def apply_window_numba(psi3, u):
        nl, nd, nr = psi3.shape
        out = np.zeros((nl, nd, nr), dtype=np.complex128)
        for l in range(nl):
            for a in range(nd):
                for b in range(nd):
                    c = u[a, b]
                    if c == 0:
                        continue
                    for r in range(nr):
                        out[l, a, r] += c * psi3[l, b, r]
        return out

    @njit(cache=True)
    def window_rdm_numba(psi3):
        nl, nd, nr = psi3.shape
        rho = np.zeros((nd, nd), dtype=np.complex128)
        for l in range(nl):
            for a in range(nd):
                for b in range(a, nd):
                    acc = 0j
                    for r in range(nr):
                        acc += psi3[l, a, r] * np.conj(psi3[l, b, r])
                    rho[a, b] += acc
        for a in range(nd):
            for b in range(a + 1, nd):
                rho[b, a] = np.conj(rho[a, b])
        return rho

    @njit(cache=True)
    def _walsh_parities_impl(counts, k):
        t = counts.astype(np.float64).copy()
        size = 1 << k
        half = 1
        while half < size:
            for start in range(0, size, 2 * half):
                for j in range(start, start + half):
                    x = t[j]
                    y = t[j + half]
                    t[j] = x + y
                    t[j + half] = x - y
            half *= 2
        return t

    def walsh_parities_numba(counts: np.ndarray, k: int) -> np.ndarray:
        return _walsh_parities_impl(np.ascontiguousarray(counts, dtype=np.float64), k)

    @njit(cache=True)
    def chain_amplitudes_numba(left, mats, right, strings):
        m, n = strings.shape
        dim = left.shape[0]
        out = np.empty(m, dtype=np.complex128)
        row = np.empty(dim, dtype=np.complex128)
        nxt = np.empty(dim, dtype=np.complex128)
        for s in range(m):
            for i in range(dim):
                row[i] = left[i]
            for site in range(n):
                z = strings[s, site]
                for j in range(dim):
                    acc = 0j
                    for i in range(dim):
                        acc += row[i] * mats[site, z, i, j]
                    nxt[j] = acc
                for j in range(dim):
                    row[j] = nxt[j]
            acc = 0j
            for i in range(dim):
                acc += row[i] * right[i]
            out[s] = acc
        return out


# --------------------------------------------------------------------------
# dispatch


def apply_window(psi3: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Return ``out[l, a, r] = sum_b u[a, b] psi3[l, b, r]``."""
    psi3 = np.ascontiguousarray(psi3, dtype=np.complex128)
    u = np.ascontiguousarray(u, dtype=np.complex128)
    if _backend == "numba":
        return apply_window_numba(psi3, u)
    return apply_window_numpy(psi3, u)


def window_rdm(psi3: np.ndarray) -> np.ndarray:
    """Partial trace of ``|psi><psi|`` over the ``L`` and ``R`` axes."""
    psi3 = np.ascontiguousarray(psi3, dtype=np.complex128)
    if _backend == "numba":
        return window_rdm_numba(psi3)
    return window_rdm_numpy(psi3)


def walsh_parities(counts: np.ndarray, k: int) -> np.ndarray:
    """Signed outcome sums for every Z-type parity mask over ``k`` qubits."""
    if _backend == "numba":
        return walsh_parities_numba(counts, k)
    return walsh_parities_numpy(counts, k)


def chain_amplitudes(
    left: np.ndarray, mats: np.ndarray, right: np.ndarray, strings: np.ndarray
) -> np.ndarray:
    """Evaluate ``left @ mats[0][z0] @ ... @ mats[n-1][z_{n-1}] @ right`` per row of ``strings``."""
    left = np.ascontiguousarray(left, dtype=np.complex128)
    mats = np.ascontiguousarray(mats, dtype=np.complex128)
    right = np.ascontiguousarray(right, dtype=np.complex128)
    strings = np.ascontiguousarray(strings, dtype=np.int64)
    if _backend == "numba":
        return chain_amplitudes_numba(left, mats, right, strings)
    return chain_amplitudes_numpy(left, mats, right, strings)
