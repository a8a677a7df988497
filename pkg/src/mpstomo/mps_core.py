"""Dense and matrix-product state representations and the operations between them.

Conventions
-----------
* Sites are numbered from 1 in every public signature.
* In a :class:`DenseState` site 1 is the most significant digit of the d-ary
  amplitude index, so ``amplitudes.reshape((d,) * n)[z1, ..., zn]`` is the
  coefficient of ``|z1 ... zn>``.
* An :class:`MpsState` stores, for each site, an array of shape
  ``(d, chi_left, chi_right)``: a stack of the ``d`` matrices ``A^z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    CutOutOfRange,
    InconsistentBonds,
    NotADensityMatrix,
    NotUnitary,
    ShapeMismatch,
    SizeExceeded,
    WindowOutOfRange,
    ZeroProbability,
)

DENSE_GUARD = 2**24
RANK_TOL = 1e-10
ZERO_PROB_TOL = 1e-14

GAUGES = ("none", "left-canonical", "right-canonical")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


def check_dense_size(n: int, d: int) -> None:
    if d**n > DENSE_GUARD:
        raise SizeExceeded(f"d**n = {d}**{n} exceeds the dense guard of {DENSE_GUARD}")


@dataclass(frozen=True)
class DenseState:
    """Exact state vector of ``n`` qudits of local dimension ``d``."""

    n: int
    d: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != self.d**self.n:
            raise ShapeMismatch(f"expected {self.d}**{self.n} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm {norm!r})")

    @classmethod
    def from_vector(cls, n: int, d: int, vector) -> "DenseState":
        """Build a state from an arbitrary nonzero vector, normalizing it."""
        v = np.asarray(vector, dtype=np.complex128).ravel()
        return cls(n, d, v / np.linalg.norm(v))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.d,) * self.n)


@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = _frozen(self.entries)
        object.__setattr__(self, "entries", rho)
        if rho.shape != (self.dim, self.dim):
            raise NotADensityMatrix(f"expected shape {(self.dim, self.dim)}, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise NotADensityMatrix("matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise NotADensityMatrix(f"trace {np.trace(rho).real!r} != 1")
        if np.linalg.eigvalsh(rho)[0] < -1e-10:
            raise NotADensityMatrix("matrix has a negative eigenvalue")

    @classmethod
    def repaired(cls, matrix) -> "DensityMatrix":
        """Project an estimated matrix back onto the set of density matrices.

        Symmetrizes, clips negative eigenvalues to zero and renormalizes the
        trace. Eigenvectors are left untouched.
        """
        m = np.asarray(matrix, dtype=np.complex128)
        m = 0.5 * (m + m.conj().T)
        w, v = np.linalg.eigh(m)
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0:
            raise NotADensityMatrix("estimate has no positive spectrum")
        w = w / w.sum()
        out = (v * w) @ v.conj().T
        return cls(m.shape[0], 0.5 * (out + out.conj().T))


@dataclass(frozen=True)
class MpsState:
    """Open-boundary matrix product state.

    ``tensors[i]`` has shape ``(d, chi_{i}, chi_{i+1})``; the amplitude of
    ``|z1 ... zn>`` is ``left @ A_1^{z1} @ ... @ A_n^{zn} @ right``.
    """

    n: int
    d: int
    tensors: tuple = field(repr=False)
    left: np.ndarray = field(default=None, repr=False)
    right: np.ndarray = field(default=None, repr=False)
    gauge: str = "none"

    def __post_init__(self):
        ts = tuple(_frozen(t) for t in self.tensors)
        object.__setattr__(self, "tensors", ts)
        if len(ts) != self.n or self.n < 1:
            raise InconsistentBonds(f"expected {self.n} tensors, got {len(ts)}")
        left = np.ones(ts[0].shape[1]) if self.left is None else self.left
        right = np.ones(ts[-1].shape[2]) if self.right is None else self.right
        object.__setattr__(self, "left", _frozen(np.ravel(left)))
        object.__setattr__(self, "right", _frozen(np.ravel(right)))
        if self.gauge not in GAUGES:
            raise ValueError(f"unknown gauge tag {self.gauge!r}")
        for i, t in enumerate(ts):
            if t.ndim != 3 or t.shape[0] != self.d:
                raise InconsistentBonds(f"site {i + 1}: tensor shape {t.shape} is not (d, chi_l, chi_r)")
            if i + 1 < self.n and t.shape[2] != ts[i + 1].shape[1]:
                raise InconsistentBonds(
                    f"bond between sites {i + 1} and {i + 2}: {t.shape[2]} != {ts[i + 1].shape[1]}"
                )
        if self.left.shape[0] != ts[0].shape[1] or self.right.shape[0] != ts[-1].shape[2]:
            raise InconsistentBonds("boundary vector does not match terminal bond")
        nrm = mps_norm_squared(self)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"MPS is not normalized (norm^2 {nrm!r})")
        if self.gauge == "left-canonical":
            for i, t in enumerate(ts[:-1]):
                g = np.einsum("zab,zac->bc", t.conj(), t)
                if np.max(np.abs(g - np.eye(g.shape[0]))) > 1e-10:
                    raise ValueError(f"site {i + 1} is not left-canonical")

    @property
    def bond_dims(self) -> list[int]:
        """Internal bond dimensions chi_1 ... chi_{n-1}."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)


# --------------------------------------------------------------------------
# MPS tensor-list helpers (boundaries absorbed, no validation)


def absorbed_tensors(state: MpsState) -> list[np.ndarray]:
    """Copy of the site tensors with both boundary vectors folded in."""
    ts = [np.array(t) for t in state.tensors]
    ts[0] = np.einsum("a,zab->zb", state.left, ts[0])[:, None, :]
    ts[-1] = np.einsum("zab,b->za", ts[-1], state.right)[:, :, None]
    return ts


def left_sweep_qr(ts: list[np.ndarray]) -> tuple[list[np.ndarray], float]:
    """Left-canonicalize sites 1..n-1 by QR; returns tensors and the norm left on site n."""
    ts = list(ts)
    for i in range(len(ts) - 1):
        d, cl, cr = ts[i].shape
        q, r = np.linalg.qr(ts[i].transpose(1, 0, 2).reshape(cl * d, cr))
        ts[i] = q.reshape(cl, d, -1).transpose(1, 0, 2)
        ts[i + 1] = np.einsum("ab,zbc->zac", r, ts[i + 1])
    norm = float(np.linalg.norm(ts[-1]))
    return ts, norm


def right_sweep_qr(ts: list[np.ndarray]) -> tuple[list[np.ndarray], float]:
    """Right-canonicalize sites 2..n by LQ; returns tensors and the norm left on site 1."""
    ts = list(ts)
    for i in range(len(ts) - 1, 0, -1):
        d, cl, cr = ts[i].shape
        mat = ts[i].transpose(1, 0, 2).reshape(cl, d * cr)
        q, r = np.linalg.qr(mat.conj().T)
        # mat = r^dagger q^dagger, with q^dagger having orthonormal rows
        ts[i] = q.conj().T.reshape(-1, d, cr).transpose(1, 0, 2)
        ts[i - 1] = np.einsum("zab,bc->zac", ts[i - 1], r.conj().T)
    norm = float(np.linalg.norm(ts[0]))
    return ts, norm


def left_canonicalize(state: MpsState) -> MpsState:
    ts, norm = left_sweep_qr(absorbed_tensors(state))
    ts[-1] = ts[-1] / norm
    return MpsState(state.n, state.d, tuple(ts), gauge="left-canonical")


def right_canonicalize(state: MpsState) -> MpsState:
    ts, norm = right_sweep_qr(absorbed_tensors(state))
    ts[0] = ts[0] / norm
    return MpsState(state.n, state.d, tuple(ts), gauge="right-canonical")


def compress(state: MpsState, tol: float = RANK_TOL) -> MpsState:
    """Truncate every bond to the Schmidt values above ``tol`` times the largest.

    Left-canonicalizes first so each right-to-left SVD sees the exact Schmidt
    spectrum of its cut. The result is right-canonical and renormalized.
    """
    ts, norm = left_sweep_qr(absorbed_tensors(state))
    ts[-1] = ts[-1] / norm
    for i in range(len(ts) - 1, 0, -1):
        d, cl, cr = ts[i].shape
        u, s, vh = np.linalg.svd(ts[i].transpose(1, 0, 2).reshape(cl, d * cr), full_matrices=False)
        keep = max(1, int(np.sum(s > tol * s[0])))
        ts[i] = vh[:keep].reshape(keep, d, cr).transpose(1, 0, 2)
        ts[i - 1] = np.einsum("zab,bc->zac", ts[i - 1], u[:, :keep] * s[:keep])
    ts[0] = ts[0] / np.linalg.norm(ts[0])
    return MpsState(state.n, state.d, tuple(ts), gauge="right-canonical")


def mps_norm_squared(state: MpsState) -> float:
    return float(_mps_overlap(state, state).real)


def _mps_overlap(a: MpsState, b: MpsState) -> complex:
    env = np.outer(a.left.conj(), b.left)
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.einsum("ab,zac,zbe->ce", env, ta.conj(), tb, optimize=True)
    return complex(a.right.conj() @ env @ b.right)


# --------------------------------------------------------------------------
# public operations


def dense_from_mps(state: MpsState) -> DenseState:
    check_dense_size(state.n, state.d)
    vec = state.left[None, :]
    for t in state.tensors:
        vec = np.einsum("ma,zab->mzb", vec, t).reshape(-1, t.shape[2])
    return DenseState.from_vector(state.n, state.d, vec @ state.right)


def mps_from_dense(state: DenseState, tol: float = RANK_TOL) -> MpsState:
    """Left-canonical MPS from successive SVDs, dropping singular values below ``tol * s_max``."""
    n, d = state.n, state.d
    ts = []
    rest = state.amplitudes.reshape(1, -1)
    for _ in range(n - 1):
        chi = rest.shape[0]
        u, s, vh = np.linalg.svd(rest.reshape(chi * d, -1), full_matrices=False)
        keep = max(1, int(np.sum(s > tol * s[0])) if tol > 0 else int(np.sum(s > 0)))
        ts.append(u[:, :keep].reshape(chi, d, keep).transpose(1, 0, 2))
        rest = s[:keep, None] * vh[:keep]
    chi = rest.shape[0]
    last = rest.reshape(chi, d, 1).transpose(1, 0, 2)
    ts.append(last / np.linalg.norm(last))
    return MpsState(n, d, tuple(ts), gauge="left-canonical")


def _same_shape(a, b) -> None:
    if a.n != b.n or a.d != b.d:
        raise ShapeMismatch(f"(n={a.n}, d={a.d}) vs (n={b.n}, d={b.d})")


def inner_product(a: DenseState | MpsState, b: DenseState | MpsState) -> complex:
    """``<a|b>``, antilinear in ``a``. Mixed kinds are contracted on the MPS side."""
    _same_shape(a, b)
    if isinstance(a, DenseState) and isinstance(b, DenseState):
        return complex(np.vdot(a.amplitudes, b.amplitudes))
    if isinstance(a, DenseState):
        a = mps_from_dense(a, tol=0.0)
    if isinstance(b, DenseState):
        b = mps_from_dense(b, tol=0.0)
    return _mps_overlap(a, b)


def _check_window(n: int, first: int, k: int) -> None:
    if k < 1 or first < 1 or first + k - 1 > n:
        raise WindowOutOfRange(f"window [{first}, {first + k - 1}] outside sites 1..{n}")


def _window_view(state: DenseState, first: int, k: int) -> np.ndarray:
    d = state.d
    return state.amplitudes.reshape(d ** (first - 1), d**k, -1)


def reduced_density_matrix(state: DenseState, first: int, k: int) -> DensityMatrix:
    """Partial trace onto sites ``first .. first+k-1``."""
    _check_window(state.n, first, k)
    rho = _kernels.window_rdm(_window_view(state, first, k))
    return DensityMatrix(state.d**k, 0.5 * (rho + rho.conj().T))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(
        u.conj().T @ u, np.eye(u.shape[0]), rtol=0, atol=tol
    )


def apply_window_unitary(state: DenseState, u: np.ndarray, first: int) -> DenseState:
    """Apply ``u`` (``d**k x d**k``) to sites ``first .. first+k-1``."""
    u = np.asarray(u, dtype=np.complex128)
    if not is_unitary(u):
        raise NotUnitary("window operator is not unitary within 1e-10")
    k = 0
    while state.d**k < u.shape[0]:
        k += 1
    if state.d**k != u.shape[0]:
        raise ShapeMismatch(f"operator dimension {u.shape[0]} is not a power of d={state.d}")
    _check_window(state.n, first, k)
    out = _kernels.apply_window(_window_view(state, first, k), u)
    return DenseState.from_vector(state.n, state.d, out)


def postselect_zero(state: DenseState, site: int) -> tuple[DenseState, float]:
    """Project ``site`` onto ``|0>``; returns the renormalized state and the outcome probability."""
    _check_window(state.n, site, 1)
    view = _window_view(state, site, 1)
    p = float(np.vdot(view[:, 0, :], view[:, 0, :]).real)
    if p < ZERO_PROB_TOL:
        raise ZeroProbability(f"outcome 0 on site {site} has probability {p:.3e}")
    out = np.zeros_like(view)
    out[:, 0, :] = view[:, 0, :] / np.sqrt(p)
    return DenseState.from_vector(state.n, state.d, out), min(p, 1.0)


def schmidt_spectrum(state: DenseState, cut: int) -> np.ndarray:
    """Squared Schmidt coefficients across the cut after site ``cut``, descending."""
    if not 1 <= cut < state.n:
        raise CutOutOfRange(f"cut {cut} not in 1..{state.n - 1}")
    s = np.linalg.svd(state.amplitudes.reshape(state.d**cut, -1), compute_uv=False)
    return s**2
