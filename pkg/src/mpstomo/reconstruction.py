"""MPS tensors read off a tomography sweep.

With ``D = d**(k-1)`` every tensor is a stack of ``d`` matrices of size
``D x D`` and

    c(z_1 ... z_n) = <0...0| T_1^{z_1} ... T_{k-1}^{z_{k-1}} V_1^{z_k} ... V_{n-k+1}^{z_n} |eta>

where ``T_i^z`` is ``|0><z|`` on qudit ``i`` of the bond register and
``V_i^z[x, j] = <x, z| U_i^dagger |0, j>``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BadDigitString, NotUnitary
from .mps_core import (
    RANK_TOL,
    DenseState,
    MpsState,
    compress,
    inner_product,
    is_unitary,
)
from .tomography import Disentangler, TomographyResult


@dataclass(frozen=True)
class ExtractedTensors:
    n: int
    d: int
    k: int
    T: tuple = field(repr=False)
    V: tuple = field(repr=False)
    left: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)

    @property
    def bond(self) -> int:
        return self.d ** (self.k - 1)

    def stacked(self) -> np.ndarray:
        """All site tensors as one ``(n, d, D, D)`` array."""
        return np.stack(self.T + self.V)


def extract_T(k: int, d: int) -> tuple:
    """``T_i^z`` for ``i = 1 .. k-1``, each returned as a ``(d, D, D)`` stack."""
    out = []
    for i in range(1, k):
        stack = np.zeros((d, d ** (k - 1), d ** (k - 1)), dtype=np.complex128)
        before, after = np.eye(d ** (i - 1)), np.eye(d ** (k - 1 - i))
        for z in range(d):
            local = np.zeros((d, d))
            local[0, z] = 1.0
            stack[z] = np.kron(np.kron(before, local), after)
        out.append(stack)
    return tuple(out)


def extract_V(u: Disentangler | np.ndarray, d: int, k: int) -> np.ndarray:
    """``V^z = (I (x) <z|_last) U^dagger (|0>_first (x) I)`` as a ``(d, D, D)`` stack."""
    mat = u.matrix if isinstance(u, Disentangler) else np.asarray(u, dtype=np.complex128)
    if not is_unitary(mat):
        raise NotUnitary("disentangler is not unitary within 1e-10")
    dim = d ** (k - 1)
    block = mat.conj().T[:, :dim]  # rows (x, z), columns j with a = 0
    return block.reshape(dim, d, dim).transpose(1, 0, 2).copy()


def extract(result: TomographyResult) -> ExtractedTensors:
    d, k = result.d, result.k
    left = np.zeros(d ** (k - 1), dtype=np.complex128)
    left[0] = 1.0
    vs = tuple(extract_V(u, d, k) for u in result.disentanglers)
    return ExtractedTensors(result.n, d, k, extract_T(k, d), vs, left, np.asarray(result.eta))


def attach(result: TomographyResult) -> TomographyResult:
    """Copy of ``result`` with its ``tensors`` field filled."""
    return dataclasses.replace(result, tensors=extract(result))


def _digits(tensors: ExtractedTensors, z) -> np.ndarray:
    if isinstance(z, str):
        if not z.isdigit():
            raise BadDigitString(f"{z!r} is not a digit string")
        z = [int(c) for c in z]
    arr = np.asarray(z, dtype=np.int64)
    if arr.shape != (tensors.n,) or np.any(arr < 0) or np.any(arr >= tensors.d):
        raise BadDigitString(f"need {tensors.n} base-{tensors.d} digits, got {z!r}")
    return arr


def amplitude(tensors: ExtractedTensors, z) -> complex:
    """Coefficient of ``|z>`` from the matrix chain, evaluated left to right with a row vector."""
    digits = _digits(tensors, z)
    row = tensors.left
    for site, t in zip(digits, tensors.T + tensors.V):
        row = row @ t[site]
    return complex(row @ tensors.eta)


def amplitudes(tensors: ExtractedTensors, strings=None) -> np.ndarray:
    """Batch of coefficients; every basis string in lexicographic order when ``strings`` is None."""
    if strings is None:
        n, d = tensors.n, tensors.d
        strings = np.array(np.unravel_index(np.arange(d**n), (d,) * n)).T
    else:
        strings = np.array([_digits(tensors, z) for z in strings])
    return _kernels.chain_amplitudes(tensors.left, tensors.stacked(), tensors.eta, strings)


def to_mps(tensors: ExtractedTensors, recompress: bool = False, tol: float = RANK_TOL) -> MpsState:
    """Extracted tensors as an :class:`MpsState`; optionally SVD-recompressed to the minimal bonds."""
    mps = MpsState(
        tensors.n, tensors.d, tensors.T + tensors.V, left=tensors.left, right=tensors.eta
    )
    return compress(mps, tol) if recompress else mps


def reconstruct(result: TomographyResult, recompress: bool = False) -> MpsState:
    return to_mps(result.tensors or extract(result), recompress=recompress)


def _norm(state) -> float:
    return float(np.sqrt(abs(inner_product(state, state))))


def fidelity(a: DenseState | MpsState, b: DenseState | MpsState) -> float:
    """``|<a|b>|`` for normalized inputs; insensitive to global phase."""
    f = abs(inner_product(a, b)) / (_norm(a) * _norm(b))
    return float(min(1.0, f))


def phase_aligned_distance(a, b) -> float:
    """``min_theta || a - e^{i theta} b ||`` for unit vectors."""
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * fidelity(a, b))))
