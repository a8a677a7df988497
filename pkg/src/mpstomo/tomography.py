"""Direct MPS tomography: the windowed estimate / disentangle / postselect sweep.

For ``i = 1 .. n-k+1`` the sweep estimates the density matrix of sites
``i .. i+k-1`` of the partially disentangled state, builds a unitary whose
``a = 0`` block (first site of the window in ``|0>``) receives the
``d**(k-1)`` dominant eigenvectors, applies it and postselects site ``i`` on
``|0>``. After the sweep only the last ``k-1`` sites carry a state, the
boundary vector ``eta``.

Two simulation backends share the loop: a dense state vector
(:func:`run_protocol`) and a right-canonical MPS (:func:`run_protocol_mps`)
that never forms more than a ``d**k x chi`` block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BondOverflow,
    ConfigError,
    NotADensityMatrix,
    ShotsUnsupported,
    TruncationAbort,
    ZeroProbability,
)
from .mps_core import (
    RANK_TOL,
    ZERO_PROB_TOL,
    DenseState,
    DensityMatrix,
    MpsState,
    absorbed_tensors,
    apply_window_unitary,
    postselect_zero,
    reduced_density_matrix,
    right_sweep_qr,
)
from . import pauli

log = logging.getLogger(__name__)

NOISE_MODES = ("exact", "subspace_perturbation", "shots")


def minimal_window(d: int, chi: int) -> int:
    """Smallest ``k`` with ``d**(k-1) >= chi``, i.e. ``ceil(log_d chi) + 1``."""
    k = 1
    while d ** (k - 1) < chi:
        k += 1
    return k


def settings_per_window(d: int, k: int) -> int:
    """Product measurement settings for one window: ``3**k`` Pauli settings on qubits, ``(d+1)**k`` in general."""
    return (d + 1) ** k


@dataclass(frozen=True)
class NoiseConfig:
    mode: str = "exact"
    epsilon: float = 0.0
    shots: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise ConfigError("noise.mode", f"expected one of {NOISE_MODES}, got {self.mode!r}")
        if self.epsilon < 0:
            raise ConfigError("noise.epsilon", "must be >= 0")
        if self.shots < 1:
            raise ConfigError("noise.shots", "must be >= 1")

    def rng(self, step: int) -> np.random.Generator:
        # keyed by step so both backends draw identical noise
        return np.random.default_rng([self.seed, step])


@dataclass(frozen=True)
class ProtocolConfig:
    chi: int
    k: int = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    truncation_abort_threshold: float = 0.5
    bond_cap: int = 4096

    def __post_init__(self):
        if self.chi < 1:
            raise ConfigError("chi", f"must be >= 1, got {self.chi}")
        if self.k is not None and self.k < 1:
            raise ConfigError("k", f"must be >= 1, got {self.k}")
        if not 0 <= self.truncation_abort_threshold <= 1:
            raise ConfigError("truncation_abort_threshold", "must lie in [0, 1]")

    def window(self, d: int) -> int:
        """Window length for local dimension ``d``, validating ``d**(k-1) >= chi``."""
        if self.k is None:
            return minimal_window(d, self.chi)
        if d ** (self.k - 1) < self.chi:
            raise ConfigError("k", f"d**(k-1) = {d ** (self.k - 1)} < chi = {self.chi}")
        return self.k


@dataclass(frozen=True)
class Disentangler:
    """Unitary on a ``k``-site window; ``eigenvalues`` are those of the estimate it was built from, descending."""

    step: int
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class StepRecord:
    step: int
    probability: float
    truncation: float
    residual_mass: float


@dataclass(frozen=True)
class TruncationLog:
    records: tuple = ()
    expected_steps: int = None

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([r.probability for r in self.records])

    @property
    def truncations(self) -> np.ndarray:
        return np.array([r.truncation for r in self.records])

    @property
    def complete(self) -> bool:
        steps = [r.step for r in self.records]
        return (
            self.expected_steps is not None
            and steps == list(range(1, self.expected_steps + 1))
        )


@dataclass(frozen=True)
class TomographyResult:
    config: ProtocolConfig
    n: int
    d: int
    k: int
    disentanglers: tuple
    eta: np.ndarray = field(repr=False)
    log: TruncationLog = None
    # simulator-side residual state of the last k-1 sites; never used by reconstruction
    residual: np.ndarray = field(default=None, repr=False)
    tensors: object = None

    @property
    def window_count(self) -> int:
        return len(self.disentanglers)

    @property
    def settings_count(self) -> int:
        return self.window_count * settings_per_window(self.d, self.k)

    def final_window_state(self) -> np.ndarray:
        """State of the last ``k`` sites as seen by the final window: ``U_last^dagger (|0> (x) eta)``.

        This is the gauge in which global data such as the GHZ relative phase
        is read off, since the final disentangler rotates the pure last
        window into ``|0 ... 0>``.
        """
        u = self.disentanglers[-1].matrix
        lifted = np.zeros(u.shape[0], dtype=np.complex128)
        lifted[: self.eta.shape[0]] = self.eta
        return u.conj().T @ lifted


# --------------------------------------------------------------------------
# window estimation


def _random_unit_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (g + g.conj().T)
    return h / np.linalg.norm(h, 2)


def estimate_window(rho: np.ndarray, d: int, noise: NoiseConfig, rng: np.random.Generator) -> DensityMatrix:
    """Simulated tomographic estimate of an exact window density matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    if noise.mode == "exact" or (noise.mode == "subspace_perturbation" and noise.epsilon == 0):
        return DensityMatrix.repaired(rho)
    if noise.mode == "subspace_perturbation":
        w, v = np.linalg.eigh(_random_unit_hermitian(rho.shape[0], rng))
        rot = (v * np.exp(1j * noise.epsilon * w)) @ v.conj().T
        return DensityMatrix.repaired(rot @ rho @ rot.conj().T)
    if d != 2:
        raise ShotsUnsupported(f"shot-noise tomography is implemented for qubits only, got d={d}")
    return DensityMatrix.repaired(pauli.estimate_density_matrix(rho, noise.shots, rng))


def estimate_rdm(state: DenseState, first: int, k: int, noise: NoiseConfig, step: int = None) -> DensityMatrix:
    """Tomographic estimate of the reduced state on sites ``first .. first+k-1``.

    ``step`` keys the noise stream and defaults to ``first``.
    """
    exact = reduced_density_matrix(state, first, k)
    if noise.mode == "exact":
        return exact
    if noise.mode == "shots" and state.d != 2:
        raise ShotsUnsupported(f"shot-noise tomography is implemented for qubits only, got d={state.d}")
    return estimate_window(exact.entries, state.d, noise, noise.rng(first if step is None else step))


# --------------------------------------------------------------------------
# disentangler


def _complete_basis(vectors: np.ndarray, dim: int) -> np.ndarray:
    """Extend orthonormal columns to a full basis using canonical vectors in order."""
    basis = [vectors[:, j] for j in range(vectors.shape[1])]
    for j in range(dim):
        if len(basis) == dim:
            break
        v = np.zeros(dim, dtype=np.complex128)
        v[j] = 1.0
        for _ in range(2):
            for b in basis:
                v = v - b * np.vdot(b, v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis.append(v / nv)
    return np.column_stack(basis)


def build_disentangler(rho: DensityMatrix, d: int, k: int, step: int = 0) -> Disentangler:
    """Unitary with rows ``<phi_1|, <phi_2|, ...``: eigenvectors of ``rho`` by descending eigenvalue.

    Row ``a * d**(k-1) + j`` is the ``(a, j)`` output, so the leading
    ``d**(k-1)`` eigenvectors land in the block where the window's first site
    reads ``|0>``. Eigenvectors with negligible weight are replaced by an
    orthonormal completion built from canonical basis vectors.
    """
    if not isinstance(rho, DensityMatrix):
        raise NotADensityMatrix("expected a DensityMatrix")
    dim = d**k
    if rho.dim != dim:
        raise NotADensityMatrix(f"dimension {rho.dim} != d**k = {dim}")
    w, v = np.linalg.eigh(rho.entries)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    kept = int(np.sum(w > RANK_TOL * w[0]))
    basis = _complete_basis(v[:, :kept], dim)
    return Disentangler(step, basis.conj().T, np.clip(w, 0.0, None))


# --------------------------------------------------------------------------
# protocol


def _record(step: int, p: float, dis: Disentangler, d: int, k: int, config: ProtocolConfig) -> StepRecord:
    trunc = max(0.0, 1.0 - p)
    rec = StepRecord(step, p, trunc, float(np.sum(dis.eigenvalues[d ** (k - 1):])))
    log.debug("step %d: p=%.12f residual=%.3e", step, p, rec.residual_mass)
    if trunc > config.truncation_abort_threshold:
        raise TruncationAbort(step, trunc, config.truncation_abort_threshold)
    return rec


def _boundary(residual: np.ndarray, d: int, noise: NoiseConfig, step: int) -> np.ndarray:
    """Estimate the pure boundary state from its own (noisy) tomography."""
    if residual.shape[0] == 1:
        return np.ones(1, dtype=np.complex128)
    rho = estimate_window(np.outer(residual, residual.conj()), d, noise, noise.rng(step))
    w, v = np.linalg.eigh(rho.entries)
    return v[:, -1]


def _check_sizes(n: int, d: int, config: ProtocolConfig) -> int:
    k = config.window(d)
    if k > n:
        raise ConfigError("k", f"window length {k} exceeds chain length {n}")
    if config.noise.mode == "shots" and d != 2:
        raise ShotsUnsupported(f"shot-noise tomography is implemented for qubits only, got d={d}")
    return k


def run_protocol(state: DenseState, config: ProtocolConfig) -> TomographyResult:
    """Run the sweep on a dense state vector."""
    n, d = state.n, state.d
    k = _check_sizes(n, d, config)
    steps = n - k + 1
    psi = state
    dis_list, records = [], []
    for i in range(1, steps + 1):
        rho = estimate_rdm(psi, i, k, config.noise, step=i)
        dis = build_disentangler(rho, d, k, step=i)
        psi = apply_window_unitary(psi, dis.matrix, i)
        psi, p = postselect_zero(psi, i)
        dis_list.append(dis)
        records.append(_record(i, p, dis, d, k, config))
    residual = psi.amplitudes.reshape(d**steps, -1)[0]
    residual = residual / np.linalg.norm(residual)
    eta = _boundary(residual, d, config.noise, steps + 1)
    return TomographyResult(
        config, n, d, k, tuple(dis_list), eta, TruncationLog(tuple(records), steps), residual
    )


def run_protocol_mps(state: MpsState, config: ProtocolConfig) -> TomographyResult:
    """Run the sweep on an MPS.

    The input is brought to right-canonical form, so the density matrix of
    the active window is just ``B B^dagger`` for the current block ``B``
    (rows: window sites, columns: bond to the untouched right part). After
    postselection the block keeps its last ``k-1`` sites and absorbs the next
    site tensor; no bond ever grows.
    """
    n, d = state.n, state.d
    k = _check_sizes(n, d, config)
    if state.max_bond > config.bond_cap:
        raise BondOverflow(f"bond dimension {state.max_bond} exceeds cap {config.bond_cap}")
    ts, norm = right_sweep_qr(absorbed_tensors(state))
    ts[0] = ts[0] / norm
    steps = n - k + 1
    block = np.ones((1, 1), dtype=np.complex128)
    sites_in_block, nxt = 0, 0
    dis_list, records = [], []
    keep = d ** (k - 1)
    for i in range(1, steps + 1):
        while sites_in_block < k:
            t = ts[nxt]
            block = np.einsum("ma,zab->mzb", block, t).reshape(-1, t.shape[2])
            sites_in_block += 1
            nxt += 1
        rho = estimate_window(block @ block.conj().T, d, config.noise, config.noise.rng(i))
        dis = build_disentangler(rho, d, k, step=i)
        block = dis.matrix @ block
        kept_block = block[:keep]
        p = float(np.vdot(kept_block, kept_block).real)
        if p < ZERO_PROB_TOL:
            raise ZeroProbability(f"outcome 0 on site {i} has probability {p:.3e}")
        block = kept_block / np.sqrt(p)
        sites_in_block = k - 1
        dis_list.append(dis)
        records.append(_record(i, min(p, 1.0), dis, d, k, config))
    residual = block[:, 0] / np.linalg.norm(block[:, 0])
    eta = _boundary(residual, d, config.noise, steps + 1)
    return TomographyResult(
        config, n, d, k, tuple(dis_list), eta, TruncationLog(tuple(records), steps), residual
    )
