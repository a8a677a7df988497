"""Certificates of MPS closeness and an empirical check of error propagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteLog
from .mps_core import RANK_TOL, dense_from_mps
from .reconstruction import phase_aligned_distance, reconstruct
from .seeding import derive_seed
from .states import random_mps
from .tomography import NoiseConfig, ProtocolConfig, TruncationLog, run_protocol


@dataclass(frozen=True)
class Certificate:
    truncations: tuple
    cumulative_bound: float
    threshold: float
    verdict: str
    noise: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_dict(self) -> dict:
        return {
            "truncations": list(self.truncations),
            "cumulative_bound": self.cumulative_bound,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "noise": dict(self.noise),
        }


def cumulative_bound(probabilities) -> float:
    """``1 - prod(p_i)``: probability that some postselection in the cascade fails."""
    p = np.clip(np.asarray(probabilities, dtype=np.float64), 0.0, 1.0)
    if np.any(p == 0):
        return 1.0
    return float(min(1.0, max(0.0, -np.expm1(np.sum(np.log(p))))))


def certify(log: TruncationLog, threshold: float, noise: NoiseConfig = None) -> Certificate:
    """Accept iff the cumulative truncation ``1 - prod(p_i)`` is at most ``threshold``."""
    if not log.complete:
        raise IncompleteLog(
            f"log holds steps {[r.step for r in log.records]}, expected 1..{log.expected_steps}"
        )
    bound = cumulative_bound(log.probabilities)
    echo = {}
    if noise is not None:
        echo = {"mode": noise.mode, "epsilon": noise.epsilon, "shots": noise.shots, "seed": noise.seed}
    return Certificate(
        tuple(float(t) for t in log.truncations),
        bound,
        float(threshold),
        "reject" if bound > threshold else "accept",
        echo,
    )


@dataclass(frozen=True)
class ErrorBoundReport:
    n: int
    epsilon: float
    chi: int
    distances: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    step_deviation: np.ndarray = field(repr=False)
    norm: str = "operator"

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    @property
    def median_distance(self) -> float:
        return float(np.median(self.distances))

    @property
    def bound_holds(self) -> bool:
        return bool(np.all(self.distances <= self.n**2 * self.epsilon))


def _isometry(result, step: int) -> np.ndarray:
    dim = result.d ** (result.k - 1)
    return result.disentanglers[step].matrix.conj().T[:, :dim]


def disentangler_deviation(true_result, est_result) -> np.ndarray:
    """Gauge-fixed operator-norm distance between true and estimated disentanglers, per step.

    Only the ``a = 0`` block of ``U^dagger`` enters the tensors, so each step
    compares the isometries ``Q_i = U_i^dagger (|0> (x) I)``. The bond gauge is
    fixed sequentially by weighted orthogonal Procrustes and carried into the
    next window; columns outside the true support are ignored.
    """
    d, k = true_result.d, true_result.k
    dim = d ** (k - 1)
    gauge = np.eye(dim, dtype=np.complex128)
    out = []
    for i in range(len(true_result.disentanglers)):
        q = np.kron(gauge, np.eye(d)) @ _isometry(true_result, i)
        q_est = _isometry(est_result, i)
        lam = true_result.disentanglers[i].eigenvalues[:dim]
        m = q_est.conj().T @ q * lam
        u, _, vh = np.linalg.svd(m)
        w = u @ vh
        support = lam > RANK_TOL * lam[0]
        out.append(float(np.linalg.norm((q - q_est @ w)[:, support], 2)))
        gauge = w
    return np.array(out)


def check_error_bound(
    n: int, epsilon: float, trials: int, seed: int, chi: int = 2, d: int = 2
) -> ErrorBoundReport:
    """Measure ``||psi - psi_est||`` against ``n**2 * epsilon`` on seeded random MPS.

    Trial ``t`` uses the same state and the same perturbation directions for
    every ``epsilon`` given the same ``seed``, so reports at different
    strengths are paired.
    """
    distances, ratios, deviations = [], [], []
    for t in range(trials):
        psi = dense_from_mps(random_mps(n, d, chi, derive_seed(seed, t, 0)))
        exact_cfg = ProtocolConfig(chi=chi, truncation_abort_threshold=1.0)
        noisy_cfg = ProtocolConfig(
            chi=chi,
            noise=NoiseConfig("subspace_perturbation", epsilon=epsilon, seed=derive_seed(seed, t, 1)),
            truncation_abort_threshold=1.0,
        )
        true_res = run_protocol(psi, exact_cfg)
        est_res = run_protocol(psi, noisy_cfg)
        dist = phase_aligned_distance(psi, reconstruct(est_res))
        distances.append(dist)
        ratios.append(dist / (n**2 * epsilon) if epsilon > 0 else 0.0)
        deviations.append(disentangler_deviation(true_res, est_res))
    return ErrorBoundReport(
        n, epsilon, chi, np.array(distances), np.array(ratios), np.mean(deviations, axis=0)
    )
