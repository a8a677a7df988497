"""Seeded construction of target states: GHZ, W, product, random MPS, Haar-random."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from scipy.stats import unitary_group

from .errors import InvalidSpec
from .mps_core import (
    DenseState,
    MpsState,
    absorbed_tensors,
    check_dense_size,
    dense_from_mps,
    left_sweep_qr,
)

FAMILIES = ("ghz", "w", "product", "random_mps", "haar_random")


@dataclass(frozen=True)
class StateSpec:
    """Description of a target state.

    Only the parameters of the chosen ``family`` are read: ``a, b, phi`` for
    GHZ, ``phases`` for W (defaults to all zeros), ``digits`` for product,
    ``chi, seed`` for random_mps and ``seed`` for haar_random.
    """

    family: str
    n: int
    d: int = 2
    a: complex = 2**-0.5
    b: complex = 2**-0.5
    phi: float = 0.0
    phases: tuple = field(default=None)
    digits: str = None
    chi: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpec(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1 or self.d < 2:
            raise InvalidSpec(f"need n >= 1 and d >= 2, got n={self.n}, d={self.d}")
        if self.family == "ghz" and abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1) > 1e-12:
            raise InvalidSpec("ghz amplitudes must satisfy |a|^2 + |b|^2 = 1")
        if self.family == "w":
            phases = tuple(self.phases) if self.phases is not None else (0.0,) * self.n
            if len(phases) != self.n:
                raise InvalidSpec(f"w needs {self.n} phases, got {len(phases)}")
            object.__setattr__(self, "phases", phases)
        if self.family == "product":
            digits = self.digits if self.digits is not None else "0" * self.n
            if len(digits) != self.n or any(not c.isdigit() or int(c) >= self.d for c in digits):
                raise InvalidSpec(f"product digits {digits!r} are not {self.n} base-{self.d} digits")
            object.__setattr__(self, "digits", digits)
        if self.family == "random_mps" and self.chi < 1:
            raise InvalidSpec("random_mps needs chi >= 1")

    @classmethod
    def from_mapping(cls, data: dict) -> "StateSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown state fields {sorted(unknown)}")
        data = dict(data)
        for key in ("a", "b"):
            if key in data:
                data[key] = _as_complex(data[key])
        if data.get("phases") is not None:
            data["phases"] = tuple(float(p) for p in data["phases"])
        if data.get("digits") is not None:
            data["digits"] = str(data["digits"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc

    def to_mapping(self) -> dict:
        out = {"family": self.family, "n": self.n, "d": self.d}
        if self.family == "ghz":
            out.update(a=_jsonable(self.a), b=_jsonable(self.b), phi=self.phi)
        elif self.family == "w":
            out["phases"] = list(self.phases)
        elif self.family == "product":
            out["digits"] = self.digits
        elif self.family == "random_mps":
            out.update(chi=self.chi, seed=self.seed)
        else:
            out["seed"] = self.seed
        return out


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(value[0], value[1])
    return complex(value)


def _jsonable(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def build(spec: StateSpec) -> DenseState:
    """Dense state vector for ``spec``."""
    n, d = spec.n, spec.d
    check_dense_size(n, d)
    if spec.family == "haar_random":
        rng = np.random.default_rng(spec.seed)
        return DenseState.from_vector(n, d, _complex_gaussian(rng, d**n))
    if spec.family == "random_mps":
        return dense_from_mps(build_mps(spec))
    psi = np.zeros((d,) * n, dtype=np.complex128)
    if spec.family == "ghz":
        psi[(0,) * n] = spec.a
        psi[(1,) * n] += np.exp(1j * spec.phi) * spec.b
    elif spec.family == "w":
        for i, ph in enumerate(spec.phases):
            idx = [0] * n
            idx[i] = 1
            psi[tuple(idx)] = np.exp(1j * ph) / np.sqrt(n)
    else:
        psi[tuple(int(c) for c in spec.digits)] = 1.0
    return DenseState.from_vector(n, d, psi)


def build_mps(spec: StateSpec) -> MpsState:
    """MPS form of ``spec`` without ever forming a dense vector."""
    n, d = spec.n, spec.d
    fam = spec.family
    if fam == "haar_random":
        raise InvalidSpec("haar_random has no compact MPS form")
    if fam == "product":
        ts = []
        for c in spec.digits:
            t = np.zeros((d, 1, 1), dtype=np.complex128)
            t[int(c), 0, 0] = 1.0
            ts.append(t)
        return MpsState(n, d, tuple(ts), gauge="left-canonical")
    if fam == "random_mps":
        return random_mps(n, d, spec.chi, spec.seed)
    if n == 1:
        t = np.zeros((d, 1, 1), dtype=np.complex128)
        if fam == "ghz":
            t[0, 0, 0], t[1, 0, 0] = spec.a, np.exp(1j * spec.phi) * spec.b
        else:
            t[1, 0, 0] = np.exp(1j * spec.phases[0])
        return MpsState(1, d, (t,))
    ts = []
    for i in range(n):
        t = np.zeros((d, 2, 2), dtype=np.complex128)
        if fam == "ghz":
            t[0, 0, 0] = 1.0
            t[1, 1, 1] = 1.0
        else:
            # bond 0: no excitation placed yet, bond 1: excitation placed
            t[0, 0, 0] = t[0, 1, 1] = 1.0
            t[1, 0, 1] = np.exp(1j * spec.phases[i]) / np.sqrt(n)
        ts.append(t)
    if fam == "ghz":
        left = np.array([1.0, 0.0])
        ts[0] = ts[0][:, :1, :] + ts[0][:, 1:, :]
        ts[-1] = np.einsum("zab,b->za", ts[-1], [spec.a, np.exp(1j * spec.phi) * spec.b])[:, :, None]
        return MpsState(n, d, tuple(ts))
    left, right = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    return MpsState(n, d, tuple(ts), left=left, right=right)


def random_mps(n: int, d: int, chi: int, seed) -> MpsState:
    """Gaussian random tensors, left-canonicalized and normalized.

    Bond ``i`` has dimension ``min(chi, d**i, d**(n-i))`` so no bond is
    larger than the Schmidt rank it can support.
    """
    rng = np.random.default_rng(seed)
    bonds = [1] + [min(chi, d**i, d ** (n - i)) for i in range(1, n)] + [1]
    ts = [_complex_gaussian(rng, (d, bonds[i], bonds[i + 1])) for i in range(n)]
    ts, norm = left_sweep_qr(ts)
    ts[-1] = ts[-1] / norm
    return MpsState(n, d, tuple(ts), gauge="left-canonical")


def perturb(state: DenseState, delta: float, seed) -> DenseState:
    """Return ``(psi + delta * g) / norm`` with ``g`` a seeded uniformly random unit vector."""
    if not 0 <= delta <= 1:
        raise InvalidSpec(f"delta must lie in [0, 1], got {delta}")
    if delta == 0:
        return state
    rng = np.random.default_rng(seed)
    g = _complex_gaussian(rng, state.amplitudes.shape[0])
    g /= np.linalg.norm(g)
    return DenseState.from_vector(state.n, state.d, state.amplitudes + delta * g)


def scramble_window(state: MpsState, first: int, width: int, depth: int, seed) -> MpsState:
    """Apply ``depth`` brickwork layers of Haar-random two-site gates on sites ``first .. first+width-1``.

    Gates are split back by exact SVD, so bonds inside the window grow up to
    ``d**(width/2)`` times the input bond. Used as a far-from-MPS control at
    sizes where no dense vector fits in memory.
    """
    if first < 1 or width < 2 or first + width - 1 > state.n:
        raise InvalidSpec(f"window [{first}, {first + width - 1}] does not fit in {state.n} sites")
    rng = np.random.default_rng(seed)
    d = state.d
    ts = absorbed_tensors(state)
    lo = first - 1
    for layer in range(depth):
        for i in range(lo + layer % 2, lo + width - 1, 2):
            u = unitary_group.rvs(d * d, random_state=rng)
            theta = np.einsum("zab,ybc->azyc", ts[i], ts[i + 1])
            cl, cr = theta.shape[0], theta.shape[3]
            theta = np.einsum("pq,aqc->apc", u, theta.reshape(cl, d * d, cr)).reshape(cl * d, d * cr)
            uu, s, vh = np.linalg.svd(theta, full_matrices=False)
            keep = max(1, int(np.sum(s > 1e-14 * s[0])))
            ts[i] = uu[:, :keep].reshape(cl, d, keep).transpose(1, 0, 2)
            ts[i + 1] = (s[:keep, None] * vh[:keep]).reshape(keep, d, cr).transpose(1, 0, 2)
    ts, norm = left_sweep_qr(ts)
    ts[-1] = ts[-1] / norm
    return MpsState(state.n, d, tuple(ts), gauge="left-canonical")
