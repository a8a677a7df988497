"""Direct tomography of matrix product states by sequential disentangling."""

__version__ = "0.1.0"

from .certification import Certificate, certify, check_error_bound
from .mps_core import (
    DenseState,
    DensityMatrix,
    MpsState,
    apply_window_unitary,
    dense_from_mps,
    inner_product,
    mps_from_dense,
    postselect_zero,
    reduced_density_matrix,
    schmidt_spectrum,
)
from .reconstruction import amplitude, extract, fidelity, reconstruct, to_mps
from .states import StateSpec, build, build_mps, perturb
from .tomography import NoiseConfig, ProtocolConfig, run_protocol, run_protocol_mps

__all__ = [
    "Certificate",
    "DenseState",
    "DensityMatrix",
    "MpsState",
    "NoiseConfig",
    "ProtocolConfig",
    "StateSpec",
    "amplitude",
    "apply_window_unitary",
    "build",
    "build_mps",
    "certify",
    "check_error_bound",
    "dense_from_mps",
    "extract",
    "fidelity",
    "inner_product",
    "mps_from_dense",
    "perturb",
    "postselect_zero",
    "reconstruct",
    "reduced_density_matrix",
    "run_protocol",
    "run_protocol_mps",
    "schmidt_spectrum",
    "to_mps",
]
