"""Structured low-rank k-t reconstruction of exponential image series.

Recovers a 2-D image time series whose pixels decay as sums of damped
exponentials from undersampled Fourier (k-t) measurements, by completing
a multifold Toeplitz lifted matrix with Schatten-p IRLS and FFT hybrid
(circular-spatial, linear-temporal) operators.
"""

from .core import Grid, ImageSeries, KtVolume, dft2_forward, dft2_inverse
from .lifting import (
    AnnihilationCertificate,
    FilterSpec,
    LiftedMatrix,
    annihilation_certificate,
    apply_lifted_adjoint,
    build_lifted,
)
from .solver import SolverConfig, SolveReport, WeightSet, irls_solve, schatten_cost
from .simulate import (
    CoilSet,
    Measurements,
    Phantom,
    PhantomSpec,
    SamplingMask,
    make_coils,
    make_mask,
    make_phantom,
    simulate_measurements,
)
from .mapping import T2Map, fit_t2, nrmse, recon_ktlowrank, recon_zerofill, snr_db

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "ImageSeries",
    "KtVolume",
    "dft2_forward",
    "dft2_inverse",
    "FilterSpec",
    "LiftedMatrix",
    "AnnihilationCertificate",
    "build_lifted",
    "apply_lifted_adjoint",
    "annihilation_certificate",
    "SolverConfig",
    "SolveReport",
    "WeightSet",
    "irls_solve",
    "schatten_cost",
    "PhantomSpec",
    "Phantom",
    "CoilSet",
    "SamplingMask",
    "Measurements",
    "make_phantom",
    "make_coils",
    "make_mask",
    "simulate_measurements",
    "T2Map",
    "fit_t2",
    "snr_db",
    "nrmse",
    "recon_zerofill",
    "recon_ktlowrank",
    "__version__",
]
