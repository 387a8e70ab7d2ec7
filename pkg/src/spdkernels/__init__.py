"""Positive definite and strictly positive definite kernels on compact
two-point homogeneous spaces and their products."""
from .gram_interp import (
    Classification,
    KernelInterpolator,
    SpectrumReport,
    assemble_gram,
    degeneracy_witness,
    fit,
    evaluate,
    verify_pd,
)
from .kernels import (
    ConvolutionalScheme,
    GeneralScheme,
    Geometric,
    PowerDecay,
    ProductGeometric,
    ProductZonalScheme,
    ZonalScheme,
    kernel_eval,
    kernel_matrix,
    parse_spec,
    zonal_eval,
)
from .manifold import make_manifold, sample_points
from .pd_checker import pd_convolutional, spd_scheme
from .spectral_sets import ProductSpectralSet, SpectralSet, Status, Verdict

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "ConvolutionalScheme",
    "GeneralScheme",
    "Geometric",
    "KernelInterpolator",
    "PowerDecay",
    "ProductGeometric",
    "ProductSpectralSet",
    "ProductZonalScheme",
    "SpectralSet",
    "SpectrumReport",
    "Status",
    "Verdict",
    "ZonalScheme",
    "assemble_gram",
    "degeneracy_witness",
    "evaluate",
    "fit",
    "kernel_eval",
    "kernel_matrix",
    "make_manifold",
    "parse_spec",
    "pd_convolutional",
    "sample_points",
    "spd_scheme",
    "verify_pd",
    "zonal_eval",
]
