"""Direct and inverse scattering for steplike Jacobi operators with periodic
backgrounds."""

from .background import build_background, orthogonality_table, weight_rho
from .direct import (
    discrete_spectrum,
    jost,
    kernel_from_jost,
    scattering_data,
    scattering_matrix,
    spectrum_partition,
    validate_scattering,
    virtual_levels,
    wronskian,
)
from .glm import glm_kernel, glm_kernel_table, glm_solve, inverse, reconstruct
from .steplike import SteplikeSpec, dense_eigenvalues, make_spec, spec_from_json

__version__ = "0.1.0"
