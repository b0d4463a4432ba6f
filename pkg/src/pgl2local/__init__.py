"""Spectral transforms of Whittaker weights for PGL(2) over R and Q_p, with a small global harness.

Modules:

specfun       Gamma family, 2F1, K-Bessel, Dirichlet characters, quadrature.
arch_local    real-place transforms h_vee, h_sharp, H, w and their inversions.
padic_local   p-adic gamma factors and the same transforms computed exactly.
global_demo   shifted convolution sums, spectral data, scaling experiments.
cli           the ``pgl2local`` command.
"""

from .arch_local import (
    ArchCharacter,
    ArchRep,
    BivariateWeight,
    ContourSpec,
    DiagonalWeight,
    TestFunction,
    H_of,
    appendix_check,
    gamma_quotient_G,
    h_flat,
    h_sharp,
    h_vee,
    invert_H,
    invert_h,
    kernel_K,
    motohashi_check,
    motohashi_tilde,
    residue_kernel,
    w_eta_chi,
)
from .padic_local import (
    LaurentRational,
    PadicCharacter,
    PadicRep,
    StepFunction,
    h_sharp_padic,
    h_vee_padic,
)
from .specfun import QuadratureSpec

__all__ = [
    "ArchCharacter", "ArchRep", "BivariateWeight", "ContourSpec", "DiagonalWeight", "TestFunction",
    "H_of", "appendix_check", "gamma_quotient_G", "h_flat", "h_sharp", "h_vee", "invert_H", "invert_h",
    "kernel_K", "motohashi_check", "motohashi_tilde", "residue_kernel", "w_eta_chi",
    "LaurentRational", "PadicCharacter", "PadicRep", "StepFunction", "h_sharp_padic", "h_vee_padic",
    "QuadratureSpec",
]
__version__ = "0.1.0"
