"""Tau functions of two-dimensional Dyson gases.

Submodules
----------
schur          Young diagrams, p_k(t), Schur functions
canonical      Schur, Toeplitz and Monte Carlo routes to tau_N; Hirota residual
grand          Fredholm determinants for the image-charge ensembles
fock           finite-window free fermions and Wick's theorem
dispersionless harmonic moments, F0 energies, large-N check
"""

from .canonical import (
    AliasingError,
    ConvergenceWarning,
    MeasureSpec,
    ZeroTauError,
    hirota_residual,
    partition_ZN,
    tau_gaussian_schur,
    tau_integral_mc,
    tau_toeplitz,
    unitary_integral_quadrature,
)
from .dispersionless import (
    ChargeDensity,
    DomainSpec,
    F0_energy,
    F0_tilde_fatslit,
    asymptotic_check_gaussian,
    fatslit_moments,
    harmonic_moments,
)
from .fock import FockWindow, tau_operator_vs_integral, vev_fields_product, wick_determinant
from .grand import (
    DiskEnsembleSpec,
    HalfPlaneEnsembleSpec,
    fredholm_det_circle,
    fredholm_det_halfplane,
    grand_expansion_circle,
)
from .logvalue import LogValue, log_det
from .schur import YoungDiagram, elementary_p, pochhammer, schur
from .times import HalfTimeVector, TimeVector, xi

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
