"""Optimal transport and inner-product Gromov-Wasserstein alignment of Gaussians."""

from .cluster import (
    ClusterResult,
    DistanceMatrix,
    adjusted_rand_index,
    cka,
    classical_mds,
    kmeans_igw,
    mds_stress,
    pairwise_igw_matrix,
    triangle_violations,
)
from .errors import (
    ConstraintError,
    ConvergenceError,
    DimensionError,
    EmptyInputError,
    GaussAlignError,
    InvalidInputError,
    NotInvertibleError,
    NotPSDError,
    UncertifiedWarning,
    UnsupportedInputError,
)
from .gaussian import (
    Gaussian,
    SpectralForm,
    WeightedCollection,
    fit_gaussian,
    load_entity,
    load_gaussian,
    pad_to_dim,
    save_gaussian,
    spectral_form,
)
from .igw import (
    GammaSolution,
    GaussianCoupling,
    IgwBounds,
    gamma_objective,
    gbw_distance,
    igw_barycenter,
    igw_bounds,
    igw_closed_form,
    igw_coupling,
    igw_distance_rgd,
)
from .manifold import (
    BlockFactor,
    SolverConfig,
    SospReport,
    check_sosp,
    rgd_maximize,
    rtr_minimize,
)
from .multimarginal import (
    MultiCoupling,
    barycenter_from_mm,
    glued_coupling,
    mm_igw_closed_form,
    mm_ot_solve,
)
from .spectra import SpectralDecomposition, is_psd, sqrt_psd, sym_eig
from .transport import (
    AffineMap,
    bw_distance,
    bw_map,
    displacement_interpolation,
    w2_barycenter_fixed_point,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
