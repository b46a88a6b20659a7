"""Principal Dirichlet frequency of p-sub-Laplacians on masked lattices."""

__version__ = "0.1.0"

from .caccioppoli import (
    CaccioppoliReport,
    bump_function,
    caccioppoli_constant,
    caccioppoli_sides,
    caccioppoli_sweep,
    cutoff_corpus,
    random_cutoff,
    verify_caccioppoli,
)
from .domain_grid import (
    DomainError,
    GridDomain,
    GridFunction,
    inner,
    integrate,
    is_subdomain,
    lp_norm,
    make_box_domain,
    make_mask_domain,
    random_positive_function,
)
from .eigensolver import (
    EigenPair,
    SolverOptions,
    VerificationReport,
    barta_lower_bound,
    domain_monotonicity_check,
    linear_principal_oracle,
    nodal_ratio_residual,
    proportionality_defect,
    scaling_check,
    simplicity_check,
    solve_principal,
    stationarity_residual,
    uniqueness_check,
)
from .p_sub_laplacian import (
    SolutionClass,
    SolutionKind,
    apply_operator,
    classify_solution,
    dirichlet_energy,
    rayleigh_quotient,
    weak_form_residual,
)
from .picone import PiconeReport, picone_L, picone_R, verify_picone
from .vector_fields import (
    FamilyError,
    HorizontalVectorField,
    VectorFieldFamily,
    apply_adjoint_field,
    apply_field,
    custom_family,
    dilate_domain,
    horizontal_adjoint_divergence,
    horizontal_gradient,
    make_family,
)
