"""Numerical playground for cocycles over nilpotent groups.

Exact polynomial group laws from algebra presentations, Mal'cev lattice
digit arithmetic, word metrics and asymptotic cone geometry, measurable
couplings with integrable cocycles, and Monte Carlo experiments probing
the derivative map of such cocycles.
"""

from .algebra import (
    BUILTIN_ALGEBRAS,
    Gradation,
    NilpotentAlgebraSpec,
    StructuralError,
    ValidationReport,
    gradation,
    lower_central_series,
    validate_algebra,
)
from .bch import (
    GroupLaw,
    GroupPoint,
    NilpotentGroup,
    bch_product,
    commutator,
    get_group,
    inverse,
    point,
    power,
)
from .coupling import (
    AutomorphismSpec,
    CocycleSample,
    CouplingSpec,
    alpha,
    beta,
    builtin_coupling,
    builtin_twist,
    coupling_from_json,
    domain_samples,
    induced_action,
    integrability_estimate,
    ks_statistic,
    make_coupling,
    reduce_to_domain,
    sample_domain,
    seed_lineage,
    validate_automorphism,
    verify_coupling,
)
from .derivative import (
    ConvergenceReport,
    DefectReport,
    GeneratorImageTable,
    IterateReport,
    KappaReport,
    MeanAbelianization,
    PansuDerivative,
    RecurrenceReport,
    SubadditiveReport,
    arbitrary_element_experiment,
    build_phi,
    cocycle_ergodic_average,
    gamma_sequence,
    homomorphism_check,
    inverse_check,
    iterate_diagnostics,
    kappa_grid,
    main_theorem_experiment,
    mean_abelianization,
    phi_apply,
    recurrence_search,
    subadditive_growth_probe,
)
from .geometry import (
    Factorization,
    FactorizationError,
    dilation,
    evaluate_factorization,
    generating_set,
    horizontal_factorization,
    pi_ab,
    pi_com,
    proxy_distance,
    quasi_norm_m,
    scl,
)
from .kernels import active_backend, available_backends, set_backend
from .wordmetric import (
    BallProfile,
    GuivarchConstants,
    LatticeSpec,
    approx_cc_distance,
    ball_profile,
    builtin_lattice,
    guivarch_constants,
    round_to_lattice,
    standard_lattice,
    word_norm_bfs,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_ALGEBRAS",
    "AutomorphismSpec",
    "BallProfile",
    "CocycleSample",
    "ConvergenceReport",
    "CouplingSpec",
    "DefectReport",
    "Factorization",
    "FactorizationError",
    "GeneratorImageTable",
    "Gradation",
    "GroupLaw",
    "GroupPoint",
    "GuivarchConstants",
    "IterateReport",
    "KappaReport",
    "LatticeSpec",
    "MeanAbelianization",
    "NilpotentAlgebraSpec",
    "NilpotentGroup",
    "PansuDerivative",
    "RecurrenceReport",
    "StructuralError",
    "SubadditiveReport",
    "ValidationReport",
    "active_backend",
    "alpha",
    "approx_cc_distance",
    "arbitrary_element_experiment",
    "available_backends",
    "ball_profile",
    "bch_product",
    "beta",
    "build_phi",
    "builtin_coupling",
    "builtin_lattice",
    "builtin_twist",
    "cocycle_ergodic_average",
    "commutator",
    "coupling_from_json",
    "dilation",
    "domain_samples",
    "evaluate_factorization",
    "gamma_sequence",
    "generating_set",
    "get_group",
    "gradation",
    "guivarch_constants",
    "homomorphism_check",
    "horizontal_factorization",
    "induced_action",
    "integrability_estimate",
    "inverse",
    "inverse_check",
    "iterate_diagnostics",
    "kappa_grid",
    "ks_statistic",
    "lower_central_series",
    "main_theorem_experiment",
    "make_coupling",
    "mean_abelianization",
    "phi_apply",
    "pi_ab",
    "pi_com",
    "point",
    "power",
    "proxy_distance",
    "quasi_norm_m",
    "recurrence_search",
    "reduce_to_domain",
    "round_to_lattice",
    "sample_domain",
    "scl",
    "seed_lineage",
    "set_backend",
    "standard_lattice",
    "subadditive_growth_probe",
    "validate_algebra",
    "validate_automorphism",
    "verify_coupling",
    "word_norm_bfs",
]
