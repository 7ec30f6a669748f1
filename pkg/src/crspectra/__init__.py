"""First sub-Laplacian eigenvalue on CR spheres under conformal changes of the contact form."""

from .balance import (
    BalanceError,
    BalancePoint,
    DegenerateMeasure,
    NoConvergence,
    WeightedMeasure,
    balanced_test_energy,
    barycenter,
    solve_balance,
)
from .geometry import (
    OffSphereError,
    contact_form,
    horizontal_energy_density,
    horizontal_project,
    pole,
    random_sphere_points,
    random_unitary,
    reeb_vector,
)
from .moebius import (
    CrAutomorphism,
    PoleSingularity,
    apply,
    cayley_to_siegel,
    cayley_to_sphere,
    compose,
    conjugated_dilation,
    pullback_factor,
    pullback_residual,
    unitary_to_pole,
)
from .polynomials import (
    BidegreeLabel,
    PolynomialParseError,
    RealPolynomial,
    bidegree_multiplicity,
    monomial_basis,
    parse_polynomial,
    reeb_derivative,
    round_laplacian_consistency,
    subelliptic_eigenvalue,
)
from .quadrature import (
    IntegrationError,
    QuadratureRule,
    integrate,
    monte_carlo_rule,
    product_rule_s3,
    sphere_volume,
)
from .spectral import (
    Constant,
    ExpPoly,
    Extremal,
    PolyPositive,
    SpectralError,
    SpectralProblem,
    SpectralResult,
    assemble,
    invariant_report,
    rayleigh_quotient,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "BalanceError",
    "BalancePoint",
    "BidegreeLabel",
    "Constant",
    "CrAutomorphism",
    "DegenerateMeasure",
    "ExpPoly",
    "Extremal",
    "IntegrationError",
    "NoConvergence",
    "OffSphereError",
    "PoleSingularity",
    "PolyPositive",
    "PolynomialParseError",
    "QuadratureRule",
    "RealPolynomial",
    "SpectralError",
    "SpectralProblem",
    "SpectralResult",
    "WeightedMeasure",
    "apply",
    "assemble",
    "balanced_test_energy",
    "barycenter",
    "bidegree_multiplicity",
    "cayley_to_siegel",
    "cayley_to_sphere",
    "compose",
    "conjugated_dilation",
    "contact_form",
    "horizontal_energy_density",
    "horizontal_project",
    "integrate",
    "invariant_report",
    "monomial_basis",
    "monte_carlo_rule",
    "parse_polynomial",
    "pole",
    "product_rule_s3",
    "pullback_factor",
    "pullback_residual",
    "random_sphere_points",
    "random_unitary",
    "rayleigh_quotient",
    "reeb_derivative",
    "reeb_vector",
    "round_laplacian_consistency",
    "solve",
    "solve_balance",
    "sphere_volume",
    "subelliptic_eigenvalue",
    "unitary_to_pole",
]
