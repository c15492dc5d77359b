"""Curved-mesh finite elements for the Ventcel eigenvalue problem.

The library solves the Laplace eigenvalue problem with a Ventcel
(Laplace-Beltrami) boundary condition on smooth 2D domains, using
simplicial meshes curved to geometric order r and Lagrange elements of
degree k, and measures eigenpair errors on the physical domain through
the exact element map.
"""

from .errors import (
    BadParameter,
    BadSequence,
    InnerSolveFailure,
    NoConvergence,
    NotConverged,
    ParseError,
    SingularGeometry,
    SingularGram,
    UnsupportedDegree,
    UnsupportedFeature,
    VentcelError,
)
from .geometry import Disk, SmoothDomain, StarCurve, make_domain
from .refelem import LagrangeBasis, QuadratureRule, lagrange_nodes, quadrature
from .meshing import (
    AffineMesh,
    CurvedMesh,
    curve_mesh,
    generate_star_mesh,
    read_msh,
    write_msh,
)
from .lift import ExactMap, boundary_weight
from .assembly import FESpace, assemble_a, assemble_m, build_fespace
from .eigsolve import EigenResult, solve_generalized, solve_spd
from .analysis import (
    HarmonicSpace,
    StudyConfig,
    StudyReport,
    analytic_eigenvalues_disk,
    eigenvalue_error,
    eoc,
    lifted_h1_error,
    lifted_l2_error,
    run_study,
)

__all__ = [
    "AffineMesh",
    "BadParameter",
    "BadSequence",
    "CurvedMesh",
    "Disk",
    "EigenResult",
    "ExactMap",
    "FESpace",
    "HarmonicSpace",
    "InnerSolveFailure",
    "LagrangeBasis",
    "NoConvergence",
    "NotConverged",
    "ParseError",
    "QuadratureRule",
    "SingularGeometry",
    "SingularGram",
    "SmoothDomain",
    "StarCurve",
    "StudyConfig",
    "StudyReport",
    "UnsupportedDegree",
    "UnsupportedFeature",
    "VentcelError",
    "analytic_eigenvalues_disk",
    "assemble_a",
    "assemble_m",
    "boundary_weight",
    "build_fespace",
    "curve_mesh",
    "eigenvalue_error",
    "eoc",
    "generate_star_mesh",
    "lagrange_nodes",
    "lifted_h1_error",
    "lifted_l2_error",
    "make_domain",
    "quadrature",
    "read_msh",
    "run_study",
    "solve_generalized",
    "solve_spd",
    "write_msh",
]

__version__ = "0.1.0"
