"""Parabolic Lame kernels, space-time potentials, doubly orthogonal bases
and regularized reconstruction for the lateral Cauchy problem."""

from .errors import (AccuracyError, ConditioningError, ConfigurationError,
                     DegenerateGeometryError, DomainError, InvariantViolation,
                     ParlameError, SingularityError)
from .kernels import (BoundaryOperatorSpec, GaussianBump, LameParams,
                      apply_boundary_op, heat_kernel, heat_kernel_derivs,
                      lame_fundamental, lame_fundamental_space_derivs,
                      lame_fundamental_time_deriv, verify_fundamental_property)
from .geometry import (Annulus, CapDomain, Cylinder, Disk, Interval,
                       LateralPatch, NestedCylinders, QuadratureSpec,
                       build_quadrature, classify_point)
from .potentials import (DensityField, GreenData, double_layer,
                         green_reconstruct, initial_potential, single_layer,
                         volume_potential)
from .dictionary import (Dictionary, SourcePoint, evaluate_field, gram_pair,
                         make_ring_dictionary)
from .dbo import DboBasis, build_dbo, expand, project_l2
from .carleman import (CauchyData, Reconstruction, assemble_f_tilde,
                       carleman_kernel, extend_data, reconstruct,
                       solvability_diagnostic)

__version__ = "0.1.0"
