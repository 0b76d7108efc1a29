"""Numerics for number scaling driven by a scalar field ``theta``.

Values at a point ``x`` are compared with values at a reference ``ref``
through the factor ``exp(theta(x) - theta(ref))``.  The package provides
the factors themselves, scaled arithmetic, scaled line elements and curve
lengths, minimum scaled-length curves, classical motion under a scaled
action, wave-packet expectation values, and distance profiles around
``theta = K / r`` holes.
"""

__version__ = "0.1.0"

from .errors import (ConvergenceError, DivergenceError, DomainError, SingularityError,  # noqa: E402
                     SpecParseError, StencilError, StructureMismatchError, ThetaScaleError)
from .fields import (ConstantTheta, LinearTheta, Point, RadialTheta, TabulatedTheta,  # noqa: E402
                     ThetaField, TimeLinearTheta, TimeQuadraticTheta, VectorField,
                     lightcone_scaling, parse_point, parse_theta, parse_vector_field,
                     path_scaling_factor, retarded_time, scaling_factor)
from .quadrature import QuadratureConfig  # noqa: E402
from .scaled_numbers import (ScaledStructure, ScaledValue, scaled_apply_analytic,  # noqa: E402
                             scaled_div, scaled_mul)
from .geometry import (FRW, CausalClass, Euclidean, Minkowski, causal_class,  # noqa: E402
                       line_element, parse_metric, scaled_line_element, scaled_metric_tensor)
from .curves import (PolynomialCurve, Polyline, ScaledLength, Segment, curve_length,  # noqa: E402
                     curve_length_scaled, curve_length_scaled_path, parse_curve,
                     transfer_length)
from .geodesics import GeodesicConfig, GeodesicResult, distance, el_residual, geodesic  # noqa: E402
from .dynamics import (Lagrangian, Trajectory, covariant_derivative, integrate_eom,  # noqa: E402
                       momentum_apply, scaled_action)
from .quantum import (GaussianPacket, SampledPacket, parse_packet, scaled_norm,  # noqa: E402
                      scaled_position, transfer_expectation)
from .holes import HoleSpec, hole_profile  # noqa: E402
