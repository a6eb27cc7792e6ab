"""Riemannian-metric observer design toolkit."""

from .benchmarks import BenchmarkSpec, by_name, circle_output, harmonic_oscillator, linear_quadratic, planar_family
from .conditions import (ConditionReport, DistributionBasis, check_a2, check_a3_nullity,
                         check_geodesic_monotonicity_direct, check_submersion, distributions, sff_blocks)
from .construction import (OrthComplementMap, a2_sufficiency_lhs, build_product_metric, p_mod, schur_py,
                           tune_product_parameters)
from .errors import *  # noqa: F401,F403
from .fields import ConstantMetric, MetricField, PullbackMetric, SmoothMap, SystemModel
from .geodesics import Geodesic, geodesic_bvp_distance, geodesic_ivp
from .geometry import (christoffel, curvature_component, lie_derivative_metric, riemannian_gradient,
                       riemannian_hessian, second_fundamental_form)
from .observer import (GapFunction, ObserverConfig, ObserverRun, contraction_certificate, gain_margin_probe,
                       gap_sq_distance, observer_field, simulate)
from .regions import Region, box

__version__ = "0.1.0"
