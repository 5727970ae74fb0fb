"""Dynamical invariants of polynomial diffeomorphisms of C^2.

Composed Henon-type maps: Green functions with certified error bounds,
periodic-orbit censuses, invariant-manifold charts, homoclinic webs,
Lyapunov/dimension estimates and maximal-entropy diagnostics for real
maps.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateParameterError, EmptyEnsembleError,
                     HenonLabError, IllConditionedError, InternalInvariantError,
                     MagnitudeOverflowError, NearResonanceError,
                     NotApplicableError, NotASaddleError, NotRealMapError,
                     SaturationError)
from .green import (AffineSlice, FiltrationCertificate, GreenEstimate,
                    OrbitStatus, RasterGrid, bounded_orbit_test,
                    filtration_radius, green_minus, green_plus, green_values,
                    raster_green, slice_measure_raster)
from .manifolds import (ChartSlice, HomoclinicPoint, ManifoldChart, chart_eval,
                        chart_points, find_intersections,
                        find_intersections_detailed, green_on_chart, linearize)
from .mapcore import (ClassicalHenon, ComposedMap, ElementaryFactor, Point2,
                      TauConjugacy, apply, apply_inverse, as_point, derivative,
                      derivative_inverse, eig2, from_classical_henon,
                      inverse_composed, iterate, make_map, orbit_derivative)
from .measure import (DimensionEstimates, LyapunovEstimates, MaxEntropyReport,
                      SaddleEnsemble, Verdict, build_ensemble,
                      dimension_estimates, lyapunov_estimates,
                      max_entropy_report, young_dimension)
from .periodic import (CompletenessAudit, OrbitClass, PeriodicOrbit,
                       classify_orbit, completeness_audit,
                       find_periodic_orbits, find_periodic_orbits_detailed,
                       realness_verdict)

__all__ = [name for name in dir() if not name.startswith("_")]
