"""Dyadic torsion decompositions of curves and weighted restriction probes."""

from .curves import (Curve, FunctionCurve, OffspringShift, PolynomialCurve,
                     ShiftAveragedCurve, TaylorSplit, curve_from_dict, curve_to_dict,
                     eval_derivative, load_curve, moment_curve, offspring,
                     polynomial_curve, rescale_to_unit, simple_curve, taylor_split,
                     truncate)
from .decomposition import (DecompositionReport, DyadicCell, HGridPolicy,
                            full_decomposition, initial_decomposition,
                            secondary_decomposition, shrink_cells)
from .geometry import (GeometricResult, IdentityResidual, InjectivityCertificate,
                       TupleSample, certify_injectivity, check_dw_lemma,
                       check_geometric_inequality, check_jacobian_identity,
                       check_sylvester, fij, fij_derivative, iterated_integral,
                       jacobian, vandermonde)
from .levelsets import OscillationBudgetError, levelset_cover
from .minors import (WeightParams, all_minors, generalized_minor, minor, select_permutation,
                     torsion, weight)
from .restriction import (ExponentPair, GaussianBump, RegionSpec, admissible_q,
                          emit_region_polygon, extension_operator, knapp_scan,
                          min_epsilon_for_full_range, weighted_restriction_norm)

__version__ = "0.1.0"
