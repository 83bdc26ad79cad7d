"""Eisenstein-Kronecker numbers and Kronecker theta expansions for CM curves.

Three arithmetic engines over one set of curve data:

* exact -- truncated power-series arithmetic over Q and Q(sqrt(-d)):
  Weierstrass expansions, the Kronecker theta expansion at the origin, and
  its composition with the formal logarithm;
* analytic -- arbitrary-precision complex evaluation of the
  Eisenstein-Kronecker-Lerch sums, theta functions, translations, and the
  identity/distribution verification suites;
* p-adic -- fixed-precision unramified arithmetic, the ordinary-prime
  measure machinery, unit restriction by formal-torsion traces, and the
  interpolation/congruence checks.
"""

__version__ = "0.1.0"

from .scalars import BigComplex, ExactScalar, PadicContext, PadicScalar, \
    embed_padic, padic_valuation
from .series import BiSeries, ExactRing, KroneckerExpansion, PadicRing, UniSeries
from .curves import CurveData, FormalLog, LatticeData, catalog, catalog_row, \
    compute_periods, formal_log, pairing, sigma_series, theta_series, wp_series
from .eklerch import check_functional_equation, direct_hecke_sum, \
    e2star_numeric, eisenstein_kronecker_lerch, ek_number, hecke_L_partial, \
    HeckeCharacter
from .kronecker import ComposedExpansion, ThetaExpansion, compose_formal, \
    ek_from_expansion, kronecker_exact, kronecker_numeric, \
    kronecker_translated_numeric, valuation_heatmap, verify_distribution, \
    verify_generating_function
from .padic import MeasureSeries, PadicPeriod, kummer_congruences, \
    measure_from_theta, moment_table, restrict_to_units, solve_padic_period, \
    verify_interpolation_origin

__all__ = [name for name in dir() if not name.startswith("_")]
