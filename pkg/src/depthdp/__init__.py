"""Differentially private estimation with halfspace and regression depth."""

from .data import Dataset, read_csv
from .depth import (
    brute_force_depth,
    candidate_fits,
    contour,
    deepest_regression,
    halfspace_depths,
    hdepth,
    rdepth,
    tukey_median,
)
from .estimators import DPDeepestRegression, DPMedsweepRegression, DPTukeyMedian
from .geometry import FeasibleRegion, convex_hull, l1_diameter
from .mechanisms import (
    InfeasibleError,
    MechanismOutput,
    dp_deepest_reg,
    dp_medsweep,
    dp_tukey_median,
    kappa_star_median,
    kappa_star_reg,
    kappa_star_tukey,
    min_feasible_diameter,
    rdp_deepest_reg,
    rdp_median,
    rdp_tukey_median,
)
from .sensitivity import (
    MedsweepGrid,
    SmoothBound,
    median_smooth_sensitivity,
    medsweep_ratio_smooth_sensitivity,
    regdepth_smooth_sensitivity,
    tukey_smooth_sensitivity,
)
from .special import NoiseCalibration, PrivacyBudget, RandomSource, calibrate

__version__ = "0.1.0"
