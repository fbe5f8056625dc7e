__version__ = "0.1.0"

from udsapprox.sequences import PointList, GeneratorSpec, gen_kronecker, gen_radical_inverse  # noqa: E402
from udsapprox.sequences import gen_iid_uniform, load_sequence, write_sequence  # noqa: E402
from udsapprox.discrepancy import Rect, count_hits, star_discrepancy_exact, extreme_discrepancy_exact  # noqa: E402
from udsapprox.discrepancy import star_discrepancy_oracle, discrepancy_ratios  # noqa: E402
from udsapprox.dss import Schedule, RateFunction, make_schedule, check_dss  # noqa: E402
from udsapprox.dss import check_c_regular, propose_schedule  # noqa: E402
from udsapprox.ubiquity import RhoProfile, Ball, block_cover_fraction, full_cover_fraction  # noqa: E402
from udsapprox.ubiquity import prior_block_excess, verify_local_ubiquity  # noqa: E402
from udsapprox.limsup import ApproxProfile, ProfileCoordinate, Window, is_hit, hit_indices  # noqa: E402
from udsapprox.limsup import measure_estimate, measure_sweep, series_partial_sums  # noqa: E402
from udsapprox.limsup import check_profile_domination, check_kw_hypotheses  # noqa: E402
from udsapprox.dimension import WeightVector, UbiquityExponents, dimension_formula, ww_lower_bound  # noqa: E402
from udsapprox.dimension import choose_weights, upper_bound_exponent, jarnik_1d, box_dimension_estimate  # noqa: E402
from udsapprox.config import ExperimentConfig, parse_config, load_batch  # noqa: E402
from udsapprox.runner import ExperimentRunner  # noqa: E402

__all__ = [
    "PointList",
    "GeneratorSpec",
    "gen_kronecker",
    "gen_radical_inverse",
    "gen_iid_uniform",
    "load_sequence",
    "write_sequence",
    "Rect",
    "count_hits",
    "star_discrepancy_exact",
    "extreme_discrepancy_exact",
    "star_discrepancy_oracle",
    "discrepancy_ratios",
    "Schedule",
    "RateFunction",
    "make_schedule",
    "check_dss",
    "check_c_regular",
    "propose_schedule",
    "RhoProfile",
    "Ball",
    "block_cover_fraction",
    "full_cover_fraction",
    "prior_block_excess",
    "verify_local_ubiquity",
    "ApproxProfile",
    "ProfileCoordinate",
    "Window",
    "is_hit",
    "hit_indices",
    "measure_estimate",
    "measure_sweep",
    "series_partial_sums",
    "check_profile_domination",
    "check_kw_hypotheses",
    "WeightVector",
    "UbiquityExponents",
    "dimension_formula",
    "ww_lower_bound",
    "choose_weights",
    "upper_bound_exponent",
    "jarnik_1d",
    "box_dimension_estimate",
    "ExperimentConfig",
    "parse_config",
    "load_batch",
    "ExperimentRunner",
]
