"""Experiment configs: JSON for a single experiment, YAML for a batch.

Every section is validated against its module's invariants before anything runs, and
every problem is reported at once. Unknown keys are errors at every level.
"""

import copy
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import orjson
from yaml import load

try:
    from yaml import CLoader as Loader
except ImportError:
    from yaml import Loader

from udsapprox.dimension import WeightVector
from udsapprox.dss import RateFunction, Schedule, make_schedule
from udsapprox.exceptions import ConfigError, UdsApproxError
from udsapprox.limsup import SERIES_CRITERIA, ApproxProfile, ProfileCoordinate
from udsapprox.sequences import GeneratorSpec
from udsapprox.ubiquity import COVERAGE_METHODS, Ball, RhoProfile, random_balls

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("gen", "disc", "dss-check", "ubiquity", "measure", "series", "dimension", "box-dim")

TOP_KEYS = {"experiment", "generator", "schedule", "rate", "profile", "rho", "tau", "params", "out_dir"}
GENERATOR_KEYS = {"kind", "count", "dim", "alpha", "bases", "seed", "path"}
SCHEDULE_KEYS = {"kind", "horizon", "M", "indices"}
RATE_KEYS = {"family", "C", "theta", "eps", "n", "value", "pairs"}
COORDINATE_KEYS = {"family", "C", "tau", "rate", "value", "pairs"}
PROFILE_KEYS = {"coordinates", "dim"}
RHO_KEYS = {"exponents"}
BATCH_KEYS = {"globals", "experiments"}
BALL_KEYS = {"center", "radius"}
RANDOM_BALL_DEFAULTS = {"seed": 0, "count": 20, "radius": 0.1}

# params per experiment, with defaults; None marks a required entry unless listed in OPTIONAL_PARAMS
PARAM_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "gen": {},
    "disc": {"N": None, "kind": "both", "ratios": False, "oracle": False},
    "dss-check": {"tail_fraction": 0.5, "propose": False, "slack": 0.1},
    "ubiquity": {
        "balls": None,
        "random_balls": None,
        "k_range": None,
        "method": None,
        "resolution": None,
        "samples": 20000,
        "seed": 0,
        "delta": 0.5,
        "eta": 0.5,
        "excess": True,
    },
    "measure": {"windows": None, "samples": 10000, "seed": 0},
    "series": {"criterion": None, "J": None, "M": None, "n": None, "log_space": None},
    "dimension": {"a": None, "t": None},
    "box-dim": {"window": None, "scales": None, "samples_per_scale": 16, "seed": 0},
}
OPTIONAL_PARAMS = {"balls", "random_balls", "method", "resolution", "M", "n", "log_space", "a", "t"}

REQUIRED_SECTIONS = {
    "gen": ("generator",),
    "disc": ("generator",),
    "dss-check": ("generator", "rate"),
    "ubiquity": ("generator", "schedule", "rate", "rho"),
    "measure": ("generator", "profile"),
    "series": ("profile",),
    "dimension": ("tau",),
    "box-dim": ("generator", "profile"),
}


def _positive_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 1


def _number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _int_list(value: Any) -> bool:
    return isinstance(value, list) and bool(value) and all(_positive_int(v) for v in value)


def _window(value: Any) -> bool:
    return isinstance(value, list) and len(value) == 2 and all(_positive_int(v) for v in value)


PARAM_CHECKS: Dict[str, Callable[[Any], bool]] = {
    "N": lambda v: _positive_int(v) or _int_list(v),
    "kind": lambda v: v in ("star", "extreme", "both"),
    "ratios": lambda v: isinstance(v, bool),
    "oracle": lambda v: isinstance(v, bool),
    "tail_fraction": lambda v: _number(v) and 0 < v <= 1,
    "propose": lambda v: isinstance(v, bool),
    "slack": lambda v: _number(v) and 0 < v < 1,
    "balls": lambda v: isinstance(v, list) and bool(v),
    "random_balls": lambda v: isinstance(v, dict),
    "k_range": _int_list,
    "method": lambda v: v in COVERAGE_METHODS,
    "resolution": lambda v: _number(v) and 0 < v < 1,
    "samples": _positive_int,
    "seed": lambda v: isinstance(v, int) and not isinstance(v, bool) and 0 <= v < 2**64,
    "delta": lambda v: _number(v) and v > 0,
    "eta": lambda v: _number(v) and v > 0,
    "excess": lambda v: isinstance(v, bool),
    "windows": lambda v: isinstance(v, list) and bool(v) and all(_window(w) for w in v),
    "criterion": lambda v: v in SERIES_CRITERIA,
    "J": _positive_int,
    "M": lambda v: _number(v) and v > 1,
    "n": _positive_int,
    "log_space": lambda v: isinstance(v, bool),
    "a": lambda v: isinstance(v, list) and all(_number(x) for x in v),
    "t": lambda v: isinstance(v, list) and all(_number(x) for x in v),
    "window": _window,
    "scales": lambda v: isinstance(v, list) and all(_number(x) for x in v),
    "samples_per_scale": _positive_int,
}


@dataclass
class ExperimentConfig:
    """A validated experiment, ready for the runner."""

    experiment: str
    raw: Dict[str, Any]
    generator: Optional[GeneratorSpec] = None
    schedule: Optional[Schedule] = None
    rate: Optional[RateFunction] = None
    profile: Optional[ApproxProfile] = None
    rho: Optional[RhoProfile] = None
    tau: Optional[WeightVector] = None
    params: Dict[str, Any] = field(default_factory=dict)
    out_dir: Optional[str] = None
    balls: Optional[List[Ball]] = None

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(orjson.dumps(self.raw, option=orjson.OPT_SORT_KEYS)).hexdigest()


def _unknown(section: str, data: Dict[str, Any], allowed: set, errors: List[str]) -> None:
    for key in sorted(set(data) - allowed):
        errors.append(f"unknown key {key!r} in {section}")


def _section(data: Dict[str, Any], key: str, errors: List[str]) -> Optional[Dict[str, Any]]:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, dict):
        errors.append(f"{key}: expected a mapping, got {type(value).__name__}")
        return None
    return value


def _build(section: str, errors: List[str], factory: Callable[[], Any]) -> Any:
    try:
        return factory()
    except (UdsApproxError, TypeError, ValueError) as e:
        errors.append(f"{section}: {e}")
        return None


def _tuple_or_none(value: Optional[Sequence]) -> Optional[tuple]:
    return tuple(value) if value is not None else None


def _generator(d: Dict[str, Any], errors: List[str]) -> Optional[GeneratorSpec]:
    _unknown("generator", d, GENERATOR_KEYS, errors)
    return _build(
        "generator",
        errors,
        lambda: GeneratorSpec(
            kind=d.get("kind"),
            count=d.get("count", 0),
            dim=d.get("dim"),
            alpha=_tuple_or_none(d.get("alpha")),
            bases=_tuple_or_none(d.get("bases")),
            seed=d.get("seed"),
            path=d.get("path"),
        ),
    )


def _rate(d: Dict[str, Any], section: str, errors: List[str]) -> Optional[RateFunction]:
    _unknown(section, d, RATE_KEYS, errors)
    kwargs = {k: v for k, v in d.items() if k in RATE_KEYS}
    if "pairs" in kwargs:
        kwargs["pairs"] = tuple(tuple(p) for p in kwargs["pairs"])
    return _build(section, errors, lambda: RateFunction(**kwargs))


def _schedule(d: Dict[str, Any], errors: List[str]) -> Optional[Schedule]:
    _unknown("schedule", d, SCHEDULE_KEYS, errors)
    return _build(
        "schedule",
        errors,
        lambda: make_schedule(d.get("kind"), horizon=d.get("horizon"), M=d.get("M"), indices=d.get("indices")),
    )


def _coordinate(d: Any, index: int, default_rate: Optional[RateFunction], errors: List[str]):
    section = f"profile.coordinates[{index}]"
    if not isinstance(d, dict):
        errors.append(f"{section}: expected a mapping")
        return None
    _unknown(section, d, COORDINATE_KEYS, errors)
    family = d.get("family")
    if family == "rate_power":
        rate = _rate(d["rate"], f"{section}.rate", errors) if isinstance(d.get("rate"), dict) else default_rate
        if rate is None:
            errors.append(f"{section}: rate_power needs a rate (inline or top-level)")
            return None
        return _build(section, errors, lambda: ProfileCoordinate.rate_power(rate, d.get("tau", 1.0)))
    if family == "table":
        return _build(section, errors, lambda: ProfileCoordinate.table([tuple(p) for p in d.get("pairs", [])]))
    if family == "constant":
        return _build(section, errors, lambda: ProfileCoordinate.constant(d.get("value", 0.0)))
    return _build(section, errors, lambda: ProfileCoordinate(family, C=d.get("C", 1.0), tau=d.get("tau", 1.0)))


def _profile(d: Dict[str, Any], rate: Optional[RateFunction], errors: List[str]) -> Optional[ApproxProfile]:
    _unknown("profile", d, PROFILE_KEYS, errors)
    coords = d.get("coordinates")
    if not isinstance(coords, list) or not coords:
        errors.append("profile: coordinates must be a non-empty list")
        return None
    built = [_coordinate(c, i, rate, errors) for i, c in enumerate(coords)]
    if any(c is None for c in built):
        return None
    dim = d.get("dim")
    if dim is not None:
        if len(built) != 1 or not _positive_int(dim):
            errors.append("profile: dim replicates a single coordinate and must be a positive integer")
            return None
        built = built * dim
    return ApproxProfile(tuple(built))


def _params(experiment: str, d: Dict[str, Any], errors: List[str]) -> Dict[str, Any]:
    defaults = PARAM_DEFAULTS[experiment]
    _unknown("params", d, set(defaults), errors)
    params = dict(defaults)
    params.update({k: v for k, v in d.items() if k in defaults})
    for key, value in params.items():
        if value is None:
            if key not in OPTIONAL_PARAMS:
                errors.append(f"params: {key!r} is required for {experiment}")
            continue
        if not PARAM_CHECKS[key](value):
            errors.append(f"params: invalid value {value!r} for {key!r}")
    if experiment == "ubiquity" and params["balls"] is None and params["random_balls"] is None:
        errors.append("params: ubiquity needs 'balls' or 'random_balls'")
    return params


def _explicit_balls(entries: List[Any], errors: List[str]) -> List[Ball]:
    balls = []
    for i, d in enumerate(entries):
        section = f"params.balls[{i}]"
        if not isinstance(d, dict):
            errors.append(f"{section}: expected a mapping, got {type(d).__name__}")
            continue
        _unknown(section, d, BALL_KEYS, errors)
        missing = sorted(BALL_KEYS - set(d))
        if missing:
            errors.append(f"{section}: missing {', '.join(missing)}")
            continue
        ball = _build(section, errors, lambda: Ball(tuple(d["center"]), d["radius"]))
        if ball is not None:
            balls.append(ball)
    return balls


def _ubiquity_balls(params: Dict[str, Any], dim: int, errors: List[str]) -> Optional[List[Ball]]:
    """Build the ball list of a ubiquity experiment, collecting every bad entry."""
    if isinstance(params["balls"], list):
        balls = _explicit_balls(params["balls"], errors)
    elif isinstance(params["random_balls"], dict):
        spec = params["random_balls"]
        _unknown("params.random_balls", spec, set(RANDOM_BALL_DEFAULTS), errors)
        d = {**RANDOM_BALL_DEFAULTS, **spec}
        if not (PARAM_CHECKS["seed"](d["seed"]) and _positive_int(d["count"]) and _number(d["radius"])):
            errors.append(f"params.random_balls: invalid value {spec!r}")
            return None
        balls = _build("params.random_balls", errors, lambda: random_balls(d["seed"], d["count"], d["radius"], dim))
        if balls is None:
            return None
    else:
        return None
    for i, ball in enumerate(balls):
        if ball.dim != dim:
            errors.append(f"params.balls[{i}]: center has {ball.dim} coordinates for {dim} rho exponents")
    return balls


def _cross_checks(config: ExperimentConfig, errors: List[str]) -> None:
    kind, params = config.experiment, config.params
    if kind == "dss-check" and config.schedule is None and not params.get("propose"):
        errors.append("schedule: dss-check needs a schedule unless params.propose is true")
    if kind == "series":
        criterion = params.get("criterion")
        if criterion in ("khintchine", "kw") and (config.schedule is None or config.rate is None):
            errors.append(f"series: {criterion} needs both schedule and rate")
        if criterion == "kw" and config.rho is None:
            errors.append("series: kw needs rho")
        if criterion in ("thm12", "thm13") and params.get("M") is None:
            errors.append(f"series: {criterion} needs params.M")
    if kind == "dimension" and config.tau is not None:
        try:
            config.tau.require_divergent_sum()
        except UdsApproxError as e:
            errors.append(f"tau: {e}")
    if kind == "ubiquity" and config.rho is not None and config.generator is not None:
        dim = config.generator.dim or len(config.generator.alpha or config.generator.bases or ())
        if dim and dim != config.rho.dim:
            errors.append(f"rho: {config.rho.dim} exponents for a {dim}-dimensional sequence")
    if kind == "ubiquity" and config.rho is not None:
        config.balls = _ubiquity_balls(params, config.rho.dim, errors)


def parse_config_dict(data: Any) -> ExperimentConfig:
    """Validate one experiment mapping; raises ConfigError listing every problem."""
    if not isinstance(data, dict):
        raise ConfigError([f"expected a mapping at top level, got {type(data).__name__}"])
    errors: List[str] = []
    _unknown("top level", data, TOP_KEYS, errors)
    experiment = data.get("experiment")
    if experiment not in EXPERIMENT_KINDS:
        errors.append(f"experiment must be one of {list(EXPERIMENT_KINDS)}, got {experiment!r}")
        raise ConfigError(errors)

    for section in REQUIRED_SECTIONS[experiment]:
        if data.get(section) is None:
            errors.append(f"{section}: required for {experiment}")

    config = ExperimentConfig(experiment=experiment, raw=copy.deepcopy(data), out_dir=data.get("out_dir"))
    if (d := _section(data, "generator", errors)) is not None:
        config.generator = _generator(d, errors)
    if (d := _section(data, "rate", errors)) is not None:
        config.rate = _rate(d, "rate", errors)
    if (d := _section(data, "schedule", errors)) is not None:
        config.schedule = _schedule(d, errors)
    if (d := _section(data, "profile", errors)) is not None:
        config.profile = _profile(d, config.rate, errors)
    if (d := _section(data, "rho", errors)) is not None:
        _unknown("rho", d, RHO_KEYS, errors)
        if config.rate is None:
            errors.append("rho: needs the top-level rate as its base")
        else:
            config.rho = _build("rho", errors, lambda: RhoProfile(config.rate, tuple(d.get("exponents") or ())))
    if data.get("tau") is not None:
        tau = data["tau"]
        if not isinstance(tau, list) or not all(_number(x) for x in tau):
            errors.append(f"tau: expected a list of numbers, got {tau!r}")
        else:
            config.tau = _build("tau", errors, lambda: WeightVector(tuple(tau)))
    params = _section(data, "params", errors) or {}
    config.params = _params(experiment, params, errors)
    _cross_checks(config, errors)

    if errors:
        raise ConfigError(errors)
    logger.debug(f"parsed {experiment} config {config.config_hash[:12]}")
    return config


def _set_path(data: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError([f"override {dotted!r}: {key!r} is not a mapping"])
    node[keys[-1]] = value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply KEY.PATH=VALUE overrides; VALUE is read as JSON when it parses, else as a string."""
    data = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override {item!r} must look like key.path=value"])
        path, text = item.split("=", 1)
        try:
            value = orjson.loads(text)
        except orjson.JSONDecodeError:
            value = text
        _set_path(data, path.strip(), value)
    return data


def read_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a JSON config file without validating it."""
    raw = Path(path).read_bytes()
    try:
        return orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise ConfigError([f"{path}: invalid JSON: {e}"]) from None


def parse_config(path: Union[str, Path], overrides: Sequence[str] = ()) -> ExperimentConfig:
    return parse_config_dict(apply_overrides(read_config(path), overrides))


def load_batch(path: Union[str, Path]) -> List[ExperimentConfig]:
    """
    Load a YAML batch: a `globals` mapping merged into every entry of `experiments`.

    # batch.yaml
    globals:
        generator: {kind: radical_inverse, bases: [2], count: 65536}
    experiments:
    - experiment: disc
      params: {N: [1024, 4096]}
    - experiment: dss-check
      schedule: {kind: square_exp, M: 2, horizon: 4}
      rate: {family: polylog, C: 4, n: 1}
    """
    with open(path, "r") as f:
        batch = load(f, Loader=Loader)
    if not isinstance(batch, dict):
        raise ConfigError([f"{path}: expected a mapping with 'experiments'"])
    errors: List[str] = []
    _unknown("batch", batch, BATCH_KEYS, errors)
    entries = batch.get("experiments")
    if not isinstance(entries, list) or not entries:
        errors.append("batch: 'experiments' must be a non-empty list")
        raise ConfigError(errors)

    configs = []
    for i, entry in enumerate(entries):
        merged = copy.deepcopy(batch.get("globals") or {})
        merged.update(entry or {})
        try:
            configs.append(parse_config_dict(merged))
        except ConfigError as e:
            errors.extend(f"experiments[{i}]: {msg}" for msg in e.errors)
    if errors:
        raise ConfigError(errors)
    return configs
