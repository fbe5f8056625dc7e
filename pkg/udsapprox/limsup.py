"""Hits, truncated measure estimates and series criteria for the limsup sets W(Psi).

A point x is hit by index j when |x_i - omega_{j,i}| < psi_i(j) in every coordinate.
Distances are plain differences on [0,1]; there is no wrap-around.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from udsapprox.dss import RateFunction, Schedule, check_c_regular
from udsapprox.exceptions import HorizonError, IndexRangeError, ParameterError
from udsapprox.parallel import SAMPLE_CHUNK, parallel_map, uniform_samples
from udsapprox.reports import DominationReport, KWHypotheses, MeasureEstimate, SeriesReport
from udsapprox.sequences import PointList, as_point
from udsapprox.ubiquity import RhoProfile

logger = logging.getLogger(__name__)

PROFILE_FAMILIES = ("power", "rate_power", "table", "constant")
SERIES_CRITERIA = ("khintchine", "thm12", "thm13", "bosh_chaika", "kw")
SWEEP_COLUMNS = ("window_max", "fraction", "ci95")

MIN_SAMPLES = 100
# below this many (sample, point) pairs a sub-window is scanned directly
BRUTE_FORCE_PAIRS = 1 << 22
MAX_DOMINATION_RANGE = 10**7
DOMINATION_TOL = 1e-12

# trend heuristics
CONVERGING_RATIO = 0.9
CONVERGING_RUN = 10
DIVERGING_TERM = 1e-6
LOG_LINEAR_RATIO = 0.9
MIN_TREND_TERMS = 4
EXP_LIMIT = 700.0


@dataclass(frozen=True)
class ProfileCoordinate:
    """One decreasing coordinate function psi_i."""

    family: str
    C: float = 1.0
    tau: float = 1.0
    rate: Optional[RateFunction] = None
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in PROFILE_FAMILIES:
            raise ParameterError(f"limsup: unknown profile family {self.family!r}")
        if self.family == "power" and (self.C <= 0 or self.tau < 0):
            raise ParameterError(f"limsup: power profile needs C > 0 and tau >= 0, got C={self.C}, tau={self.tau}")
        if self.family in ("rate_power", "table"):
            if self.rate is None:
                raise ParameterError(f"limsup: {self.family} profile needs a rate function")
            if self.tau <= 0:
                raise ParameterError(f"limsup: rate_power profile needs tau > 0, got {self.tau}")
        if self.family == "constant" and self.value < 0:
            raise ParameterError(f"limsup: constant profile must be >= 0, got {self.value}")

    @classmethod
    def power(cls, C: float, tau: float) -> "ProfileCoordinate":
        return cls("power", C=C, tau=tau)

    @classmethod
    def rate_power(cls, rate: RateFunction, tau: float) -> "ProfileCoordinate":
        return cls("rate_power", rate=rate, tau=tau)

    @classmethod
    def table(cls, pairs: Sequence[Tuple[int, float]]) -> "ProfileCoordinate":
        return cls("table", rate=RateFunction.table(pairs), tau=1.0)

    @classmethod
    def constant(cls, value: float) -> "ProfileCoordinate":
        return cls("constant", value=value)

    @property
    def min_j(self) -> int:
        return self.rate.min_N if self.rate is not None else 1

    def log_value(self, log_j: Union[float, np.ndarray]) -> np.ndarray:
        x = np.asarray(log_j, dtype=np.float64)
        if self.family == "power":
            return math.log(self.C) - self.tau * x
        if self.family == "constant":
            return np.full(x.shape, math.log(self.value) if self.value > 0 else -np.inf)
        return self.tau * np.asarray(self.rate.log_value(x))

    def __call__(self, j: Union[int, float, np.ndarray]) -> np.ndarray:
        arr = np.asarray(j, dtype=np.float64)
        if np.any(arr < self.min_j):
            raise ParameterError(f"limsup: {self.family} profile is defined for j >= {self.min_j}")
        return np.exp(self.log_value(np.log(arr)))


@dataclass(frozen=True)
class ApproxProfile:
    """Psi = (psi_1, ..., psi_n)."""

    coords: Tuple[ProfileCoordinate, ...]

    def __post_init__(self) -> None:
        if not self.coords:
            raise ParameterError("limsup: an approximation profile needs at least one coordinate")
        object.__setattr__(self, "coords", tuple(self.coords))

    @classmethod
    def uniform(cls, coord: ProfileCoordinate, n: int) -> "ApproxProfile":
        return cls(tuple([coord] * n))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def values(self, j: Union[int, np.ndarray]) -> np.ndarray:
        """psi_i(j) with shape (len(j), n), or (n,) for a scalar j."""
        arr = np.asarray(j, dtype=np.float64)
        out = np.stack([np.broadcast_to(c(arr), arr.shape) for c in self.coords], axis=-1)
        return out

    def log_values(self, log_j: Union[float, np.ndarray]) -> np.ndarray:
        x = np.asarray(log_j, dtype=np.float64)
        return np.stack([np.broadcast_to(c.log_value(x), x.shape) for c in self.coords], axis=-1)


@dataclass(frozen=True)
class Window:
    j_min: int
    j_max: int

    def __post_init__(self) -> None:
        if int(self.j_min) != self.j_min or int(self.j_max) != self.j_max:
            raise ParameterError(f"limsup: window bounds must be integers, got [{self.j_min}, {self.j_max}]")
        if not 1 <= self.j_min <= self.j_max:
            raise ParameterError(f"limsup: need 1 <= j_min <= j_max, got [{self.j_min}, {self.j_max}]")

    def __len__(self) -> int:
        return self.j_max - self.j_min + 1

    def check(self, seq: PointList) -> None:
        if self.j_max > len(seq):
            raise IndexRangeError(f"limsup: window ends at {self.j_max} but only {len(seq)} points exist")


def is_hit(x: Sequence[float], w: Sequence[float], psi_values: Sequence[float]) -> bool:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    psi = np.asarray(psi_values, dtype=np.float64).reshape(-1)
    if not x.size == w.size == psi.size:
        raise ParameterError(f"limsup: dimension mismatch x={x.size}, w={w.size}, psi={psi.size}")
    return bool(np.all(np.abs(x - w) < psi))


def _check_profile(seq: PointList, psi: ApproxProfile, win: Window) -> None:
    if psi.dim != seq.dim:
        raise ParameterError(f"limsup: profile dimension {psi.dim} != sequence dimension {seq.dim}")
    win.check(seq)
    lowest = max(c.min_j for c in psi.coords)
    if win.j_min < lowest:
        raise ParameterError(f"limsup: profile is undefined at j={win.j_min}; start the window at {lowest}")


def hit_indices(x: Sequence[float], seq: PointList, win: Window, psi: ApproxProfile) -> List[int]:
    """Every j in the window with |x_i - omega_{j,i}| < psi_i(j) for all i, ascending."""
    _check_profile(seq, psi, win)
    point = as_point(x, seq.dim)
    js = np.arange(win.j_min, win.j_max + 1)
    pts = seq.window(win.j_min, win.j_max)
    mask = np.all(np.abs(pts - point) < psi.values(js), axis=1)
    return (js[mask]).tolist()


@dataclass
class _SubWindow:
    points: np.ndarray
    psi: np.ndarray
    reach: np.ndarray
    tree: Optional[cKDTree] = field(default=None)


def _sub_windows(seq: PointList, psi: ApproxProfile, win: Window) -> List[_SubWindow]:
    """Split the window into dyadic pieces [2^m, 2^(m+1)); within each, psi <= psi(start)."""
    subs = []
    lo = int(win.j_min)
    while lo <= win.j_max:
        hi = min(win.j_max, (1 << lo.bit_length()) - 1)
        js = np.arange(lo, hi + 1)
        reach = psi.values(lo)
        if np.all(reach > 0):
            subs.append(_SubWindow(points=np.asarray(seq.window(lo, hi)), psi=psi.values(js), reach=reach))
        lo = hi + 1
    return subs


def _hits_in(sub: _SubWindow, x: np.ndarray) -> np.ndarray:
    if sub.points.shape[0] * x.shape[0] <= BRUTE_FORCE_PAIRS:
        diff = np.abs(x[:, None, :] - sub.points[None, :, :])
        return np.any(np.all(diff < sub.psi[None, :, :], axis=2), axis=1)
    if sub.tree is None:
        sub.tree = cKDTree(sub.points / sub.reach)
    candidates = sub.tree.query_ball_point(x / sub.reach, r=1.0, p=np.inf)
    lengths = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=len(candidates))
    hit = np.zeros(x.shape[0], dtype=bool)
    if lengths.sum() == 0:
        return hit
    owner = np.repeat(np.arange(x.shape[0]), lengths)
    idx = np.concatenate([np.asarray(c, dtype=np.int64) for c in candidates if len(c)])
    ok = np.all(np.abs(x[owner] - sub.points[idx]) < sub.psi[idx], axis=1)
    hit[owner[ok]] = True
    return hit


def _any_hit(subs: List[_SubWindow], x: np.ndarray) -> np.ndarray:
    hit = np.zeros(x.shape[0], dtype=bool)
    for sub in subs:
        open_ = np.flatnonzero(~hit)
        if open_.size == 0:
            break
        hit[open_[_hits_in(sub, x[open_])]] = True
    return hit


def union_hits(points: np.ndarray, psi_values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Which rows of x lie in the union of the open boxes |y_i - points_i| < psi_values_i."""
    keep = np.all(psi_values > 0, axis=1)
    if not keep.any():
        return np.zeros(x.shape[0], dtype=bool)
    sub = _SubWindow(points=points[keep], psi=psi_values[keep], reach=psi_values[keep].max(axis=0))
    return _any_hit([sub], x)


def measure_estimate(
    seq: PointList, psi: ApproxProfile, win: Window, samples: int, seed: int, threads: int = 1
) -> MeasureEstimate:
    """Fraction of seeded uniform points hit by at least one j in the window."""
    if samples < MIN_SAMPLES:
        raise ParameterError(f"limsup: measure_estimate needs at least {MIN_SAMPLES} samples, got {samples}")
    _check_profile(seq, psi, win)
    logger.debug(f"measure_estimate window=[{win.j_min}, {win.j_max}] samples={samples} seed={seed}")
    subs = _sub_windows(seq, psi, win)
    n = seq.dim
    x = uniform_samples(seed, samples, np.zeros(n), np.ones(n))
    # trees are built lazily; build them up front so worker threads only read
    for sub in subs:
        if sub.points.shape[0] * SAMPLE_CHUNK > BRUTE_FORCE_PAIRS:
            sub.tree = cKDTree(sub.points / sub.reach)
    chunks = [x[start : start + SAMPLE_CHUNK] for start in range(0, samples, SAMPLE_CHUNK)]
    hits = parallel_map(lambda chunk: int(np.count_nonzero(_any_hit(subs, chunk))), chunks, threads=threads)
    p = sum(hits) / samples
    return MeasureEstimate(
        fraction=p,
        samples=samples,
        seed=seed,
        ci95=1.96 * math.sqrt(p * (1.0 - p) / samples),
        j_min=win.j_min,
        j_max=win.j_max,
    )


def measure_sweep(
    seq: PointList,
    psi: ApproxProfile,
    windows: Sequence[Window],
    samples: int,
    seed: int,
    threads: int = 1,
) -> List[MeasureEstimate]:
    """measure_estimate over several windows with the same samples."""
    if not windows:
        raise ParameterError("limsup: measure_sweep needs at least one window")
    return [measure_estimate(seq, psi, win, samples, seed, threads) for win in windows]


def sweep_rows(estimates: Sequence[MeasureEstimate]) -> List[dict]:
    return [{"window_max": e.j_max, "fraction": e.fraction, "ci95": e.ci95} for e in estimates]


def _series_log_terms(
    criterion: str,
    J: int,
    psi: ApproxProfile,
    v: Optional[RateFunction],
    sched: Optional[Schedule],
    M: Optional[float],
    n: Optional[int],
    rho: Optional[RhoProfile],
) -> np.ndarray:
    j = np.arange(1, J + 1, dtype=np.float64)
    if criterion in ("khintchine", "kw"):
        if sched is None or len(sched) < J:
            raise ParameterError(f"limsup: {criterion} series needs a schedule with at least {J} indices")
        log_N = np.log(np.asarray(sched.indices[:J], dtype=np.float64))
        if criterion == "khintchine":
            if v is None:
                raise ParameterError("limsup: khintchine series needs a rate function v")
            return psi.log_values(log_N).sum(axis=-1) - np.asarray(v.log_value(log_N))
        if rho is None or rho.dim != psi.dim:
            raise ParameterError("limsup: kw series needs a rho profile of the profile's dimension")
        log_rho = np.asarray(rho.exponents)[None, :] * np.asarray(rho.base.log_value(log_N))[:, None]
        return (psi.log_values(log_N) - log_rho).sum(axis=-1)
    if criterion == "bosh_chaika":
        return psi.log_values(np.log(j)).sum(axis=-1)
    if M is None or M <= 1:
        raise ParameterError(f"limsup: {criterion} series needs M > 1, got {M}")
    log_M = math.log(M)
    if criterion == "thm12":
        log_N = 3.0**j * log_M
        return log_N / 2.0 - 0.5 * np.log(j) + psi.log_values(log_N).sum(axis=-1)
    n = psi.dim if n is None else n
    log_N = j * j * log_M
    return log_N - 2.0 * n * np.log(j) + psi.log_values(log_N).sum(axis=-1)


def _series_direct_terms(
    criterion: str,
    J: int,
    psi: ApproxProfile,
    v: Optional[RateFunction],
    sched: Optional[Schedule],
    M: Optional[float],
    n: Optional[int],
    rho: Optional[RhoProfile],
) -> np.ndarray:
    j = np.arange(1, J + 1, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        if criterion in ("khintchine", "kw"):
            N = np.asarray(sched.indices[:J], dtype=np.float64)
            prod = np.prod(psi.values(N), axis=-1)
            if criterion == "khintchine":
                return prod / v(N)
            return prod / np.prod(np.stack([rho(int(k)) for k in sched.indices[:J]]), axis=-1)
        if criterion == "bosh_chaika":
            return np.prod(psi.values(j), axis=-1)
        if criterion == "thm12":
            N = M ** (3.0**j)
            return np.sqrt(N) / np.sqrt(j) * np.prod(psi.values(N), axis=-1)
        n = psi.dim if n is None else n
        N = M ** (j * j)
        return N / j ** (2 * n) * np.prod(psi.values(N), axis=-1)


def classify_trend(log_terms: np.ndarray) -> str:
    """Heuristic label for a series from the logs of its terms; never a proof.

    converging: every ratio over the last CONVERGING_RUN terms (all of them for shorter
    series) is at most CONVERGING_RATIO. diverging: the partial sum over the second half
    grows by at least LOG_LINEAR_RATIO times the growth over the second quarter, which
    terms bounded below always satisfy. A slowly decaying p-series such as sum j^-2 fails
    both tests and is inconclusive. Series shorter than MIN_TREND_TERMS only get the term
    floor: diverging when every second-half term is at least DIVERGING_TERM.
    """
    J = log_terms.size
    if J < MIN_TREND_TERMS:
        half = log_terms[J // 2 :]
        if half.size and np.all(half >= math.log(DIVERGING_TERM)):
            return "diverging"
        return "inconclusive"
    steps = np.diff(log_terms[-(min(CONVERGING_RUN, J - 1) + 1) :])
    if np.all(steps <= math.log(CONVERGING_RATIO)):
        return "converging"
    terms = np.exp(np.minimum(log_terms, EXP_LIMIT))
    sums = np.cumsum(terms)
    quarter, middle = J // 4, J // 2
    recent = sums[-1] - sums[middle - 1]
    earlier = sums[middle - 1] - sums[quarter - 1]
    if earlier > 0 and recent >= LOG_LINEAR_RATIO * earlier:
        return "diverging"
    return "inconclusive"


def series_partial_sums(
    criterion: str,
    J: int,
    psi: ApproxProfile,
    v: Optional[RateFunction] = None,
    sched: Optional[Schedule] = None,
    M: Optional[float] = None,
    n: Optional[int] = None,
    rho: Optional[RhoProfile] = None,
    log_space: Optional[bool] = None,
) -> SeriesReport:
    """Terms and partial sums of a divergence criterion up to horizon J.

    Terms are computed in log space. When exponentiating would overflow (or log_space=True)
    the report carries log terms and log partial sums instead and sets log_space.
    """
    if criterion not in SERIES_CRITERIA:
        raise ParameterError(f"limsup: unknown series criterion {criterion!r}")
    if J < 1:
        raise ParameterError(f"limsup: series horizon must be >= 1, got {J}")
    args = (criterion, J, psi, v, sched, M, n, rho)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        log_terms = _series_log_terms(*args)
    if np.any(np.isnan(log_terms)) or np.any(log_terms == np.inf):
        raise HorizonError(f"limsup: {criterion} series overflows even in log space at J={J}")

    if log_space is False:
        terms = _series_direct_terms(*args)
        if not np.all(np.isfinite(terms)):
            raise HorizonError(f"limsup: {criterion} series overflows in direct space at J={J}")
        sums = np.cumsum(terms)
        use_logs = False
    elif log_space or np.max(log_terms) > EXP_LIMIT or np.logaddexp.reduce(log_terms) > EXP_LIMIT:
        logger.debug(f"series_partial_sums {criterion}: reporting log terms")
        terms = log_terms
        sums = np.logaddexp.accumulate(log_terms)
        use_logs = True
    else:
        terms = np.exp(log_terms)
        sums = np.cumsum(terms)
        use_logs = False
    return SeriesReport(
        criterion=criterion,
        terms=terms.tolist(),
        partial_sums=sums.tolist(),
        trend=classify_trend(log_terms),
        log_space=use_logs,
    )


def check_profile_domination(
    psi: ApproxProfile, v: RateFunction, tau: Sequence[float], Ns: Union[range, Sequence[int]]
) -> DominationReport:
    """Check psi_i(N) <= v(N) ** tau_i on a finite set of N; report the first violation per coordinate.

    Pass a ``range`` for a contiguous stretch such as ``range(1, 1001)``; any other sequence is
    taken as the explicit list of indices to check.
    """
    tau = np.asarray(tau, dtype=np.float64)
    if tau.size != psi.dim:
        raise ParameterError(f"limsup: tau has {tau.size} entries for a {psi.dim}-dimensional profile")
    if isinstance(Ns, range):
        if len(Ns) > MAX_DOMINATION_RANGE:
            raise ParameterError(f"limsup: domination range {Ns} is larger than {MAX_DOMINATION_RANGE}")
        Ns = np.arange(Ns.start, Ns.stop, Ns.step, dtype=np.float64)
    else:
        Ns = np.asarray(list(Ns), dtype=np.float64)
    if Ns.size == 0 or Ns.min() < max(v.min_N, max(c.min_j for c in psi.coords)):
        raise ParameterError("limsup: domination range is empty or starts outside the functions' domain")
    log_N = np.log(Ns)
    with np.errstate(invalid="ignore"):
        bound = tau[None, :] * np.asarray(v.log_value(log_N))[:, None]
    bad = psi.log_values(log_N) > bound + DOMINATION_TOL
    first = [int(Ns[np.argmax(bad[:, i])]) if bad[:, i].any() else None for i in range(psi.dim)]
    return DominationReport(holds=not bad.any(), first_violation=first)


def check_kw_hypotheses(psi: ApproxProfile, rho: RhoProfile, sched: Schedule, c: float) -> KWHypotheses:
    """Decreasing psi, psi_i <= rho_i at the schedule, and c-regularity of every rho_i or every psi_i."""
    if rho.dim != psi.dim:
        raise ParameterError(f"limsup: rho dimension {rho.dim} != profile dimension {psi.dim}")
    Ns = np.asarray(sched.indices, dtype=np.float64)
    log_psi = psi.log_values(np.log(Ns))
    decreasing = bool(np.all(np.diff(log_psi, axis=0) <= DOMINATION_TOL)) if Ns.size > 1 else True
    dominated = check_profile_domination(psi, rho.base, rho.exponents, [int(N) for N in sched.indices]).holds

    def regular(f) -> bool:
        return check_c_regular(f, sched, c).holds_from is not None

    rho_regular = all(regular(lambda N, e=e: float(rho.base(N)) ** e) for e in rho.exponents)
    psi_regular = all(regular(lambda N, coord=coord: float(coord(N))) for coord in psi.coords)
    return KWHypotheses(decreasing=decreasing, dominated=dominated, rho_regular=rho_regular, psi_regular=psi_regular)
