"""Local ubiquity checks: how much of a ball the rectangles of an index block cover."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from udsapprox.dss import RateFunction, Schedule
from udsapprox.exceptions import GuardError, IndexRangeError, ParameterError
from udsapprox.parallel import parallel_map, stream, uniform_samples
from udsapprox.reports import CoverageReport, ExcessReport, UbiquityReport
from udsapprox.sequences import PointList, as_point

logger = logging.getLogger(__name__)

COVERAGE_METHODS = ("grid", "monte_carlo")
DEFAULT_RESOLUTION = {1: 1e-4, 2: 1e-3}
DEFAULT_SAMPLES = 20000
MAX_GRID_CELLS = 5 * 10**7
SUM_TOL = 1e-12
TABLE_COLUMNS = ("ball_id", "k", "fraction", "method", "error_bound")


@dataclass(frozen=True)
class RhoProfile:
    """rho_i(N) = base(N) ** exponents[i]."""

    base: RateFunction
    exponents: Tuple[float, ...]

    def __post_init__(self) -> None:
        exps = tuple(float(e) for e in self.exponents)
        if not exps or any(e <= 0 for e in exps):
            raise ParameterError(f"ubiquity: rho exponents must be positive, got {list(self.exponents)}")
        object.__setattr__(self, "exponents", exps)

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @property
    def normalized(self) -> bool:
        """Whether prod_i rho_i(N) = v(N)."""
        return abs(sum(self.exponents) - 1.0) <= SUM_TOL

    def __call__(self, N: int) -> np.ndarray:
        log_v = self.base.log_value(math.log(N)) if N >= 1 else -math.inf
        return np.exp(np.asarray(self.exponents) * log_v)


@dataclass(frozen=True)
class Ball:
    """Sup-metric ball: the cube of half-side radius around center, clipped to [0,1]^n."""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        center = tuple(float(c) for c in as_point(self.center))
        if not self.radius > 0:
            raise ParameterError(f"ubiquity: ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        return np.maximum(c - self.radius, 0.0), np.minimum(c + self.radius, 1.0)

    def volume(self) -> float:
        low, high = self.bounds()
        return float(np.prod(high - low))


def random_balls(seed: int, count: int, radius: float, dim: int) -> List[Ball]:
    """count balls with centers drawn uniformly from [0,1)^dim."""
    centers = stream(seed, 0).random((count, dim))
    return [Ball(tuple(c), radius) for c in centers]


def _grid_fraction(points: np.ndarray, rho: np.ndarray, low: np.ndarray, high: np.ndarray, resolution: float):
    n = low.size
    cells = np.ceil((high - low) / resolution).astype(np.int64)
    if int(np.prod(cells)) > MAX_GRID_CELLS:
        raise GuardError(f"ubiquity: grid of {cells.tolist()} cells exceeds {MAX_GRID_CELLS}; use monte_carlo")
    h = (high - low) / cells
    a = points - rho
    b = points + rho
    keep = np.all((b > low) & (a < high), axis=1)
    a, b = a[keep], b[keep]
    # cell k is covered by (a, b) iff its center low + (k + 1/2) h lies strictly inside
    start = np.floor((a - low) / h - 0.5).astype(np.int64) + 1
    end = np.ceil((b - low) / h - 0.5).astype(np.int64)
    start = np.clip(start, 0, cells)
    end = np.clip(end, 0, cells)
    nonempty = np.all(end > start, axis=1)
    start, end = start[nonempty], end[nonempty]

    diff = np.zeros(tuple(int(m) + 1 for m in cells), dtype=np.int32)
    for corner in itertools.product((0, 1), repeat=n):
        sign = -1 if sum(corner) % 2 else 1
        index = tuple(np.where(c, end[:, i], start[:, i]) for i, c in enumerate(corner))
        np.add.at(diff, index, sign)
    for axis in range(n):
        diff = np.cumsum(diff, axis=axis)
    covered = diff[tuple(slice(0, int(m)) for m in cells)] > 0
    return float(np.count_nonzero(covered)) / covered.size


def _monte_carlo_fraction(
    points: np.ndarray, rho: np.ndarray, low: np.ndarray, high: np.ndarray, samples: int, seed: int
) -> float:
    x = uniform_samples(seed, samples, low, high)
    if points.shape[0] == 0:
        return 0.0
    tree = cKDTree(points / rho)
    dist, _ = tree.query(x / rho, k=1, p=np.inf, distance_upper_bound=1.0)
    return float(np.count_nonzero(dist < 1.0)) / samples


def _coverage(
    points: np.ndarray,
    rho: np.ndarray,
    ball: Ball,
    k: Optional[int],
    method: Optional[str],
    resolution: Optional[float],
    samples: int,
    seed: int,
) -> CoverageReport:
    n = ball.dim
    if points.shape[1] != n or rho.size != n:
        raise ParameterError(f"ubiquity: ball dimension {n} does not match the sequence or rho")
    method = method or ("grid" if n <= 2 else "monte_carlo")
    if method not in COVERAGE_METHODS:
        raise ParameterError(f"ubiquity: unknown coverage method {method!r}")
    low, high = ball.bounds()
    zero_rho = bool(np.any(rho <= 0.0))

    if method == "grid":
        resolution = resolution or DEFAULT_RESOLUTION.get(n, 1e-3)
        if ball.radius < resolution:
            raise GuardError(
                f"ubiquity: ball radius {ball.radius} is below the grid resolution {resolution}; "
                "use a finer resolution or monte_carlo"
            )
        fraction = 0.0 if zero_rho or points.shape[0] == 0 else _grid_fraction(points, rho, low, high, resolution)
        error_bound = min(1.0, 2.0 * n * resolution / float(np.min(high - low)))
        return CoverageReport(
            k=k,
            fraction=fraction,
            method="grid",
            error_bound=error_bound,
            ball_center=list(ball.center),
            ball_radius=ball.radius,
            resolution=resolution,
        )

    if samples < 100:
        raise ParameterError(f"ubiquity: monte_carlo coverage needs at least 100 samples, got {samples}")
    fraction = 0.0 if zero_rho else _monte_carlo_fraction(points, rho, low, high, samples, seed)
    error_bound = 3.0 * math.sqrt(fraction * (1.0 - fraction) / samples) + 1.0 / samples
    return CoverageReport(
        k=k,
        fraction=fraction,
        method="monte_carlo",
        error_bound=error_bound,
        ball_center=list(ball.center),
        ball_radius=ball.radius,
        samples=samples,
        seed=seed,
    )


def _warn_unnormalized(rho: RhoProfile) -> None:
    if not rho.normalized:
        logger.warning(f"ubiquity: rho exponents sum to {sum(rho.exponents)}, not 1; prod rho_i != v")


def block_cover_fraction(
    seq: PointList,
    sched: Schedule,
    k: int,
    rho: RhoProfile,
    ball: Ball,
    method: Optional[str] = None,
    resolution: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> CoverageReport:
    """Fraction of the ball covered by the rectangles Delta(omega_j, rho(N_k)) for N_{k-1} < j <= N_k."""
    prev, cur = sched.block(k)
    if cur > len(seq):
        raise IndexRangeError(f"ubiquity: block {k} reaches N={cur} but only {len(seq)} points exist")
    _warn_unnormalized(rho)
    logger.debug(f"block_cover_fraction k={k} block=({prev}, {cur}] ball={ball}")
    points = np.asarray(seq.window(prev + 1, cur))
    return _coverage(points, rho(cur), ball, k, method, resolution, samples, seed)


def full_cover_fraction(
    seq: PointList,
    N_k: int,
    rho: RhoProfile,
    ball: Ball,
    method: Optional[str] = None,
    resolution: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> CoverageReport:
    """Fraction of the ball covered by Delta(omega_j, rho(N_k)) for 1 <= j <= N_k."""
    if N_k < 1 or N_k > len(seq):
        raise IndexRangeError(f"ubiquity: N_k={N_k} outside 1..{len(seq)}")
    _warn_unnormalized(rho)
    points = np.asarray(seq.prefix(N_k))
    return _coverage(points, rho(N_k), ball, None, method, resolution, samples, seed)


def prior_block_excess(
    seq: PointList,
    sched: Schedule,
    k: int,
    rho: RhoProfile,
    ball: Ball,
    delta: float = 0.5,
    eta: float = 0.5,
    method: Optional[str] = None,
    resolution: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> ExcessReport:
    """Compare the ball fraction covered by the first N_{k-1} points at scale rho(N_k)
    with (1 + delta)(1 + eta)^n N_{k-1} v(N_k)."""
    if delta <= 0 or eta <= 0:
        raise ParameterError(f"ubiquity: delta and eta must be positive, got {delta}, {eta}")
    prev, cur = sched.block(k)
    if cur > len(seq):
        raise IndexRangeError(f"ubiquity: block {k} reaches N={cur} but only {len(seq)} points exist")
    rhs = (1.0 + delta) * (1.0 + eta) ** ball.dim * prev * float(rho.base(cur))
    if prev == 0:
        return ExcessReport(k=k, lhs=0.0, rhs=rhs, holds=True, delta=delta, eta=eta)
    points = np.asarray(seq.prefix(prev))
    lhs = _coverage(points, rho(cur), ball, k, method, resolution, samples, seed).fraction
    return ExcessReport(k=k, lhs=lhs, rhs=rhs, holds=lhs < rhs, delta=delta, eta=eta)


def verify_local_ubiquity(
    seq: PointList,
    sched: Schedule,
    rho: RhoProfile,
    balls: Sequence[Ball],
    k_range: Sequence[int],
    method: Optional[str] = None,
    resolution: Optional[float] = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    threads: int = 1,
) -> UbiquityReport:
    """Minimum block-coverage fraction over every (ball, k) pair, with the full table."""
    if not balls:
        raise ParameterError("ubiquity: verify_local_ubiquity needs at least one ball")
    ks = list(k_range)
    if not ks:
        raise ParameterError("ubiquity: k_range is empty")
    for k in ks:
        if not 1 <= k <= len(sched):
            raise IndexRangeError(f"ubiquity: block index {k} outside schedule 1..{len(sched)}")
        if sched.N(k) > len(seq):
            raise IndexRangeError(f"ubiquity: block {k} reaches N={sched.N(k)} but only {len(seq)} points exist")

    jobs = [(ball_id, k) for ball_id in range(len(balls)) for k in ks]

    def evaluate(job):
        ball_id, k = job
        return block_cover_fraction(seq, sched, k, rho, balls[ball_id], method, resolution, samples, seed)

    reports = parallel_map(evaluate, jobs, threads=threads)
    table = [
        {"ball_id": ball_id, "k": k, "fraction": r.fraction, "method": r.method, "error_bound": r.error_bound}
        for (ball_id, k), r in zip(jobs, reports)
    ]
    c_hat = min(r.fraction for r in reports)
    logger.debug(f"verify_local_ubiquity balls={len(balls)} k={ks} c_hat={c_hat}")
    return UbiquityReport(c_hat=c_hat, table=table)
