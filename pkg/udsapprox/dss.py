"""Schedules, rate functions and finite-horizon discrepancy-satisfying checks."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from udsapprox.discrepancy import discrepancy_at
from udsapprox.exceptions import EmptyScheduleError, HorizonError, IndexRangeError, ParameterError
from udsapprox.parallel import parallel_map
from udsapprox.reports import CRegularity, DssRecord, DssReport
from udsapprox.sequences import PointList

logger = logging.getLogger(__name__)

RATE_FAMILIES = ("power", "kiefer", "polylog", "table", "constant")
SCHEDULE_KINDS = ("geometric", "triple_exp", "square_exp", "explicit")

MAX_INDEX = 2**63
REGULARITY_TOL = 1e-12
MESH_RATIO = 1.25


@dataclass(frozen=True)
class Schedule:
    """Strictly increasing indices N_1 < ... < N_K; block k is (N_{k-1}, N_k] with N_0 = 0."""

    indices: Tuple[int, ...]

    def __post_init__(self) -> None:
        values = tuple(int(N) for N in self.indices)
        if not values:
            raise ParameterError("dss: a schedule needs at least one index")
        if values[0] < 1:
            raise ParameterError(f"dss: schedule indices must be >= 1, got {values[0]}")
        for prev, cur in zip(values, values[1:]):
            if cur <= prev:
                raise ParameterError(f"dss: schedule must be strictly increasing, got {prev} then {cur}")
        object.__setattr__(self, "indices", values)

    def __len__(self) -> int:
        return len(self.indices)

    def N(self, k: int) -> int:
        """N_k with the convention N_0 = 0."""
        if k == 0:
            return 0
        if not 1 <= k <= len(self):
            raise IndexRangeError(f"dss: block index {k} outside 1..{len(self)}")
        return self.indices[k - 1]

    def block(self, k: int) -> Tuple[int, int]:
        """(l_k, u_k) with l_k = N_{k-1} exclusive and u_k = N_k inclusive."""
        if k < 1:
            raise IndexRangeError(f"dss: block index {k} outside 1..{len(self)}")
        return self.N(k - 1), self.N(k)

    def blocks(self) -> List[Tuple[int, int]]:
        return [self.block(k) for k in range(1, len(self) + 1)]


@dataclass(frozen=True)
class RateFunction:
    """A decreasing rate v: N -> R_+ from one of the parametric families."""

    family: str
    C: float = 1.0
    theta: float = 1.0
    eps: float = 0.0
    n: int = 1
    value: float = 1.0
    pairs: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.family not in RATE_FAMILIES:
            raise ParameterError(f"dss: unknown rate family {self.family!r}")
        if self.family in ("power", "polylog") and self.C <= 0:
            raise ParameterError(f"dss: {self.family} rate needs C > 0, got {self.C}")
        if self.family == "power" and self.theta <= 0:
            raise ParameterError(f"dss: power rate needs theta > 0, got {self.theta}")
        if self.family == "kiefer" and self.eps < 0:
            raise ParameterError(f"dss: kiefer rate needs eps >= 0, got {self.eps}")
        if self.family == "polylog" and self.n < 1:
            raise ParameterError(f"dss: polylog rate needs n >= 1, got {self.n}")
        if self.family == "constant" and self.value < 0:
            raise ParameterError(f"dss: constant rate must be >= 0, got {self.value}")
        if self.family == "table":
            pairs = tuple(sorted((int(N), float(v)) for N, v in self.pairs))
            if not pairs:
                raise ParameterError("dss: table rate needs at least one (N, value) pair")
            keys = [N for N, _ in pairs]
            values = [v for _, v in pairs]
            if len(set(keys)) != len(keys) or keys[0] < 1:
                raise ParameterError("dss: table rate keys must be distinct positive integers")
            if any(v < 0 for v in values) or any(b > a for a, b in zip(values, values[1:])):
                raise ParameterError("dss: table rate values must be non-negative and non-increasing")
            object.__setattr__(self, "pairs", pairs)

    @classmethod
    def power(cls, C: float, theta: float) -> "RateFunction":
        return cls("power", C=C, theta=theta)

    @classmethod
    def kiefer(cls, eps: float) -> "RateFunction":
        return cls("kiefer", eps=eps)

    @classmethod
    def polylog(cls, C: float, n: int) -> "RateFunction":
        return cls("polylog", C=C, n=n)

    @classmethod
    def table(cls, pairs: Sequence[Tuple[int, float]]) -> "RateFunction":
        return cls("table", pairs=tuple((int(N), float(v)) for N, v in pairs))

    @classmethod
    def constant(cls, value: float) -> "RateFunction":
        return cls("constant", value=value)

    @property
    def min_N(self) -> int:
        """Smallest index at which the rate is defined."""
        if self.family == "kiefer":
            return 3
        if self.family == "table":
            return self.pairs[0][0]
        return 1

    def __call__(self, N: Union[int, float, np.ndarray]) -> Union[float, np.ndarray]:
        arr = np.asarray(N, dtype=np.float64)
        self._check_domain(arr)
        with np.errstate(divide="ignore"):
            out = np.exp(self.log_value(np.log(arr)))
        return float(out) if out.ndim == 0 else out

    def log_value(self, log_N: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """log v(N) as a function of log N, finite for N far beyond float range."""
        x = np.asarray(log_N, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "power":
                out = math.log(self.C) - self.theta * x
            elif self.family == "kiefer":
                if np.any(x <= 1.0):
                    raise ParameterError("dss: kiefer rate needs N >= 3 so that log log N > 0")
                out = math.log1p(self.eps) + 0.5 * (np.log(np.log(x)) - math.log(2.0) - x)
            elif self.family == "polylog":
                out = math.log(self.C) + self.n * np.log(x) - x
            elif self.family == "constant":
                out = np.full(x.shape, np.log(self.value)) if self.value > 0 else np.full(x.shape, -np.inf)
            else:
                out = self._table_log_value(x)
        return float(out) if np.ndim(out) == 0 else out

    def _table_log_value(self, x: np.ndarray) -> np.ndarray:
        keys = np.log(np.array([N for N, _ in self.pairs], dtype=np.float64))
        values = np.array([v for _, v in self.pairs], dtype=np.float64)
        pos = np.searchsorted(keys, x + 1e-12, side="right") - 1
        if np.any(pos < 0):
            raise ParameterError(f"dss: table rate is undefined below N = {self.pairs[0][0]}")
        with np.errstate(divide="ignore"):
            return np.log(values[pos])

    def _check_domain(self, arr: np.ndarray) -> None:
        if np.any(arr < self.min_N):
            raise ParameterError(f"dss: {self.family} rate is defined for N >= {self.min_N}")


def _exponent(kind: str, j: int) -> int:
    if kind == "geometric":
        return j
    if kind == "triple_exp":
        return 3**j
    return j * j


def _max_feasible_horizon(kind: str, M: float) -> int:
    log_limit = 63 * math.log(2.0)
    J = 0
    while _exponent(kind, J + 1) * math.log(M) < log_limit:
        J += 1
    return J


def make_schedule(
    kind: str,
    horizon: Optional[int] = None,
    M: Optional[float] = None,
    indices: Optional[Sequence[int]] = None,
) -> Schedule:
    """Build the first `horizon` indices of a geometric, triple-exponential or square-exponential schedule."""
    if kind not in SCHEDULE_KINDS:
        raise ParameterError(f"dss: unknown schedule kind {kind!r}")
    if kind == "explicit":
        if not indices:
            raise ParameterError("dss: explicit schedule needs indices")
        values = list(indices)
        if any(int(N) != N for N in values):
            raise ParameterError(f"dss: explicit schedule indices must be integers, got {values}")
        if any(int(N) >= MAX_INDEX for N in values):
            raise HorizonError("dss: explicit schedule index exceeds 2^63")
        return Schedule(tuple(int(N) for N in values))

    if M is None or M <= 1:
        raise ParameterError(f"dss: {kind} schedule needs M > 1, got {M}")
    if horizon is None or horizon < 1:
        raise ParameterError(f"dss: schedule horizon must be >= 1, got {horizon}")
    max_J = _max_feasible_horizon(kind, M)
    if horizon > max_J:
        raise HorizonError(f"dss: {kind}(M={M}) overflows 2^63 at J={horizon}; max feasible J is {max_J}")

    integral = float(M).is_integer()
    values = []
    for j in range(1, horizon + 1):
        e = _exponent(kind, j)
        N = int(M) ** e if integral else int(round(M**e))
        if N >= MAX_INDEX:
            raise HorizonError(f"dss: {kind}(M={M}) overflows 2^63 at J={j}; max feasible J is {j - 1}")
        values.append(N)
    logger.debug(f"make_schedule kind={kind} M={M} J={horizon} -> {values}")
    try:
        return Schedule(tuple(values))
    except ParameterError:
        raise ParameterError(f"dss: rounding {kind}(M={M}) gives repeated indices {values}; increase M") from None


def _dss_record(seq: PointList, v: RateFunction, i: int, N: int) -> DssRecord:
    vN = float(v(N))
    result = discrepancy_at(seq, N, "extreme")
    if result is None:
        logger.warning(f"dss: N={N} exceeds every exact discrepancy guard, index {i} skipped")
        return DssRecord(i=i, N=N, discrepancy=None, v=vN, passed=False, skipped=True, kind="none")
    value, kind = result
    passed = value < vN
    # an upper bound that fails says nothing about D_N itself
    skipped = kind == "star_bound" and not passed
    return DssRecord(i=i, N=N, discrepancy=value, v=vN, passed=passed, skipped=skipped, kind=kind)


def lacunarity_terms(sched: Schedule, v: RateFunction) -> List[float]:
    """N_{i-1} * v(N_i) for every index, with N_0 = 0."""
    terms = []
    for k in range(1, len(sched) + 1):
        prev, cur = sched.block(k)
        terms.append(0.0 if prev == 0 else prev * float(v(cur)))
    return terms


def verdict_of(records: Sequence[DssRecord], tail_sup: float) -> str:
    """Fail once an evaluated index fails or the tail is not lacunary; skipped indices only block a pass."""
    if tail_sup >= 1.0 or any(not r.passed and not r.skipped for r in records):
        return "fail"
    if any(r.skipped for r in records):
        return "inconclusive"
    return "pass"


def check_dss(
    seq: PointList,
    sched: Schedule,
    v: RateFunction,
    tail_fraction: float = 0.5,
    threads: int = 1,
) -> DssReport:
    """Check D_{N_i} < v(N_i) at every index and the lacunarity tail N_{i-1} v(N_i) < 1."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ParameterError(f"dss: tail_fraction must lie in (0, 1], got {tail_fraction}")
    if sched.indices[-1] > len(seq):
        raise IndexRangeError(f"dss: schedule reaches N={sched.indices[-1]} but only {len(seq)} points exist")
    if sched.indices[0] < v.min_N:
        raise ParameterError(f"dss: rate {v.family} is undefined at N={sched.indices[0]}")
    logger.debug(f"check_dss N={list(sched.indices)} rate={v.family}")

    records = parallel_map(
        lambda item: _dss_record(seq, v, item[0], item[1]),
        list(enumerate(sched.indices, start=1)),
        threads=threads,
    )
    terms = lacunarity_terms(sched, v)
    tail = max(1, int(math.floor(len(terms) * tail_fraction)))
    tail_sup = max(terms[-tail:])
    return DssReport(
        records=records,
        tail_sup=tail_sup,
        lacunarity_max=max(terms),
        tail_fraction=tail_fraction,
        verdict=verdict_of(records, tail_sup),
    )


def check_c_regular(f: Callable[[int], float], sched: Schedule, c: float) -> CRegularity:
    """Smallest i0 such that f(N_{i+1}) <= c f(N_i) for every checked i >= i0, or None."""
    if not 0.0 < c < 1.0:
        raise ParameterError(f"dss: c must lie in (0,1), got {c}")
    values = np.array([float(f(N)) for N in sched.indices])
    ok = values[1:] <= c * values[:-1] * (1.0 + REGULARITY_TOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = values[1:] / values[:-1]
    holds_from = None
    if ok.size and ok[-1]:
        failing = np.flatnonzero(~ok)
        holds_from = int(failing[-1]) + 2 if failing.size else 1
    return CRegularity(holds_from=holds_from, ratios=ratios.tolist(), c=c)


def candidate_mesh(limit: int, ratio: float = MESH_RATIO) -> List[int]:
    """The geometric mesh {ceil(ratio^k)} up to limit, without repeats."""
    out = []
    k = 0
    while True:
        N = int(math.ceil(ratio**k))
        if N > limit:
            return out
        if not out or N > out[-1]:
            out.append(N)
        k += 1


def propose_schedule(seq: PointList, v: RateFunction, slack: float, mesh_ratio: float = MESH_RATIO) -> Schedule:
    """Greedy schedule: accept N when D_N < v(N) and N_prev v(N) <= 1 - slack."""
    if not 0.0 < slack < 1.0:
        raise ParameterError(f"dss: slack must lie in (0,1), got {slack}")
    candidates = [N for N in candidate_mesh(len(seq), mesh_ratio) if N >= v.min_N]
    accepted: List[int] = []
    best_gap = math.inf
    checked = 0
    for N in candidates:
        vN = float(v(N))
        prev = accepted[-1] if accepted else 0
        if prev * vN > 1.0 - slack:
            continue
        result = discrepancy_at(seq, N, "extreme")
        if result is None:
            break
        checked += 1
        best_gap = min(best_gap, result[0] - vN)
        if result[0] < vN:
            accepted.append(N)
    if not accepted:
        raise EmptyScheduleError(
            f"dss: no admissible index among {checked} candidates up to N={len(seq)}",
            diagnostics={"candidates_checked": checked, "min_gap": best_gap, "slack": slack},
        )
    logger.debug(f"propose_schedule slack={slack} -> {accepted}")
    return Schedule(tuple(accepted))
