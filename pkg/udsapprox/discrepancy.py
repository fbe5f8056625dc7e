"""Exact star and extreme discrepancy of finite point sets.

All rectangles are half-open products [a_1, b_1) x ... x [a_n, b_n). Suprema that are
only approached in the limit (a box shrinking onto a point, a face sliding past a
coordinate) are captured by evaluating, at every critical corner, both the count
with the boundary and the count without it.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from udsapprox.exceptions import GuardError, ParameterError
from udsapprox.reports import DiscrepancyRatios, DiscrepancyReport
from udsapprox.sequences import PointList

logger = logging.getLogger(__name__)

TOL = 1e-12

# largest N for the exact anchored-box search, per dimension
STAR_GUARD: Dict[int, int] = {2: 500, 3: 80}
# beyond the table: N ** (n + 1) must stay below this
STAR_WORK_LIMIT = 10**9
# number of (lower, upper) critical boxes the extreme search may enumerate
EXTREME_MAX_BOXES = 2 * 10**7
ORACLE_WORK_LIMIT = 10**8
_CHUNK = 1 << 20


@dataclass(frozen=True)
class Rect:
    """Half-open axis rectangle [low_1, high_1) x ... x [low_n, high_n) inside [0,1]^n."""

    low: Tuple[float, ...]
    high: Tuple[float, ...]

    def __post_init__(self) -> None:
        low = tuple(float(a) for a in self.low)
        high = tuple(float(b) for b in self.high)
        if len(low) != len(high) or not low:
            raise ParameterError("discrepancy: rectangle corners must have the same positive length")
        for a, b in zip(low, high):
            if not (0.0 <= a < b <= 1.0):
                raise ParameterError(f"discrepancy: need 0 <= a < b <= 1, got [{a}, {b})")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def dim(self) -> int:
        return len(self.low)

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.high, self.low)))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        low = np.asarray(self.low)
        high = np.asarray(self.high)
        return np.all((pts >= low) & (pts < high), axis=1)


def count_hits(seq: PointList, rect: Rect, N: int) -> int:
    """A(R; N, omega): how many of the first N points lie in the rectangle."""
    if rect.dim != seq.dim:
        raise ParameterError(f"discrepancy: rectangle dimension {rect.dim} != sequence dimension {seq.dim}")
    return int(np.count_nonzero(rect.contains(seq.prefix(N))))


def star_guard_allows(n: int, N: int) -> bool:
    if n == 1:
        return True
    limit = STAR_GUARD.get(n)
    if limit is not None:
        return N <= limit
    return N ** (n + 1) <= STAR_WORK_LIMIT


def extreme_guard_allows(n: int, N: int) -> bool:
    if n == 1:
        return True
    pairs = (N + 2) * (N + 3) // 2
    return pairs**n <= EXTREME_MAX_BOXES


def _prefix_points(seq: PointList, N: int) -> np.ndarray:
    if N < 1:
        raise ParameterError(f"discrepancy: N must be >= 1, got {N}")
    return np.asarray(seq.prefix(N))


def _critical_grid(pts: np.ndarray):
    """Critical coordinates per axis ({0} u coords u {1}) and the padded cumulative histogram."""
    n = pts.shape[1]
    axes = [np.unique(np.concatenate(([0.0], pts[:, i], [1.0]))) for i in range(n)]
    idx = tuple(np.searchsorted(axes[i], pts[:, i]) for i in range(n))
    hist = np.zeros(tuple(len(u) for u in axes), dtype=np.int64)
    np.add.at(hist, idx, 1)
    padded = np.pad(hist, [(1, 0)] * n)
    for axis in range(n):
        padded = np.cumsum(padded, axis=axis)
    return axes, padded


def _box_counts(padded: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Number of points whose grid index lies in [start_i, end_i] on every axis."""
    n = start.shape[1]
    empty = np.any(start > end, axis=1)
    end = np.maximum(end, start - 1)
    total = np.zeros(start.shape[0], dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=n):
        sign = -1 if (n - sum(corner)) % 2 else 1
        index = tuple(np.where(c, end[:, i] + 1, start[:, i]) for i, c in enumerate(corner))
        total += sign * padded[index]
    total[empty] = 0
    return total


def _star_closed_form(x: np.ndarray) -> Tuple[float, float, bool]:
    N = x.size
    xs = np.sort(x)
    centers = (2.0 * np.arange(1, N + 1) - 1.0) / (2.0 * N)
    dev = xs - centers
    i = int(np.argmax(np.abs(dev)))
    value = 1.0 / (2.0 * N) + float(abs(dev[i]))
    # dev >= 0: volume exceeds the count of [0, x_(i)); dev < 0: the closed box wins
    return value, float(xs[i]), bool(dev[i] < 0)


def _extreme_closed_form(x: np.ndarray) -> Tuple[float, float, float, bool]:
    N = x.size
    xs = np.sort(x)
    a = np.arange(1, N + 1) / N - xs
    i_max = int(np.argmax(a))
    i_min = int(np.argmin(a))
    value = 1.0 / N + float(a[i_max] - a[i_min])
    if i_max >= i_min:
        return value, float(xs[i_min]), float(xs[i_max]), True
    return value, float(xs[i_max]), float(xs[i_min]), False


def _star_grid(pts: np.ndarray) -> Tuple[float, np.ndarray, bool]:
    N, n = pts.shape
    axes, padded = _critical_grid(pts)
    closed = padded[(slice(1, None),) * n]
    opened = padded[(slice(None, -1),) * n]
    vol = axes[0]
    for u in axes[1:]:
        vol = np.multiply.outer(vol, u)
    over = closed / N - vol
    under = vol - opened / N
    local = np.maximum(over, under)
    flat = int(np.argmax(local))
    corner = np.unravel_index(flat, local.shape)
    high = np.array([axes[i][corner[i]] for i in range(n)])
    return float(local[corner]), high, bool(over[corner] > under[corner])


def star_discrepancy_exact(seq: PointList, N: int, method: str = "auto") -> DiscrepancyReport:
    """Exact D*_N: closed form in one dimension, critical-grid extremization otherwise."""
    pts = _prefix_points(seq, N)
    n = seq.dim
    if method not in ("auto", "critical_grid"):
        raise ParameterError(f"discrepancy: unknown star method {method!r}")
    if n == 1 and method == "auto":
        value, t, closed = _star_closed_form(pts[:, 0])
        return DiscrepancyReport(
            n=1,
            N=N,
            star=value,
            extreme=None,
            witness_low=[0.0],
            witness_high=[t],
            method="closed_form_1d",
            witness_closed=closed,
        )
    if not star_guard_allows(n, N):
        raise GuardError(
            f"discrepancy: exact star search for n={n}, N={N} exceeds the guard; "
            "use a smaller N or the sandwich bound from a one-dimensional projection"
        )
    logger.debug(f"star_discrepancy_exact critical grid n={n} N={N}")
    value, high, closed = _star_grid(pts)
    return DiscrepancyReport(
        n=n,
        N=N,
        star=value,
        extreme=None,
        witness_low=[0.0] * n,
        witness_high=high.tolist(),
        method="critical_grid",
        witness_closed=closed,
    )


def _axis_pairs(m: int) -> Tuple[np.ndarray, np.ndarray]:
    low, high = np.triu_indices(m)
    return low.astype(np.int64), high.astype(np.int64)


def _extreme_grid(pts: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, bool]:
    N, n = pts.shape
    axes, padded = _critical_grid(pts)
    pairs = [_axis_pairs(len(u)) for u in axes]
    rest = [np.arange(len(p[0])) for p in pairs[1:]]
    if rest:
        mesh = np.meshgrid(*rest, indexing="ij")
        rest_idx = [g.reshape(-1) for g in mesh]
    else:
        rest_idx = []
    n_rest = rest_idx[0].size if rest_idx else 1
    n_first = len(pairs[0][0])
    step = max(1, _CHUNK // n_rest)

    best = -1.0
    best_box = None
    best_closed = False
    for start in range(0, n_first, step):
        first = np.arange(start, min(start + step, n_first))
        sel = [np.repeat(first, n_rest)] + [np.tile(r, first.size) for r in rest_idx]
        low = np.column_stack([pairs[i][0][sel[i]] for i in range(n)])
        high = np.column_stack([pairs[i][1][sel[i]] for i in range(n)])
        vol = np.ones(low.shape[0])
        for i in range(n):
            vol *= axes[i][high[:, i]] - axes[i][low[:, i]]
        closed = _box_counts(padded, low, high)
        opened = _box_counts(padded, low + 1, high - 1)
        over = closed / N - vol
        under = vol - opened / N
        local = np.maximum(over, under)
        k = int(np.argmax(local))
        if local[k] > best + TOL or best_box is None:
            best = float(local[k])
            best_box = (low[k].copy(), high[k].copy())
            best_closed = bool(over[k] > under[k])
    lo = np.array([axes[i][best_box[0][i]] for i in range(n)])
    hi = np.array([axes[i][best_box[1][i]] for i in range(n)])
    return best, lo, hi, best_closed


def extreme_discrepancy_exact(seq: PointList, N: int, method: str = "auto") -> DiscrepancyReport:
    """Exact D_N over all half-open rectangles; the report also carries D*_N."""
    pts = _prefix_points(seq, N)
    n = seq.dim
    if method not in ("auto", "critical_grid"):
        raise ParameterError(f"discrepancy: unknown extreme method {method!r}")
    if n == 1 and method == "auto":
        value, a, b, closed = _extreme_closed_form(pts[:, 0])
        star = _star_closed_form(pts[:, 0])[0]
        return DiscrepancyReport(
            n=1,
            N=N,
            star=star,
            extreme=value,
            witness_low=[a],
            witness_high=[b],
            method="closed_form_1d",
            witness_closed=closed,
        )
    if not extreme_guard_allows(n, N) or not star_guard_allows(n, N):
        raise GuardError(
            f"discrepancy: exact extreme search for n={n}, N={N} exceeds the guard; "
            "use the one-dimensional closed form or the bound D_N <= 2^n D*_N"
        )
    logger.debug(f"extreme_discrepancy_exact critical grid n={n} N={N}")
    value, lo, hi, closed = _extreme_grid(pts)
    star = _star_grid(pts)[0]
    return DiscrepancyReport(
        n=n,
        N=N,
        star=star,
        extreme=value,
        witness_low=lo.tolist(),
        witness_high=hi.tolist(),
        method="critical_grid",
        witness_closed=closed,
    )


def star_discrepancy_oracle(seq: PointList, N: int) -> DiscrepancyReport:
    """Brute-force D*_N by direct counting over every anchored critical box."""
    pts = _prefix_points(seq, N)
    n = seq.dim
    axes = [np.unique(np.concatenate((pts[:, i], [1.0]))) for i in range(n)]
    work = int(np.prod([len(u) for u in axes])) * N
    if work > ORACLE_WORK_LIMIT:
        raise GuardError(f"discrepancy: oracle work {work} exceeds {ORACLE_WORK_LIMIT}")
    best, best_t, best_closed = -1.0, None, False
    for corner in itertools.product(*axes):
        t = np.asarray(corner)
        vol = float(np.prod(t))
        inside_open = np.count_nonzero(np.all(pts < t, axis=1))
        inside_closed = np.count_nonzero(np.all(pts <= t, axis=1))
        over = inside_closed / N - vol
        under = vol - inside_open / N
        local = max(over, under)
        if local > best:
            best, best_t, best_closed = local, t, over > under
    return DiscrepancyReport(
        n=n,
        N=N,
        star=float(best),
        extreme=None,
        witness_low=[0.0] * n,
        witness_high=best_t.tolist(),
        method="oracle",
        witness_closed=bool(best_closed),
    )


def discrepancy_ratios(seq: PointList, N: int) -> DiscrepancyRatios:
    """Diagnostic ratios against Kiefer's law, the low-discrepancy scale and Roth's bound."""
    if N < 16:
        raise ParameterError(f"discrepancy: ratios need N >= 16 so that log log N > 0, got {N}")
    n = seq.dim
    estimated = False
    if extreme_guard_allows(n, N):
        report = extreme_discrepancy_exact(seq, N)
        star, extreme = report.star, report.extreme
    else:
        star = star_discrepancy_exact(seq, N).star
        extreme = min(1.0, 2.0**n * star)
        estimated = True
        logger.warning(f"discrepancy: N={N} n={n} beyond the exact extreme guard, using 2^n D*_N")
    log_n = math.log(N)
    return DiscrepancyRatios(
        n=n,
        N=N,
        kiefer=star * math.sqrt(2.0 * N / math.log(log_n)),
        low_disc=N * extreme / log_n**n,
        roth=N * extreme / log_n ** ((n - 1) / 2.0),
        n_star=N * star,
        estimated=estimated,
    )


def discrepancy_at(seq: PointList, N: int, kind: str = "extreme") -> Optional[Tuple[float, str]]:
    """D_N (or D*_N) where a guard allows it, falling back to the bound 2^n D*_N for D_N.

    Returns (value, kind) with kind in {"extreme", "star", "star_bound"}, or None when no
    exact computation is allowed.
    """
    n = seq.dim
    if kind == "star":
        if not star_guard_allows(n, N):
            return None
        return star_discrepancy_exact(seq, N).star, "star"
    if extreme_guard_allows(n, N):
        return extreme_discrepancy_exact(seq, N).extreme, "extreme"
    if star_guard_allows(n, N):
        return min(1.0, 2.0**n * star_discrepancy_exact(seq, N).star), "star_bound"
    return None


def sandwich_holds(report: DiscrepancyReport, tol: float = TOL) -> bool:
    if report.star is None or report.extreme is None:
        raise ParameterError("discrepancy: sandwich check needs both star and extreme values")
    return report.star <= report.extreme + tol and report.extreme <= 2**report.n * report.star + tol
