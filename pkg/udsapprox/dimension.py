"""Weighted Hausdorff dimension formulas and an empirical box-counting estimator."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from udsapprox.exceptions import ComputationError, GuardError, ParameterError
from udsapprox.limsup import ApproxProfile, Window, union_hits
from udsapprox.parallel import parallel_map, stream
from udsapprox.reports import DimensionReport
from udsapprox.sequences import PointList

logger = logging.getLogger(__name__)

SUM_TOL = 1e-12
MIN_SCALES = 3
DEFAULT_SAMPLES_PER_BOX = 16
MAX_BOXES = 4 * 10**6
MAX_BOX_SAMPLES = 5 * 10**7
_SAMPLE_BATCH = 1 << 16


@dataclass(frozen=True)
class WeightVector:
    tau: Tuple[float, ...]

    def __post_init__(self) -> None:
        tau = tuple(float(t) for t in self.tau)
        if not tau or min(tau) <= 0:
            raise ParameterError(f"dimension: weights must be positive, got {list(self.tau)}")
        object.__setattr__(self, "tau", tau)

    @property
    def dim(self) -> int:
        return len(self.tau)

    def require_divergent_sum(self) -> None:
        if not sum(self.tau) > 1.0:
            raise ParameterError(
                f"dimension: the weighted dimension formula needs sum(tau) > 1, got {sum(self.tau)}"
            )


@dataclass(frozen=True)
class UbiquityExponents:
    """a with sum(a) = 1 and t >= 0; t_i = 0 is allowed and flagged."""

    a: Tuple[float, ...]
    t: Tuple[float, ...]

    def __post_init__(self) -> None:
        a = tuple(float(x) for x in self.a)
        t = tuple(float(x) for x in self.t)
        if not a or len(a) != len(t):
            raise ParameterError("dimension: a and t must be non-empty and of equal length")
        if min(a) <= 0:
            raise ParameterError(f"dimension: a must be positive, got {list(a)}")
        if abs(math.fsum(a) - 1.0) > SUM_TOL:
            raise ParameterError(f"dimension: a must sum to 1, got {math.fsum(a)}")
        if min(t) < 0:
            raise ParameterError(f"dimension: t must be non-negative, got {list(t)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def boundary_t(self) -> bool:
        return any(x == 0.0 for x in self.t)


def _as_weights(tau) -> WeightVector:
    return tau if isinstance(tau, WeightVector) else WeightVector(tuple(tau))


def dimension_formula(tau) -> DimensionReport:
    """min over j of (1 + sum_{i: tau_j >= tau_i} (tau_j - tau_i)) / tau_j."""
    w = _as_weights(tau)
    w.require_divergent_sum()
    t = np.asarray(w.tau)
    gaps = np.maximum(t[:, None] - t[None, :], 0.0)
    per_j = (1.0 + gaps.sum(axis=1)) / t
    j = int(np.argmin(per_j))
    return DimensionReport(value=float(per_j[j]), method="closed_form", argmin_j=j + 1, per_j=per_j.tolist())


def jarnik_1d(tau: float) -> float:
    if not tau > 1.0:
        raise ParameterError(f"dimension: the one-dimensional formula needs tau > 1, got {tau}")
    return 1.0 / tau


def ww_lower_bound(exps: UbiquityExponents) -> DimensionReport:
    """Minimum over the candidate exponents A in {a_i} u {a_i + t_i} of the K1/K2/K3 score."""
    a = np.asarray(exps.a)
    top = a + np.asarray(exps.t)
    candidates = np.unique(np.concatenate((a, top)))
    scores = []
    for A in candidates:
        if A <= 0:
            raise ComputationError(f"dimension: candidate exponent A={A} must be positive")
        k1 = a >= A
        k2 = (top <= A) & ~k1
        k3 = ~(k1 | k2)
        score = k1.sum() + k2.sum() + (a[k3].sum() - (top[k2] - a[k2]).sum()) / A
        scores.append(float(score))
    best = int(np.argmin(scores))
    return DimensionReport(
        value=scores[best],
        method="ww_lower",
        per_j=scores,
        witness_A=float(candidates[best]),
        boundary_t=exps.boundary_t,
    )


def choose_weights(tau) -> UbiquityExponents:
    """Split tau into ubiquity exponents a (summing to 1) and t = tau - a."""
    w = _as_weights(tau)
    w.require_divergent_sum()
    t = np.asarray(w.tau)
    n = t.size
    if np.all(t >= 1.0 / n):
        a = np.full(n, 1.0 / n)
        return UbiquityExponents(tuple(a), tuple(t - a))

    order = np.argsort(-t, kind="stable")
    s = t[order]
    padded = np.append(s, 0.0)
    for u in range(1, n + 1):
        d = (1.0 - s[u:].sum()) / u
        if d >= padded[u]:
            break
    else:
        raise ComputationError(f"dimension: no admissible split found for tau={w.tau}")
    sorted_a = np.concatenate((np.full(u, d), s[u:]))
    a = np.empty(n)
    a[order] = sorted_a
    t_out = t - a
    # rounding must not push a boundary coordinate below zero
    t_out[np.abs(t_out) <= SUM_TOL] = 0.0
    logger.debug(f"choose_weights tau={w.tau} u={u} D={d}")
    return UbiquityExponents(tuple(a), tuple(t_out))


def upper_bound_exponent(tau, k: int) -> float:
    """(1 + sum_{i: tau_k > tau_i} (tau_k - tau_i)) / tau_k for the 1-based coordinate k."""
    w = _as_weights(tau)
    if not 1 <= k <= w.dim:
        raise ParameterError(f"dimension: coordinate index {k} outside 1..{w.dim}")
    tk = w.tau[k - 1]
    return (1.0 + sum(tk - ti for ti in w.tau if tk > ti)) / tk


def _band(psi: ApproxProfile, win: Window, delta: float) -> Tuple[int, int]:
    """Indices J <= j < 2J of the window, with J the first j whose rectangles fit in a delta box."""
    js = np.arange(win.j_min, win.j_max + 1)
    widths = 2.0 * psi.values(js).max(axis=1)
    fits = np.flatnonzero(widths <= delta)
    J = int(js[fits[0]]) if fits.size else win.j_max
    return J, min(win.j_max, 2 * J - 1)


def _box_ranges(points: np.ndarray, psi: np.ndarray, delta: float, cells: int) -> Tuple[np.ndarray, np.ndarray]:
    """Half-open index ranges of the delta boxes meeting each open rectangle."""
    low = np.clip(np.floor((points - psi) / delta), 0, cells).astype(np.int64)
    high = np.clip(np.ceil((points + psi) / delta), 0, cells).astype(np.int64)
    return low, high


def _occupied(points: np.ndarray, psi: np.ndarray, delta: float) -> np.ndarray:
    """Boolean grid of delta boxes meeting the union of the open rectangles."""
    n = points.shape[1]
    cells = int(math.ceil(1.0 / delta))
    if cells**n > MAX_BOXES:
        raise GuardError(f"dimension: {cells}^{n} boxes at delta={delta} exceeds {MAX_BOXES}")
    keep = np.all(psi > 0, axis=1)
    low, high = _box_ranges(points[keep], psi[keep], delta, cells)
    nonempty = np.all(high > low, axis=1)
    low, high = low[nonempty], high[nonempty]
    diff = np.zeros((cells + 1,) * n, dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=n):
        sign = -1 if sum(corner) % 2 else 1
        index = tuple(np.where(c, high[:, i], low[:, i]) for i, c in enumerate(corner))
        np.add.at(diff, index, sign)
    for axis in range(n):
        diff = np.cumsum(diff, axis=axis)
    return diff[(slice(0, cells),) * n] > 0


def _count_boxes(
    seq: PointList, psi: ApproxProfile, win: Window, delta: float, samples_per_box: int, seed: int, scale_index: int
) -> int:
    lo, hi = _band(psi, win, delta)
    points = np.asarray(seq.window(lo, hi))
    psi_values = psi.values(np.arange(lo, hi + 1))
    occupied = _occupied(points, psi_values, delta)
    if seq.dim == 1:
        return int(np.count_nonzero(occupied))

    boxes = np.argwhere(occupied)
    total = boxes.shape[0] * samples_per_box
    if total > MAX_BOX_SAMPLES:
        raise GuardError(f"dimension: {total} occupancy samples at delta={delta} exceeds {MAX_BOX_SAMPLES}")
    rng = stream(seed, scale_index)
    offsets = rng.random((boxes.shape[0], samples_per_box, seq.dim))
    x = ((boxes[:, None, :] + offsets) * delta).reshape(-1, seq.dim)
    hit = np.zeros(x.shape[0], dtype=bool)
    for start in range(0, x.shape[0], _SAMPLE_BATCH):
        hit[start : start + _SAMPLE_BATCH] = union_hits(points, psi_values, x[start : start + _SAMPLE_BATCH])
    return int(np.count_nonzero(hit.reshape(boxes.shape[0], samples_per_box).any(axis=1)))


def box_dimension_estimate(
    seq: PointList,
    psi: ApproxProfile,
    win: Window,
    scales: Sequence[float],
    samples_per_scale: int = DEFAULT_SAMPLES_PER_BOX,
    seed: int = 0,
    threads: int = 1,
) -> DimensionReport:
    """Slope of log(occupied box count) against log(1/delta) for the truncated limsup set.

    At scale delta only the indices J(delta) <= j < 2 J(delta) contribute, where J(delta)
    is the first index whose rectangles fit inside a delta box. In one dimension occupancy
    is exact; in two dimensions each candidate box is confirmed by seeded hit samples.
    """
    deltas: List[float] = [float(d) for d in scales]
    if len(deltas) < MIN_SCALES:
        raise ParameterError(f"dimension: box counting needs at least {MIN_SCALES} scales, got {len(deltas)}")
    if any(d <= 0 or d >= 1 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ParameterError("dimension: scales must lie in (0,1) and be strictly decreasing")
    if seq.dim not in (1, 2):
        raise ParameterError(f"dimension: box counting supports n = 1 or 2, got {seq.dim}")
    if psi.dim != seq.dim:
        raise ParameterError(f"dimension: profile dimension {psi.dim} != sequence dimension {seq.dim}")
    if samples_per_scale < 1:
        raise ParameterError(f"dimension: samples_per_scale must be positive, got {samples_per_scale}")
    win.check(seq)
    reach = 2.0 * float(psi.values(win.j_min).min())
    if deltas[0] >= reach:
        logger.warning(f"dimension: largest scale {deltas[0]} is not below the rectangle size {reach} at j_min")

    counts = parallel_map(
        lambda item: _count_boxes(seq, psi, win, item[1], samples_per_scale, seed, item[0]),
        list(enumerate(deltas)),
        threads=threads,
    )
    if min(counts) == 0:
        raise GuardError("dimension: the truncated set is empty at some scale; widen the window or the profile")
    fit = linregress(np.log(1.0 / np.asarray(deltas)), np.log(np.asarray(counts, dtype=np.float64)))
    logger.debug(f"box_dimension_estimate counts={counts} slope={fit.slope}")
    return DimensionReport(
        value=float(fit.slope),
        method="box_counting",
        scales=deltas,
        counts=[int(c) for c in counts],
        r2=float(fit.rvalue**2),
    )
