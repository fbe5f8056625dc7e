"""Generators and loaders for finite prefixes of sequences in [0,1)^n.

Points are indexed from 1, so ``PointList.point(j)`` is the j-th term of the
sequence and ``PointList.prefix(N)`` holds the terms 1..N.
"""

import logging
import re
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from udsapprox.exceptions import (
    CoordinateRangeError,
    DimensionMismatchError,
    IndexRangeError,
    ParameterError,
    SequenceParseError,
)

logger = logging.getLogger(__name__)

PRNG_NAME = "numpy.random.PCG64 (SeedSequence-seeded, period 2^128)"

Point = Tuple[float, ...]

# alpha is split into a head with this many fractional bits and a small tail;
# j * head is then exact in float64 for every j below 2**(53 - HEAD_BITS)
HEAD_BITS = 26
MAX_KRONECKER_N = 2 ** (53 - HEAD_BITS)

# decimal literal with optional sign, point and exponent; no underscores, inf or nan
DECIMAL = re.compile(r"[+-]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?")

GENERATOR_KINDS = ("kronecker", "radical_inverse", "iid_uniform", "file")


def as_point(coords: Sequence[float], dim: Optional[int] = None) -> np.ndarray:
    """Validate a single point of [0,1)^n and return it as a float array."""
    x = np.asarray(coords, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ParameterError("sequences: a point needs at least one coordinate")
    if dim is not None and x.size != dim:
        raise ParameterError(f"sequences: point has dimension {x.size}, expected {dim}")
    if not np.all((x >= 0.0) & (x < 1.0)):
        raise ParameterError(f"sequences: point {x.tolist()} is not in [0,1)^{x.size}")
    return x


@dataclass(frozen=True, eq=False)
class PointList:
    """An immutable, 1-indexed finite prefix of a sequence in [0,1)^dim."""

    coords: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ParameterError(f"sequences: expected an (N, n) array, got shape {arr.shape}")
        if arr.size and not np.all((arr >= 0.0) & (arr < 1.0)):
            raise CoordinateRangeError("coordinates must lie in [0,1)")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "dim", int(arr.shape[1]))

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    def point(self, j: int) -> Point:
        if not 1 <= j <= len(self):
            raise IndexRangeError(f"sequences: index {j} outside 1..{len(self)}")
        return tuple(float(c) for c in self.coords[j - 1])

    def prefix(self, N: int) -> np.ndarray:
        """Return the read-only (N, dim) array of points 1..N."""
        if N < 0 or N > len(self):
            raise IndexRangeError(f"sequences: prefix length {N} exceeds available {len(self)} points")
        return self.coords[:N]

    def window(self, j_min: int, j_max: int) -> np.ndarray:
        """Return points j_min..j_max (inclusive, 1-based)."""
        if j_min < 1 or j_max > len(self) or j_min > j_max:
            raise IndexRangeError(f"sequences: window [{j_min}, {j_max}] exceeds prefix of length {len(self)}")
        return self.coords[j_min - 1 : j_max]


def gen_kronecker(alpha: Sequence[float], N: int) -> PointList:
    """Kronecker sequence: point j has coordinates {j * alpha_i}."""
    a = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if a.size == 0 or not np.all((a > 0.0) & (a < 1.0)):
        raise ParameterError(f"sequences: kronecker alpha must lie in (0,1), got {a.tolist()}")
    _check_count(N)
    if N >= MAX_KRONECKER_N:
        raise ParameterError(f"sequences: kronecker N must be below {MAX_KRONECKER_N} for exact accumulation")
    logger.debug(f"gen_kronecker alpha={a.tolist()} N={N}")

    scale = float(2**HEAD_BITS)
    head = np.floor(a * scale) / scale
    tail = a - head
    j = np.arange(1, N + 1, dtype=np.float64)[:, None]
    frac_head = np.mod(j * head[None, :], 1.0)
    coords = np.mod(frac_head + j * tail[None, :], 1.0)
    return PointList(coords)


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    remaining = indices.astype(np.int64).copy()
    result = np.zeros(remaining.shape, dtype=np.float64)
    factor = 1.0 / base
    while np.any(remaining > 0):
        result += (remaining % base) * factor
        remaining //= base
        factor /= base
    return result


def gen_radical_inverse(bases: Sequence[int], N: int) -> PointList:
    """Halton sequence (van der Corput when a single base is given)."""
    b = [int(x) for x in bases]
    if not b or any(x != y for x, y in zip(b, bases)) or any(x < 2 for x in b):
        raise ParameterError(f"sequences: radical-inverse bases must be integers >= 2, got {list(bases)}")
    for x, y in combinations(b, 2):
        if math.gcd(x, y) != 1:
            raise ParameterError(f"sequences: radical-inverse bases {x} and {y} are not coprime")
    _check_count(N)
    logger.debug(f"gen_radical_inverse bases={b} N={N}")

    indices = np.arange(1, N + 1, dtype=np.int64)
    coords = np.column_stack([_radical_inverse(indices, base) for base in b])
    return PointList(coords)


def gen_iid_uniform(seed: int, n: int, N: int) -> PointList:
    """Seeded i.i.d. uniform points from PCG64; identical output on every platform."""
    if not 0 <= int(seed) < 2**64:
        raise ParameterError(f"sequences: seed must be a 64-bit unsigned integer, got {seed}")
    if n < 1:
        raise ParameterError(f"sequences: dimension must be >= 1, got {n}")
    _check_count(N)
    logger.debug(f"gen_iid_uniform seed={seed} n={n} N={N}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    return PointList(rng.random((N, n)))


def _parse_line(line: str, line_no: int) -> list:
    tokens = line.split(" ")
    if not all(DECIMAL.fullmatch(tok) for tok in tokens):
        raise SequenceParseError(
            f"malformed coordinates {line!r}; expected decimals separated by single spaces", line=line_no
        )
    return [float(tok) for tok in tokens]


def load_sequence(path: Union[str, Path]) -> PointList:
    """Read the sequence text format.

    UTF-8, one point per line, decimal coordinates separated by single spaces. Blank lines
    and lines starting with '#' are skipped; the first data line fixes the dimension.
    """
    rows = []
    dim = None
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError as e:
                raise SequenceParseError(f"invalid UTF-8 ({e.reason})", line=line_no) from None
            if not line.strip() or line.startswith("#"):
                continue
            values = _parse_line(line, line_no)
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DimensionMismatchError(f"expected {dim} coordinates, found {len(values)}", line=line_no)
            for value in values:
                if not (0.0 <= value < 1.0):
                    raise CoordinateRangeError(f"coordinate {value!r} is outside [0,1)", line=line_no)
            rows.append(values)
    if not rows:
        raise SequenceParseError(f"no points found in {path}")
    logger.debug(f"load_sequence path={path} N={len(rows)} dim={dim}")
    return PointList(np.asarray(rows, dtype=np.float64))


def write_sequence(path: Union[str, Path], seq: PointList) -> Path:
    """Write a PointList in the sequence text format (shortest round-trip decimals)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in seq.coords:
            f.write(" ".join(repr(float(c)) for c in row) + "\n")
    return path


def _check_count(N: int) -> None:
    if int(N) != N or N < 1:
        raise ParameterError(f"sequences: count N must be a positive integer, got {N}")


@dataclass(frozen=True)
class GeneratorSpec:
    """Declarative description of a sequence prefix."""

    kind: str
    count: int
    dim: Optional[int] = None
    alpha: Optional[Tuple[float, ...]] = None
    bases: Optional[Tuple[int, ...]] = None
    seed: Optional[int] = None
    path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in GENERATOR_KINDS:
            raise ParameterError(f"sequences: unknown generator kind {self.kind!r}")
        if self.kind != "file":
            _check_count(self.count)
        if self.kind == "kronecker":
            if not self.alpha:
                raise ParameterError("sequences: kronecker generator needs alpha")
            self._check_dim(len(self.alpha))
            if not all(0.0 < a < 1.0 for a in self.alpha):
                raise ParameterError(f"sequences: kronecker alpha must lie in (0,1), got {list(self.alpha)}")
        elif self.kind == "radical_inverse":
            if not self.bases:
                raise ParameterError("sequences: radical_inverse generator needs bases")
            self._check_dim(len(self.bases))
        elif self.kind == "iid_uniform":
            if self.seed is None or self.dim is None:
                raise ParameterError("sequences: iid_uniform generator needs seed and dim")
        elif self.path is None:
            raise ParameterError("sequences: file generator needs path")

    def _check_dim(self, inferred: int) -> None:
        if self.dim is not None and self.dim != inferred:
            raise ParameterError(f"sequences: dim={self.dim} disagrees with parameter length {inferred}")

    def generate(self) -> PointList:
        if self.kind == "kronecker":
            return gen_kronecker(self.alpha, self.count)
        if self.kind == "radical_inverse":
            return gen_radical_inverse(self.bases, self.count)
        if self.kind == "iid_uniform":
            return gen_iid_uniform(self.seed, self.dim, self.count)
        seq = load_sequence(self.path)
        if self.count and self.count < len(seq):
            seq = PointList(seq.prefix(self.count))
        return seq
