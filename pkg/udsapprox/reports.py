from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import orjson
import pandas as pd

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


@dataclass
class DiscrepancyReport:
    n: int
    N: int
    star: Optional[float]
    extreme: Optional[float]
    witness_low: List[float]
    witness_high: List[float]
    method: str
    # whether the witness count includes the box boundary (limit from outside)
    witness_closed: bool = False


@dataclass
class DiscrepancyRatios:
    n: int
    N: int
    kiefer: float
    low_disc: float
    roth: float
    n_star: float
    estimated: bool


@dataclass
class DssRecord:
    i: int
    N: int
    discrepancy: Optional[float]
    v: float
    passed: bool
    skipped: bool = False
    kind: str = "extreme"


@dataclass
class DssReport:
    records: List[DssRecord]
    tail_sup: float
    lacunarity_max: float
    tail_fraction: float
    verdict: str
    horizon: str = "finite"


@dataclass
class CRegularity:
    holds_from: Optional[int]
    ratios: List[float]
    c: float


@dataclass
class CoverageReport:
    k: Optional[int]
    fraction: float
    method: str
    error_bound: float
    ball_center: List[float]
    ball_radius: float
    resolution: Optional[float] = None
    samples: Optional[int] = None
    seed: Optional[int] = None


@dataclass
class ExcessReport:
    k: int
    lhs: float
    rhs: float
    holds: bool
    delta: float
    eta: float


@dataclass
class UbiquityReport:
    c_hat: float
    table: List[Dict[str, Any]]


@dataclass
class MeasureEstimate:
    fraction: float
    samples: int
    seed: int
    ci95: float
    j_min: int
    j_max: int


@dataclass
class SeriesReport:
    criterion: str
    terms: List[float]
    partial_sums: List[float]
    trend: str
    log_space: bool


@dataclass
class DominationReport:
    holds: bool
    first_violation: List[Optional[int]]


@dataclass
class KWHypotheses:
    decreasing: bool
    dominated: bool
    rho_regular: bool
    psi_regular: bool

    @property
    def holds(self) -> bool:
        return self.decreasing and self.dominated and (self.rho_regular or self.psi_regular)


@dataclass
class DimensionReport:
    value: float
    method: str
    argmin_j: Optional[int] = None
    per_j: List[float] = field(default_factory=list)
    witness_A: Optional[float] = None
    boundary_t: bool = False
    scales: List[float] = field(default_factory=list)
    counts: List[int] = field(default_factory=list)
    r2: Optional[float] = None


@dataclass
class RunManifest:
    config_hash: str
    version: str
    prng: str
    experiment: str
    started_at: str
    status: str = "running"
    finished_at: Optional[str] = None
    wall_clock_sec: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    error: Optional[str] = None


def dumps(obj: Any) -> bytes:
    return orjson.dumps(obj, option=JSON_OPTIONS) + b"\n"


def write_json(path: Union[str, Path], obj: Any) -> Path:
    path = Path(path)
    path.write_bytes(dumps(obj))
    return path


def write_csv(path: Union[str, Path], rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> Path:
    """Write rows as CSV with a header, '.' decimals and LF line endings."""
    path = Path(path)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    return path
