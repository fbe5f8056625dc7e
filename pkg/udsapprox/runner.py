import logging
import os
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from udsapprox import __version__
from udsapprox.config import ExperimentConfig
from udsapprox.decorators import timed
from udsapprox.dimension import (
    UbiquityExponents,
    box_dimension_estimate,
    choose_weights,
    dimension_formula,
    upper_bound_exponent,
    ww_lower_bound,
)
from udsapprox.discrepancy import (
    discrepancy_ratios,
    extreme_discrepancy_exact,
    star_discrepancy_exact,
    star_discrepancy_oracle,
)
from udsapprox.dss import check_dss, propose_schedule
from udsapprox.limsup import SWEEP_COLUMNS, Window, measure_sweep, series_partial_sums, sweep_rows
from udsapprox.reports import RunManifest, write_csv, write_json
from udsapprox.sequences import PRNG_NAME, PointList, write_sequence
from udsapprox.ubiquity import TABLE_COLUMNS, prior_block_excess, verify_local_ubiquity


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class ExperimentRunner:
    """Runs validated experiments and writes their reports and manifest to an output directory."""

    out_dir: str = field(default_factory=lambda: os.getenv("UDSAPPROX_OUT_DIR", "./udsapprox-out"))
    threads: int = field(default_factory=lambda: int(os.getenv("UDSAPPROX_THREADS", "1")))
    verbose: bool = False
    log_filename: Optional[str] = None
    logger: logging.Logger = field(init=False)
    manifest: Optional[RunManifest] = field(init=False, default=None)

    def __post_init__(self) -> None:
        self._initialize_logging()

    def _initialize_logging(self) -> None:
        self.logger = logging.getLogger("udsapprox")

        if self.verbose:
            log_filename = self.log_filename or datetime.now().strftime("udsapprox_debug_%Y%m%d_%H%M%S.log")
            file_handler = logging.FileHandler(filename=os.path.join(os.getcwd(), log_filename))
            formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)
            self.logger.setLevel(logging.DEBUG)
        else:
            self.logger.setLevel(logging.WARNING)

    def run(self, config: ExperimentConfig, out_dir: Optional[str] = None) -> RunManifest:
        """Execute one experiment. The manifest is written first and finalized afterwards."""
        out = Path(out_dir or config.out_dir or self.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            config_hash=config.config_hash,
            version=__version__,
            prng=PRNG_NAME,
            experiment=config.experiment,
            started_at=_now(),
        )
        manifest_path = out / "manifest.json"
        write_json(manifest_path, self.manifest)
        self.logger.debug(f"Running {config.experiment} into {out} (config {config.config_hash[:12]})")

        start = time.perf_counter()
        try:
            outputs = self._dispatch(config, out)
        except Exception as e:
            self.manifest.status = "failed"
            self.manifest.error = f"{type(e).__name__}: {e}"
            raise
        else:
            self.manifest.status = "complete"
            self.manifest.outputs = sorted(outputs)
        finally:
            self.manifest.finished_at = _now()
            self.manifest.wall_clock_sec = time.perf_counter() - start
            write_json(manifest_path, self.manifest)
        return self.manifest

    def _dispatch(self, config: ExperimentConfig, out: Path) -> List[str]:
        steps = {
            "gen": self._gen,
            "disc": self._disc,
            "dss-check": self._dss_check,
            "ubiquity": self._ubiquity,
            "measure": self._measure,
            "series": self._series,
            "dimension": self._dimension,
            "box-dim": self._box_dim,
        }
        return steps[config.experiment](config, out)

    @timed
    def _generate(self, config: ExperimentConfig) -> PointList:
        return config.generator.generate()

    @timed
    def _gen(self, config: ExperimentConfig, out: Path) -> List[str]:
        write_sequence(out / "sequence.txt", self._generate(config))
        return ["sequence.txt"]

    @timed
    def _disc(self, config: ExperimentConfig, out: Path) -> List[str]:
        seq = self._generate(config)
        p = config.params
        Ns = p["N"] if isinstance(p["N"], list) else [p["N"]]
        reports, ratios, oracles = [], [], []
        for N in Ns:
            if p["kind"] == "star":
                reports.append(star_discrepancy_exact(seq, N))
            else:
                reports.append(extreme_discrepancy_exact(seq, N))
            if p["ratios"]:
                ratios.append(discrepancy_ratios(seq, N))
            if p["oracle"]:
                oracles.append(star_discrepancy_oracle(seq, N))
        payload = {"reports": reports}
        if ratios:
            payload["ratios"] = ratios
        if oracles:
            payload["oracle"] = oracles
        write_json(out / "disc.json", payload)
        rows = [{"N": r.N, "star": r.star, "extreme": r.extreme, "method": r.method} for r in reports]
        write_csv(out / "disc.csv", rows, ["N", "star", "extreme", "method"])
        return ["disc.json", "disc.csv"]

    @timed
    def _dss_check(self, config: ExperimentConfig, out: Path) -> List[str]:
        seq = self._generate(config)
        p = config.params
        sched = config.schedule
        if p["propose"]:
            sched = propose_schedule(seq, config.rate, p["slack"])
        report = check_dss(seq, sched, config.rate, tail_fraction=p["tail_fraction"], threads=self.threads)
        write_json(out / "schedule.json", list(sched.indices))
        write_json(out / "dss.json", report)
        rows = [asdict(r) for r in report.records]
        write_csv(out / "dss.csv", rows, ["i", "N", "discrepancy", "v", "passed", "skipped", "kind"])
        return ["schedule.json", "dss.json", "dss.csv"]

    @timed
    def _ubiquity(self, config: ExperimentConfig, out: Path) -> List[str]:
        seq = self._generate(config)
        p = config.params
        balls = config.balls
        method_args = dict(method=p["method"], resolution=p["resolution"], samples=p["samples"], seed=p["seed"])
        report = verify_local_ubiquity(
            seq, config.schedule, config.rho, balls, p["k_range"], threads=self.threads, **method_args
        )
        payload = {"c_hat": report.c_hat, "table": report.table}
        if p["excess"]:
            excess = []
            for ball_id, ball in enumerate(balls):
                for k in p["k_range"]:
                    r = prior_block_excess(
                        seq, config.schedule, k, config.rho, ball, delta=p["delta"], eta=p["eta"], **method_args
                    )
                    excess.append({"ball_id": ball_id, **asdict(r)})
            payload["excess"] = excess
        write_json(out / "ubiquity.json", payload)
        write_csv(out / "ubiquity.csv", report.table, TABLE_COLUMNS)
        return ["ubiquity.json", "ubiquity.csv"]

    @timed
    def _measure(self, config: ExperimentConfig, out: Path) -> List[str]:
        seq = self._generate(config)
        p = config.params
        windows = [Window(lo, hi) for lo, hi in p["windows"]]
        estimates = measure_sweep(seq, config.profile, windows, p["samples"], p["seed"], threads=self.threads)
        write_json(out / "measure.json", estimates)
        write_csv(out / "measure.csv", sweep_rows(estimates), SWEEP_COLUMNS)
        return ["measure.json", "measure.csv"]

    @timed
    def _series(self, config: ExperimentConfig, out: Path) -> List[str]:
        p = config.params
        report = series_partial_sums(
            p["criterion"],
            p["J"],
            config.profile,
            v=config.rate,
            sched=config.schedule,
            M=p["M"],
            n=p["n"],
            rho=config.rho,
            log_space=p["log_space"],
        )
        write_json(out / "series.json", report)
        return ["series.json"]

    @timed
    def _dimension(self, config: ExperimentConfig, out: Path) -> List[str]:
        tau = config.tau
        p = config.params
        write_json(out / "dimension.json", dimension_formula(tau))
        if p["a"] is not None and p["t"] is not None:
            exps = UbiquityExponents(tuple(p["a"]), tuple(p["t"]))
        else:
            exps = choose_weights(tau)
        weights = {
            "a": list(exps.a),
            "t": list(exps.t),
            "ww_lower": ww_lower_bound(exps),
            "upper_bound_exponents": [upper_bound_exponent(tau, k) for k in range(1, tau.dim + 1)],
        }
        write_json(out / "weights.json", weights)
        return ["dimension.json", "weights.json"]

    @timed
    def _box_dim(self, config: ExperimentConfig, out: Path) -> List[str]:
        seq = self._generate(config)
        p = config.params
        report = box_dimension_estimate(
            seq,
            config.profile,
            Window(*p["window"]),
            p["scales"],
            samples_per_scale=p["samples_per_scale"],
            seed=p["seed"],
            threads=self.threads,
        )
        write_json(out / "box_dim.json", report)
        rows = [{"delta": d, "count": c} for d, c in zip(report.scales, report.counts)]
        write_csv(out / "box_dim.csv", rows, ["delta", "count"])
        return ["box_dim.json", "box_dim.csv"]
