"""One-at-a-time sweeps of a single intervention with replicate runs.

Each (level, replicate) pair runs with an independent, reproducible seed
derived from a 64-bit mix of the level value and the replicate index, so
sweeps can be extended or re-run level by level without disturbing the
others. The headline statistic per run is the peak percentage of
simultaneously active infections.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from episim.config import ConfigError, SimConfig
from episim.engine import TimeSeries
from episim.morris import DEFAULT_FACTORS
from episim.orchestrator import Job, run_batch

SWEEPABLE = {f.name: f for f in DEFAULT_FACTORS}

RUNS_HEADER = ("parameter", "level", "replicate", "seed", "peak_pct")
SUMMARY_HEADER = (
    "parameter",
    "level",
    "n",
    "median",
    "mean",
    "range",
    "variance",
    "std_dev",
    "std_err",
)


class SweepError(ConfigError):
    """Invalid sweep specification."""


def peak_infection(series: TimeSeries) -> float:
    """Maximum active-infection percentage over the run."""
    if len(series) == 0:
        raise SweepError("empty time series")
    return series.peak_active_pct()


def point_config(base: SimConfig, point) -> SimConfig:
    """Configuration for one (distancing, masks, lockdown delay, isolation) point.

    Lockdown is enabled so the delay factor is live.
    """
    sd, mask, delay, isolation = point
    cfg = base.copy()
    cfg.interventions.social_distancing_m = float(sd)
    cfg.interventions.mask_usage_rate = float(mask)
    cfg.interventions.lockdown_enabled = True
    cfg.interventions.lockdown_delay_days = float(delay)
    cfg.interventions.isolation_rate = float(isolation)
    return cfg


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def replicate_seed(seed_base: int, replicate: int) -> int:
    """Well-spread 63-bit seed for one replicate.

    The same replicate seed is reused at every level (common random numbers),
    so level-to-level contrasts are not drowned by between-seed variance.
    """
    return (seed_base + _splitmix64(replicate)) & 0x7FFFFFFFFFFFFFFF


@dataclass
class SweepSpec:
    parameter: str
    levels: list
    replicates: int = 12
    config: SimConfig = field(default_factory=SimConfig)
    seed_base: int = 0

    def __post_init__(self):
        self.levels = [float(v) for v in self.levels]
        self.validate()

    def validate(self):
        if self.parameter not in SWEEPABLE:
            raise SweepError(
                f"unknown sweep parameter {self.parameter!r}; "
                f"choose from {sorted(SWEEPABLE)}"
            )
        bounds = SWEEPABLE[self.parameter]
        if len(self.levels) < 1:
            raise SweepError("need at least one level")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise SweepError("levels must be strictly increasing")
        for v in self.levels:
            if v < bounds.low - 1e-9 or v > bounds.high + 1e-9:
                raise SweepError(
                    f"level {v} outside [{bounds.low}, {bounds.high}] for {self.parameter}"
                )
        if self.replicates < 1:
            raise SweepError("replicates must be >= 1")

    def level_config(self, level: float) -> SimConfig:
        cfg = self.config.copy()
        setattr(cfg.interventions, self.parameter, float(level))
        if self.parameter == "lockdown_delay_days":
            cfg.interventions.lockdown_enabled = True
        return cfg


@dataclass
class LevelSummary:
    level: float
    n: int
    median: float
    mean: float
    range: float
    variance: float
    std_dev: float
    std_err: float
    degenerate: bool = False  # single replicate: spread reported as 0


def summarize(values) -> dict:
    """Median/mean/range/variance (n-1)/sd/se for one level's peaks."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n == 0:
        raise SweepError("no values to summarize")
    degenerate = n == 1
    variance = 0.0 if degenerate else float(v.var(ddof=1))
    sd = math.sqrt(variance)
    return {
        "n": n,
        "median": float(np.median(v)),
        "mean": float(v.mean()),
        "range": float(v.max() - v.min()),
        "variance": variance,
        "std_dev": sd,
        "std_err": sd / math.sqrt(n),
        "degenerate": degenerate,
    }


@dataclass
class SweepResult:
    parameter: str
    levels: list
    peaks: dict  # level -> list of replicate peaks
    seeds: dict  # level -> list of seeds
    summaries: list  # LevelSummary per level

    def medians(self):
        return [s.median for s in self.summaries]

    def write_runs_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(RUNS_HEADER)
            for level in self.levels:
                for rep, (seed, peak) in enumerate(
                    zip(self.seeds[level], self.peaks[level])
                ):
                    w.writerow([self.parameter, f"{level:.9g}", rep, seed, f"{peak:.6f}"])

    def write_summary_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            for s in self.summaries:
                w.writerow(
                    [
                        self.parameter,
                        f"{s.level:.9g}",
                        s.n,
                        f"{s.median:.6f}",
                        f"{s.mean:.6f}",
                        f"{s.range:.6f}",
                        f"{s.variance:.6f}",
                        f"{s.std_dev:.6f}",
                        f"{s.std_err:.6f}",
                    ]
                )


def run_sweep(spec: SweepSpec, workers=None, cache=None) -> SweepResult:
    """Run replicates at every level and summarize the peaks per level."""
    spec.validate()
    jobs = []
    seeds = {level: [] for level in spec.levels}
    job_meta = []
    for li, level in enumerate(spec.levels):
        cfg = spec.level_config(level)
        for rep in range(spec.replicates):
            seed = replicate_seed(spec.seed_base, rep)
            seeds[level].append(seed)
            jobs.append(Job(job_id=len(jobs), config=cfg, seed=seed))
            job_meta.append((level, rep))

    report = run_batch(jobs, workers=workers, cache=cache)
    failed = [r for r in report.results if r.status != "ok"]
    if failed:
        raise SweepError(f"{len(failed)} sweep runs failed, e.g. {failed[0].error}")

    peaks = {level: [] for level in spec.levels}
    for res, (level, _rep) in zip(report.results, job_meta):
        peaks[level].append(res.peak_pct)

    summaries = []
    for level in spec.levels:
        stats = summarize(peaks[level])
        degenerate = stats.pop("degenerate")
        summaries.append(LevelSummary(level=level, degenerate=degenerate, **stats))
    return SweepResult(
        parameter=spec.parameter,
        levels=list(spec.levels),
        peaks=peaks,
        seeds=seeds,
        summaries=summaries,
    )


def sensitivity_index(medians) -> float:
    """(max - min) / max over per-level medians; NaN when max == 0."""
    m = np.asarray(list(medians), dtype=float)
    if len(m) < 2:
        raise SweepError("need at least two levels")
    y_max = float(m.max())
    y_min = float(m.min())
    if y_max == 0.0:
        return float("nan")  # no signal at any level
    return (y_max - y_min) / y_max
