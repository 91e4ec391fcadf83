"""Batches of independent seeded runs with memoized peak results.

Jobs are share-nothing: each worker builds its own world from (config,
seed), so a batch gives identical results at any worker count. The
persistent cache is a CSV keyed by the four intervention controls plus the
seed; it serves the factorial grid that the elementary-effects analysis
reads instead of re-running simulations.
"""

from __future__ import annotations

import csv
import multiprocessing
import os
import time
import warnings
from dataclasses import dataclass, field

from episim.config import SimConfig, fingerprint
from episim.engine import run_simulation

REPORT_HEADER = (
    "job_id",
    "status",
    "peak_pct",
    "healthy",
    "asymptomatic",
    "light",
    "serious",
    "recovered",
    "dead",
    "cached",
    "error",
)

CACHE_HEADER = ("sd", "mask", "lockdown_delay", "isolation", "seed", "peak_pct")


def worker_count(workers=None) -> int:
    """Explicit argument, else EPISIM_THREADS, else hardware parallelism."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("EPISIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class Job:
    job_id: int
    config: SimConfig
    seed: int
    max_ticks: int | None = None


@dataclass
class JobResult:
    job_id: int
    status: str  # "ok" or "failed"
    peak_pct: float | None = None
    final_counts: tuple | None = None  # six HealthState counts
    duration_s: float = 0.0
    cached: bool = False
    error: str = ""


@dataclass
class BatchReport:
    results: list = field(default_factory=list)
    cache_hits: int = 0

    @property
    def n_ok(self):
        return sum(1 for r in self.results if r.status == "ok")

    @property
    def n_failed(self):
        return sum(1 for r in self.results if r.status == "failed")

    def peaks(self):
        return [r.peak_pct for r in self.results if r.status == "ok"]

    def rows(self, include_timing=False):
        header = REPORT_HEADER + (("duration_s",) if include_timing else ())
        yield header
        for r in self.results:
            counts = r.final_counts if r.final_counts is not None else ("",) * 6
            row = [
                r.job_id,
                r.status,
                f"{r.peak_pct:.6f}" if r.peak_pct is not None else "",
                *counts,
                int(r.cached),
                r.error,
            ]
            if include_timing:
                row.append(f"{r.duration_s:.3f}")
            yield row

    def to_csv(self, path, include_timing=False):
        # timing is excluded by default so that report bodies are
        # reproducible byte for byte across runs and worker counts
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(self.rows(include_timing))


def npi_key(config: SimConfig, seed: int) -> tuple:
    iv = config.interventions
    return (
        f"{iv.social_distancing_m:.9g}",
        f"{iv.mask_usage_rate:.9g}",
        f"{iv.lockdown_delay_days:.9g}",
        f"{iv.isolation_rate:.9g}",
        int(seed),
    )


class MemoryCache:
    """In-process memo of batch results keyed by the full config fingerprint."""

    def __init__(self):
        self._entries = {}

    def lookup(self, config: SimConfig, seed: int):
        return self._entries.get(fingerprint(config, seed))

    def store(self, config: SimConfig, seed: int, result: JobResult):
        self._entries[fingerprint(config, seed)] = result


class GridCache:
    """Peak results keyed by the four interventions plus the seed.

    Rows carry only the intervention controls, so a cache file is only
    meaningful together with the base configuration it was produced from
    (recorded as a fingerprint comment on save and checked on load).
    """

    def __init__(self, base_config: SimConfig | None = None):
        self.base_fingerprint = (
            f"{fingerprint(base_config, 0):016x}" if base_config is not None else None
        )
        self._peaks = {}

    def __len__(self):
        return len(self._peaks)

    def lookup(self, config: SimConfig, seed: int):
        peak = self._peaks.get(npi_key(config, seed))
        if peak is None:
            return None
        return JobResult(job_id=-1, status="ok", peak_pct=peak, cached=True)

    def store(self, config: SimConfig, seed: int, result: JobResult):
        if result.status == "ok":
            self._peaks[npi_key(config, seed)] = result.peak_pct

    def get_point(self, point, seed: int | None = None):
        """Peak for a natural-unit (sd, mask, lockdown_delay, isolation) tuple.

        With seed=None, returns the mean over every seed stored for the
        point, which trades replicate noise for bias-free averaging when
        the cache was built with several seeds per point.
        """
        prefix = tuple(f"{v:.9g}" for v in point)
        if seed is not None:
            return self._peaks.get(prefix + (int(seed),))
        hits = [v for k, v in self._peaks.items() if k[:-1] == prefix]
        return sum(hits) / len(hits) if hits else None

    def save(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if self.base_fingerprint:
                fh.write(f"# base_config {self.base_fingerprint}\n")
            w = csv.writer(fh)
            w.writerow(CACHE_HEADER)
            for key in sorted(self._peaks):
                w.writerow([*key, f"{self._peaks[key]:.6f}"])

    @classmethod
    def load(cls, path, base_config: SimConfig | None = None) -> "GridCache":
        cache = cls(base_config)
        with open(path, "r", newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh]
        rows = []
        for ln in lines:
            if ln.startswith("#"):
                parts = ln[1:].split()
                if len(parts) == 2 and parts[0] == "base_config":
                    if cache.base_fingerprint and parts[1] != cache.base_fingerprint:
                        warnings.warn(
                            f"{path}: cache was built for a different base config"
                        )
                continue
            rows.append(ln)
        for i, row in enumerate(csv.reader(rows)):
            if not row or tuple(row) == CACHE_HEADER:
                continue
            try:
                sd, mask, ld, iso, seed, peak = row
                key = (
                    f"{float(sd):.9g}",
                    f"{float(mask):.9g}",
                    f"{float(ld):.9g}",
                    f"{float(iso):.9g}",
                    int(seed),
                )
                cache._peaks[key] = float(peak)
            except (ValueError, TypeError):
                warnings.warn(f"{path}: skipping corrupt cache row {i + 1}: {row!r}")
        return cache


def _execute(job: Job) -> JobResult:
    t0 = time.perf_counter()
    try:
        series = run_simulation(job.config, job.seed, job.max_ticks)
        counts = series.counts[-1]
        return JobResult(
            job_id=job.job_id,
            status="ok",
            peak_pct=series.peak_active_pct(),
            final_counts=tuple(counts),
            duration_s=time.perf_counter() - t0,
        )
    except Exception as exc:  # a failing job must not abort the batch
        return JobResult(
            job_id=job.job_id,
            status="failed",
            duration_s=time.perf_counter() - t0,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_batch(jobs, workers=None, cache=None) -> BatchReport:
    """Execute all jobs, reusing cached (config, seed) results.

    The report is ordered by job_id and identical for any worker count.
    """
    jobs = list(jobs)
    if len({j.job_id for j in jobs}) != len(jobs):
        raise ValueError("job ids must be unique within a batch")
    workers = worker_count(workers)

    results = {}
    pending = []
    hits = 0
    for job in jobs:
        hit = cache.lookup(job.config, job.seed) if cache is not None else None
        if hit is not None:
            results[job.job_id] = JobResult(
                job_id=job.job_id,
                status="ok",
                peak_pct=hit.peak_pct,
                final_counts=hit.final_counts,
                cached=True,
            )
            hits += 1
        else:
            pending.append(job)

    if pending:
        if workers == 1 or len(pending) == 1:
            fresh = [_execute(job) for job in pending]
        else:
            with multiprocessing.Pool(processes=workers) as pool:
                fresh = pool.map(_execute, pending, chunksize=1)
        by_id = {j.job_id: j for j in pending}
        for res in fresh:
            results[res.job_id] = res
            if cache is not None and res.status == "ok":
                job = by_id[res.job_id]
                cache.store(job.config, job.seed, res)

    ordered = [results[j.job_id] for j in sorted(jobs, key=lambda j: j.job_id)]
    return BatchReport(results=ordered, cache_hits=hits)


def cache_lookup(cache, config: SimConfig, seed: int):
    """Stored peak for (config, seed), or None on a miss."""
    hit = cache.lookup(config, seed)
    return None if hit is None else hit.peak_pct
