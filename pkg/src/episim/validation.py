"""Model-versus-reality comparison utilities.

An hourly model series is matched to daily historical data by sampling one
tick per equal-width window, both series are normalized by their maxima and
compared with Pearson and Spearman correlation. P-values use the exact
t-distribution transform, with the incomplete beta function evaluated by
continued fraction (accurate to well below 1e-8).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Invalid series or correlation input."""


@dataclass
class CaseSeries:
    """Ordered (time, value) series with a provenance label."""

    times: list
    values: np.ndarray
    label: str = "model"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.times) != len(self.values):
            raise ValidationError("times and values differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("time index must be strictly increasing")
        if np.any(self.values < 0):
            raise ValidationError("case counts must be >= 0")

    def __len__(self):
        return len(self.values)


def downsample_to_daily(model: CaseSeries, target_len: int, seed: int) -> CaseSeries:
    """One uniformly chosen point per equal-width window, order preserved."""
    n = len(model)
    if target_len <= 0:
        raise ValidationError("target length must be positive")
    if n < target_len:
        raise ValidationError(f"series of length {n} cannot yield {target_len} samples")
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = []
    for w in range(target_len):
        lo = w * n // target_len
        hi = (w + 1) * n // target_len
        picks.append(int(lo + rng.integers(0, hi - lo)))
    return CaseSeries(
        times=[model.times[i] for i in picks],
        values=model.values[picks],
        label=model.label,
    )


def normalize(series: CaseSeries) -> CaseSeries:
    """Scale values by the series maximum so the peak becomes 1."""
    peak = float(series.values.max()) if len(series) else 0.0
    if peak <= 0:
        raise ValidationError("cannot normalize an all-zero series")
    return CaseSeries(times=list(series.times), values=series.values / peak, label=series.label)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, dof: int) -> float:
    """Two-sided tail probability of Student's t with `dof` degrees of freedom."""
    if not math.isfinite(t):
        return 0.0
    return _betainc(dof / 2.0, 0.5, dof / (dof + t * t))


def _pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("correlation undefined for a zero-variance series")
    return min(1.0, max(-1.0, float(xc @ yc) / (sx * sy)))


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=float)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # ties share the average rank
        i = j + 1
    return ranks


def _r_to_p(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return t_sf_two_sided(t, n - 2)


def correlate(a: CaseSeries, b: CaseSeries) -> dict:
    """Pearson and Spearman coefficients with two-sided p-values."""
    if len(a) != len(b):
        raise ValidationError("series lengths differ")
    n = len(a)
    if n < 3:
        raise ValidationError("need at least 3 points to correlate")
    x = np.asarray(a.values, float)
    y = np.asarray(b.values, float)
    pearson = _pearson_r(x, y)
    spearman = _pearson_r(_average_ranks(x), _average_ranks(y))
    return {
        "n": n,
        "pearson": pearson,
        "pearson_p": _r_to_p(pearson, n),
        "spearman": spearman,
        "spearman_p": _r_to_p(spearman, n),
    }


def load_actual_csv(path) -> CaseSeries:
    """Historical data as a `date,value` CSV (ISO dates or day numbers)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "value"]:
            raise ValidationError(f"{path}: expected a 'date,value' header")
        times, values = [], []
        for row in reader:
            if not row:
                continue
            times.append(row[0])
            values.append(float(row[1]))
    if not times:
        raise ValidationError(f"{path}: no data rows")
    return CaseSeries(times=list(range(len(times))), values=np.array(values), label="actual")


def write_correlation_csv(result: dict, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        w.writerow(["n", result["n"]])
        for key in ("pearson", "pearson_p", "spearman", "spearman_p"):
            w.writerow([key, f"{result[key]:.6g}"])
