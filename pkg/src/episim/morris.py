"""Elementary-effects screening over the four intervention controls.

Factors are standardized to [0, 1] on a p-level grid. Random one-step-at-a-
time trajectories yield one elementary effect per factor; per-factor
statistics are the mean (mu), mean of absolute values (mu_star), a
variance-type spread (sigma, n-1 denominator) and the composite importance
score sqrt(mu_star^2 + sigma). Effects are direction-corrected: a step that
subtracts the grid increment flips the sign, so negative mu means the
output falls as the factor rises.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


class MorrisError(ValueError):
    """Invalid grid, trajectory or analysis input."""


@dataclass(frozen=True)
class FactorBounds:
    """Natural range of one factor; integral factors round on denormalize."""

    name: str
    low: float
    high: float
    integral: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise MorrisError(f"{self.name}: bounds must satisfy low < high")


#: The four intervention controls and their sweep boundaries.
DEFAULT_FACTORS = (
    FactorBounds("social_distancing_m", 0.0, 2.5),
    FactorBounds("mask_usage_rate", 0.0, 100.0),
    FactorBounds("lockdown_delay_days", 7.0, 32.0, integral=True),
    FactorBounds("isolation_rate", 0.0, 100.0),
)

_EPS = 1e-9


@dataclass(frozen=True)
class LevelGrid:
    """k factors on p equispaced levels in [0, 1] with step size delta."""

    k: int = 4
    p: int = 6
    delta: float = 0.2

    def __post_init__(self):
        if self.k < 1 or self.p < 2:
            raise MorrisError("need k >= 1 factors and p >= 2 levels")
        steps = self.delta * (self.p - 1)
        if abs(steps - round(steps)) > _EPS or round(steps) < 1:
            raise MorrisError(
                f"delta={self.delta} is not a positive multiple of 1/(p-1)"
            )

    @property
    def delta_steps(self) -> int:
        return int(round(self.delta * (self.p - 1)))

    @property
    def levels(self) -> tuple:
        return tuple(i / (self.p - 1) for i in range(self.p))


@dataclass
class Trajectory:
    """k+1 grid points, consecutive points differing in one factor by ±delta."""

    points: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)


@dataclass
class FactorResult:
    factor: int
    name: str
    mu: float
    mu_star: float
    sigma: float
    rank: float


@dataclass
class EEResult:
    """Per-factor statistics, ordered by rank descending."""

    factors: list
    r: int

    def by_index(self, i: int) -> FactorResult:
        for f in self.factors:
            if f.factor == i:
                return f
        raise KeyError(i)

    def ordering(self) -> list:
        return [f.factor for f in self.factors]


def rank_score(mu_star: float, sigma: float) -> float:
    """Composite importance score sqrt(mu_star^2 + sigma).

    sigma enters unsquared: it is already a variance-type quantity.
    """
    return float(np.sqrt(mu_star**2 + sigma))


def generate_trajectories(grid: LevelGrid, r: int, seed: int) -> list:
    """r stratified trajectories; each factor is perturbed exactly once.

    For every factor the grid offers p - delta_steps distinct level segments
    a delta step can traverse. The r trajectories sample those segments in
    stratified fashion (each segment is used floor(r / n_segments) or one
    more time, assigned by an independent shuffle per factor — a Latin
    hypercube over segments), which spreads the elementary effects evenly
    over the factor's range instead of leaving coverage to chance. Step
    direction within the chosen segment and the perturbation order stay
    random. Deterministic per seed.
    """
    if r < 1:
        raise MorrisError("need at least one trajectory")
    rng = np.random.Generator(np.random.PCG64(seed))
    p1 = grid.p - 1
    d = grid.delta_steps
    n_segments = grid.p - d  # lowest admissible level of each delta-wide segment
    if n_segments < 1:
        raise MorrisError("delta does not fit the level grid")
    # segment[t][i]: lowest level of the segment trajectory t perturbs factor i over
    segment = np.empty((r, grid.k), dtype=int)
    for i in range(grid.k):
        pool = np.tile(np.arange(n_segments), (r + n_segments - 1) // n_segments)[:r]
        segment[:, i] = pool[rng.permutation(r)]
    out = []
    for t in range(r):
        up = rng.random(grid.k) < 0.5  # start low, step up (else start high, step down)
        base = np.where(up, segment[t], segment[t] + d)
        order = rng.permutation(grid.k)
        current = base.copy()
        points = [tuple(current / p1)]
        for i in order:
            current[i] += d if up[i] else -d
            points.append(tuple(current / p1))
        out.append(Trajectory(points))
    return out


def validate_trajectory(t: Trajectory, grid: LevelGrid):
    """None if the trajectory satisfies every invariant, else a description."""
    if len(t.points) != grid.k + 1:
        return f"expected {grid.k + 1} points, got {len(t.points)}"
    p1 = grid.p - 1
    for n, pt in enumerate(t.points):
        if len(pt) != grid.k:
            return f"point {n} has {len(pt)} coordinates, expected {grid.k}"
        for x in pt:
            if x < -_EPS or x > 1 + _EPS:
                return f"point {n} leaves [0, 1]"
            if abs(x * p1 - round(x * p1)) > 1e-6:
                return f"point {n} is off the {grid.p}-level grid"
    perturbed = []
    for n in range(len(t.points) - 1):
        a, b = np.asarray(t.points[n]), np.asarray(t.points[n + 1])
        changed = np.flatnonzero(np.abs(b - a) > _EPS)
        if len(changed) != 1:
            return f"step {n} changes {len(changed)} coordinates"
        i = int(changed[0])
        if abs(abs(b[i] - a[i]) - grid.delta) > 1e-6:
            return f"step {n} is an off-grid step of {abs(b[i] - a[i]):.6g}"
        perturbed.append(i)
    if sorted(perturbed) != list(range(grid.k)):
        return f"coordinates perturbed {sorted(perturbed)}, expected each exactly once"
    return None


def elementary_effect(y_after: float, y_before: float, delta: float, sign: int) -> float:
    """Finite-difference effect of one ±delta step, direction-corrected."""
    if delta <= 0:
        raise MorrisError("delta must be positive")
    return sign * (y_after - y_before) / delta


def _resolve_outputs(trajectories, outputs):
    get = outputs if callable(outputs) else None
    if get is None:
        mapping = {tuple(np.round(k, 9)): v for k, v in outputs.items()}

        def get(pt):
            key = tuple(np.round(pt, 9))
            if key not in mapping:
                raise MorrisError(f"missing output for trajectory point {pt}")
            return mapping[key]

    return get


def compute_effects(trajectories, outputs, grid: LevelGrid) -> np.ndarray:
    """r x k matrix of elementary effects, one row per trajectory."""
    get = _resolve_outputs(trajectories, outputs)
    ee = np.empty((len(trajectories), grid.k))
    for j, t in enumerate(trajectories):
        bad = validate_trajectory(t, grid)
        if bad is not None:
            raise MorrisError(f"trajectory {j}: {bad}")
        for n in range(grid.k):
            a = np.asarray(t.points[n])
            b = np.asarray(t.points[n + 1])
            i = int(np.flatnonzero(np.abs(b - a) > _EPS)[0])
            sign = 1 if b[i] > a[i] else -1
            ee[j, i] = elementary_effect(get(t.points[n + 1]), get(t.points[n]), grid.delta, sign)
    return ee


def analyze(trajectories, outputs, grid: LevelGrid, names=None) -> EEResult:
    """Per-factor mu, mu_star, sigma and rank, sorted by rank descending.

    `outputs` is a mapping from trajectory point to the model output, or a
    callable. Needs r >= 2 trajectories (sigma uses an r-1 denominator).
    """
    r = len(trajectories)
    if r < 2:
        raise MorrisError("sigma is undefined for fewer than 2 trajectories")
    ee = compute_effects(trajectories, outputs, grid)
    if names is None:
        names = [f.name for f in DEFAULT_FACTORS[: grid.k]]
        if len(names) < grid.k:
            names = [f"x{i}" for i in range(grid.k)]
    mu = ee.mean(axis=0)
    mu_star = np.abs(ee).mean(axis=0)
    sigma = np.square(ee - mu).sum(axis=0) / (r - 1)
    factors = [
        FactorResult(i, names[i], float(mu[i]), float(mu_star[i]), float(sigma[i]),
                     rank_score(float(mu_star[i]), float(sigma[i])))
        for i in range(grid.k)
    ]
    factors.sort(key=lambda f: -f.rank)
    return EEResult(factors=factors, r=r)


def denormalize(factor: int, x: float, bounds=DEFAULT_FACTORS) -> float:
    """Map a standardized value into the factor's natural range."""
    if x < -_EPS or x > 1 + _EPS:
        raise MorrisError(f"standardized value {x} outside [0, 1]")
    b = bounds[factor]
    v = b.low + min(max(x, 0.0), 1.0) * (b.high - b.low)
    return float(round(v)) if b.integral else float(v)


def denormalize_point(point, bounds=DEFAULT_FACTORS) -> tuple:
    return tuple(denormalize(i, x, bounds) for i, x in enumerate(point))


def full_factorial(grid: LevelGrid, bounds=DEFAULT_FACTORS) -> list:
    """All p^k level combinations in lexicographic order, in natural units."""
    return [
        denormalize_point(pt, bounds)
        for pt in itertools.product(grid.levels, repeat=grid.k)
    ]
