"""Discrete-time spatial simulation of virus transmission and progression.

A World owns flat numpy arrays of agent state plus one seeded PCG64
generator; `step` hands them to the compiled kernel. Runs are deterministic:
the same (config, seed) always yields a bit-identical time series.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from episim import _kernel
from episim.config import CITIES_PER_SIDE, ConfigError, DiseaseParams, SimConfig

#: Calibrated conversion from metre-valued distance parameters to grid patch
#: units. Chosen so that a motionless population's contact graph is below the
#: percolation threshold (lockdown and strict distancing actually halt
#: spread) while a mobile population still sustains a fast epidemic.
PATCHES_PER_METRE = 0.5


class HealthState(enum.IntEnum):
    HEALTHY = 0
    ASYMPTOMATIC = 1
    LIGHT_SYMPTOMATIC = 2
    SERIOUS_SYMPTOMATIC = 3
    RECOVERED = 4
    DEAD = 5


#: Transitions the disease model may produce (absorbing states map to ()).
ALLOWED_TRANSITIONS = {
    HealthState.HEALTHY: (HealthState.ASYMPTOMATIC,),
    HealthState.ASYMPTOMATIC: (
        HealthState.LIGHT_SYMPTOMATIC,
        HealthState.SERIOUS_SYMPTOMATIC,
    ),
    HealthState.LIGHT_SYMPTOMATIC: (HealthState.RECOVERED,),
    HealthState.SERIOUS_SYMPTOMATIC: (HealthState.RECOVERED, HealthState.DEAD),
    HealthState.RECOVERED: (),
    HealthState.DEAD: (),
}

INFECTED_STATES = (
    HealthState.ASYMPTOMATIC,
    HealthState.LIGHT_SYMPTOMATIC,
    HealthState.SERIOUS_SYMPTOMATIC,
)

TIMESERIES_HEADER = (
    "tick",
    "day",
    "healthy",
    "asymptomatic",
    "light",
    "serious",
    "recovered",
    "dead",
    "hospitalized",
    "active_pct",
)


def transmission_prob(infector_masked: bool, susceptible_masked: bool, params: DiseaseParams) -> float:
    """Per-tick infection probability for one infectious/susceptible pair.

    Each mask worn by the pair filters the transfer down to the mask
    penetration fraction, so two masks contribute penetration squared.
    """
    n_masks = int(infector_masked) + int(susceptible_masked)
    return (
        params.base_transmission_prob
        * (params.infectivity / 100.0)
        * params.mask_penetration**n_masks
    )


def distancing_factor(social_distancing_m: float, infectious_distance_m: float) -> float:
    """Transmission damping from population-wide distance keeping.

    Each metre of advised distance removes a proportional share of the
    close contacts that fall inside the infectious distance, so the
    damping ramps linearly from no effect at 0 m down to zero once the
    advised distance reaches the infectious distance itself: when everyone
    keeps at least the full infectious distance, close contact is
    eliminated entirely.
    """
    if infectious_distance_m <= 0:
        return 1.0
    d = min(max(social_distancing_m, 0.0), infectious_distance_m)
    return 1.0 - d / infectious_distance_m


@dataclass
class Agent:
    """Read-only snapshot of one agent, for inspection and tests."""

    id: int
    age_group: int
    position: tuple
    home_city: int
    health: HealthState
    infection_clock: int
    masked: bool
    quarantined: bool
    hospitalized: bool
    ignores_lockdown: bool
    death_scheduled_at: int | None


class TimeSeries:
    """Per-tick record of health-state counts and active-infection share."""

    def __init__(self, population: int, ticks_per_day: int):
        self.population = population
        self.ticks_per_day = ticks_per_day
        self.tick = []
        self.counts = []  # rows of six HealthState counts
        self.hospitalized = []
        self.new_infections = []

    def append(self, tick, counts, hospitalized, new_infections=0):
        self.tick.append(int(tick))
        self.counts.append(tuple(int(c) for c in counts))
        self.hospitalized.append(int(hospitalized))
        self.new_infections.append(int(new_infections))

    def __len__(self):
        return len(self.tick)

    @property
    def day(self):
        return [t // self.ticks_per_day for t in self.tick]

    @property
    def active(self):
        return np.array([c[1] + c[2] + c[3] for c in self.counts])

    @property
    def active_pct(self):
        return 100.0 * self.active / self.population

    @property
    def dead(self):
        return np.array([c[5] for c in self.counts])

    @property
    def recovered(self):
        return np.array([c[4] for c in self.counts])

    def peak_active_pct(self) -> float:
        if not self.tick:
            raise ValueError("empty time series")
        return float(self.active_pct.max())

    def daily_new_cases(self):
        """New infections summed per day (partial last day included)."""
        days = self.day
        out = {}
        for d, n in zip(days, self.new_infections):
            out[d] = out.get(d, 0) + n
        return [out[d] for d in sorted(out)]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TIMESERIES_HEADER)
            active_pct = self.active_pct
            for i, t in enumerate(self.tick):
                c = self.counts[i]
                w.writerow(
                    [
                        t,
                        t // self.ticks_per_day,
                        c[0],
                        c[1],
                        c[2],
                        c[3],
                        c[4],
                        c[5],
                        self.hospitalized[i],
                        f"{active_pct[i]:.6f}",
                    ]
                )

    @classmethod
    def from_csv(cls, path):
        with open(path, "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TIMESERIES_HEADER:
                raise ValueError(f"{path}: unexpected time-series header {header!r}")
            rows = [row for row in reader if row]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        counts0 = [int(v) for v in rows[0][2:8]]
        ts = cls(population=sum(counts0), ticks_per_day=1)
        for row in rows:
            ts.append(int(row[0]), [int(v) for v in row[2:8]], int(row[8]))
        # recover ticks_per_day from the first day rollover (rows are consecutive ticks)
        for row in rows:
            if int(row[1]) == 1:
                ts.ticks_per_day = int(row[0])
                break
        return ts


class World:
    """Mutable simulation state for one run."""

    def __init__(self, config: SimConfig, seed: int):
        config = config.copy()
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self.tick = 0
        self.hosp_count = 0

        n = config.population
        grid = config.grid_size
        self.age = _age_groups(config.age_distribution, n)
        self.xs = self.rng.uniform(0.0, grid, n)
        self.ys = self.rng.uniform(0.0, grid, n)
        block = grid / CITIES_PER_SIDE
        cx = np.minimum((self.xs / block).astype(np.int8), CITIES_PER_SIDE - 1)
        cy = np.minimum((self.ys / block).astype(np.int8), CITIES_PER_SIDE - 1)
        self.home_city = (cx * CITIES_PER_SIDE + cy).astype(np.int8)

        self.health = np.full(n, HealthState.HEALTHY, np.int8)
        self.clock = np.zeros(n, np.int32)
        self.masked = np.zeros(n, bool)
        self.quarantined = np.zeros(n, bool)
        self.hospitalized = np.zeros(n, bool)
        self.ignores_lockdown = np.zeros(n, bool)
        self.death_clock = np.full(n, -1, np.int32)
        self.recover_clock = np.zeros(n, np.int32)

        self.set_mask_usage(config.interventions.mask_usage_rate)
        self.set_lockdown_compliance(config.interventions.ignore_lockdown_pct)

        k = config.initial_infected
        infected = self.rng.permutation(n)[:k]
        self.health[infected] = HealthState.ASYMPTOMATIC
        self.recover_clock[infected] = self.duration_ticks

    # -- derived quantities -------------------------------------------------

    @property
    def population(self):
        return self.config.population

    @property
    def ticks_per_day(self):
        return self.config.ticks_per_day

    @property
    def asympt_ticks(self):
        return int(round(self.config.disease.asymptomatic_days * self.ticks_per_day))

    @property
    def duration_ticks(self):
        return int(round(self.config.disease.infection_duration_days * self.ticks_per_day))

    @property
    def lockdown_active(self):
        iv = self.config.interventions
        return bool(
            iv.lockdown_enabled
            and self.tick >= int(round(iv.lockdown_delay_days * self.ticks_per_day))
        )

    def counts(self):
        return np.bincount(self.health, minlength=6).astype(np.int64)

    def active_count(self):
        c = self.counts()
        return int(c[1] + c[2] + c[3])

    def agent(self, i: int) -> Agent:
        return Agent(
            id=i,
            age_group=int(self.age[i]),
            position=(float(self.xs[i]), float(self.ys[i])),
            home_city=int(self.home_city[i]),
            health=HealthState(int(self.health[i])),
            infection_clock=int(self.clock[i]),
            masked=bool(self.masked[i]),
            quarantined=bool(self.quarantined[i]),
            hospitalized=bool(self.hospitalized[i]),
            ignores_lockdown=bool(self.ignores_lockdown[i]),
            death_scheduled_at=int(self.death_clock[i]) if self.death_clock[i] >= 0 else None,
        )

    def city_block(self, city: int):
        """(x0, y0, x1, y1) bounds of one city block."""
        block = self.config.grid_size / CITIES_PER_SIDE
        cx, cy = divmod(int(city), CITIES_PER_SIDE)
        return (cx * block, cy * block, (cx + 1) * block, (cy + 1) * block)

    # -- intervention reassignment (used at init and by scenario events) -----

    def set_mask_usage(self, rate_pct: float):
        n = self.population
        k = int(math.floor(rate_pct / 100.0 * n))
        self.masked[:] = False
        self.masked[self.rng.permutation(n)[:k]] = True
        self.config.interventions.mask_usage_rate = float(rate_pct)

    def set_lockdown_compliance(self, ignore_pct: float):
        n = self.population
        k = int(math.floor(ignore_pct / 100.0 * n))
        self.ignores_lockdown[:] = False
        self.ignores_lockdown[self.rng.permutation(n)[:k]] = True
        self.config.interventions.ignore_lockdown_pct = float(ignore_pct)

    def infect(self, agent_ids):
        """Force the given healthy agents into the asymptomatic state."""
        for i in agent_ids:
            if self.health[i] == HealthState.HEALTHY:
                self.health[i] = HealthState.ASYMPTOMATIC
                self.clock[i] = 0
                self.death_clock[i] = -1
                self.recover_clock[i] = self.duration_ticks

    # -- stepping -------------------------------------------------------------

    def step(self):
        """Advance one tick. Returns (counts, new_infections)."""
        cfg = self.config
        dis = cfg.disease
        iv = cfg.interventions
        counts, self.hosp_count, new_inf = _kernel.step_kernel(
            self.xs,
            self.ys,
            self.health,
            self.clock,
            self.age,
            self.home_city,
            self.masked,
            self.quarantined,
            self.hospitalized,
            self.ignores_lockdown,
            self.death_clock,
            self.recover_clock,
            self.rng,
            float(cfg.grid_size),
            CITIES_PER_SIDE,
            self.lockdown_active,
            bool(iv.city_confinement),
            # The contact radius is converted to patch units with a
            # calibrated scale (PATCHES_PER_METRE), not the nominal 40 m per
            # patch, which is descriptive metadata only. Dividing by 40 gives
            # a radius so small the epidemic becomes a slow spatial wave and
            # no transmission probability reproduces realistic peaks; using
            # raw patch units instead makes the contact graph of a motionless
            # population percolate, so lockdown loses all effect. At 0.5
            # patches per metre the static graph is subcritical while the
            # mobile epidemic remains fast.
            dis.infectious_distance_m * PATCHES_PER_METRE,
            dis.base_transmission_prob
            * (dis.infectivity / 100.0)
            * distancing_factor(iv.social_distancing_m, dis.infectious_distance_m),
            dis.mask_penetration,
            self.asympt_ticks,
            self.duration_ticks,
            np.asarray(dis.serious_rate_by_age, np.float64) / 100.0,
            np.asarray(dis.model_fatality_by_age, np.float64) / 100.0,
            iv.isolation_rate / 100.0,
            cfg.healthcare_capacity,
            cfg.hospital_admission_prob,
            cfg.hospital_death_multiplier,
            cfg.hospital_recovery_multiplier,
            self.hosp_count,
        )
        self.tick += 1
        return counts, new_inf


def _age_groups(fractions, n: int) -> np.ndarray:
    """Agent count per decade by largest-remainder rounding of fractions*n."""
    quotas = np.asarray(fractions) * n
    counts = np.floor(quotas).astype(np.int64)
    short = n - int(counts.sum())
    if short > 0:
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:short]] += 1
    return np.repeat(np.arange(len(counts), dtype=np.int8), counts)


def init_world(config: SimConfig, seed: int) -> World:
    return World(config, seed)


def run_simulation(config: SimConfig, seed: int | None = None, max_ticks: int | None = None) -> TimeSeries:
    """Run to extinction of active infections or the tick cap.

    The series records the state at tick 0 and after every step; it stops
    as soon as no active infections remain.
    """
    if seed is None:
        seed = config.seed
    world = init_world(config, seed)
    if max_ticks is None:
        max_ticks = config.max_days * world.ticks_per_day
    if max_ticks <= 0:
        raise ConfigError("max_ticks must be positive")
    ts = TimeSeries(world.population, world.ticks_per_day)
    counts = world.counts()
    ts.append(world.tick, counts, world.hosp_count)
    while counts[1] + counts[2] + counts[3] > 0 and len(ts) < max_ticks:
        counts, new_inf = world.step()
        ts.append(world.tick, counts, world.hosp_count, new_inf)
    return ts
