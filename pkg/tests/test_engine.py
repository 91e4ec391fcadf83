import math

import numpy as np
import pytest

from episim.config import SimConfig
from episim.engine import (
    ALLOWED_TRANSITIONS,
    TIMESERIES_HEADER,
    HealthState,
    TimeSeries,
    World,
    _age_groups,
    distancing_factor,
    init_world,
    run_simulation,
    transmission_prob,
)
from tests.conftest import tiny_config

HK_DISTRIBUTION = (0.082, 0.088, 0.088, 0.151, 0.1514, 0.1514, 0.1514, 0.074, 0.0628)


def test_transmission_prob_mask_filtering():
    dis = SimConfig().disease
    base = dis.base_transmission_prob
    assert transmission_prob(False, False, dis) == pytest.approx(base)
    assert transmission_prob(True, False, dis) == pytest.approx(base * 0.44)
    assert transmission_prob(False, True, dis) == pytest.approx(base * 0.44)
    assert transmission_prob(True, True, dis) == pytest.approx(base * 0.44**2)


def test_distancing_factor_ramp():
    # Linear ramp from no damping at 0 m down to zero transmission once
    # the advised distance covers the whole infectious distance.
    assert distancing_factor(0.0, 2.0) == 1.0
    assert distancing_factor(0.5, 2.0) == pytest.approx(0.75)
    assert distancing_factor(1.0, 2.0) == pytest.approx(0.5)
    assert distancing_factor(1.5, 2.0) == pytest.approx(0.25)
    assert distancing_factor(2.0, 2.0) == 0.0
    assert distancing_factor(3.0, 2.0) == 0.0  # clamped
    assert distancing_factor(1.0, 0.0) == 1.0  # degenerate infectious distance
    # monotone non-increasing everywhere
    vals = [distancing_factor(0.1 * i, 2.0) for i in range(30)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_age_groups_largest_remainder():
    # Hand-checked: floor quotas leave 3 seats; the three largest remainders
    # (groups 4, 5, 6 at 0.1514 -> 1514 each exactly) take none, so seats go
    # to the largest fractional parts of the remaining quotas.
    groups = _age_groups(HK_DISTRIBUTION, 10000)
    counts = np.bincount(groups, minlength=9)
    assert counts.sum() == 10000
    assert counts[4] == 1514
    quotas = np.array(HK_DISTRIBUTION) * 10000
    assert np.all(np.abs(counts - quotas) < 1.0)


def test_age_groups_exact_split():
    counts = np.bincount(_age_groups((0.1,) * 4 + (0.2,) + (0.1,) * 4, 1000), minlength=9)
    assert list(counts) == [100, 100, 100, 100, 200, 100, 100, 100, 100]


def test_initial_world_state(tiny):
    world = init_world(tiny, seed=0)
    counts = world.counts()
    assert counts[HealthState.ASYMPTOMATIC] == tiny.initial_infected
    assert counts[HealthState.HEALTHY] == tiny.population - tiny.initial_infected
    assert sum(counts) == tiny.population
    xs = np.array([world.agent(i).position[0] for i in range(tiny.population)])
    assert xs.min() >= 0.0 and xs.max() <= tiny.grid_size


def test_mask_usage_rate_extremes(tiny):
    world = init_world(tiny_config(mask_usage_rate=100.0), seed=0)
    assert all(world.agent(i).masked for i in range(world.config.population))
    world = init_world(tiny_config(mask_usage_rate=0.0), seed=0)
    assert not any(world.agent(i).masked for i in range(world.config.population))


def test_run_is_deterministic(tiny, tmp_path):
    a = run_simulation(tiny, seed=7)
    b = run_simulation(tiny, seed=7)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.to_csv(pa)
    b.to_csv(pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_runs_differ_across_seeds(tiny):
    a = run_simulation(tiny, seed=0)
    b = run_simulation(tiny, seed=1)
    assert a.counts != b.counts


def test_population_conserved_every_tick(tiny):
    series = run_simulation(tiny, seed=2)
    for row in series.counts:
        assert sum(row) == tiny.population


def test_monotone_absorbing_states(tiny):
    series = run_simulation(tiny, seed=2)
    dead = series.dead
    recovered = series.recovered
    assert np.all(np.diff(dead) >= 0)
    assert np.all(np.diff(recovered) >= 0)
    healthy = np.array([c[0] for c in series.counts])
    assert np.all(np.diff(healthy) <= 0)


def test_every_transition_is_allowed(tiny):
    world = init_world(tiny, seed=5)
    prev = world.health.copy()
    for _ in range(tiny.max_days * tiny.ticks_per_day):
        counts, _ = world.step()
        for i in range(tiny.population):
            if world.health[i] != prev[i]:
                assert (
                    HealthState(world.health[i])
                    in ALLOWED_TRANSITIONS[HealthState(prev[i])]
                ), f"agent {i}: {HealthState(prev[i]).name} -> {HealthState(world.health[i]).name}"
        prev = world.health.copy()
        if counts[1] + counts[2] + counts[3] == 0:
            break


def test_run_stops_at_extinction_or_day_cap(tiny):
    series = run_simulation(tiny, seed=2)
    capped = tiny.max_days * tiny.ticks_per_day  # rows, including the tick-0 row
    assert series.active[-1] == 0 or len(series) == capped
    assert len(series) <= capped
    if series.active[-1] == 0:
        # extinction stops the run promptly, not at the cap
        assert series.active[-2] > 0


def test_quarantined_agents_do_not_move():
    cfg = tiny_config(isolation_rate=100.0)
    world = init_world(cfg, seed=1)
    for _ in range(cfg.ticks_per_day * 10):
        world.step()
    quarantined = np.flatnonzero(world.quarantined)
    assert len(quarantined) > 0
    xs = world.xs[quarantined].copy()
    ys = world.ys[quarantined].copy()
    world.step()
    still = np.flatnonzero(world.quarantined)
    frozen = np.intersect1d(quarantined, still)
    idx = np.searchsorted(quarantined, frozen)
    assert np.array_equal(world.xs[frozen], xs[idx])
    assert np.array_equal(world.ys[frozen], ys[idx])


def test_lockdown_freezes_compliant_agents():
    cfg = tiny_config()
    cfg.interventions.lockdown_enabled = True
    cfg.interventions.lockdown_delay_days = 0.0
    world = init_world(cfg, seed=1)
    assert world.lockdown_active
    xs = world.xs.copy()
    world.step()
    moved = np.flatnonzero(world.xs != xs)
    # nobody ignores lockdown by default and nobody is dead yet
    assert len(moved) == 0


def test_city_confinement_keeps_agents_in_home_block():
    cfg = tiny_config(city_confinement=True)
    world = init_world(cfg, seed=4)
    block = cfg.grid_size / 4
    for _ in range(cfg.ticks_per_day * 5):
        world.step()
    for i in range(cfg.population):
        a = world.agent(i)
        cx, cy = a.home_city // 4, a.home_city % 4
        x, y = a.position
        assert cx * block <= x <= (cx + 1) * block
        assert cy * block <= y <= (cy + 1) * block


def test_displacement_bounded_by_max_step(tiny):
    world = init_world(tiny, seed=6)
    xs, ys = world.xs.copy(), world.ys.copy()
    world.step()
    d = np.hypot(world.xs - xs, world.ys - ys)
    assert d.max() <= 0.2 + 1e-12


def test_timeseries_csv_round_trip(tiny, tmp_path):
    series = run_simulation(tiny, seed=3)
    path = tmp_path / "ts.csv"
    series.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(TIMESERIES_HEADER)
    again = TimeSeries.from_csv(path)
    assert again.counts == series.counts
    assert again.tick == series.tick
    assert again.ticks_per_day == series.ticks_per_day
    assert again.peak_active_pct() == pytest.approx(series.peak_active_pct(), abs=5e-5)


def test_peak_active_pct_matches_manual(tiny):
    series = run_simulation(tiny, seed=3)
    manual = max(100.0 * (c[1] + c[2] + c[3]) / tiny.population for c in series.counts)
    assert series.peak_active_pct() == pytest.approx(manual)


def test_daily_new_cases_accounts_for_every_infection(tiny):
    series = run_simulation(tiny, seed=3)
    assert sum(series.daily_new_cases()) == sum(series.new_infections)
    never_healthy = tiny.population - series.counts[-1][0]
    # everyone who left the healthy pool was either seeded or newly infected
    assert sum(series.new_infections) == never_healthy - tiny.initial_infected


def test_stronger_distancing_never_helps_the_virus(tiny):
    peaks = []
    for sd in (0.0, 1.0, 2.0):
        peaks.append(run_simulation(tiny_config(social_distancing_m=sd), seed=3).peak_active_pct())
    assert peaks[0] > peaks[1] > peaks[2]


def test_full_mask_usage_slows_spread(tiny):
    base = run_simulation(tiny, seed=3)
    masked = run_simulation(tiny_config(mask_usage_rate=100.0), seed=3)
    assert masked.peak_active_pct() < base.peak_active_pct()
