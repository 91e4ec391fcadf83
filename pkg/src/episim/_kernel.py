"""Compiled per-tick update of the agent world.

Everything that runs once per agent per tick lives here, jitted with numba.
All random draws come from the single numpy Generator owned by the world,
consumed in a fixed order (phase by phase, agents in id order), which makes
a run a pure function of (config, seed).

Neighbour queries use a sorted cell list: agents are binned into square
cells the size of the query radius, bin keys are sorted once per phase and
membership is found with binary search over the 3x3 surrounding cells.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Health state codes (mirrors engine.HealthState).
HEALTHY = 0
ASYMPTOMATIC = 1
LIGHT = 2
SERIOUS = 3
RECOVERED = 4
DEAD = 5

MAX_MOVE = 0.2  # patch units per tick


@njit(cache=True)
def _build_cells(xs, ys, idx, cell, ncell):
    """Sorted cell list for the points pos[idx].

    Returns (keys_sorted, order) where keys_sorted is ascending and
    idx[order[i]] is the agent in sort position i.
    """
    n = idx.shape[0]
    keys = np.empty(n, np.int64)
    for i in range(n):
        cx = min(int(xs[idx[i]] / cell), ncell - 1)
        cy = min(int(ys[idx[i]] / cell), ncell - 1)
        keys[i] = cx * ncell + cy
    order = np.argsort(keys, kind="mergesort")
    return keys[order], order


@njit(cache=True)
def step_kernel(
    xs,
    ys,
    health,
    clock,
    age,
    home_city,
    masked,
    quarantined,
    hospitalized,
    ignores_lockdown,
    death_clock,
    recover_clock,
    rng,
    grid_size,
    cities_per_side,
    lockdown_active,
    city_confinement,
    infect_radius,
    pair_prob,
    penetration,
    asympt_ticks,
    duration_ticks,
    serious_frac,
    fatality_frac,
    isolation_frac,
    capacity,
    admit_prob,
    death_mult,
    recov_mult,
    hosp_count,
):
    """Advance one tick in place. Returns (counts[6], hosp_count, new_infections).

    Phase order: movement, transmission, progression, hospitalization,
    death/recovery resolution.
    """
    n = health.shape[0]
    block = grid_size / cities_per_side

    # --- phase 1: movement ------------------------------------------------
    for i in range(n):
        if health[i] == DEAD or quarantined[i] or hospitalized[i]:
            continue
        if lockdown_active and not ignores_lockdown[i]:
            continue
        theta = rng.random() * 2.0 * math.pi
        dist = rng.random() * MAX_MOVE
        x = xs[i] + math.cos(theta) * dist
        y = ys[i] + math.sin(theta) * dist
        # clamping to the grid (or the home city block) is an accepted move
        if city_confinement:
            cx = home_city[i] // cities_per_side
            cy = home_city[i] % cities_per_side
            x = min(max(x, cx * block), (cx + 1) * block)
            y = min(max(y, cy * block), (cy + 1) * block)
        else:
            x = min(max(x, 0.0), grid_size)
            y = min(max(y, 0.0), grid_size)
        xs[i] = x
        ys[i] = y

    # --- phase 2: transmission --------------------------------------------
    new_infections = 0
    n_inf = 0
    for i in range(n):
        if (
            health[i] == ASYMPTOMATIC or health[i] == LIGHT or health[i] == SERIOUS
        ) and not quarantined[i]:
            n_inf += 1
    if n_inf > 0 and pair_prob > 0.0:
        inf_idx = np.empty(n_inf, np.int64)
        k = 0
        for i in range(n):
            if (
                health[i] == ASYMPTOMATIC or health[i] == LIGHT or health[i] == SERIOUS
            ) and not quarantined[i]:
                inf_idx[k] = i
                k += 1
        ncell_t = max(1, int(grid_size / infect_radius))
        keys_t, order_t = _build_cells(xs, ys, inf_idx, infect_radius, ncell_t)
        r2 = infect_radius * infect_radius
        for s in range(n):
            if health[s] != HEALTHY:
                continue
            sus_factor = penetration if masked[s] else 1.0
            q = 1.0
            found = False
            cx = min(int(xs[s] / infect_radius), ncell_t - 1)
            cy = min(int(ys[s] / infect_radius), ncell_t - 1)
            for dx in range(-1, 2):
                gx = cx + dx
                if gx < 0 or gx >= ncell_t:
                    continue
                for dy in range(-1, 2):
                    gy = cy + dy
                    if gy < 0 or gy >= ncell_t:
                        continue
                    key = gx * ncell_t + gy
                    lo = np.searchsorted(keys_t, key)
                    hi = np.searchsorted(keys_t, key, side="right")
                    for t in range(lo, hi):
                        j = inf_idx[order_t[t]]
                        ddx = xs[j] - xs[s]
                        ddy = ys[j] - ys[s]
                        if ddx * ddx + ddy * ddy <= r2:
                            found = True
                            p = pair_prob * sus_factor
                            if masked[j]:
                                p *= penetration
                            q *= 1.0 - p
            if found and rng.random() < 1.0 - q:
                health[s] = ASYMPTOMATIC
                clock[s] = 0
                death_clock[s] = -1
                recover_clock[s] = duration_ticks
                new_infections += 1

    # --- phase 3: disease progression ---------------------------------------
    for i in range(n):
        h = health[i]
        if h != ASYMPTOMATIC and h != LIGHT and h != SERIOUS:
            continue
        clock[i] += 1
        if h == ASYMPTOMATIC and clock[i] == asympt_ticks:
            if rng.random() < serious_frac[age[i]]:
                health[i] = SERIOUS
                if rng.random() < fatality_frac[age[i]]:
                    # die at a uniform tick in the remaining infection window
                    death_clock[i] = clock[i] + 1 + rng.integers(0, duration_ticks - clock[i])
            else:
                health[i] = LIGHT
            if rng.random() < isolation_frac:
                quarantined[i] = True

    # --- phase 4: hospitalization -------------------------------------------
    if capacity > 0:
        for i in range(n):
            if health[i] == SERIOUS and not hospitalized[i]:
                u = rng.random()
                if u < admit_prob and hosp_count < capacity:
                    hospitalized[i] = True
                    hosp_count += 1
                    if death_clock[i] >= 0 and rng.random() >= death_mult:
                        death_clock[i] = -1
                    recover_clock[i] = int(round(duration_ticks * recov_mult))

    # --- phase 5: death / recovery resolution --------------------------------
    for i in range(n):
        h = health[i]
        if h != ASYMPTOMATIC and h != LIGHT and h != SERIOUS:
            continue
        if death_clock[i] >= 0:
            if clock[i] >= death_clock[i]:
                health[i] = DEAD
                if hospitalized[i]:
                    hospitalized[i] = False
                    hosp_count -= 1
                quarantined[i] = False
        elif clock[i] >= recover_clock[i]:
            health[i] = RECOVERED
            if hospitalized[i]:
                hospitalized[i] = False
                hosp_count -= 1
            quarantined[i] = False

    counts = np.zeros(6, np.int64)
    for i in range(n):
        counts[health[i]] += 1
    return counts, hosp_count, new_infections
