"""End-to-end acceptance checks for the whole toolkit.

Each test states its tolerance inline and prints one summary line so a full
run reads as a ten-point checklist. The slow tests (full-scale calibration
check, desk-scale sweeps, the factorial cache) dominate the suite's runtime;
their budgets are noted on each test.
"""

import math
import time

import numpy as np
import pytest
import scipy.stats

from episim.config import DEFAULT_BASE_TRANSMISSION_PROB, SimConfig, desk_config
from episim.morris import (
    LevelGrid,
    analyze,
    denormalize_point,
    full_factorial,
    generate_trajectories,
    rank_score,
    validate_trajectory,
)
from episim.orchestrator import GridCache, Job, run_batch
from episim.scenario import load_scenario, run_scenario
from episim.sweep import SweepSpec, point_config, run_sweep, sensitivity_index
from episim.validation import CaseSeries, correlate

GRID = LevelGrid(k=4, p=6, delta=0.2)

FACTOR_LEVELS = {
    "social_distancing_m": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
    "mask_usage_rate": [0.0, 20.0, 40.0, 60.0, 80.0, 100.0],
    "lockdown_delay_days": [7.0, 12.0, 17.0, 22.0, 27.0, 32.0],
    "isolation_rate": [0.0, 20.0, 40.0, 60.0, 80.0, 100.0],
}

# Published per-level median peak percentages for the four interventions,
# at the levels above, used for the sensitivity-index consistency check.
PUBLISHED_MEDIANS = {
    "social_distancing_m": [45.38, 26.94, 26.09, 18.38, 12.75, 9.79],
    "mask_usage_rate": [45.59, 33.10, 25.87, 19.20, 14.06, 9.68],
    "lockdown_delay_days": [14.45, 25.09, 32.54, 40.53, 42.12, 45.52],
    "isolation_rate": [44.13, 40.53, 41.34, 39.29, 36.76, 33.64],
}
PUBLISHED_INDICES = {
    "social_distancing_m": 0.784,
    "mask_usage_rate": 0.692,  # not reproducible from the medians; see test 3
    "lockdown_delay_days": 0.683,
    "isolation_rate": 0.238,
}


def daily_active(ts):
    """Peak active percentage within each simulated day."""
    day = np.array(ts.day)
    active = ts.active_pct
    return np.array([active[day == d].max() for d in range(day[-1] + 1)])


def test_criterion_1_elementary_effects_analytic_oracles():
    """Linear and interaction test functions, exact to 1e-12, under 1 s."""
    start = time.perf_counter()
    coeffs = (3.0, -1.5, 0.25, 8.0)

    trajectories = generate_trajectories(GRID, r=6, seed=0)
    linear = lambda pt: sum(a * x for a, x in zip(coeffs, pt))
    res = analyze(trajectories, linear, GRID)
    for i, a in enumerate(coeffs):
        factor = res.by_index(i)
        assert factor.mu == pytest.approx(a, abs=1e-12)
        assert factor.mu_star == pytest.approx(abs(a), abs=1e-12)
        assert factor.sigma == pytest.approx(0.0, abs=1e-12)

    interaction = lambda pt: pt[0] * pt[1]
    res = analyze(trajectories, interaction, GRID)
    assert res.by_index(0).sigma > 0.0

    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\n[1] analytic oracles exact to 1e-12 in {elapsed:.3f}s: PASS")


def test_criterion_2_rank_formula_reproduces_published_ranks():
    """rank = sqrt(mu_star^2 + sigma) on the four published pairs, +/-0.005."""
    pairs = [(4.275, 5.255), (4.039, 3.246), (2.014, 2.881), (1.377, 1.667)]
    expected = [4.850, 4.422, 2.634, 1.888]
    got = [rank_score(mu_star, sigma) for mu_star, sigma in pairs]
    for g, e in zip(got, expected):
        assert g == pytest.approx(e, abs=0.005)
    print(f"\n[2] published ranks reproduced within 0.005: {got} PASS")


def test_criterion_3_sensitivity_indices_from_published_medians():
    """Three indices match to 0.002; the mask index is flagged instead.

    (max - min) / max over the published mask medians gives ~0.788, not the
    published 0.692; the check here is that the discrepancy is detected.
    """
    for name in ("social_distancing_m", "lockdown_delay_days", "isolation_rate"):
        idx = sensitivity_index(PUBLISHED_MEDIANS[name])
        assert idx == pytest.approx(PUBLISHED_INDICES[name], abs=0.002), name

    mask_idx = sensitivity_index(PUBLISHED_MEDIANS["mask_usage_rate"])
    assert mask_idx == pytest.approx(0.788, abs=0.002)
    flagged = abs(mask_idx - PUBLISHED_INDICES["mask_usage_rate"]) > 0.05
    assert flagged, "mask index unexpectedly matches the published value"
    print(
        f"\n[3] indices match within 0.002; mask index flagged "
        f"(computed {mask_idx:.3f} vs published 0.692): PASS"
    )


def test_criterion_4_full_scale_baseline_peak():
    """No-NPI median peak over 12 seeds within 45.4 +/- 8 pp. Budget 15 min."""
    start = time.perf_counter()
    config = SimConfig()
    assert config.disease.base_transmission_prob == DEFAULT_BASE_TRANSMISSION_PROB
    jobs = [Job(job_id=s, config=config, seed=s) for s in range(12)]
    report = run_batch(jobs, workers=1)
    assert report.n_failed == 0
    median = float(np.median(report.peaks()))
    elapsed = time.perf_counter() - start
    assert 45.4 - 8.0 <= median <= 45.4 + 8.0
    assert elapsed < 15 * 60
    print(f"\n[4] full-scale median peak {median:.2f}% in 45.4+/-8 ({elapsed:.0f}s): PASS")


@pytest.mark.parametrize(
    "parameter,expected_sign",
    [
        ("social_distancing_m", -1),
        ("mask_usage_rate", -1),
        ("isolation_rate", -1),
        ("lockdown_delay_days", +1),
    ],
)
def test_criterion_5_desk_scale_monotonicity(parameter, expected_sign):
    """Spearman |rho| >= 0.9 with the expected sign, 6 levels x 12 replicates.

    Budget 10 min across all four parameters.
    """
    spec = SweepSpec(
        parameter=parameter,
        levels=FACTOR_LEVELS[parameter],
        replicates=12,
        config=desk_config(),
        seed_base=0,
    )
    result = run_sweep(spec)
    rho, _ = scipy.stats.spearmanr(range(6), result.medians())
    if expected_sign < 0:
        assert rho <= -0.9, (parameter, rho, result.medians())
    else:
        assert rho >= 0.9, (parameter, rho, result.medians())
    print(f"\n[5] {parameter}: spearman rho {rho:+.3f}, medians "
          f"{[round(m, 1) for m in result.medians()]}: PASS")


def test_criterion_6_desk_scale_effect_ordering():
    """Factorial cache + 10 trajectory seeds give the expected rank order.

    Expected: distancing > masks > lockdown delay > isolation, in at least
    8 of 10 analyses. Budget 30 min (the 2 x 1296-run cache dominates).

    The cache stores two seeds per grid point and lookups average them,
    which roughly halves the replicate-noise variance that otherwise
    drowns the isolation-vs-delay contrast at this scale.
    """
    start = time.perf_counter()
    base = desk_config()
    cache = GridCache(base)
    points = full_factorial(GRID)
    jobs = [
        Job(job_id=len(points) * s + i, config=point_config(base, pt), seed=s)
        for s in (0, 1)
        for i, pt in enumerate(points)
    ]
    report = run_batch(jobs, workers=1, cache=cache)
    assert report.n_failed == 0

    names = list(FACTOR_LEVELS)
    expected = ["social_distancing_m", "mask_usage_rate",
                "lockdown_delay_days", "isolation_rate"]
    hits = 0
    for seed in range(10):
        trajectories = generate_trajectories(GRID, r=10, seed=seed)
        res = analyze(
            trajectories,
            lambda pt: cache.get_point(denormalize_point(pt)),
            GRID,
            names=names,
        )
        order = [f.name for f in sorted(res.factors, key=lambda f: -f.rank)]
        hits += order == expected
    elapsed = time.perf_counter() - start
    assert hits >= 8, f"expected order in only {hits}/10 analyses"
    assert elapsed < 30 * 60
    print(f"\n[6] rank order reproduced in {hits}/10 analyses ({elapsed:.0f}s): PASS")


def test_criterion_7_trajectory_structural_suite():
    """1000 trajectories: valid, 5 points each, one perturbation per factor."""
    trajectories = generate_trajectories(GRID, r=1000, seed=0)
    assert len(trajectories) == 1000
    for t in trajectories:
        validate_trajectory(t, GRID)
        assert len(t.points) == 5
        changed = [0] * GRID.k
        for before, after in zip(t.points, t.points[1:]):
            diffs = [i for i in range(GRID.k) if before[i] != after[i]]
            assert len(diffs) == 1
            changed[diffs[0]] += 1
        assert changed == [1] * GRID.k
    print("\n[7] 1000 trajectories structurally valid: PASS")


def test_criterion_8_determinism_and_parallel_equivalence(tmp_path):
    """workers=1 vs workers=8 byte-identical; reruns byte-identical."""
    base = desk_config()
    base.population = 500
    base.grid_size = 22.0
    base.max_days = 40
    jobs = [
        Job(job_id=i, config=point_config(base, pt), seed=i % 3)
        for i, pt in enumerate(
            [(0, 0, 7, 0), (1.0, 40, 12, 20), (2.0, 80, 17, 60),
             (0.5, 20, 22, 40), (1.5, 60, 27, 80), (2.5, 100, 32, 100)]
        )
    ]
    serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    run_batch(jobs, workers=1).to_csv(serial)
    run_batch(jobs, workers=8).to_csv(parallel)
    assert serial.read_bytes() == parallel.read_bytes()

    rerun = tmp_path / "rerun.csv"
    run_batch(jobs, workers=1).to_csv(rerun)
    assert serial.read_bytes() == rerun.read_bytes()
    print("\n[8] serial/parallel and rerun reports byte-identical: PASS")


def test_criterion_9_scenario_qualitative_shapes():
    """Preset curve shapes over 12 seeds each.

    Hong Kong: two waves with the post-relaxation peak >= 1.5x the first
    wave's peak in at least 8 of 12 seeds (waves split at day 120, the last
    quiet day before the timeline relaxes). Italy: active share still rising
    at day 14 and strictly below its eventual peak at day 30, in at least
    10 of 12 seeds.
    """
    config = SimConfig()

    hk = load_scenario("hong_kong")
    hk_ok = 0
    for seed in range(12):
        da = daily_active(run_scenario(hk, config, seed=seed))
        first_wave, second_wave = da[:121].max(), da[121:].max()
        hk_ok += first_wave > 0 and second_wave >= 1.5 * first_wave
    assert hk_ok >= 8, f"two-wave shape in only {hk_ok}/12 seeds"

    italy = load_scenario("italy")
    it_ok = 0
    for seed in range(12):
        da = daily_active(run_scenario(italy, config, seed=seed))
        rising = da[14] > da[13] and da[14] > da[7]
        it_ok += rising and da[30] < da.max()
    assert it_ok >= 10, f"first-wave shape in only {it_ok}/12 seeds"
    print(f"\n[9] Hong Kong {hk_ok}/12, Italy {it_ok}/12 seeds match: PASS")


def test_criterion_10_correlation_reference_oracle():
    """Pearson/Spearman and p-values vs the reference library, 1e-6."""
    rng = np.random.Generator(np.random.PCG64(42))
    for trial in range(20):
        n = int(rng.integers(5, 30))
        x = rng.random(n) * 50
        y = x * rng.uniform(-2, 2) + rng.standard_normal(n) * 10
        mine = correlate(
            CaseSeries(times=list(range(n)), values=np.abs(x)),
            CaseSeries(times=list(range(n)), values=np.abs(y)),
        )
        pr, pp = scipy.stats.pearsonr(np.abs(x), np.abs(y))
        sr, sp = scipy.stats.spearmanr(np.abs(x), np.abs(y))
        assert mine["pearson"] == pytest.approx(pr, abs=1e-6)
        assert mine["pearson_p"] == pytest.approx(pp, abs=1e-6)
        assert mine["spearman"] == pytest.approx(sr, abs=1e-6)
        assert mine["spearman_p"] == pytest.approx(sp, abs=1e-6)
    print("\n[10] correlation oracle matched to 1e-6 on 20 series: PASS")
