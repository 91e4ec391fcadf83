"""Reference results from the original full-scale experiments.

These constants are the published summary values for this model at full
scale (10000 agents, 12 replicates per setting, 30 trajectories). They are
used by the consistency checks: the rank formula must reproduce the
published ranks from the published (mu_star, sigma) pairs, and the
sensitivity index must reproduce the published indices from the published
per-level medians.
"""

from __future__ import annotations

from episim.sweep import sensitivity_index
from episim.morris import rank_score

#: Per-level medians of peak active-case %, 12 replicates per level.
PUBLISHED_PEAK_MEDIANS = {
    "social_distancing_m": {
        0.0: 45.38, 0.5: 26.94, 1.0: 26.09, 1.5: 18.38, 2.0: 12.75, 2.5: 9.79,
    },
    "mask_usage_rate": {
        0.0: 45.59, 20.0: 33.10, 40.0: 25.87, 60.0: 19.20, 80.0: 14.06, 100.0: 9.68,
    },
    "lockdown_delay_days": {
        7.0: 14.45, 12.0: 25.09, 17.0: 32.54, 22.0: 40.53, 27.0: 42.12, 32.0: 45.52,
    },
    "isolation_rate": {
        0.0: 44.13, 20.0: 40.53, 40.0: 41.34, 60.0: 39.29, 80.0: 36.76, 100.0: 33.64,
    },
}

#: Published univariate sensitivity indices per factor.
PUBLISHED_SENSITIVITY_INDEX = {
    "social_distancing_m": 0.784,
    "mask_usage_rate": 0.692,
    "lockdown_delay_days": 0.683,
    "isolation_rate": 0.238,
}

#: Published elementary-effects statistics (30 trajectories, p=6, delta=0.2).
PUBLISHED_EEM = {
    "social_distancing_m": {"mu_star": 4.275, "mu": -3.981, "sigma": 5.255, "rank": 4.850},
    "mask_usage_rate": {"mu_star": 4.039, "mu": -4.039, "sigma": 3.246, "rank": 4.422},
    "lockdown_delay_days": {"mu_star": 2.014, "mu": 1.641, "sigma": 2.881, "rank": 2.634},
    "isolation_rate": {"mu_star": 1.377, "mu": -0.777, "sigma": 1.667, "rank": 1.888},
}

# The published standard errors equal sd/12 rather than the textbook
# sd/sqrt(12) implemented here (e.g. sd 2.23 alongside SE 0.19); the sweep
# summaries use sd/sqrt(n).
PUBLISHED_SE_DIVISOR = 12


def sensitivity_comparison() -> list:
    """Computed-vs-published sensitivity index per factor.

    Returns dicts with a `reproducible` flag. Only the mask index is
    expected to disagree: from the published medians it computes to ~0.788,
    while 0.692 was published; both values are reported rather than
    guessing which was intended.
    """
    rows = []
    for name, medians in PUBLISHED_PEAK_MEDIANS.items():
        computed = sensitivity_index(medians.values())
        published = PUBLISHED_SENSITIVITY_INDEX[name]
        rows.append(
            {
                "factor": name,
                "computed": computed,
                "published": published,
                "reproducible": abs(computed - published) <= 0.002,
            }
        )
    return rows


def rank_consistency() -> list:
    """Rank recomputed from published (mu_star, sigma) vs the published rank."""
    rows = []
    for name, stats in PUBLISHED_EEM.items():
        recomputed = rank_score(stats["mu_star"], stats["sigma"])
        rows.append(
            {
                "factor": name,
                "recomputed": recomputed,
                "published": stats["rank"],
                "difference": abs(recomputed - stats["rank"]),
            }
        )
    return rows
