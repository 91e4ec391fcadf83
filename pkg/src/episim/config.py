"""Simulation configuration: disease constants, intervention controls and I/O.

Population structure and virus constants follow the published model setup
(10000 agents on a 100x100 patch grid, 16 cities, 40 m per patch, hourly
ticks). Age-dependent serious-symptom and fatality rates are the published
age tables; the model fatality rate is 100 * IFR / SR per age decade.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml


class ConfigError(ValueError):
    """Invalid simulation configuration."""


# Serious-symptom rate (% of infected) per age decade 0-9 ... 80+.
SERIOUS_RATE_BY_AGE = (0.1, 0.3, 1.2, 3.2, 4.9, 10.2, 16.6, 24.3, 27.3)

# Model fatality rate (% of serious cases), i.e. 100 * IFR / SR.
MODEL_FATALITY_BY_AGE = (2.00, 2.00, 2.50, 2.50, 3.06, 5.88, 13.25, 20.99, 34.07)

# 1000 agents per decade, 2000 in the 40-49 group.
DEFAULT_AGE_DISTRIBUTION = (0.1, 0.1, 0.1, 0.1, 0.2, 0.1, 0.1, 0.1, 0.1)

# Per-tick infection probability for an unmasked pair within the infectious
# radius. Calibrated so that the all-NPIs-off median peak of active cases
# over 12 seeds is ~45% of the population (see episim.calibrate).
DEFAULT_BASE_TRANSMISSION_PROB = 0.037

N_AGE_GROUPS = 9
CITIES_PER_SIDE = 4  # 16 cities as a 4x4 block tiling of the grid

# Distribution fractions are renormalized when they miss 1.0 by no more
# than this (published country tables carry 4 decimals and sum to 0.9999
# or 1.0001); larger deviations are configuration errors.
DISTRIBUTION_TOLERANCE = 1e-3


@dataclass
class DiseaseParams:
    """Virus and transmission constants (held fixed during analyses)."""

    infection_duration_days: float = 21.0
    asymptomatic_days: float = 6.0
    infectious_distance_m: float = 2.0
    infectivity: float = 100.0
    mask_penetration: float = 0.44
    base_transmission_prob: float = DEFAULT_BASE_TRANSMISSION_PROB
    serious_rate_by_age: tuple = SERIOUS_RATE_BY_AGE
    model_fatality_by_age: tuple = MODEL_FATALITY_BY_AGE

    def validate(self):
        if not self.asymptomatic_days < self.infection_duration_days:
            raise ConfigError("asymptomatic_days must be < infection_duration_days")
        if not 0.0 <= self.mask_penetration <= 1.0:
            raise ConfigError("mask_penetration must lie in [0, 1]")
        if not 0.0 <= self.infectivity <= 100.0:
            raise ConfigError("infectivity must lie in [0, 100]")
        if not 0.0 <= self.base_transmission_prob <= 1.0:
            raise ConfigError("base_transmission_prob must lie in [0, 1]")
        if self.infectious_distance_m <= 0:
            raise ConfigError("infectious_distance_m must be positive")
        for name in ("serious_rate_by_age", "model_fatality_by_age"):
            rates = getattr(self, name)
            if len(rates) != N_AGE_GROUPS:
                raise ConfigError(f"{name} needs {N_AGE_GROUPS} entries")
            if any(not 0.0 <= r <= 100.0 for r in rates):
                raise ConfigError(f"{name} rates must lie in [0, 100]")


@dataclass
class InterventionParams:
    """Controllable non-pharmaceutical intervention settings."""

    social_distancing_m: float = 0.0
    mask_usage_rate: float = 0.0
    lockdown_enabled: bool = False
    lockdown_delay_days: float = 0.0
    ignore_lockdown_pct: float = 0.0
    city_confinement: bool = False
    isolation_rate: float = 0.0

    def validate(self):
        if self.social_distancing_m < 0:
            raise ConfigError("social_distancing_m must be >= 0")
        for name in ("mask_usage_rate", "ignore_lockdown_pct", "isolation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ConfigError(f"{name} must lie in [0, 100]")
        if self.lockdown_delay_days < 0:
            raise ConfigError("lockdown_delay_days must be >= 0")


@dataclass
class SimConfig:
    """Full simulation setup: world structure, disease and interventions."""

    population: int = 10000
    grid_size: float = 100.0
    metres_per_patch: float = 40.0
    ticks_per_day: int = 24
    healthcare_capacity: int = 0
    hospital_death_multiplier: float = 0.5
    hospital_recovery_multiplier: float = 0.75
    hospital_admission_prob: float = 0.1
    initial_infected: int = 5
    age_distribution: tuple = DEFAULT_AGE_DISTRIBUTION
    seed: int = 0
    max_days: int = 300
    weather: str = "cold+dry"  # accepted, never used by the engine
    disease: DiseaseParams = field(default_factory=DiseaseParams)
    interventions: InterventionParams = field(default_factory=InterventionParams)

    def validate(self):
        if self.population <= 0:
            raise ConfigError("population must be positive")
        if self.grid_size <= 0:
            raise ConfigError("grid_size must be positive")
        if self.ticks_per_day <= 0:
            raise ConfigError("ticks_per_day must be positive")
        if self.max_days <= 0:
            raise ConfigError("max_days must be positive")
        if self.initial_infected < 0 or self.initial_infected > self.population:
            raise ConfigError("initial_infected must lie in [0, population]")
        if self.healthcare_capacity < 0:
            raise ConfigError("healthcare_capacity must be >= 0")
        if not 0.0 <= self.hospital_admission_prob <= 1.0:
            raise ConfigError("hospital_admission_prob must lie in [0, 1]")
        self.age_distribution = normalize_distribution(self.age_distribution)
        self.disease.validate()
        self.interventions.validate()

    def copy(self) -> "SimConfig":
        return dataclasses.replace(
            self,
            disease=dataclasses.replace(self.disease),
            interventions=dataclasses.replace(self.interventions),
        )


#: Transmission probability for the reduced-scale world below. The smaller
#: grid saturates faster than the full one, so experiments there use a rate
#: closer to the epidemic threshold, where intervention effects are resolved
#: cleanly instead of being masked by saturation.
DESK_BASE_TRANSMISSION_PROB = 0.020


def desk_config() -> SimConfig:
    """Reduced-scale configuration for fast sweeps and factorial studies.

    2000 agents on a 44x44 grid keeps the agent density of the full
    10000-agent world (~1 per patch square) while each run finishes in a
    couple of seconds.
    """
    cfg = SimConfig(population=2000, grid_size=44.0)
    cfg.disease.base_transmission_prob = DESK_BASE_TRANSMISSION_PROB
    cfg.max_days = 90
    return cfg


def normalize_distribution(fractions) -> tuple:
    """Validate an age distribution and renormalize it to sum exactly 1."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != N_AGE_GROUPS:
        raise ConfigError(f"age_distribution needs {N_AGE_GROUPS} entries")
    if any(f < 0 for f in fractions):
        raise ConfigError("age_distribution fractions must be >= 0")
    total = sum(fractions)
    if abs(total - 1.0) > DISTRIBUTION_TOLERANCE:
        raise ConfigError(f"age_distribution sums to {total!r}, not 1")
    return tuple(f / total for f in fractions)


# Flat file keys accepted by load_config, mapped to their dataclass home.
_DISEASE_KEYS = {f.name for f in dataclasses.fields(DiseaseParams)}
_INTERVENTION_KEYS = {f.name for f in dataclasses.fields(InterventionParams)}
_TOP_KEYS = {
    f.name for f in dataclasses.fields(SimConfig) if f.name not in ("disease", "interventions")
}


def config_from_dict(data: dict) -> SimConfig:
    cfg = SimConfig()
    for key, value in data.items():
        if key in _TOP_KEYS:
            if key == "age_distribution":
                value = tuple(value)
            setattr(cfg, key, value)
        elif key in _DISEASE_KEYS:
            if key in ("serious_rate_by_age", "model_fatality_by_age"):
                value = tuple(value)
            setattr(cfg.disease, key, value)
        elif key in _INTERVENTION_KEYS:
            setattr(cfg.interventions, key, value)
        else:
            raise ConfigError(f"unknown configuration key: {key!r}")
    cfg.validate()
    return cfg


def config_to_dict(cfg: SimConfig) -> dict:
    data = {k: getattr(cfg, k) for k in sorted(_TOP_KEYS)}
    data.update({k: getattr(cfg.disease, k) for k in sorted(_DISEASE_KEYS)})
    data.update({k: getattr(cfg.interventions, k) for k in sorted(_INTERVENTION_KEYS)})
    for key, value in data.items():
        if isinstance(value, tuple):
            data[key] = list(value)
    return data


def load_config(path) -> SimConfig:
    """Read a flat YAML mapping of configuration keys."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping of configuration keys")
    return config_from_dict(data)


def save_config(cfg: SimConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)


def _canonical(value):
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, dict):
        return {k: _canonical(value[k]) for k in sorted(value)}
    return value


def fingerprint(cfg: SimConfig, seed: int) -> int:
    """64-bit key of the canonical (config, seed) serialization.

    Floats are fixed to 9 significant digits so that reloaded configs hash
    identically to freshly built ones.
    """
    payload = _canonical(config_to_dict(cfg))
    payload["__seed__"] = int(seed)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "big")
