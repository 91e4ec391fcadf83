"""Timed intervention changes and imported-case injection during a run.

A scenario bundles a country age structure, initial intervention settings
and a day-indexed event timeline. Events are applied atomically at the day
boundary before that day's first tick; imported cases are injected weekly.
Three presets modelled on early-2020 country timelines ship with the
package (hong_kong, italy, uk).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from episim.config import (
    ConfigError,
    InterventionParams,
    SimConfig,
    normalize_distribution,
)
from episim.engine import TimeSeries, World

PRESET_NAMES = ("hong_kong", "italy", "uk")

_EVENT_KEYS = {f.name for f in dataclasses.fields(InterventionParams)} | {
    "imported_cases_per_week"
}


class ScenarioError(ConfigError):
    """Invalid scenario file."""


@dataclass
class TimelineEvent:
    day: int
    changes: dict = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    age_distribution: tuple | None = None
    initial: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    max_days: int = 180

    def validate(self):
        if self.age_distribution is not None:
            self.age_distribution = normalize_distribution(self.age_distribution)
        for key in self.initial:
            if key not in _EVENT_KEYS:
                raise ScenarioError(f"{self.name}: unknown initial parameter {key!r}")
        seen = set()
        for ev in self.events:
            if ev.day < 0:
                raise ScenarioError(f"{self.name}: event day {ev.day} is negative")
            if ev.day in seen:
                raise ScenarioError(f"{self.name}: more than one event on day {ev.day}")
            seen.add(ev.day)
            for key in ev.changes:
                if key not in _EVENT_KEYS:
                    raise ScenarioError(
                        f"{self.name}: unknown parameter {key!r} in day-{ev.day} event"
                    )
        self.events.sort(key=lambda ev: ev.day)


def scenario_from_dict(data: dict, name_hint: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"{name_hint}: expected a mapping")
    known = {"name", "age_distribution", "initial", "events", "max_days"}
    for key in data:
        if key not in known:
            raise ScenarioError(f"{name_hint}: unknown top-level key {key!r}")
    events = []
    for i, raw in enumerate(data.get("events") or []):
        if not isinstance(raw, dict) or "day" not in raw:
            raise ScenarioError(f"{name_hint}: event #{i} needs a 'day' key")
        changes = {k: v for k, v in raw.items() if k != "day"}
        events.append(TimelineEvent(day=int(raw["day"]), changes=changes))
    sc = Scenario(
        name=data.get("name", name_hint),
        age_distribution=tuple(data["age_distribution"]) if "age_distribution" in data else None,
        initial=dict(data.get("initial") or {}),
        events=events,
        max_days=int(data.get("max_days", 180)),
    )
    sc.validate()
    return sc


def load_scenario(source) -> Scenario:
    """Load a scenario from a preset name or a YAML file path."""
    if isinstance(source, str) and source in PRESET_NAMES:
        text = (
            resources.files("episim").joinpath(f"presets/{source}.yaml").read_text("utf-8")
        )
        name_hint = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        name_hint = str(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:  # pyyaml reports line/column in the message
        raise ScenarioError(f"{name_hint}: {exc}") from exc
    return scenario_from_dict(data, name_hint)


def apply_events(world: World, scenario: Scenario, day: int, import_rate: int) -> int:
    """Apply all events scheduled for `day`; returns the new import rate."""
    for ev in scenario.events:
        if ev.day != day:
            continue
        import_rate = _apply_changes(world, ev.changes, import_rate)
    return import_rate


def _apply_changes(world: World, changes: dict, import_rate: int) -> int:
    iv = world.config.interventions
    for key, value in changes.items():
        if key == "imported_cases_per_week":
            import_rate = int(value)
        elif key == "mask_usage_rate":
            world.set_mask_usage(float(value))
        elif key == "ignore_lockdown_pct":
            world.set_lockdown_compliance(float(value))
        elif key in ("lockdown_enabled", "city_confinement"):
            setattr(iv, key, bool(value))
        else:
            setattr(iv, key, float(value))
    iv.validate()
    return import_rate


def inject_imported_cases(world: World, rate: int):
    """Turn `rate` uniformly chosen healthy agents asymptomatic (all, if fewer)."""
    if rate < 0:
        raise ScenarioError("import rate must be >= 0")
    if rate == 0:
        return
    healthy = [int(i) for i in np.flatnonzero(world.health == 0)]
    if not healthy:
        return
    k = min(rate, len(healthy))
    picks = world.rng.permutation(len(healthy))[:k]
    world.infect([healthy[i] for i in picks])


def run_scenario(
    scenario: Scenario, config: SimConfig, seed: int | None = None
) -> TimeSeries:
    """Compose stepping with event application and weekly case imports.

    The run covers scenario.max_days unless infections are extinct with no
    imports configured and no events still pending.
    """
    config = config.copy()
    if scenario.age_distribution is not None:
        config.age_distribution = scenario.age_distribution
    import_rate = _initial_import_rate(scenario, config)
    config.validate()
    if seed is None:
        seed = config.seed

    world = World(config, seed)
    import_rate = int(import_rate)
    tpd = world.ticks_per_day
    max_ticks = scenario.max_days * tpd
    last_event_day = max((ev.day for ev in scenario.events), default=-1)

    ts = TimeSeries(world.population, tpd)
    counts = world.counts()
    ts.append(world.tick, counts, world.hosp_count)
    while world.tick < max_ticks:
        if world.tick % tpd == 0:
            day = world.tick // tpd
            import_rate = apply_events(world, scenario, day, import_rate)
            if day > 0 and day % 7 == 0:
                inject_imported_cases(world, import_rate)
            counts = world.counts()
        if (
            counts[1] + counts[2] + counts[3] == 0
            and import_rate == 0
            and world.tick // tpd >= last_event_day
        ):
            break
        counts, new_inf = world.step()
        ts.append(world.tick, counts, world.hosp_count, new_inf)
    return ts


def _initial_import_rate(scenario: Scenario, config: SimConfig) -> int:
    import_rate = 0
    iv = config.interventions
    for key, value in scenario.initial.items():
        if key == "imported_cases_per_week":
            import_rate = int(value)
        elif key in ("lockdown_enabled", "city_confinement"):
            setattr(iv, key, bool(value))
        else:
            setattr(iv, key, float(value))
    return import_rate

