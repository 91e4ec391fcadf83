import pytest

from episim.config import SimConfig


def tiny_config(**overrides) -> SimConfig:
    """A few-hundred-agent world that burns out in a couple of seconds."""
    cfg = SimConfig(population=300, grid_size=18.0, max_days=40, seed=3)
    for key, value in overrides.items():
        if hasattr(cfg, key):
            setattr(cfg, key, value)
        elif hasattr(cfg.disease, key):
            setattr(cfg.disease, key, value)
        else:
            setattr(cfg.interventions, key, value)
    return cfg


@pytest.fixture
def tiny():
    return tiny_config()
