import pytest

from denseassoc import synth


@pytest.fixture(scope="session")
def standard_scenario():
    """The standard crowded scenario (50 agents, 100 frames, noise 0.15)."""
    return synth.generate_scenario(synth.standard_crowded_scenario())


@pytest.fixture(scope="session")
def standard_scenario_clean():
    """Standard crowded scenario with zero feature noise."""
    cfg = synth.standard_crowded_scenario()
    cfg.feature_noise = 0.0
    return synth.generate_scenario(cfg)


@pytest.fixture(scope="session")
def small_clean_scenario():
    """10 well-separated agents over 50 frames, noiseless features."""
    cfg = synth.ScenarioConfig(
        n_agents=10,
        n_frames=50,
        width=256,
        height=256,
        min_spacing=20.0,
        feature_noise=0.0,
        seed=7,
    )
    return synth.generate_scenario(cfg)
