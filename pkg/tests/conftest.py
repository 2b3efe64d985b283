import numpy as np
import pytest
from importlib import resources

from fmresynth import fmsynth as fm


def packaged_config(name):
    """Path to a bundled FM configuration file."""
    return str(resources.files("fmresynth") / "configs" / f"{name}.fm")


@pytest.fixture
def two_osc_config():
    return fm.load_config(packaged_config("strings1_2"))


@pytest.fixture
def four_osc_config():
    return fm.load_config(packaged_config("strings1_2x2"))


def piecewise_envelopes(config, t_frames, seed, i_max=2.0, lo=0.2, hi=0.8,
                        breakpoints=6):
    """Smooth random envelopes inside the per-channel level bounds."""
    rng = np.random.default_rng(seed)
    a_max = config.a_max(i_max)
    env = np.zeros((t_frames, config.n_oscillators))
    grid = np.linspace(0, t_frames - 1, breakpoints)
    for k in range(config.n_oscillators):
        pts = rng.uniform(lo, hi, size=breakpoints) * a_max[k]
        env[:, k] = np.interp(np.arange(t_frames), grid, pts)
    return env
