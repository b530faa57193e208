import numpy as np
import pytest

from styletune.audio import AudioBuffer, make_rng


@pytest.fixture
def rng():
    return make_rng(0)


@pytest.fixture
def stereo_noise():
    """1 s of seeded stereo noise at 48 kHz."""
    r = make_rng(101)
    return AudioBuffer(0.25 * r.standard_normal((2, 48000)), 48000)


@pytest.fixture
def mono_noise():
    r = make_rng(102)
    return AudioBuffer(0.25 * r.standard_normal(48000), 48000)


@pytest.fixture
def sine_440():
    """1 s full-scale-ish 440 Hz stereo sine."""
    t = np.arange(48000) / 48000.0
    s = 0.5 * np.sin(2 * np.pi * 440.0 * t)
    return AudioBuffer(np.stack([s, s]), 48000)
