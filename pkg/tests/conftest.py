import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eitml.core import FrameSequence  # noqa: E402
from eitml.cycles import BreathCycle  # noqa: E402

TOY_CYCLES = [BreathCycle(0, 9), BreathCycle(12, 23), BreathCycle(26, 37)]


def toy_recording(seed, width=4, height=4, n_frames=40, fps=10.0):
    """Random breathing-like 4x4 recording with three known inspirations.

    Each pixel gets its own amplitude, onset lag and noise so that regional
    curves differ; values stay positive so every denominator is non-zero.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames)
    amp = rng.uniform(0.5, 2.0, size=(height, width))
    lag = rng.uniform(0.0, 3.0, size=(height, width))
    base = rng.uniform(1.0, 2.0, size=(height, width))
    frames = np.empty((n_frames, height, width))
    for k in range(n_frames):
        phase = np.zeros((height, width))
        for c in TOY_CYCLES:
            span = c.end_insp - c.begin_insp
            x = np.clip((k - c.begin_insp - lag) / span, 0.0, 1.0)
            if c.begin_insp <= k <= c.end_insp + 2:
                phase = np.maximum(phase, x)
        frames[k] = base + amp * phase
    frames += 0.05 * rng.standard_normal(frames.shape)
    return FrameSequence(frames, fps)


@pytest.fixture(scope="session")
def default_dataset():
    from eitml.synth import synthesize_dataset

    return synthesize_dataset()


@pytest.fixture(scope="session")
def small_dataset():
    from eitml.synth import synthesize_dataset

    return synthesize_dataset(n_healthy=3, n_nonhealthy=4, breaths_healthy=60, breaths_nonhealthy=80, seed=3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
