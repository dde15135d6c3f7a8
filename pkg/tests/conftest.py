import math
import time

import numpy as np
import pytest

from phqcast import model as M
from phqcast.core import GpsFix, Timestamp
from phqcast.synth import SynthConfig, generate

# 2021-03-01 00:00 UTC
EPOCH_MS = 1_614_556_800_000
M_PER_DEG = math.pi * 6_371_000.0 / 180.0
BASE_LAT, BASE_LON = 49.59, 11.0

# acceptance criterion number -> (passed, title, detail), printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}
TIMINGS: dict[str, float] = {}


def at(hours: float, day: int = 1, offset_min: int = 0) -> Timestamp:
    """Timestamp at local ``hours`` on study ``day`` for a study starting at local midnight of EPOCH."""
    local = EPOCH_MS + (day - 1) * 86_400_000 + round(hours * 3_600_000)
    return Timestamp(local - offset_min * 60_000, offset_min)


def start(offset_min: int = 0) -> Timestamp:
    return at(0.0, 1, offset_min)


def moved(lat: float, lon: float, east_m: float = 0.0, north_m: float = 0.0) -> tuple[float, float]:
    return lat + north_m / M_PER_DEG, lon + east_m / (M_PER_DEG * math.cos(math.radians(lat)))


def fix(seconds: float, east_m: float = 0.0, north_m: float = 0.0, accuracy: float = 5.0, speed: float = 0.0, day: int = 1) -> GpsFix:
    lat, lon = moved(BASE_LAT, BASE_LON, east_m, north_m)
    return GpsFix(at(seconds / 3600.0, day), lat, lon, accuracy, speed)


@pytest.fixture(scope="session")
def small_cohort(tmp_path_factory):
    """10 subjects x 2 weeks, written once per test session."""
    out = tmp_path_factory.mktemp("cohort")
    truth = generate(SynthConfig(n_subjects=10, n_weeks=2, seed=3), out)
    return out, truth


@pytest.fixture(scope="session")
def default_cohort(tmp_path_factory):
    """The default 48 subjects x 8 weeks cohort (seed 7)."""
    out = tmp_path_factory.mktemp("default_cohort")
    t0 = time.perf_counter()
    truth = generate(SynthConfig(), out)
    TIMINGS["default_cohort"] = time.perf_counter() - t0
    return out, truth


def gradient_check(rng, relu: str = "output", every_step: bool = False, input_dim: int = 5, h: float = 1e-5) -> float:
    """Worst relative error between BPTT and central differences on one random configuration.

    The differences are taken in extended precision so that float64 roundoff on
    losses of a few hundred does not swamp gradients of order 1e-5. The output
    ReLU is kept active (away from its kink) by lifting the output bias.
    """
    T, B = int(rng.integers(1, 8)), int(rng.integers(1, 4))
    p = M.ModelParams.init(rng, input_dim, 4)
    x = rng.normal(size=(B, T, input_dim))
    y = rng.uniform(0, 27, B)
    if relu == "output":
        z = M.forward_batch(x, p, relu, every_step)[1].z
        p.b_out = np.asarray(float(p.b_out) + 1.0 - min(0.0, float(z.min())))
    _, cache = M.forward_batch(x, p, relu, every_step)
    grads = M.backward(cache, y)
    q = M.ModelParams(**{n: a.astype(np.longdouble) for n, a in p.arrays().items()})
    yl = y.astype(np.longdouble)

    def loss() -> np.longdouble:
        pred = M.forward_batch(x, q, relu, every_step)[0]
        r = pred - (yl[:, None] if pred.ndim == 2 else yl)
        return np.mean(r * r)

    worst = 0.0
    for name, a in q.arrays().items():
        for i in np.ndindex(a.shape):
            old = a[i].copy()
            a[i] = old + h
            up = loss()
            a[i] = old - h
            down = loss()
            a[i] = old
            num = float((up - down) / (2 * h))
            ana = float(grads[name][i])
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-5))
    return worst


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
