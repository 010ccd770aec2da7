import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from pothull import Box, CostSpec, DiscreteMeasure, PolyCurve
from pothull.core import CostConstants, estimate_cost_constants, pcost_holder_bound

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def line_measure(points, weights=None) -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray(points, float)[:, None], weights)


def matrix_instance(C, a, b):
    """Measures on distinct integer points carrying an explicit cost table."""
    C = np.asarray(C, float)
    rho = DiscreteMeasure(np.arange(C.shape[0], dtype=float)[:, None], a)
    mu = DiscreteMeasure(np.arange(C.shape[1], dtype=float)[:, None], b)
    return rho, mu, CostSpec.matrix(C).bind(rho, mu)


def random_matrix_instance(rng, n, m, integer=False, degenerate=False):
    """Random instance; integer costs and integer-ratio weights produce degenerate, split faces."""
    C = rng.integers(0, 3, (n, m)).astype(float) if integer else rng.random((n, m))
    if degenerate:
        a = rng.integers(1, 4, n).astype(float)
        b = rng.integers(1, 4, m).astype(float)
        # Common total so that partial sums of a and b can coincide.
        a, b = a / a.sum(), b / b.sum()
    else:
        a = rng.random(n) + 0.1
        b = rng.random(m) + 0.1
        a /= a.sum()
        b /= b.sum()
    # Renormalise so the weights sum to one up to rounding.
    a[-1] = 1.0 - a[:-1].sum()
    b[-1] = 1.0 - b[:-1].sum()
    return (C, a, b) + matrix_instance(C, a, b)


def sharpness_d1_n2():
    """Lattice {0, 1/2, 1} with uniform weights and mu = 2/3 d_0 + 1/3 d_1, bilinear cost."""
    rho = line_measure([0.0, 0.5, 1.0])
    mu = line_measure([0.0, 1.0], [2.0 / 3.0, 1.0 / 3.0])
    return rho, mu, CostSpec.bilinear()


@st.composite
def instances(draw, max_n=5, max_m=4):
    """Small random transport instances on a line with a random cost table."""
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    seed = draw(st.integers(0, 2**32 - 1))
    integer = draw(st.booleans())
    degenerate = draw(st.booleans())
    rng = np.random.default_rng(seed)
    return random_matrix_instance(rng, n, m, integer, degenerate)


def random_curve_draw(rng):
    """Random polyline in [0,1]^2, noisy atoms, targets in [0,1]^2 and a cost with rigorous constants."""
    k = rng.integers(2, 5)
    curve = PolyCurve(rng.random((k, 2)))
    n = int(rng.integers(1, 30))
    atoms = np.clip(curve(np.arange(n + 1) / n) + rng.normal(0, 0.02, (n + 1, 2)), 0, 1)
    ys = rng.random((n + 1, 2))
    box = Box.unit(2)
    kind = rng.integers(0, 3)
    if kind == 0:
        c = CostSpec.quadratic()
        consts = estimate_cost_constants(c, box, box, 1.0)
    elif kind == 1:
        c = CostSpec.bilinear()
        consts = estimate_cost_constants(c, box, box, 1.0)
    else:
        p = float(rng.uniform(1.2, 2.0))
        c = CostSpec.pcost(p)
        g = p * box.diameter ** (p - 1)
        consts = CostConstants(g, p - 1, pcost_holder_bound(p), pcost_holder_bound(p))
    return curve, atoms, ys, n, c, consts


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    lines = getattr(acc, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
