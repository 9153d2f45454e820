import numpy as np
import pytest

from exform import expr as ex
from exform import forms

FIXTURES = __import__("pathlib").Path(__file__).resolve().parent.parent / "fixtures"


def rand_expr(rng, chart, depth=3, trig=True):
    """Random smooth expression: polynomial with optional sin/cos, no division."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return ex.const(chart, float(rng.integers(-3, 4)))
        return ex.coord(chart, int(rng.integers(chart.dim)))
    r = rng.random()
    if trig and r < 0.2:
        fn = ex.sin if rng.integers(2) == 0 else ex.cos
        return fn(rand_expr(rng, chart, depth - 1, trig))
    if r < 0.35:
        return rand_expr(rng, chart, depth - 1, trig) ** int(rng.integers(2, 4))
    op = ("+", "-", "*")[int(rng.integers(3))]
    return ex.Binary(chart, op,
                     rand_expr(rng, chart, depth - 1, trig),
                     rand_expr(rng, chart, depth - 1, trig))


def rand_form(rng, chart, degree, depth=2, trig=True):
    import itertools
    all_indices = list(itertools.combinations(range(chart.dim), degree))
    count = int(rng.integers(1, len(all_indices) + 1))
    picks = rng.choice(len(all_indices), size=count, replace=False)
    coeffs = {all_indices[i]: rand_expr(rng, chart, depth, trig) for i in picks}
    return forms.DifferentialForm(chart, degree, coeffs)


def central_diff(e, point, axis, h=1e-5):
    lo = list(point)
    hi = list(point)
    lo[axis] -= h
    hi[axis] += h
    return (ex.evaluate(e, hi) - ex.evaluate(e, lo)) / (2 * h)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
