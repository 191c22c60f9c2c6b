import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdalloc.distortion import (
    RateVector,
    SurfaceParams,
    TaskPerformance,
    WeightVector,
    eval_surface,
    surface_gradient,
    task_distortion,
    total_distortion,
)
from rdalloc.errors import RdError

alphas = st.floats(1.0, 1e3)
betas = st.floats(1e-4, 1e-1)
rates = st.floats(0.0, 5000.0)


@st.composite
def surfaces(draw, n=None):
    n = n or draw(st.integers(1, 4))
    return SurfaceParams(draw(st.floats(-1, 10)), draw(st.lists(alphas, min_size=n, max_size=n)),
                         draw(st.lists(betas, min_size=n, max_size=n)))


@pytest.mark.parametrize("baseline, measured, expected", [
    (62.59, 62.59, 0.0),
    (100.0, 90.0, 0.10),
    (50.0, 55.0, -0.10),
])
def test_task_distortion_examples(baseline, measured, expected):
    assert task_distortion(TaskPerformance(1, baseline, measured)) == pytest.approx(expected, abs=1e-15)


def test_zero_baseline_names_task():
    with pytest.raises(RdError, match="task 3"):
        TaskPerformance(3, 0.0, 1.0)


@given(st.floats(0.1, 100), st.floats(-100, 100), st.floats(-100, 100))
def test_task_distortion_strictly_decreasing_in_measured(baseline, m1, m2):
    d1 = task_distortion(TaskPerformance(1, baseline, m1))
    d2 = task_distortion(TaskPerformance(1, baseline, m2))
    if m2 - m1 > 1e-9:
        assert d1 > d2
    elif m1 <= m2:
        assert d1 >= d2
    assert (d1 == 0) == (m1 == baseline)


@pytest.mark.parametrize("d, w, expected", [
    ((0.1, 0.2, 0.3), (1, 1, 1), 0.6),
    ((0.1, 0.2, 0.3), (8, 1, 1), 1.3),
    ((0.0, 0.0, 0.0), (2, 5, 0.5), 0.0),
])
def test_total_distortion_examples(d, w, expected):
    assert total_distortion(d, WeightVector(w)) == pytest.approx(expected, abs=1e-15)


def test_total_distortion_length_mismatch():
    with pytest.raises(RdError):
        total_distortion([0.1, 0.2], WeightVector([1, 1, 1]))


@pytest.mark.parametrize("w", [(1, 0, 1), (1, -2), ()])
def test_weights_must_be_positive(w):
    with pytest.raises(RdError):
        WeightVector(w)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(0.1, 10), min_size=3, max_size=3), st.floats(0.1, 10))
def test_total_distortion_linear(d1, d2, w, c):
    wv = WeightVector(w)
    assert total_distortion(d1, WeightVector([c * x for x in w])) == pytest.approx(c * total_distortion(d1, wv), abs=1e-12)
    summed = [a + b for a, b in zip(d1, d2)]
    assert total_distortion(summed, wv) == pytest.approx(total_distortion(d1, wv) + total_distortion(d2, wv), abs=1e-12)


def test_surface_params_validation():
    with pytest.raises(RdError):
        SurfaceParams(0.0, (1.0, 2.0), (0.1,))
    with pytest.raises(RdError):
        SurfaceParams(0.0, (1.0,), (0.0,))
    with pytest.raises(RdError):
        SurfaceParams(0.0, (-1.0,), (0.1,))
    with pytest.raises(RdError):
        RateVector([1.0, -0.5])


def test_eval_surface_ref_params(ref_params):
    # Independent evaluation: at zero rate every exponential is exactly one.
    assert eval_surface(ref_params, (0.0, 0.0)) == pytest.approx(0.80 + 72.45 + 183.09, rel=1e-15)
    assert eval_surface(ref_params, (0.0, 0.0)) == pytest.approx(256.34, rel=1e-12)
    assert eval_surface(ref_params, (1e9, 1e9)) == pytest.approx(0.80, abs=1e-12)
    assert eval_surface(SurfaceParams(0.0, (1.0,), (1.0,)), (1.0,)) == 0.5


def test_eval_surface_vectorized(ref_params):
    pts = np.array([[0.0, 0.0], [100.0, 50.0], [1e4, 1e4]])
    vals = eval_surface(ref_params, pts)
    assert vals.shape == (3,)
    for p, v in zip(pts, vals):
        assert v == eval_surface(ref_params, p)


def test_eval_surface_dimension_mismatch(ref_params):
    with pytest.raises(RdError):
        eval_surface(ref_params, (1.0, 2.0, 3.0))
    with pytest.raises(RdError):
        surface_gradient(ref_params, (1.0,))


@given(surfaces(), st.data())
def test_eval_surface_monotone(params, data):
    n = params.n_streams
    r = np.array(data.draw(st.lists(rates, min_size=n, max_size=n)))
    bump = np.array(data.draw(st.lists(st.floats(0, 1000), min_size=n, max_size=n)))
    assert eval_surface(params, r + bump) <= eval_surface(params, r)


@given(surfaces(), st.data(), st.floats(0, 1))
def test_eval_surface_convex_on_segments(params, data, theta):
    n = params.n_streams
    r1 = np.array(data.draw(st.lists(rates, min_size=n, max_size=n)))
    r2 = np.array(data.draw(st.lists(rates, min_size=n, max_size=n)))
    mid = eval_surface(params, theta * r1 + (1 - theta) * r2)
    chord = theta * eval_surface(params, r1) + (1 - theta) * eval_surface(params, r2)
    assert mid <= chord + 1e-12 * (1 + abs(chord))


def test_gradient_at_zero():
    g = surface_gradient(SurfaceParams(0.0, (1.0,), (1.0,)), (0.0,))
    assert g[0] == pytest.approx(-math.log(2), rel=1e-15)


def test_gradient_symmetric():
    p = SurfaceParams(0.3, (5.0, 5.0), (0.01, 0.01))
    g = surface_gradient(p, (120.0, 120.0))
    assert g[0] == g[1] and g[0] < 0


def central_difference(params, r, h=1e-4):
    out = np.empty(len(r))
    for j in range(len(r)):
        up, dn = np.array(r, float), np.array(r, float)
        up[j] += h
        dn[j] -= h
        out[j] = (eval_surface(params, up) - eval_surface(params, dn)) / (2 * h)
    return out


@given(surfaces(), st.data())
def test_gradient_matches_finite_differences(params, data):
    n = params.n_streams
    r = np.array(data.draw(st.lists(st.floats(1.0, 5000.0), min_size=n, max_size=n)))
    g = surface_gradient(params, r)
    fd = central_difference(params, r)
    assert np.all(g < 0) or np.all(g <= 0)
    assert np.all(np.abs(g - fd) <= 1e-6 * (1 + np.abs(g)))
