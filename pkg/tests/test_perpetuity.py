import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from tripert import model
from tripert.cramer import spectral_report, tilt
from tripert.errors import DriftError, NonConvergence, ParameterError
from tripert.perpetuity import (
    block_window,
    choose_D,
    forward_trace,
    sample_blocks,
    simulate_paths,
    simulate_stationary,
)

HALF = model.degenerate(0.5)
CM1 = model.reference_model("cm1")


def test_geometric_series():
    law = model.CoefficientLaw(HALF, model.Constant(0.0), model.Constant(1.0), model.Constant(0.0))
    p = simulate_stationary(law, 1e-14, rng=0)
    assert p.x1 == pytest.approx(2.0, abs=1e-12)
    assert p.x2 == 0.0


def test_arithmetico_geometric_series():
    law = model.CoefficientLaw(HALF, model.Constant(1.0), model.Constant(0.0), model.Constant(1.0))
    p = simulate_stationary(law, 1e-14, rng=0, size=3)
    np.testing.assert_allclose(p.x2, 2.0, atol=1e-12)
    np.testing.assert_allclose(p.x0, 2.0, atol=1e-12)
    np.testing.assert_allclose(p.x1, 2.0, atol=1e-12)


def test_positive_drift_rejected():
    with pytest.raises(DriftError):
        simulate_stationary(model.CoefficientLaw(model.LogNormal(0.1, 0.5)), rng=0)


def test_hard_cap():
    law = model.CoefficientLaw(model.degenerate(0.99))
    with pytest.raises(NonConvergence):
        simulate_stationary(law, 1e-12, rng=0, hard_cap=50)


def test_stationary_mean_of_x2():
    # E X2 = E b2 / (1 - E a) when E a < 1
    law = model.CoefficientLaw(model.LogNormal(-1.0, 0.5), b2=model.Exponential(2.0))
    p = simulate_stationary(law, 1e-10, rng=3, size=100_000)
    exact = 0.5 / (1 - math.exp(-0.75))
    assert abs(p.x2.mean() - exact) <= 4 * p.x2.std() / math.sqrt(p.x2.size)


def test_stationary_fixed_point_in_law():
    # X2 and a X2 + b2 have the same law
    rng = np.random.default_rng(4)
    law = model.CoefficientLaw(model.LogNormal(-1.0, 0.5), b2=model.Gaussian(0.5, 1.0))
    x = simulate_stationary(law, 1e-10, rng=rng, size=50_000).x2
    s = model.sample(law, rng, 50_000)
    z = s.a * simulate_stationary(law, 1e-10, rng=rng, size=50_000).x2 + s.b2
    from scipy import stats

    assert stats.ks_2samp(x, z).pvalue > 1e-3


def test_truncation_bound_is_a_conditional_moment_scale():
    """Single-trajectory runs draw in a fixed order, so two tolerances couple exactly."""
    ratios = []
    for i in range(600):
        a = simulate_stationary(CM1, 1e-8, rng=i)
        b = simulate_stationary(CM1, 1e-9, rng=i)
        d = max(abs(a.x1 - b.x1), abs(a.x2 - b.x2))
        assert b.truncation_n >= a.truncation_n
        ratios.append(d / a.truncation_bound)
    r = np.asarray(ratios)
    assert r.mean() + 3 * r.std() / math.sqrt(r.size) < 1.0


def test_window_rounding_and_domain():
    w = block_window(0.5, 1e8, 3.0)
    assert w.n0 == math.floor(math.log(1e8) / 0.5 + 0.5)
    lt = math.log(1e8)
    assert w.L == math.floor(3.0 * math.sqrt(math.log(lt) * lt) + 0.5)
    assert w.lo == max(w.n0 - w.L, 2) and w.hi == w.n0 + w.L and w.n == w.lo - 1
    with pytest.raises(ParameterError):
        block_window(0.5, 10.0, 3.0)
    with pytest.raises(ParameterError):
        block_window(0.5, 1e8, 0.0)


def test_choose_D():
    rep = spectral_report(CM1)
    assert choose_D(rep, 2.0) == pytest.approx(24.0)
    assert choose_D(rep, 0.0) >= 4
    with pytest.raises(ParameterError):
        choose_D(rep, -1.0)


def test_blocks_vanish_without_y():
    law = model.CoefficientLaw(model.LogNormal(-0.5, 0.5), model.Constant(0.0), model.Constant(1.0), model.Gaussian(0, 1))
    rep = spectral_report(law)
    b = sample_blocks(law, rep, 1e6, 2.0, rng=0, size=200)
    for f in (b.n_t, b.m_t, b.n_inf, b.x0):
        assert np.all(f == 0)
    assert np.all(b.weight == 1)


def _laws():
    a = st.one_of(
        st.builds(model.LogNormal, st.floats(-1.0, -0.2), st.floats(0.1, 1.0)),
        st.builds(model.PowerLaw, st.floats(1.1, 1.6), st.floats(0.0, 1.0)),
        st.builds(lambda u: model.Discrete((0.3, u), (0.7, 0.3)), st.floats(1.1, 2.0)),
    )
    y = st.one_of(
        st.builds(model.Constant, st.floats(-2, 2)),
        st.builds(model.Gaussian, st.floats(-1, 1), st.floats(0.1, 2)),
    )
    b = st.one_of(
        st.builds(model.Constant, st.floats(-2, 2)),
        st.builds(model.Gaussian, st.floats(-1, 1), st.floats(0.1, 2)),
        st.builds(model.Exponential, st.floats(0.5, 2)),
    )
    return st.builds(model.CoefficientLaw, a, y, b, b)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(law=_laws(), logt=st.floats(3.0, 20.0), D=st.floats(0.3, 3.0), seed=st.integers(0, 2**32 - 1))
def test_block_identities(law, logt, D, seed):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = spectral_report(law, strict=False)
    b = sample_blocks(law, rep, math.exp(logt), D, rng=seed, size=64)
    tiny = 1e-300
    assert np.all(np.abs(b.x1 - b.x1_prime - b.x0) <= 1e-12 * (b.x1_abs + tiny))
    assert np.all(np.abs(b.n_t + b.m_t + b.n_inf - b.x0) <= 1e-12 * (b.x0_abs + tiny))
    assert np.all(np.abs(b.m_prime + b.m_double_prime - b.m_t) <= 1e-12 * (b.m_abs + tiny))
    assert np.all(np.abs(b.r_prime + b.r_double_prime - b.r_t) <= 1e-12 * (b.r_abs + tiny))
    assert np.all(b.weight == 1)


def test_block_sample_scalar():
    rep = spectral_report(CM1)
    b = sample_blocks(CM1, rep, 1e6, 2.0, rng=1)
    assert isinstance(b.m_t, float) and b.n0 == 28


def test_first_n_weight_calibration():
    # small n: the weight Pi_n^-alpha has finite variance and mean 1
    law = model.CoefficientLaw(model.LogNormal(-0.5, 0.5), model.Gaussian(0, 1))
    rep = spectral_report(law)
    b = sample_blocks(law, rep, 30.0, 3.0, tilt_first_n=True, rng=2, size=200_000)
    assert b.lo - 1 == 1
    w = b.weight
    assert abs(w.mean() - 1) <= 3 * w.std() / math.sqrt(w.size)


def test_tilted_untilted_consistency():
    """Bounded functional of the first n coefficients: weighted tilted mean = plain mean."""
    rep = spectral_report(CM1)
    tl = tilt(CM1, rep.alpha)
    w = block_window(rep.rho, 30.0, 3.0)
    g = lambda p: np.tanh(p["x2"]) + (p["y_n"] > 0)  # noqa: E731
    plain = simulate_paths(CM1, 200_000, np.random.default_rng(3), window=w)
    tilted = simulate_paths(CM1, 200_000, np.random.default_rng(4), window=w, scheme="first_n", tilted=tl)
    # x2 depends beyond n, but only through the untilted continuation
    v1, v2 = g(plain), g(tilted) * tilted["weight"]
    se = math.hypot(v1.std() / math.sqrt(v1.size), v2.std() / math.sqrt(v2.size))
    assert abs(v1.mean() - v2.mean()) <= 4 * se


def test_forward_trace_garch_positive():
    law = model.garch_preset(1.0, 1.0, 0.1, 0.85, 1.0)
    tr = forward_trace(law, 500, np.random.default_rng(0))
    assert tr.shape == (500, 2) and np.all(tr > 0)
