import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tripert import model
from tripert.errors import DomainError, ParameterError

FAMILIES = [
    model.LogNormal(-0.5, 0.5),
    model.PowerLaw(1.5),
    model.PowerLaw(1.3, 1.0),
    model.Discrete((0.3, 1.6), (0.7, 0.3)),
    model.GarchSquare(0.1, 0.85),
]


def test_degenerate_law_sample_is_constant():
    law = model.CoefficientLaw(model.degenerate(math.exp(-1)), model.Constant(0.0), model.Constant(0.0), model.Constant(1.0))
    s = model.sample(law, np.random.default_rng(0), 100)
    assert np.all(s.a == math.exp(-1))
    assert np.all(s.y == 0) and np.all(s.b1 == 0) and np.all(s.b2 == 1)


def test_lognormal_log_mean():
    law = model.reference_model("cm1")
    s = model.sample(law, np.random.default_rng(1), 1_000_000)
    assert abs(np.log(s.a).mean() + 0.5) <= 3 * math.sqrt(0.5) / 1e3


def test_affine_y_is_functional():
    a = model.LogNormal(-0.5, 0.5)
    law = model.CoefficientLaw(a, model.AffineInLogA(1.0, 0.5))
    s = model.sample(law, np.random.default_rng(2), 1000)
    np.testing.assert_allclose(s.y, np.log(s.a) - 0.5, rtol=0, atol=1e-14)
    assert law.dependence["y"] is False


def test_sample_positive_and_finite():
    for fam in FAMILIES:
        law = model.CoefficientLaw(fam, model.Gaussian(0, 1), model.Exponential(1.0), model.Gaussian(1, 2))
        s = model.sample(law, np.random.default_rng(3), 20_000)
        assert np.all(s.a > 0)
        for f in (s.a, s.y, s.b1, s.b2):
            assert np.all(np.isfinite(f))


def test_seed_determinism():
    law = model.reference_model("cm1")
    s1 = model.sample(law, np.random.default_rng(7), 50)
    s2 = model.sample(law, np.random.default_rng(7), 50)
    for f in ("a", "y", "b1", "b2"):
        assert np.array_equal(getattr(s1, f), getattr(s2, f))


def test_mellin_examples():
    law = model.reference_model("cm1")
    assert model.mellin(law, 2.0) == pytest.approx(1.0, abs=1e-14)
    assert model.mellin_log(law, 2.0) == pytest.approx(0.5, abs=1e-14)
    assert model.mellin_log(law, 0.0) == pytest.approx(-0.5, abs=1e-14)
    for fam in FAMILIES:
        assert model.mellin(model.CoefficientLaw(fam), 0.0) == pytest.approx(1.0, abs=1e-9)
    c = model.CoefficientLaw(model.degenerate(0.7))
    assert model.mellin(c, 1.7) == pytest.approx(0.7**1.7, rel=1e-12)
    assert model.mellin_log(c, 1.7) == pytest.approx(0.7**1.7 * math.log(0.7), rel=1e-12)


@given(mu=st.floats(-2, 1), s2=st.floats(0.05, 2), beta=st.floats(-3, 3))
def test_lognormal_mellin_closed_form(mu, s2, beta):
    law = model.CoefficientLaw(model.LogNormal(mu, s2))
    assert model.mellin(law, beta) == pytest.approx(math.exp(mu * beta + s2 * beta * beta / 2), rel=1e-12)


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: type(f).__name__)
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_mellin_matches_monte_carlo(fam, beta):
    law = model.CoefficientLaw(fam)
    if beta >= fam.domain()[1]:
        pytest.skip("outside domain")
    x = fam.sample(np.random.default_rng(11), 1_000_000) ** beta
    se = x.std(ddof=1) / 1e3
    assert abs(model.mellin(law, beta) - x.mean()) <= 4 * se


@pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: type(f).__name__)
@pytest.mark.parametrize("beta", [0.5, 1.5])
def test_mellin_log_is_derivative(fam, beta):
    law = model.CoefficientLaw(fam)
    h = 1e-5
    fd = (model.mellin(law, beta + h) - model.mellin(law, beta - h)) / (2 * h)
    assert model.mellin_log(law, beta) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_mellin_domain_error():
    law = model.CoefficientLaw(model.PowerLaw(1.5))
    with pytest.raises(DomainError):
        model.mellin(law, -2.0)
    with pytest.raises(DomainError):
        model.mellin_log(law, -1.0)


def test_cross_moments():
    a = model.LogNormal(-0.5, 0.5)
    assert model.cross_moments(model.reference_model("cm1"), 2.0, 3).s == pytest.approx(0.0, abs=1e-12)
    assert model.cross_moments(model.reference_model("cm2"), 2.0, 3).s == pytest.approx(1.0, abs=1e-12)
    law = model.CoefficientLaw(a, model.AffineInLogA(1.0, 0.5))
    assert model.cross_moments(law, 2.0, 3).s == pytest.approx(0.0, abs=1e-9)


def test_garch_preset():
    law = model.garch_preset(1.0, 1.0, 0.0, 0.6, 1.0)
    assert law.a.degenerate
    s = model.sample(law, np.random.default_rng(0), 10)
    assert np.all(s.a == 0.6)
    law = model.garch_preset(1.0, 1.0, 0.1, 0.85, 1.0)
    assert model.mellin(law, 1.0) == pytest.approx(0.95, rel=1e-9)
    assert model.mellin_log(law, 0.0) < 0
    law = model.garch_preset(1.0, 2.0, 0.1, 0.85, 0.0)
    assert law.y.is_constant and law.y.c == 0
    with pytest.raises(ParameterError):
        model.garch_preset(1.0, 1.0, -0.1, 0.85, 1.0)
    with pytest.raises(ParameterError):
        model.garch_preset(0.0, 1.0, 0.1, 0.85, 1.0)


def test_reference_model_unknown():
    with pytest.raises(ParameterError):
        model.reference_model("cm9")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gaussian_abs_moment(seed):
    g = model.Gaussian(0.3, 1.7)
    x = g.sample(np.random.default_rng(seed), 200_000)
    v = np.abs(x) ** 3
    assert abs(g.abs_moment(3.0) - v.mean()) <= 5 * v.std() / math.sqrt(v.size)
