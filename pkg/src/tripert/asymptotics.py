"""Limit constants and predicted tail limits.

The tails of the stationary solution behave like

    P(X2 > t) ~ c_plus t^-alpha
    P(X1 > t) ~ C t^-alpha (log t)^alphatilde

with ``alphatilde = alpha/2`` when ``s = E y a^alpha = 0`` and ``alphatilde = alpha``
otherwise.  :func:`predicted_limits` gives ``C`` under two conventions:
``"paper"`` uses the powers ``rho^(alpha/2)`` and ``rho^alpha``; ``"corrected"`` uses
``rho^(-alpha/2)`` and ``rho^-alpha``, which follow from ``Y_n`` being sampled at
``n0 = log(t)/rho``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize, special

from . import model, rng as rngmod
from .cramer import CramerReport
from .errors import DegenerateError, ParameterError, RangeError
from .model import CoefficientLaw
from .perpetuity import simulate_paths


def _g(alpha: float) -> float:
    """``E Z^alpha 1{Z >= 0}`` for standard Gaussian Z."""
    return 2 ** (alpha / 2 - 1) * math.gamma((alpha + 1) / 2) / math.sqrt(math.pi)


def _k11(K) -> float:
    K = np.asarray(K, float)
    k11 = float(K[0, 0])
    if k11 < 0 or np.linalg.eigvalsh(K).min() < -1e-10:
        raise ParameterError("K must be positive semidefinite")
    if k11 == 0:
        raise DegenerateError("K11 = 0: the Gaussian scale of Y_n / sqrt(n) collapses")
    det = float(K[0, 0] * K[1, 1] - K[0, 1] ** 2)
    if abs(det) <= 1e-12 * max(1.0, abs(K[0, 0] * K[1, 1])) and abs(k11 - 1.0) > 1e-12:
        warnings.warn(
            "det K = 0: using N(0, K11) for the limit of Y_n / sqrt(n) rather than N(0, 1)",
            RuntimeWarning,
            stacklevel=3,
        )
    return k11


def c0_of_K(K, alpha: float) -> float:
    """``E Z1^alpha 1{Z1 >= 0}`` with ``Z1 ~ N(0, K11)``."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    return _k11(K) ** (alpha / 2) * _g(alpha)


def c0_truncated(K, alpha: float, delta: float) -> float:
    """``int_{1/delta}^{delta} z^alpha phi_K11(z) dz``."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if delta < 1:
        raise ParameterError("delta must be at least 1")
    k11 = _k11(K)
    if delta == 1:
        return 0.0
    sd = math.sqrt(k11)
    f = lambda z: z**alpha * math.exp(-0.5 * (z / sd) ** 2) / (sd * math.sqrt(2 * math.pi))  # noqa: E731
    # split at the mode so the adaptive rule sees the bulk for any delta
    mode = min(max(sd * math.sqrt(alpha), 1 / delta), delta)
    cuts = [1 / delta, mode, min(delta, mode + 12 * sd), delta]
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b > a:
            total += integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
    return total


# ---------------------------------------------------------------------------
# Kesten-Goldie constants of X2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailConstants:
    c_plus: float
    c_minus: float
    se_plus: float
    se_minus: float
    method: str = "goldie_formula"
    positivity: dict = field(default_factory=dict)
    n_samples: int = 0


def positivity_precheck(law: CoefficientLaw, n_samples: int = 20_000, rng=None) -> dict[str, bool]:
    """Support test for ``c_plus > 0`` and ``c_minus > 0`` from sampled ``(a, b2)`` pairs.

    ``c_plus > 0`` iff ``P(a = 1, b2 > 0) > 0`` or there are support points
    ``(u1, v1)``, ``(u2, v2)`` with ``u1 > 1 > u2`` and ``v1/(1-u1) < v2/(1-u2)``.
    ``c_minus`` is the same test for ``-b2``.
    """
    g = np.random.default_rng(rngmod.resolve_seed(rng) if rng is not None else model.MC_SEED)
    s = model.sample(law, g, n_samples)
    a, b = np.asarray(s.a), np.asarray(s.b2)
    res = {}
    for name, v in (("plus", b), ("minus", -b)):
        if np.any((a == 1) & (v > 0)):
            res[name] = True
            continue
        up, dn = a > 1, a < 1
        if not up.any() or not dn.any():
            res[name] = False
            continue
        r_up = v[up] / (1 - a[up])
        r_dn = v[dn] / (1 - a[dn])
        res[name] = bool(r_up.min() < r_dn.max())
    return res


def _goldie_chunk(law, alpha, clip):
    def fn(g, size):
        w = simulate_paths(law, size, g)["x2"]
        s = model.sample(law, g, size)
        aw = s.a * w
        full = aw + s.b2
        dp = np.maximum(full, 0) ** alpha - np.maximum(aw, 0) ** alpha
        dm = np.maximum(-full, 0) ** alpha - np.maximum(-aw, 0) ** alpha
        d = np.stack([dp, dm], axis=1)
        if clip is not None:
            d = np.clip(d, -clip, clip)
        return rngmod.moment_sums(d)

    return fn


def goldie_constants(
    law: CoefficientLaw,
    cramer: CramerReport,
    n_samples: int = 200_000,
    rng=None,
    *,
    workers: int = 1,
    clip: float | None = None,
) -> TailConstants:
    """Monte Carlo of ``c_pm = E[((a W + b2)_pm)^alpha - ((a W)_pm)^alpha] / (alpha rho)``.

    ``W`` is a stationary draw of X2 independent of ``(a, b2)``; both differences
    use the same ``(W, a, b2)``.  ``clip`` truncates the integrand and is off by
    default.
    """
    seed = rngmod.resolve_seed(rng)
    parts = rngmod.run_chunked(
        _goldie_chunk(law, cramer.alpha, clip), n_samples, seed, (rngmod.STAGES["constants"], 0), workers
    )
    mean, se = rngmod.pooled_mean(parts)
    scale = cramer.alpha * cramer.rho
    c = mean / scale
    e = se / scale
    for name, val, err in (("c_plus", c[0], e[0]), ("c_minus", c[1], e[1])):
        if val != 0 and abs(err / val) > 0.1:
            warnings.warn(f"{name}: relative standard error {abs(err / val):.2f} exceeds 10%", RuntimeWarning, stacklevel=2)
    return TailConstants(
        float(c[0]),
        float(c[1]),
        float(e[0]),
        float(e[1]),
        "goldie_formula",
        positivity_precheck(law),
        int(n_samples),
    )


# ---------------------------------------------------------------------------
# predicted limits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionReport:
    regime: str
    alphatilde: float
    limit_right: float
    limit_left: float
    ingredients: dict
    convention: str = "paper"
    x2_right: float = 0.0
    x2_left: float = 0.0
    projection: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "regime": self.regime,
            "convention": self.convention,
            "alphatilde": self.alphatilde,
            "limit_right": self.limit_right,
            "limit_left": self.limit_left,
            "x2_right": self.x2_right,
            "x2_left": self.x2_left,
        }
        d.update({f"ingredient.{k}": v for k, v in self.ingredients.items()})
        d.update({f"projection.{k}": v for k, v in self.projection.items()})
        return d


def decide_regime(cramer: CramerReport) -> str:
    """``pure`` when y vanishes under the tilt, ``centered`` for declared zero-mean independent y
    or |s| within 3 standard errors of 0, else ``noncentered``."""
    if float(cramer.K[0, 0]) == 0.0 and cramer.s == 0.0:
        return "pure"
    if cramer.centered_exact or cramer.s == 0.0:
        return "centered"
    if cramer.s_se > 0 and abs(cramer.s) <= 3 * cramer.s_se:
        return "centered"
    return "noncentered"


def predicted_limits(
    cramer: CramerReport,
    constants: TailConstants,
    convention: str = "paper",
    v=None,
) -> PredictionReport:
    """Limits of ``P(±X1 > t) t^alpha (log t)^-alphatilde``; pure function of the inputs.

    In the ``pure`` regime (y = 0) ``constants`` must be the Kesten-Goldie
    constants of X1 itself.
    """
    if convention not in ("paper", "corrected"):
        raise ParameterError("convention must be 'paper' or 'corrected'")
    a, rho, s = cramer.alpha, cramer.rho, cramer.s
    cp, cm = constants.c_plus, constants.c_minus
    sign = 1.0 if convention == "paper" else -1.0
    regime = decide_regime(cramer)
    ingredients = {"alpha": a, "rho": rho, "s": s, "c_plus": cp, "c_minus": cm}
    if regime == "pure":
        # X0 vanishes and X1 is a one-dimensional perpetuity; constants refer to X1
        ingredients["c0"] = math.nan
        right, left = cp, cm
        atilde = 0.0
    elif regime == "centered":
        c0 = c0_of_K(cramer.K, a)
        ingredients["c0"] = c0
        lim = (cp + cm) * rho ** (sign * a / 2) * c0
        right = left = lim
        atilde = a / 2
    else:
        ingredients["c0"] = math.nan
        f = abs(s) ** a * rho ** (sign * a)
        right, left = (cp * f, cm * f) if s > 0 else (cm * f, cp * f)
        atilde = a
    proj = {}
    if v is not None:
        v1 = float(v[0])
        proj = {
            "v1": v1,
            "v2": float(v[1]),
            "factor_v1": v1,
            "factor_v1_alpha": v1**a if v1 > 0 else math.nan,
            "limit_v1": v1 * right,
            "limit_v1_alpha": (v1**a if v1 > 0 else math.nan) * right,
        }
    return PredictionReport(regime, atilde, right, left, ingredients, convention, cp, cm, proj)


# ---------------------------------------------------------------------------
# large deviations and Berry-Esseen shape
# ---------------------------------------------------------------------------


class LDApprox(NamedTuple):
    value: float
    tilt: float
    sigma2: float


def _lambda_derivs(law, beta):
    m = model.mellin(law, beta)
    m1 = model.mellin_log(law, beta)
    m2 = model.tilted_expect(law, lambda x: x * x, beta).value
    d1 = m1 / m
    return math.log(m), d1, m2 / m - d1 * d1


def ld_approx(law: CoefficientLaw, n: int, c: float, gamma_n: float = 0.0, alpha_of_c: float | None = None) -> LDApprox:
    """Saddle-point approximation of ``P(sum_{i<=n} log a_i > n (c + gamma_n))``.

    ``(beta sigma(beta) sqrt(2 pi n))^-1 exp(-n (beta (c + gamma_n) - Lambda(beta) + gamma_n^2 / (2 sigma^2(beta))))``
    with ``Lambda'(beta) = c`` and ``sigma^2 = Lambda''``.
    """
    if n < 1:
        raise ParameterError("n must be positive")
    mean = model.mellin_log(law, 0.0)
    if not c > mean:
        raise RangeError(f"c = {c:g} must exceed E log a = {mean:g}")
    if alpha_of_c is None:
        lo_dom, hi_dom = law.a.domain()
        d1 = lambda b: _lambda_derivs(law, b)[1] - c  # noqa: E731
        hi = 1.0
        while d1(hi) < 0:
            nxt = 2 * hi
            if nxt >= hi_dom:
                nxt = 0.5 * (hi + hi_dom)
            if nxt - hi < 1e-12 or nxt > 1e6:
                raise RangeError(f"c = {c:g} is beyond sup Lambda'")
            hi = nxt
        alpha_of_c = optimize.brentq(d1, 0.0, hi, xtol=1e-14)
    lam, _, s2 = _lambda_derivs(law, alpha_of_c)
    b = alpha_of_c
    expo = -n * (b * (c + gamma_n) - lam + gamma_n**2 / (2 * s2))
    val = math.exp(expo) / (b * math.sqrt(s2) * math.sqrt(2 * math.pi * n))
    return LDApprox(val, float(b), float(s2))


def berry_esseen_reference(r: float, x: float, n: int, m2: float, m3: float, mr: float) -> float:
    """``(1+|x|)^-r (m3 sigma^-3 n^-1/2 + mr sigma^-r n^-(r-2)/2)`` with the constant set to 1."""
    if r < 3:
        raise ParameterError("r must be at least 3")
    if not m2 > 0:
        raise ParameterError("m2 must be positive")
    sd = math.sqrt(m2)
    return (1 + abs(x)) ** (-r) * (m3 / sd**3 / math.sqrt(n) + mr / sd**r * n ** (-(r - 2) / 2))


def gaussian_tail_log_sum(mu: float, sigma2: float, n: int, c: float) -> float:
    """Exact ``P(sum of n N(mu, sigma2) > n c)``."""
    return float(special.ndtr(-math.sqrt(n) * (c - mu) / math.sqrt(sigma2)))


__all__ = [
    "LDApprox",
    "PredictionReport",
    "TailConstants",
    "berry_esseen_reference",
    "c0_of_K",
    "c0_truncated",
    "decide_regime",
    "gaussian_tail_log_sum",
    "goldie_constants",
    "ld_approx",
    "positivity_precheck",
    "predicted_limits",
]
