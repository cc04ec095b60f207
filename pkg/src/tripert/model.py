"""Coefficient laws for the triangular affine recursion.

One step of the recursion is ``X_n = A_n X_{n-1} + B_n`` with

    A_n = [[a_n, y_n a_n],
           [0,   a_n    ]],    B_n = (b1_n, b2_n),

so a law is the joint law of ``(a, y, b1, b2)``.  The diagonal entry ``a`` comes
from a :class:`ScaleFamily`; ``y``, ``b1`` and ``b2`` come from small scalar
families.  ``y`` may be a deterministic function of ``log a``
(:class:`AffineInLogA`); everything else is independent of ``a``.

Moment functionals are exact (closed form or deterministic quadrature) for the
built-in families.  User families that only supply a sampler fall back to a
fixed-seed Monte Carlo average and report its standard error.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, ParameterError

MC_SAMPLES = 1_000_000
MC_SEED = 20180101

_SQRT2PI = math.sqrt(2.0 * math.pi)


class Estimate(NamedTuple):
    value: float
    se: float = 0.0


def _quad(fn, lo, hi, **kw) -> float:
    val, _ = integrate.quad(fn, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-11, **kw)
    return float(val)


# ---------------------------------------------------------------------------
# families for a
# ---------------------------------------------------------------------------


class ScaleFamily(ABC):
    """Law of the diagonal entry ``a > 0``.

    Subclasses must implement :meth:`sample_log`.  Overriding :meth:`mellin`,
    :meth:`expect` and :meth:`domain` turns the Monte Carlo fallback into exact
    values; overriding :meth:`tilted` gives an exact sampler for the tilted law.
    A finite :attr:`upper` (supremum of the support) enables rejection tilting.
    """

    atomic = False
    upper = math.inf

    @abstractmethod
    def sample_log(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``log a``."""

    def sample(self, rng, size):
        return np.exp(self.sample_log(rng, size))

    def domain(self) -> tuple[float, float]:
        """Open interval of ``beta`` on which ``E a^beta`` is finite."""
        return (-math.inf, math.inf)

    @property
    def degenerate(self) -> bool:
        return False

    @property
    def analytic(self) -> bool:
        return type(self).expect is not ScaleFamily.expect

    @cached_property
    def _mc_logs(self) -> np.ndarray:
        return np.asarray(self.sample_log(np.random.default_rng(MC_SEED), MC_SAMPLES), float)

    def expect(self, fn: Callable[[np.ndarray], np.ndarray], beta: float) -> Estimate:
        """``E[fn(log a) a^beta]``."""
        x = self._mc_logs
        vals = np.asarray(fn(x), float) * np.exp(beta * x)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)))

    def mellin(self, beta: float) -> Estimate:
        return self.expect(np.ones_like, beta)

    def mellin_log(self, beta: float) -> Estimate:
        return self.expect(lambda x: x, beta)

    def tilted(self, alpha: float) -> "ScaleFamily":
        """Law of ``a`` under ``P(da) a^alpha / E a^alpha``."""
        raise NotImplementedError


@dataclass(frozen=True)
class LogNormal(ScaleFamily):
    """``log a ~ N(mu, sigma2)``."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ParameterError("LogNormal needs sigma2 > 0")

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    def sample_log(self, rng, size):
        return self.mu + self.sigma * rng.standard_normal(size)

    def mellin(self, beta):
        return Estimate(math.exp(self.mu * beta + 0.5 * self.sigma2 * beta * beta))

    def mellin_log(self, beta):
        m = self.mellin(beta).value
        return Estimate((self.mu + beta * self.sigma2) * m)

    def expect(self, fn, beta):
        # a^beta reweights N(mu, s2) into N(mu + beta s2, s2) times the Mellin value
        loc = self.mu + beta * self.sigma2
        s = self.sigma

        def integrand(z):
            return float(fn(np.asarray(loc + s * z))) * math.exp(-0.5 * z * z) / _SQRT2PI

        return Estimate(self.mellin(beta).value * _quad(integrand, -14.0, 14.0, points=[0.0]))

    def tilted(self, alpha):
        return LogNormal(self.mu + alpha * self.sigma2, self.sigma2)


@dataclass(frozen=True)
class PowerLaw(ScaleFamily):
    """Scaled beta law: density ``(p+1) a^p / hi^(p+1)`` on ``(0, hi)``.

    ``power=0`` is ``a = hi * U`` with ``U`` uniform.  The family is closed under
    tilting (``power -> power + alpha``).
    """

    hi: float
    power: float = 0.0

    def __post_init__(self):
        if not self.hi > 0:
            raise ParameterError("PowerLaw needs hi > 0")
        if not self.power > -1:
            raise ParameterError("PowerLaw needs power > -1")

    @property
    def upper(self):
        return self.hi

    def domain(self):
        return (-(self.power + 1.0), math.inf)

    def sample_log(self, rng, size):
        u = rng.random(size)
        return math.log(self.hi) + np.log1p(-u) / (self.power + 1.0)

    def mellin(self, beta):
        k = self.power + 1.0
        return Estimate(self.hi**beta * k / (k + beta))

    def mellin_log(self, beta):
        k = self.power + 1.0
        return Estimate(self.mellin(beta).value * (math.log(self.hi) - 1.0 / (k + beta)))

    def expect(self, fn, beta):
        k = self.power + 1.0
        lh = math.log(self.hi)
        rate = k + beta

        def integrand(u):
            return float(fn(np.asarray(lh - u))) * math.exp(-rate * u)

        return Estimate(k * self.hi**beta * _quad(integrand, 0.0, math.inf))

    def tilted(self, alpha):
        return PowerLaw(self.hi, self.power + alpha)


@dataclass(frozen=True)
class Discrete(ScaleFamily):
    """Finitely supported law of ``a``; a single atom is the degenerate law."""

    values: tuple[float, ...]
    probs: tuple[float, ...] = (1.0,)

    atomic = True

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        probs = tuple(float(p) for p in np.atleast_1d(self.probs))
        if len(vals) != len(probs) or not vals:
            raise ParameterError("values and probs must have the same nonzero length")
        if min(vals) <= 0:
            raise ParameterError("a must be positive")
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ParameterError("probs must be a probability vector")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)

    @property
    def upper(self):
        return max(self.values)

    @property
    def degenerate(self):
        return len(self.values) == 1

    def sample_log(self, rng, size):
        logs = np.log(self.values)
        if self.degenerate:
            return np.full(size, logs[0])
        return rng.choice(logs, size=size, p=self.probs)

    def expect(self, fn, beta):
        x = np.log(np.asarray(self.values))
        return Estimate(float(np.sum(np.asarray(self.probs) * np.asarray(fn(x), float) * np.exp(beta * x))))

    def tilted(self, alpha):
        w = np.asarray(self.probs) * np.asarray(self.values) ** alpha
        return Discrete(self.values, tuple(w / w.sum()))


def degenerate(c: float) -> Discrete:
    return Discrete((c,), (1.0,))


@dataclass(frozen=True)
class GarchSquare(ScaleFamily):
    """``a = lam * Z**2 + beta`` with ``Z`` of density proportional to ``a(z)^power * phi(z)``.

    ``power=0`` is the GARCH(1,1) coefficient with standard Gaussian innovations;
    the ``power`` parameter makes the family closed under tilting.
    """

    lam: float
    beta: float
    power: float = 0.0

    def __post_init__(self):
        if not self.lam > 0 or self.beta < 0:
            raise ParameterError("GarchSquare needs lam > 0 and beta >= 0")
        if self.beta == 0 and self.power <= -0.5:
            raise ParameterError("power must exceed -1/2 when beta = 0")

    def domain(self):
        if self.beta > 0:
            return (-math.inf, math.inf)
        return (-0.5 - self.power, math.inf)

    def _g(self, z):
        return self.lam * z * z + self.beta

    def _raw(self, p: float) -> float:
        """``E g(Z)^p`` for standard Gaussian ``Z``."""
        return 2.0 * _quad(lambda z: self._g(z) ** p * math.exp(-0.5 * z * z) / _SQRT2PI, 0.0, math.inf)

    @cached_property
    def _norm(self) -> float:
        return self._raw(self.power) if self.power != 0 else 1.0

    def mellin(self, beta):
        return Estimate(self._raw(self.power + beta) / self._norm)

    def expect(self, fn, beta):
        p = self.power + beta

        def integrand(z):
            g = self._g(z)
            return float(fn(np.asarray(math.log(g)))) * g**p * math.exp(-0.5 * z * z) / _SQRT2PI

        return Estimate(2.0 * _quad(integrand, 0.0, math.inf) / self._norm)

    @cached_property
    def _envelope(self) -> tuple[float, float]:
        """Proposal scale and bound for rejection from N(0, s^2) when power > 0."""
        p, lam, b = self.power, self.lam, self.beta
        best = None
        for s2 in (1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0):
            c = 1.0 - 1.0 / s2
            u = max(2.0 * p / c - b / lam, 0.0)
            logm = 0.5 * math.log(s2) + p * math.log(lam * u + b) - 0.5 * c * u
            if best is None or logm < best[1]:
                best = (s2, logm)
        return best

    def sample_log(self, rng, size):
        if self.power == 0:
            return np.log(self._g(rng.standard_normal(size)))
        out = np.empty(size)
        filled = 0
        if self.power > 0:
            s2, logm = self._envelope
            c = 1.0 - 1.0 / s2
            s = math.sqrt(s2)
        while filled < size:
            need = size - filled
            if self.power > 0:
                z = s * rng.standard_normal(2 * need + 16)
                logr = 0.5 * math.log(s2) + self.power * np.log(self._g(z)) - 0.5 * c * z * z - logm
            else:
                z = rng.standard_normal(2 * need + 16)
                logr = self.power * (np.log(self._g(z)) - math.log(self.beta))
            keep = z[np.log(rng.random(z.size)) < logr][:need]
            out[filled : filled + keep.size] = np.log(self._g(keep))
            filled += keep.size
        return out

    def tilted(self, alpha):
        return GarchSquare(self.lam, self.beta, self.power + alpha)


# ---------------------------------------------------------------------------
# scalar families for y, b1, b2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    c: float = 0.0

    @property
    def continuous(self):
        return False

    @property
    def is_constant(self):
        return True

    @property
    def symmetric(self):
        return self.c == 0

    @property
    def mean(self):
        return float(self.c)

    @property
    def second_moment(self):
        return float(self.c) ** 2

    def sample(self, rng, size):
        return np.full(size, float(self.c))

    def abs_moment(self, p: float) -> float:
        return abs(self.c) ** p if self.c != 0 else (1.0 if p == 0 else 0.0)

    def support(self):
        return (self.c, self.c)


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if self.var < 0:
            raise ParameterError("Gaussian variance must be nonnegative")

    @property
    def continuous(self):
        return self.var > 0

    @property
    def is_constant(self):
        return self.var == 0

    @property
    def symmetric(self):
        return self.mean == 0

    @property
    def second_moment(self):
        return self.var + self.mean**2

    def sample(self, rng, size):
        return self.mean + math.sqrt(self.var) * rng.standard_normal(size)

    def abs_moment(self, p: float) -> float:
        sd = math.sqrt(self.var)
        if sd == 0:
            return Constant(self.mean).abs_moment(p)
        if self.mean == 0:
            return sd**p * 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
        return _quad(
            lambda z: abs(self.mean + sd * z) ** p * math.exp(-0.5 * z * z) / _SQRT2PI,
            -40.0,
            40.0,
            points=[-self.mean / sd],
        )

    def support(self):
        if self.var == 0:
            return (self.mean, self.mean)
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError("Exponential rate must be positive")

    continuous = True
    is_constant = False
    symmetric = False

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def second_moment(self):
        return 2.0 / self.rate**2

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def abs_moment(self, p: float) -> float:
        return math.gamma(p + 1.0) / self.rate**p

    def support(self):
        return (0.0, math.inf)


@dataclass(frozen=True)
class AffineInLogA:
    """``y = lam * (log a - offset)``; dependent on ``a`` by construction."""

    lam: float
    offset: float

    continuous = True
    is_constant = False

    def from_log_a(self, log_a):
        return self.lam * (log_a - self.offset)


YFamily = Union[Constant, Gaussian, AffineInLogA]
BFamily = Union[Constant, Gaussian, Exponential]


# ---------------------------------------------------------------------------
# the joint law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoefficientLaw:
    a: ScaleFamily
    y: YFamily = Constant(0.0)
    b1: BFamily = Constant(0.0)
    b2: BFamily = Constant(1.0)
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.a, ScaleFamily):
            raise ParameterError("a must be a ScaleFamily")
        if not isinstance(self.y, (Constant, Gaussian, AffineInLogA)):
            raise ParameterError("y must be Constant, Gaussian or AffineInLogA")
        for b in (self.b1, self.b2):
            if not isinstance(b, (Constant, Gaussian, Exponential)):
                raise ParameterError("b1, b2 must be Constant, Gaussian or Exponential")

    @property
    def dependence(self) -> dict[str, bool]:
        """Which of y, b1, b2 are independent of a."""
        return {"y": not isinstance(self.y, AffineInLogA), "b1": True, "b2": True}

    def replace(self, **changes) -> "CoefficientLaw":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class CoefficientSample:
    """One draw of ``(a, y, b1, b2)``, or a batch when the fields are arrays."""

    a: np.ndarray | float
    y: np.ndarray | float
    b1: np.ndarray | float
    b2: np.ndarray | float


def complete(law: CoefficientLaw, log_a: np.ndarray, rng: np.random.Generator):
    """Draw ``(y, b1, b2)`` to go with the given ``log a`` values."""
    n = log_a.shape[0]
    if isinstance(law.y, AffineInLogA):
        y = law.y.from_log_a(log_a)
    else:
        y = law.y.sample(rng, n)
    return y, law.b1.sample(rng, n), law.b2.sample(rng, n)


def sample(law: CoefficientLaw, rng: np.random.Generator, size: int | None = None) -> CoefficientSample:
    """Independent draw(s) from ``law``; a fixed-seed generator reproduces the stream."""
    n = 1 if size is None else int(size)
    log_a = np.asarray(law.a.sample_log(rng, n), float)
    y, b1, b2 = complete(law, log_a, rng)
    a = np.exp(log_a)
    if size is None:
        return CoefficientSample(float(a[0]), float(y[0]), float(b1[0]), float(b2[0]))
    return CoefficientSample(a, y, b1, b2)


def _check_domain(law: CoefficientLaw, beta: float) -> None:
    lo, hi = law.a.domain()
    if not lo < beta < hi:
        raise DomainError(f"E a^{beta:g} is infinite for {law.a!r} (domain ({lo:g}, {hi:g}))")


def tilted_expect(law: CoefficientLaw, fn, beta: float) -> Estimate:
    """``E[fn(log a) a^beta]``."""
    _check_domain(law, beta)
    return law.a.expect(fn, beta)


def mellin_estimate(law: CoefficientLaw, beta: float) -> Estimate:
    if beta == 0:
        return Estimate(1.0)
    _check_domain(law, beta)
    return law.a.mellin(beta)


def mellin(law: CoefficientLaw, beta: float) -> float:
    """``E a^beta``."""
    return mellin_estimate(law, beta).value


def mellin_log(law: CoefficientLaw, beta: float) -> float:
    """``E a^beta log a``."""
    _check_domain(law, beta)
    return law.a.mellin_log(beta).value


def y_abs_moment(law: CoefficientLaw, p: float) -> float:
    """``E|y|^p`` (unweighted)."""
    if isinstance(law.y, AffineInLogA):
        off, lam = law.y.offset, law.y.lam
        return abs(lam) ** p * tilted_expect(law, lambda x: np.abs(x - off) ** p, 0.0).value
    return law.y.abs_moment(p)


class CrossMoments(NamedTuple):
    s: float
    abs_r: float
    s_se: float = 0.0
    abs_r_se: float = 0.0


def cross_moments(law: CoefficientLaw, alpha: float, r: float) -> CrossMoments:
    """``s = E y a^alpha`` and ``E |y|^r a^alpha``."""
    m = mellin_estimate(law, alpha)
    y = law.y
    if isinstance(y, AffineInLogA):
        s = tilted_expect(law, lambda x: y.lam * (x - y.offset), alpha)
        ar = tilted_expect(law, lambda x: np.abs(y.lam * (x - y.offset)) ** r, alpha)
        return CrossMoments(s.value, ar.value, s.se, ar.se)
    ey = y.mean
    eyr = y.abs_moment(r)
    if not math.isfinite(eyr):
        raise DomainError(f"E|y|^{r:g} is infinite")
    return CrossMoments(ey * m.value, eyr * m.value, abs(ey) * m.se, eyr * m.se)


def garch_preset(omega1: float, omega2: float, lam: float, beta_coef: float, coupling: float) -> CoefficientLaw:
    """Squared-volatility recursion of a bivariate GARCH(1,1) with equal diagonal dynamics.

    ``a = lam * Z**2 + beta_coef`` with standard Gaussian ``Z``, ``y = coupling``
    and ``b = (omega1, omega2)``.  With ``lam = 0`` the diagonal is deterministic.
    """
    if lam < 0 or beta_coef < 0 or coupling < 0:
        raise ParameterError("lam, beta_coef and coupling must be nonnegative")
    if not (omega1 > 0 and omega2 > 0):
        raise ParameterError("omega1 and omega2 must be positive")
    if lam == 0:
        if beta_coef <= 0:
            raise ParameterError("lam = 0 needs beta_coef > 0")
        a = degenerate(beta_coef)
    else:
        a = GarchSquare(lam, beta_coef)
    return CoefficientLaw(a=a, y=Constant(coupling), b1=Constant(omega1), b2=Constant(omega2), name="garch")


def reference_model(name: str) -> CoefficientLaw:
    """Reference models used across tests, demos and the acceptance suite.

    ``cm1``: lognormal a (mu=-0.5, sigma2=0.5), y ~ N(0, 1), b1 = b2 = 1.
    ``cm2``: cm1 with y = 1.
    ``cm1-sym``: cm1 with b1, b2 ~ N(0, 1), which makes X1 symmetric in law.
    """
    a = LogNormal(-0.5, 0.5)
    models = {
        "cm1": CoefficientLaw(a, Gaussian(0.0, 1.0), Constant(1.0), Constant(1.0), name="cm1"),
        "cm2": CoefficientLaw(a, Constant(1.0), Constant(1.0), Constant(1.0), name="cm2"),
        "cm1-sym": CoefficientLaw(a, Gaussian(0.0, 1.0), Gaussian(0.0, 1.0), Gaussian(0.0, 1.0), name="cm1-sym"),
    }
    try:
        return models[name]
    except KeyError:
        raise ParameterError(f"unknown reference model {name!r}") from None


__all__ = [
    "AffineInLogA",
    "CoefficientLaw",
    "CoefficientSample",
    "Constant",
    "CrossMoments",
    "Discrete",
    "Estimate",
    "Exponential",
    "GarchSquare",
    "Gaussian",
    "LogNormal",
    "PowerLaw",
    "ScaleFamily",
    "complete",
    "cross_moments",
    "degenerate",
    "garch_preset",
    "mellin",
    "mellin_estimate",
    "mellin_log",
    "reference_model",
    "sample",
    "special",
    "tilted_expect",
    "y_abs_moment",
]
