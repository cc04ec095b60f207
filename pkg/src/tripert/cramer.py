"""Cramér root, spectral quantities and the tilted measure.

At the root ``alpha`` of ``E a^alpha = 1`` the law ``P(da) a^alpha`` is a
probability law.  Under it the trajectory ``(a_k, y_k, b_k)`` stays i.i.d., so
the tilted measure of the whole sequence is sampled step by step.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import model
from .errors import (
    AssumptionError,
    DomainError,
    DriftError,
    NoRootError,
    ParameterError,
    UnboundedEnvelopeError,
)
from .model import AffineInLogA, CoefficientLaw, CoefficientSample

DEFAULT_TOL = 1e-12
MAX_DOUBLINGS = 64


def _log_mellin(law, beta):
    m = model.mellin(law, beta)
    return math.log(m) if m > 0 else -math.inf


def solve_alpha(law: CoefficientLaw, tol: float = DEFAULT_TOL) -> float:
    """Positive root of ``Lambda(beta) = log E a^beta``."""
    drift = model.mellin_log(law, 0.0)
    if drift >= 0:
        raise DriftError(f"E log a = {drift:.6g} >= 0; no stationary solution")
    hi_dom = law.a.domain()[1]
    f = lambda b: _log_mellin(law, b)  # noqa: E731
    lo, hi = 0.0, min(1.0, 0.5 * hi_dom)
    for _ in range(MAX_DOUBLINGS):
        if f(hi) > 0:
            break
        lo = hi
        nxt = 2.0 * hi
        if nxt >= hi_dom:
            nxt = 0.5 * (hi + hi_dom)
        if nxt == hi:
            raise NoRootError("Lambda(beta) < 0 on the whole finiteness domain")
        hi = nxt
    else:
        raise NoRootError("Lambda(beta) stays negative after 64 doublings")
    if lo == 0.0:
        # Lambda'(0) < 0, so Lambda is negative just right of 0
        lo = hi
        while f(lo) >= 0:
            lo *= 0.5
    root = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) > max(tol, 1e-15):
        root = optimize.newton(f, root, tol=1e-15, maxiter=50)
        if abs(f(root)) > tol:
            raise NoRootError(f"root residual {abs(f(root)):.3g} above tolerance {tol:g}")
    return float(root)


# ---------------------------------------------------------------------------
# spectral report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Flag:
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class CramerReport:
    alpha: float
    rho: float
    s: float
    epsilon0: float
    r: float
    K: np.ndarray
    detK: float
    flags: dict = field(default_factory=dict)
    s_se: float = 0.0
    centered_exact: bool = False

    def as_dict(self) -> dict:
        d = {
            "alpha": self.alpha,
            "rho": self.rho,
            "s": self.s,
            "s_se": self.s_se,
            "epsilon0": self.epsilon0,
            "r": self.r,
            "K11": float(self.K[0, 0]),
            "K12": float(self.K[0, 1]),
            "K22": float(self.K[1, 1]),
            "detK": self.detK,
            "centered_exact": self.centered_exact,
        }
        for name, flag in self.flags.items():
            d[f"flag.{name}"] = "pass" if flag.ok else "fail"
            d[f"flag.{name}.detail"] = flag.detail
        return d


def _epsilon0(law: CoefficientLaw, alpha: float) -> float:
    lo, hi = law.a.domain()
    eps = 0.5
    for _ in range(60):
        p = alpha + eps
        if p < hi:
            try:
                moments = [model.mellin(law, p), law.b2.abs_moment(p)]
                if isinstance(law.y, AffineInLogA):
                    moments.append(model.cross_moments(law, p, p).abs_r)
                else:
                    moments.append(law.y.abs_moment(p) * moments[0])
            except DomainError:
                moments = [math.inf]
            if all(math.isfinite(m) for m in moments):
                return eps
        eps *= 0.5
    raise AssumptionError("ass5", f"no eps0 > 0 with E a^(alpha+eps0) finite; domain upper end {hi:g}")


def _tilted_y_moments(law: CoefficientLaw, alpha: float, rho: float):
    """Tilted mean of y and the tilted covariance entries of (y, log a - rho)."""
    ey = model.cross_moments(law, alpha, 1.0)
    k22 = model.tilted_expect(law, lambda x: (x - rho) ** 2, alpha).value
    y = law.y
    if isinstance(y, AffineInLogA):
        lam, off = y.lam, y.offset
        k11 = model.tilted_expect(law, lambda x: (lam * (x - off)) ** 2, alpha).value
        k12 = model.tilted_expect(law, lambda x: lam * (x - off) * (x - rho), alpha).value
    else:
        k11 = y.second_moment * model.mellin(law, alpha)
        # independence: E_a y (log a - rho) = E y * E_a (log a - rho) = 0 at the exact rho
        k12 = y.mean * model.tilted_expect(law, lambda x: x - rho, alpha).value
    # covariance under the tilt; E_a y = s at the root and E_a (log a - rho) = 0
    return ey, k11 - ey.s**2, k12, k22


def check_fixed_point(law: CoefficientLaw, n_samples: int = 10_000, rng: np.random.Generator | None = None) -> bool:
    """True iff no constant ``x`` solves ``a x + b2 = x`` almost surely."""
    b2 = law.b2
    if not b2.is_constant:
        return True
    c = b2.mean if not isinstance(b2, model.Constant) else float(b2.c)
    fam = law.a
    if isinstance(fam, model.Discrete):
        vals = np.asarray(fam.values)
        if np.any(vals == 1.0):
            # a = 1 forces c = 0, and then x = 0 is fixed for every atom
            return c != 0.0
        ratios = c / (1.0 - vals)
        return bool(np.ptp(ratios) > 1e-12 * max(1.0, float(np.max(np.abs(ratios)))))
    if c == 0.0:
        return False  # x = 0 is fixed
    if fam.analytic:
        return True  # continuous built-in law: c/(1-a) is not a.s. constant
    rng = rng or np.random.default_rng(model.MC_SEED)
    a = fam.sample(rng, n_samples)
    if np.any(a == 1.0):
        return True
    ratios = c / (1.0 - a)
    return bool(np.ptp(ratios) > 1e-12 * max(1.0, float(np.max(np.abs(ratios)))))


def _declared_centered(law: CoefficientLaw) -> bool:
    y = law.y
    return not isinstance(y, AffineInLogA) and y.mean == 0.0


def spectral_report(law: CoefficientLaw, alpha: float | None = None, r: float | None = None, strict: bool = True) -> CramerReport:
    """Assemble alpha, rho, s, K and the assumption flags.

    ``r`` is the moment order for ``E|y|^r a^alpha``; by default the smallest
    integer the regime asks for.

    With ``strict`` the first failing hard assumption raises
    :class:`AssumptionError`; the lattice check only warns.
    """
    if alpha is None:
        alpha = solve_alpha(law)
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    flags: dict[str, Flag] = {}

    resid = abs(_log_mellin(law, alpha))
    root_ok = resid <= 1e-8
    flags["root"] = Flag(root_ok, f"|log E a^alpha| = {resid:.3g}")

    nonlattice = not law.a.atomic
    flags["ass1"] = Flag(nonlattice, "continuous family" if nonlattice else "purely atomic law of a is lattice-type")

    rho = model.mellin_log(law, alpha)
    flags["ass2"] = Flag(root_ok and 0 < rho < math.inf, f"rho = {rho:.6g}")

    bmom = law.b1.abs_moment(alpha) + law.b2.abs_moment(alpha)
    flags["ass3"] = Flag(math.isfinite(bmom), f"E|b1|^a + E|b2|^a = {bmom:.6g}")

    nofix = check_fixed_point(law)
    flags["ass4"] = Flag(nofix, "no fixed point" if nofix else "a x + b2 = x has a deterministic solution")

    try:
        eps0 = _epsilon0(law, alpha)
        flags["ass5"] = Flag(True, f"eps0 = {eps0:g}")
    except AssumptionError as exc:
        eps0 = math.nan
        flags["ass5"] = Flag(False, exc.detail)

    ey, k11, k12, k22 = _tilted_y_moments(law, alpha, rho)
    flags["tilted_y2"] = Flag(math.isfinite(k11), f"E_alpha y^2 = {k11:.6g}")

    s = ey.s
    need = 2 * alpha + 1 if _declared_centered(law) else alpha
    if r is None:
        r = max(3.0, math.floor(need) + 1.0)
    try:
        yr = model.cross_moments(law, alpha, r).abs_r
    except DomainError:
        yr = math.inf
    flags["r_moment"] = Flag(
        math.isfinite(yr) and r >= 3 and r > need,
        f"E|y|^r a^alpha = {yr:.6g} at r = {r:g} (needs r >= 3, r > {need:g})",
    )

    K = np.array([[k11, k12], [k12, k22]])
    K[np.abs(K) < 1e-13 * max(1.0, abs(k22))] = 0.0  # rounding from m(alpha) = 1 - eps
    detK = float(k11 * k22 - k12 * k12)
    if abs(detK) <= 1e-12 * max(1.0, k11 * k22):
        detK = 0.0

    report = CramerReport(
        alpha=float(alpha),
        rho=float(rho),
        s=float(s),
        epsilon0=float(eps0),
        r=float(r),
        K=K,
        detK=detK,
        flags=flags,
        s_se=float(ey.s_se),
        centered_exact=_declared_centered(law),
    )
    if not nonlattice:
        warnings.warn(flags["ass1"].detail, RuntimeWarning, stacklevel=2)
    if strict:
        for name in ("root", "ass2", "ass3", "ass4", "ass5", "tilted_y2"):
            if not flags[name].ok:
                raise AssumptionError(name, flags[name].detail)
    return report


# ---------------------------------------------------------------------------
# tilted measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TiltedLaw:
    base: CoefficientLaw
    alpha: float
    mode: str
    envelope_bound: float = math.nan
    a_tilted: model.ScaleFamily | None = None

    def sample_log_a(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.mode == "analytic":
            return np.asarray(self.a_tilted.sample_log(rng, size), float)
        out = np.empty(size)
        filled = 0
        log_u = math.log(self.envelope_bound)
        a_fam = self.base.a
        while filled < size:
            need = size - filled
            x = np.asarray(a_fam.sample_log(rng, 2 * need + 16), float)
            keep = x[np.log(rng.random(x.size)) < self.alpha * x - log_u][:need]
            out[filled : filled + keep.size] = keep
            filled += keep.size
        return out

    def sample(self, rng: np.random.Generator, size: int | None = None) -> CoefficientSample:
        n = 1 if size is None else int(size)
        log_a = self.sample_log_a(rng, n)
        y, b1, b2 = model.complete(self.base, log_a, rng)
        a = np.exp(log_a)
        if size is None:
            return CoefficientSample(float(a[0]), float(y[0]), float(b1[0]), float(b2[0]))
        return CoefficientSample(a, y, b1, b2)


def tilt(law: CoefficientLaw, alpha: float, mode: str | None = None) -> TiltedLaw:
    """Tilted law ``P(da) a^alpha``; analytic whenever the family is closed under tilting."""
    if mode in (None, "analytic"):
        try:
            return TiltedLaw(law, float(alpha), "analytic", math.nan, law.a.tilted(alpha))
        except NotImplementedError:
            if mode == "analytic":
                raise
    if mode not in (None, "rejection"):
        raise ParameterError(f"unknown tilt mode {mode!r}")
    upper = law.a.upper
    if not math.isfinite(upper):
        raise UnboundedEnvelopeError("a^alpha is unbounded on the support; supply an analytic tilt")
    return TiltedLaw(law, float(alpha), "rejection", upper**alpha, None)


__all__ = [
    "CramerReport",
    "Flag",
    "TiltedLaw",
    "check_fixed_point",
    "solve_alpha",
    "spectral_report",
    "tilt",
]
