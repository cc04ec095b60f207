"""Tail-probability estimation, exponent fits and the block diagnostics.

The importance sampler (``scheme="passage"``) draws ``a_k`` from the tilted law
until a nondecreasing majorant of ``|target|`` first passes ``t`` and weights
the replica by ``Pi_{sigma-1}^-alpha``.  It is unbiased for every ``t`` and its
weights stay bounded, unlike tilting a fixed number of steps (``"first_n"``),
whose weights have relative variance growing like a power of ``t``.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .asymptotics import PredictionReport, c0_of_K
from .cramer import CramerReport, tilt
from .errors import EmptyGrid, ParameterError, SingularDesign
from .model import CoefficientLaw
from .perpetuity import (
    TARGETS,
    block_window,
    choose_D,
    guard_is_trivial,
    simulate_paths,
    target_values,
)

SCHEMA = "# tripert-schema=1"
NOT_APPLICABLE = "NotApplicable"
ESS_FLOOR = 100
SIDES = ("right", "left", "abs")
_BLOCK_TARGETS = {"nt", "mt", "ninf", "mprime", "mpp", "rt", "rprime", "rpp"}


def default_t_grid(points: int = 12, tmin: float = 1e3, tmax: float = 1e10) -> np.ndarray:
    return np.logspace(math.log10(tmin), math.log10(tmax), points)


# ---------------------------------------------------------------------------
# tail curves
# ---------------------------------------------------------------------------


@dataclass
class TailCurve:
    t_grid: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray
    estimator: str
    target: str
    side: str = "right"
    ess: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, float)
        self.p_hat = np.asarray(self.p_hat, float)
        self.se = np.asarray(self.se, float)
        if self.ess is None:
            self.ess = np.full(self.t_grid.shape, np.nan)
        self.ess = np.asarray(self.ess, float)

    def scaled(self, alpha: float, alphatilde: float = 0.0) -> np.ndarray:
        """``p t^alpha (log t)^-alphatilde``."""
        t = self.t_grid
        return self.p_hat * t**alpha * np.log(t) ** (-alphatilde)

    def to_csv(self, path, timestamp: bool = False) -> None:
        lines = [SCHEMA]
        if timestamp:
            import datetime

            lines.append(f"# generated={datetime.datetime.now().isoformat(timespec='seconds')}")
        lines.append(f"# estimator={self.estimator}")
        lines.append(f"# target={self.target}")
        lines.append(f"# side={self.side}")
        for k in sorted(self.meta):
            lines.append(f"# {k}={self.meta[k]}")
        lines.append("t,p_hat,se,ess")
        for row in zip(self.t_grid, self.p_hat, self.se, self.ess):
            lines.append(",".join(repr(float(x)) for x in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TailCurve":
        head, rows = {}, []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "=" in line:
                        k, v = line[1:].strip().split("=", 1)
                        head[k.strip()] = v.strip()
                    continue
                if line.startswith("t,"):
                    continue
                rows.append([float(x) for x in line.split(",")])
        if head.get("tripert-schema") != "1":
            raise ParameterError(f"{path}: missing or unsupported schema header")
        arr = np.array(rows, float).reshape(-1, 4)
        meta = {k: v for k, v in head.items() if k not in ("tripert-schema", "estimator", "target", "side", "generated")}
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], head.get("estimator", "naive"), head.get("target", "x1"),
                   head.get("side", "right"), arr[:, 3], meta)


def naive_tail(samples, t_grid, side: str = "right") -> TailCurve:
    """Empirical exceedance fractions with binomial standard errors.

    Where no sample exceeds ``t`` the reported ``se`` is the rule-of-three bound ``3/n``.
    """
    x = np.asarray(samples, float).ravel()
    t = np.asarray(t_grid, float).ravel()
    if x.size == 0 or t.size == 0:
        raise EmptyGrid("samples and t_grid must be nonempty")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("t_grid must be strictly ascending")
    x = _side(x, side)
    n = x.size
    xs = np.sort(x)
    p = (n - np.searchsorted(xs, t, side="right")) / n
    se = np.sqrt(p * (1 - p) / n)
    se = np.where(p == 0, 3.0 / n, se)
    return TailCurve(t, p, se, "naive", "samples", side, p * n)


def _side(x, side):
    if side == "right":
        return x
    if side == "left":
        return -x
    if side == "abs":
        return np.abs(x)
    raise ParameterError(f"side must be one of {SIDES}")


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    se: float
    ess: float
    n_reps: int

    def __iter__(self):
        yield self.p_hat
        yield self.se


def _t_key(t: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(t)))[0] & ((1 << 63) - 1)


def _target_id(target: str) -> int:
    return TARGETS.index(target)


def is_tail(
    law: CoefficientLaw,
    cramer: CramerReport,
    t: float,
    D: float | None,
    n_reps: int,
    target: str,
    rng=None,
    *,
    side: str = "right",
    scheme: str = "passage",
    v=(1.0, 0.0),
    workers: int = 1,
    stream: int = 0,
) -> TailEstimate:
    """Importance-sampled ``P(target > t)`` (``side`` selects ``>t``, ``<-t`` or ``|.|>t``).

    ``D`` fixes the block window and is only needed for block targets or the
    ``first_n`` scheme; ``None`` uses ``choose_D(cramer, alpha)``.
    """
    if target not in TARGETS or target == "all":
        raise ParameterError(f"unknown target {target!r}")
    if side not in SIDES:
        raise ParameterError(f"side must be one of {SIDES}")
    if scheme not in ("passage", "first_n", "none"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    if target == "projection" and not float(v[0]) > 0:
        raise ParameterError("projection needs v1 > 0")
    if guard_is_trivial(law, target, v):
        return TailEstimate(0.0, 0.0, 0.0, int(n_reps))
    need_window = target in _BLOCK_TARGETS or scheme == "first_n"
    window = None
    if need_window:
        window = block_window(cramer.rho, t, D if D is not None else choose_D(cramer, cramer.alpha))
    tl = tilt(law, cramer.alpha) if scheme != "none" else None
    seed = rngmod.resolve_seed(rng)
    key = (rngmod.STAGES["tail"], _target_id(target), SIDES.index(side), scheme_id(scheme), stream, _t_key(t))

    def chunk(g, size):
        paths = simulate_paths(
            law, size, g, window=window, scheme=scheme, tilted=tl, target=target, t=t, v=v,
            trunc_tol=1e-10 * max(1.0, t),
        )
        vals = _side(target_values(paths, target, window, v), side)
        return rngmod.moment_sums(paths["weight"] * (vals > t))

    parts = rngmod.run_chunked(chunk, n_reps, seed, key, workers)
    mean, se = rngmod.pooled_mean(parts)
    s = math.fsum(float(p[1]) for p in parts)
    ss = math.fsum(float(p[2]) for p in parts)
    ess = s * s / ss if ss > 0 else 0.0
    if ess < ESS_FLOOR:
        warnings.warn(f"effective sample size {ess:.0f} below {ESS_FLOOR} at t={t:g} ({target})", RuntimeWarning, stacklevel=2)
    return TailEstimate(float(mean), float(se), float(ess), int(n_reps))


def scheme_id(scheme: str) -> int:
    return ("passage", "first_n", "none").index(scheme)


def tail_curve(
    law: CoefficientLaw,
    cramer: CramerReport,
    t_grid,
    target: str,
    n_reps: int,
    rng=None,
    *,
    side: str = "right",
    D: float | None = None,
    scheme: str = "passage",
    v=(1.0, 0.0),
    workers: int = 1,
    stream: int = 0,
) -> TailCurve:
    t = np.asarray(t_grid, float)
    if t.size == 0:
        raise EmptyGrid("empty t grid")
    seed = rngmod.resolve_seed(rng)
    est = [
        is_tail(law, cramer, ti, D, n_reps, target, seed, side=side, scheme=scheme, v=v, workers=workers, stream=stream)
        for ti in t
    ]
    meta = {"n_reps": n_reps, "scheme": scheme, "seed": seed}
    if D is not None:
        meta["D"] = D
    return TailCurve(t, [e.p_hat for e in est], [e.se for e in est], "tilted_is", target, side,
                     [e.ess for e in est], meta)


# ---------------------------------------------------------------------------
# exponent fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitReport:
    alpha_fixed: float | None
    alpha_hat: float
    alphatilde_hat: float
    logC_hat: float
    covariance: np.ndarray
    residual_rms: float
    n_points: int = 0
    alphatilde_fixed: bool = False

    @property
    def C_hat(self) -> float:
        return math.exp(self.logC_hat)

    @property
    def se_alphatilde(self) -> float:
        if self.alphatilde_fixed:
            return 0.0
        i = 1 if self.alpha_fixed is not None else 2
        return math.sqrt(max(self.covariance[i, i], 0.0))

    @property
    def se_logC(self) -> float:
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    def as_dict(self) -> dict:
        return {
            "alpha_fixed": "" if self.alpha_fixed is None else self.alpha_fixed,
            "alpha_hat": self.alpha_hat,
            "alphatilde_hat": self.alphatilde_hat,
            "se_alphatilde": self.se_alphatilde,
            "logC_hat": self.logC_hat,
            "se_logC": self.se_logC,
            "C_hat": self.C_hat,
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
        }


def fit_exponents(curve: TailCurve, alpha_fixed: float | None = None, alphatilde_fixed: float | None = None) -> FitReport:
    """Weighted least squares for ``log p = log C - alpha log t + alphatilde log log t``.

    Weights are ``(p/se)^2`` (delta method); a curve with no standard errors is
    fit unweighted.  With ``alpha_fixed`` only ``(alphatilde, log C)`` are fit;
    fixing both exponents leaves the level ``log C`` alone.
    """
    if alphatilde_fixed is not None and alpha_fixed is None:
        raise ParameterError("alphatilde_fixed needs alpha_fixed")
    t, p, se = curve.t_grid, curve.p_hat, curve.se
    keep = p > 0
    if keep.sum() < 3:
        raise EmptyGrid("need at least 3 grid points with p_hat > 0")
    t, p, se = t[keep], p[keep], se[keep]
    if np.any(t <= math.e**math.e):
        raise ParameterError("every grid point must exceed e^e")
    lt = np.log(t)
    llt = np.log(lt)
    yv = np.log(p)
    if np.all(se > 0):
        w = (p / se) ** 2
    else:
        w = np.ones_like(p)
    if alpha_fixed is None:
        X = np.column_stack([np.ones_like(lt), -lt, llt])
        rhs = yv
    elif alphatilde_fixed is not None:
        X = np.ones((lt.size, 1))
        rhs = yv + alpha_fixed * lt - alphatilde_fixed * llt
    else:
        X = np.column_stack([np.ones_like(lt), llt])
        rhs = yv + alpha_fixed * lt
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    # conditioning judged on the column-normalised design
    norms = np.linalg.norm(Xw, axis=0)
    sv = np.linalg.svd(Xw / norms, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise SingularDesign("log log t is numerically collinear over this grid")
    if alpha_fixed is None:
        warnings.warn(
            f"free two-exponent fit: alpha and alphatilde are nearly confounded (condition number {sv[0] / sv[-1]:.3g}); "
            "fix alpha for a usable alphatilde",
            RuntimeWarning,
            stacklevel=2,
        )
    beta, *_ = np.linalg.lstsq(Xw, rhs * sw, rcond=None)
    cov = np.linalg.inv(Xw.T @ Xw)
    resid = rhs - X @ beta
    rms = float(np.sqrt(np.mean(resid**2)))
    if alpha_fixed is None:
        return FitReport(None, float(beta[1]), float(beta[2]), float(beta[0]), cov, rms, int(t.size))
    if alphatilde_fixed is not None:
        return FitReport(float(alpha_fixed), float(alpha_fixed), float(alphatilde_fixed), float(beta[0]), cov, rms,
                         int(t.size), True)
    return FitReport(float(alpha_fixed), float(alpha_fixed), float(beta[1]), float(beta[0]), cov, rms, int(t.size))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def negligibility_diag(
    law: CoefficientLaw,
    cramer: CramerReport,
    t: float,
    D: float,
    n_reps: int,
    rng=None,
    *,
    workers: int = 1,
) -> dict:
    """``P(|N_t| > t) / P(|M_t| > t)`` and ``P(|N_inf| > t) / P(|M_t| > t)``."""
    seed = rngmod.resolve_seed(rng)
    est = {
        name: is_tail(law, cramer, t, D, n_reps, name, seed, side="abs", workers=workers)
        for name in ("nt", "mt", "ninf")
    }
    out = {f"p_{k}": e.p_hat for k, e in est.items()}
    out.update({f"se_{k}": e.se for k, e in est.items()})
    w = block_window(cramer.rho, t, D)
    out.update({"t": t, "D": D, "n0": w.n0, "L": w.L})
    pm = est["mt"].p_hat
    if pm == 0:
        if est["nt"].p_hat == 0 and est["ninf"].p_hat == 0:
            out["ratio_left"] = out["ratio_inf"] = NOT_APPLICABLE
            return out
        out["ratio_left"] = out["ratio_inf"] = math.inf
        return out
    out["ratio_left"] = est["nt"].p_hat / pm
    out["ratio_inf"] = est["ninf"].p_hat / pm
    return out


def mpp_ratio(law, cramer, t, D, n_reps, rng=None, *, workers: int = 1) -> dict:
    """``P(|M''_t| > t) / P(|M'_t| > t)``."""
    seed = rngmod.resolve_seed(rng)
    mp = is_tail(law, cramer, t, D, n_reps, "mprime", seed, side="abs", workers=workers)
    mpp = is_tail(law, cramer, t, D, n_reps, "mpp", seed, side="abs", workers=workers)
    ratio = mpp.p_hat / mp.p_hat if mp.p_hat > 0 else (NOT_APPLICABLE if mpp.p_hat == 0 else math.inf)
    return {"t": t, "D": D, "p_mprime": mp.p_hat, "se_mprime": mp.se, "p_mpp": mpp.p_hat, "se_mpp": mpp.se, "ratio": ratio}


def i_n_delta(
    law: CoefficientLaw,
    cramer: CramerReport,
    t: float,
    delta: float,
    n_reps: int,
    rng=None,
    *,
    D: float = 3.0,
    workers: int = 1,
) -> TailEstimate:
    """``E_alpha[(Y_n / sqrt n)^alpha 1{sqrt(n)/delta < Y_n < delta sqrt(n)} 1{Pi_n <= t}]`` with ``n = n0 - L - 1``."""
    if not delta > 1:
        raise ParameterError("delta must exceed 1")
    c0_of_K(cramer.K, cramer.alpha)  # refuses K11 = 0
    w = block_window(cramer.rho, t, D)
    n = w.n
    tl = tilt(law, cramer.alpha)
    seed = rngmod.resolve_seed(rng)
    alpha = cramer.alpha
    lt = math.log(t)
    from .model import AffineInLogA

    affine = isinstance(law.y, AffineInLogA)

    def chunk(g, size):
        log_pi = np.zeros(size)
        ysum = np.zeros(size)
        for _ in range(n):
            la = tl.sample_log_a(g, size)
            ysum += law.y.from_log_a(la) if affine else law.y.sample(g, size)
            log_pi += la
        z = ysum / math.sqrt(n)
        val = np.where((z > 1 / delta) & (z < delta) & (log_pi <= lt), np.abs(z) ** alpha, 0.0)
        return rngmod.moment_sums(val)

    key = (rngmod.STAGES["diagnostics"], 1, _t_key(t), _t_key(delta))
    mean, se = rngmod.pooled_mean(rngmod.run_chunked(chunk, n_reps, seed, key, workers))
    return TailEstimate(float(mean), float(se), math.nan, int(n_reps))


def projection_diag(
    law: CoefficientLaw,
    cramer: CramerReport,
    v,
    t_grid,
    n_reps: int,
    rng=None,
    *,
    prediction: PredictionReport | None = None,
    workers: int = 1,
) -> list[dict]:
    """Rows of ``(t, scaled tail of <v,X>, scaled tail of X1, ratio, v1, v1^alpha)``.

    ``ratio`` is the empirical ratio of the two tails at the same ``t``;
    ``ratio_to_limit`` divides by the predicted X1 constant when one is given.
    Neither candidate factor is selected.
    """
    v1 = float(v[0])
    if not v1 > 0:
        raise ParameterError("v1 must be positive")
    from .asymptotics import decide_regime

    atilde = cramer.alpha / 2 if decide_regime(cramer) == "centered" else cramer.alpha
    seed = rngmod.resolve_seed(rng)
    rows = []
    for t in np.asarray(t_grid, float):
        pv = is_tail(law, cramer, t, None, n_reps, "projection", seed, v=v, workers=workers)
        px = is_tail(law, cramer, t, None, n_reps, "x1", seed, workers=workers, stream=1)
        scale = t**cramer.alpha * math.log(t) ** (-atilde)
        row = {
            "t": float(t),
            "scaled_v": pv.p_hat * scale,
            "se_v": pv.se * scale,
            "scaled_x1": px.p_hat * scale,
            "se_x1": px.se * scale,
            "ratio": pv.p_hat / px.p_hat if px.p_hat > 0 else math.nan,
            "v1": v1,
            "v1_alpha": v1**cramer.alpha,
        }
        if prediction is not None and prediction.limit_right > 0:
            row["ratio_to_limit"] = row["scaled_v"] / prediction.limit_right
        rows.append(row)
    return rows


def tilted_product_moment(
    law: CoefficientLaw,
    alpha: float,
    n: int,
    n_reps: int,
    rng=None,
    *,
    indicator: bool = False,
    workers: int = 1,
) -> TailEstimate:
    """Replica mean of ``Pi_n^-alpha`` (times ``1{Pi_n >= 1}`` with ``indicator``) under the tilt.

    By the change of measure the plain mean is 1 and the indicator version is
    ``P(Pi_n >= 1)``.
    """
    tl = tilt(law, alpha)
    seed = rngmod.resolve_seed(rng)

    def chunk(g, size):
        log_pi = np.zeros(size)
        for _ in range(n):
            log_pi += tl.sample_log_a(g, size)
        val = np.exp(-alpha * log_pi)
        if indicator:
            val = np.where(log_pi >= 0, val, 0.0)
        return rngmod.moment_sums(val)

    key = (rngmod.STAGES["moments"], int(n), int(indicator))
    mean, se = rngmod.pooled_mean(rngmod.run_chunked(chunk, n_reps, seed, key, workers))
    return TailEstimate(float(mean), float(se), math.nan, int(n_reps))


def factorized_product_moment(law: CoefficientLaw, alpha: float, n: int, n_reps: int, rng=None) -> TailEstimate:
    """``(mean of a^-alpha under the tilt)^n`` with a delta-method standard error."""
    tl = tilt(law, alpha)
    g = np.random.default_rng(rngmod.resolve_seed(rng))
    x = np.exp(-alpha * tl.sample_log_a(g, n_reps))
    m = float(x.mean())
    s = float(x.std(ddof=1) / math.sqrt(n_reps))
    return TailEstimate(m**n, n * m ** (n - 1) * s, math.nan, int(n_reps))


__all__ = [
    "FitReport",
    "NOT_APPLICABLE",
    "SCHEMA",
    "TailCurve",
    "TailEstimate",
    "default_t_grid",
    "factorized_product_moment",
    "fit_exponents",
    "i_n_delta",
    "is_tail",
    "mpp_ratio",
    "naive_tail",
    "negligibility_diag",
    "projection_diag",
    "tail_curve",
    "tilted_product_moment",
]
