"""Backward-series simulation of the stationary solution and its block decomposition.

The stationary solution is the perpetuity ``X = sum_{k>=1} A_1 ... A_{k-1} B_k``.
With ``Pi_k = a_1 ... a_k`` and ``Y_k = y_1 + ... + y_k`` its coordinates are

    X2  = sum_k Pi_{k-1} b2_k
    X1' = sum_k Pi_{k-1} b1_k
    X0  = sum_k Pi_{k-1} Y_{k-1} b2_k
    X1  = X1' + X0

Around ``n0 = log(t) / rho`` the sum defining ``X0`` is cut into the blocks
``N_t`` (k < lo), ``M_t`` (lo <= k <= hi) and ``N_inf`` (k > hi), where
``lo = n0 - L``, ``hi = n0 + L`` and ``L = D sqrt(log log t * log t)``.  Writing
``n = lo - 1`` and ``rel_k = a_lo ... a_{k-1}`` the middle block splits as

    M_t  = Pi_n Y_n S_2L + Pi_n sum_k (Y_{k-1} - Y_n) rel_k b2_k = M' + M''
    S_2L = sum_{lo<=k<=hi} rel_k b2_k

and ``R_t = sum_{lo<=k<=hi} Pi_{k-1} (k-1) b2_k = n Pi_n S_2L + Pi_n sum_k (k-lo) rel_k b2_k``.

All of this is produced by one vectorised engine, :func:`simulate_paths`, which
can also draw the early coefficients from the tilted law and return the
likelihood ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import model
from .cramer import CramerReport, TiltedLaw, tilt
from .errors import DriftError, NonConvergence, ParameterError
from .model import AffineInLogA, CoefficientLaw

HARD_CAP = 100_000
DEFAULT_TRUNC_TOL = 1e-10
_OVERFLOW = 1e250

TARGETS = (
    "x1",
    "x2",
    "x1_prime",
    "x0",
    "nt",
    "mt",
    "ninf",
    "mprime",
    "mpp",
    "rt",
    "rprime",
    "rpp",
    "projection",
    "all",
)

_X0_FAMILY = {"x0", "nt", "mt", "ninf", "mprime", "mpp"}
_WINDOW_TARGETS = {"mt", "mprime", "mpp", "rt", "rprime", "rpp"}


# ---------------------------------------------------------------------------
# window and truncation constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    t: float
    n0: int
    L: int
    D: float
    lo: int
    hi: int

    @property
    def n(self) -> int:
        return self.lo - 1


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def block_window(rho: float, t: float, D: float) -> Window:
    """``n0`` and ``L`` rounded half up; ``lo`` is kept at 2 or above so that ``n >= 1``."""
    if not t > math.e**math.e:
        raise ParameterError(f"t = {t:g} must exceed e^e so that log log t > 0")
    if not D > 0:
        raise ParameterError("D must be positive")
    if not rho > 0:
        raise ParameterError("rho must be positive")
    lt = math.log(t)
    n0 = _round_half_up(lt / rho)
    L = _round_half_up(D * math.sqrt(math.log(lt) * lt))
    return Window(float(t), n0, L, float(D), max(n0 - L, 2), n0 + L)


@dataclass(frozen=True)
class _Trunc:
    theta: float
    q: float
    eb1: float
    eb2: float
    eya: float

    def bound(self, pi: np.ndarray, y: np.ndarray) -> np.ndarray:
        """theta-th root of the conditional theta-moment of the discarded tail of X1 and X2."""
        th, q = self.theta, self.q
        head = (self.eb1 + self.eb2 + self.eb2 * np.abs(y) ** th) / (1.0 - q)
        tail = self.eb2 * self.eya / (1.0 - q) ** 2
        return (pi**th * (head + tail)) ** (1.0 / th)


def _trunc_constants(law: CoefficientLaw) -> _Trunc:
    theta = 1.0
    hi = law.a.domain()[1]
    while theta >= hi:
        theta *= 0.5
    for _ in range(60):
        q = model.mellin(law, theta)
        if q < 1:
            break
        theta *= 0.5
    else:
        raise DriftError("E a^theta >= 1 for every theta tried; the series does not contract")
    eya = model.cross_moments(law, theta, theta).abs_r
    return _Trunc(theta, q, law.b1.abs_moment(theta), law.b2.abs_moment(theta), eya)


def _is_zero(fam) -> bool:
    return isinstance(fam, (model.Constant, model.Gaussian)) and fam.is_constant and fam.mean == 0


def guard_is_trivial(law: CoefficientLaw, target: str, v=(1.0, 0.0)) -> bool:
    """True when ``target`` is identically zero for this law."""
    y0, b1z, b2z = _is_zero(law.y), _is_zero(law.b1), _is_zero(law.b2)
    if target in _X0_FAMILY:
        return y0 or b2z
    if target in ("x2", "rt", "rprime", "rpp"):
        return b2z
    if target == "x1_prime":
        return b1z
    if target == "x1":
        return b1z and (b2z or y0)
    if target == "projection":
        return (v[0] == 0 or (b1z and (b2z or y0))) and (v[1] == 0 or b2z)
    return b1z and b2z


def _guard(target, k, y_prev, y_n, b1, b2, lo, hi, v):
    ab2 = np.abs(b2)
    win = lo <= k <= hi
    if target == "x2":
        return ab2
    if target == "x1_prime":
        return np.abs(b1)
    if target == "x1":
        return np.abs(b1) + np.abs(y_prev) * ab2
    if target == "x0":
        return np.abs(y_prev) * ab2
    if target == "nt":
        return np.abs(y_prev) * ab2 if k < lo else np.zeros_like(ab2)
    if target == "ninf":
        return np.abs(y_prev) * ab2 if k > hi else np.zeros_like(ab2)
    if target == "projection":
        return abs(v[0]) * (np.abs(b1) + np.abs(y_prev) * ab2) + abs(v[1]) * ab2
    if target == "all":
        extra = np.abs(y_n) if k >= lo else 0.0
        return np.abs(b1) + ab2 * (1.0 + np.abs(y_prev) + extra + ((k - 1) if win else 0))
    if not win:
        return np.zeros_like(ab2)
    if target == "mt":
        return np.abs(y_prev) * ab2
    if target == "mprime":
        return np.abs(y_n) * ab2
    if target == "mpp":
        return np.abs(y_prev - y_n) * ab2
    if target in ("rt", "rprime", "rpp"):
        return (k - 1) * ab2
    raise ParameterError(f"unknown target {target!r}")


def _guard_last_step(target: str, w: Window | None) -> float:
    if w is None:
        return math.inf
    if target == "nt":
        return w.lo - 1
    if target in _WINDOW_TARGETS:
        return w.hi
    return math.inf


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

_FIELDS = (
    "x1",
    "x1_prime",
    "x2",
    "x0",
    "nt",
    "mt",
    "ninf",
    "s_2l",
    "mpp_sum",
    "rt",
    "rpp_sum",
    "y_n",
    "pi_n",
    "weight",
    "truncation_n",
    "truncation_bound",
    "x1_abs",
    "x0_abs",
    "m_abs",
    "r_abs",
    "sigma",
)


def simulate_paths(
    law: CoefficientLaw,
    size: int,
    rng: np.random.Generator,
    *,
    window: Window | None = None,
    scheme: str = "none",
    tilted: TiltedLaw | None = None,
    target: str = "all",
    t: float | None = None,
    v=(1.0, 0.0),
    trunc_tol: float = DEFAULT_TRUNC_TOL,
    hard_cap: int = HARD_CAP,
) -> dict[str, np.ndarray]:
    """Run ``size`` independent backward-series trajectories.

    ``scheme``:
      ``none``     plain sampling, weight 1;
      ``first_n``  a_1..a_n drawn from ``tilted``, weight ``Pi_n^-alpha`` (needs ``window``);
      ``passage``  a_k drawn from ``tilted`` until the guard sum
                   ``U_k = sum_{j<=k} Pi_{j-1} c_j`` of ``target`` first exceeds ``t``
                   at step ``sigma``, weight ``Pi_{sigma-1}^-alpha``; the guard
                   ``c_j`` dominates the absolute increment of ``target``, so
                   ``{|target| > t}`` lies inside ``{sigma < inf}``.
    Each trajectory stops once it is past every tilted or windowed step and
    the truncation estimate of the discarded tail falls below ``trunc_tol``.
    """
    if scheme not in ("none", "first_n", "passage"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    if scheme != "none" and tilted is None:
        raise ParameterError("tilted sampling needs a TiltedLaw")
    if scheme == "first_n" and window is None:
        raise ParameterError("first_n tilting needs a block window")
    if scheme == "passage" and t is None:
        raise ParameterError("passage tilting needs a level t")
    tr = _trunc_constants(law)
    alpha = tilted.alpha if tilted is not None else 0.0
    lo, hi = (window.lo, window.hi) if window is not None else (math.inf, -math.inf)
    n_tilt = window.n if scheme == "first_n" else 0
    last_guard = _guard_last_step(target, window)
    affine = isinstance(law.y, AffineInLogA)

    out = {name: np.zeros(size) for name in _FIELDS}
    out["weight"][:] = 1.0
    out["sigma"][:] = -1

    idx = np.arange(size)
    pi = np.ones(size)
    y = np.zeros(size)
    y_n = np.zeros(size)
    rel = np.ones(size)
    acc = {name: np.zeros(size) for name in _FIELDS if name not in ("weight", "truncation_n", "truncation_bound", "sigma", "y_n", "pi_n")}
    u = np.zeros(size)
    stopped = np.full(size, scheme != "passage")
    weight = np.ones(size)
    sigma = np.full(size, -1.0)
    pi_n = np.ones(size)

    k = 0
    while idx.size:
        k += 1
        if k > hard_cap:
            raise NonConvergence(f"series not truncated after {hard_cap} steps")
        m = idx.size
        b1 = law.b1.sample(rng, m)
        b2 = law.b2.sample(rng, m)
        if k == lo:
            y_n = y.copy()
            pi_n = pi.copy()
            rel = np.ones(m)

        # term k: Pi_{k-1} (b1_k, b2_k, Y_{k-1} b2_k)
        t2 = pi * b2
        t0 = t2 * y
        t1 = pi * b1
        acc["x1"] += t1 + t0
        acc["x1_prime"] += t1
        acc["x2"] += t2
        acc["x0"] += t0
        acc["x1_abs"] += np.abs(t1) + np.abs(t0)
        acc["x0_abs"] += np.abs(t0)
        if k < lo:
            acc["nt"] += t0
        elif k <= hi:
            acc["mt"] += t0
            acc["m_abs"] += np.abs(t0)
            rb = rel * b2
            acc["s_2l"] += rb
            acc["mpp_sum"] += (y - y_n) * rb
            acc["rt"] += (k - 1) * t2
            acc["rpp_sum"] += (k - lo) * rb
            acc["r_abs"] += np.abs((k - 1) * t2)
        else:
            acc["ninf"] += t0

        if scheme == "passage":
            live = ~stopped
            if live.any():
                c = _guard(target, k, y, y_n, b1, b2, lo, hi, v)
                u += pi * c
                hit = live & (u > t)
                weight[hit] = pi[hit] ** (-alpha)
                sigma[hit] = k
                stopped |= hit
                if k >= last_guard:
                    # guard exhausted without reaching t: the target cannot exceed t
                    miss = ~stopped
                    weight[miss] = 0.0
                    stopped |= miss

        # coefficient a_k (tilted where required), then y_k
        if scheme == "passage":
            tilt_mask = ~stopped
        elif scheme == "first_n":
            tilt_mask = np.full(m, k <= n_tilt)
        else:
            tilt_mask = None
        if tilt_mask is None or not tilt_mask.any():
            la = np.asarray(law.a.sample_log(rng, m), float)
        elif tilt_mask.all():
            la = tilted.sample_log_a(rng, m)
        else:
            la = np.empty(m)
            la[tilt_mask] = tilted.sample_log_a(rng, int(tilt_mask.sum()))
            la[~tilt_mask] = np.asarray(law.a.sample_log(rng, int((~tilt_mask).sum())), float)
        yk = law.y.from_log_a(la) if affine else law.y.sample(rng, m)
        a = np.exp(la)
        pi = pi * a
        y = y + yk
        if k >= lo:
            rel = rel * a
        if scheme == "first_n" and k == n_tilt:
            weight = pi ** (-alpha)
        if np.any(pi > _OVERFLOW):
            raise NonConvergence("running product overflowed; tilted replica never stopped")

        # retire finished trajectories
        if k < max(hi, n_tilt):
            continue
        bound = tr.bound(pi, y)
        done = stopped & (bound < trunc_tol)
        if done.any():
            sel = idx[done]
            for name, arr in acc.items():
                out[name][sel] = arr[done]
            out["weight"][sel] = weight[done]
            out["sigma"][sel] = sigma[done]
            out["truncation_n"][sel] = k
            out["truncation_bound"][sel] = bound[done]
            out["y_n"][sel] = y_n[done] if window is not None else 0.0
            out["pi_n"][sel] = pi_n[done] if window is not None else 0.0
            keep = ~done
            idx = idx[keep]
            pi, y, y_n, rel, u = pi[keep], y[keep], y_n[keep], rel[keep], u[keep]
            stopped, weight, sigma, pi_n = stopped[keep], weight[keep], sigma[keep], pi_n[keep]
            acc = {name: arr[keep] for name, arr in acc.items()}
    return out


def target_values(paths: dict[str, np.ndarray], target: str, window: Window | None = None, v=(1.0, 0.0)) -> np.ndarray:
    """Assemble a target from the accumulators returned by :func:`simulate_paths`."""
    if target == "x1":
        return paths["x1"]
    if target == "projection":
        return v[0] * paths["x1"] + v[1] * paths["x2"]
    if target in ("x2", "x1_prime", "x0", "nt", "mt", "ninf", "rt"):
        return paths[target]
    if target == "mprime":
        return paths["pi_n"] * paths["y_n"] * paths["s_2l"]
    if target == "mpp":
        return paths["pi_n"] * paths["mpp_sum"]
    if target == "rprime":
        return window.n * paths["pi_n"] * paths["s_2l"]
    if target == "rpp":
        return paths["pi_n"] * paths["rpp_sum"]
    raise ParameterError(f"unknown target {target!r}")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


@dataclass
class StationaryPair:
    """One stationary draw (floats) or a batch of draws (arrays)."""

    x1: np.ndarray | float
    x2: np.ndarray | float
    x1_prime: np.ndarray | float
    x0: np.ndarray | float
    truncation_n: np.ndarray | int
    truncation_bound: np.ndarray | float


def _check_drift(law):
    drift = model.mellin_log(law, 0.0)
    if drift >= 0:
        raise DriftError(f"E log a = {drift:.6g} >= 0; no stationary solution")


def simulate_stationary(
    law: CoefficientLaw,
    trunc_tol: float = DEFAULT_TRUNC_TOL,
    rng: np.random.Generator | None = None,
    size: int | None = None,
    hard_cap: int = HARD_CAP,
) -> StationaryPair:
    """Stationary solution by the truncated backward series.

    ``truncation_bound`` is the theta-th root of the conditional theta-moment of
    the discarded tail, for the ``theta <= 1`` with ``E a^theta < 1``.
    """
    _check_drift(law)
    rng = np.random.default_rng(rng)
    n = 1 if size is None else int(size)
    p = simulate_paths(law, n, rng, trunc_tol=trunc_tol, hard_cap=hard_cap)
    pair = StationaryPair(p["x1"], p["x2"], p["x1_prime"], p["x0"], p["truncation_n"].astype(int), p["truncation_bound"])
    if size is None:
        return StationaryPair(*(v[0].item() for v in (getattr(pair, f.name) for f in fields(pair))))
    return pair


@dataclass
class BlockSample:
    t: float
    n0: int
    L: int
    D: float
    n_t: np.ndarray | float
    m_t: np.ndarray | float
    n_inf: np.ndarray | float
    m_prime: np.ndarray | float
    m_double_prime: np.ndarray | float
    s_2l: np.ndarray | float
    r_t: np.ndarray | float
    r_prime: np.ndarray | float
    r_double_prime: np.ndarray | float
    weight: np.ndarray | float
    x0: np.ndarray | float
    x1: np.ndarray | float
    x1_prime: np.ndarray | float
    x2: np.ndarray | float
    truncation_bound: np.ndarray | float
    x1_abs: np.ndarray | float
    x0_abs: np.ndarray | float
    m_abs: np.ndarray | float
    r_abs: np.ndarray | float
    lo: int = 0
    hi: int = 0
    rounding: str = "half-up"


def _block_sample(paths, w: Window) -> BlockSample:
    return BlockSample(
        t=w.t,
        n0=w.n0,
        L=w.L,
        D=w.D,
        n_t=paths["nt"],
        m_t=paths["mt"],
        n_inf=paths["ninf"],
        m_prime=target_values(paths, "mprime", w),
        m_double_prime=target_values(paths, "mpp", w),
        s_2l=paths["s_2l"],
        r_t=paths["rt"],
        r_prime=target_values(paths, "rprime", w),
        r_double_prime=target_values(paths, "rpp", w),
        weight=paths["weight"],
        x0=paths["x0"],
        x1=paths["x1"],
        x1_prime=paths["x1_prime"],
        x2=paths["x2"],
        truncation_bound=paths["truncation_bound"],
        x1_abs=paths["x1_abs"],
        x0_abs=paths["x0_abs"],
        m_abs=paths["m_abs"],
        r_abs=paths["r_abs"],
        lo=w.lo,
        hi=w.hi,
    )


def sample_blocks(
    law: CoefficientLaw,
    cramer: CramerReport,
    t: float,
    D: float,
    tilt_first_n: bool = False,
    rng: np.random.Generator | None = None,
    size: int | None = None,
    trunc_tol: float | None = None,
) -> BlockSample:
    """Block decomposition of X0 (and X1, X2) on shared trajectories.

    With ``tilt_first_n`` the first ``n = n0 - L - 1`` coefficients are drawn
    from the tilted law and ``weight = Pi_n^-alpha``.
    """
    _check_drift(law)
    rng = np.random.default_rng(rng)
    w = block_window(cramer.rho, t, D)
    n = 1 if size is None else int(size)
    tl = tilt(law, cramer.alpha) if tilt_first_n else None
    tol = trunc_tol if trunc_tol is not None else DEFAULT_TRUNC_TOL * max(1.0, t)
    p = simulate_paths(law, n, rng, window=w, scheme="first_n" if tilt_first_n else "none", tilted=tl, trunc_tol=tol)
    bs = _block_sample(p, w)
    if size is None:
        for f in fields(bs):
            val = getattr(bs, f.name)
            if isinstance(val, np.ndarray):
                setattr(bs, f.name, val[0].item())
    return bs


def choose_D(cramer: CramerReport, xi: float) -> float:
    """Default window constant ``max(4, 2 (alpha + xi + 2) / rho)``."""
    if xi < 0:
        raise ParameterError("xi must be nonnegative")
    return max(4.0, 2.0 * (cramer.alpha + xi + 2.0) / cramer.rho)


def forward_trace(law: CoefficientLaw, n_steps: int, rng: np.random.Generator, x0=(0.0, 0.0)) -> np.ndarray:
    """Forward iteration ``X_k = A_k X_{k-1} + B_k``; rows are ``(X1_k, X2_k)``."""
    out = np.empty((n_steps, 2))
    x1, x2 = map(float, x0)
    for i in range(n_steps):
        c = model.sample(law, rng)
        x1, x2 = c.a * x1 + c.y * c.a * x2 + c.b1, c.a * x2 + c.b2
        out[i] = x1, x2
    return out


__all__ = [
    "BlockSample",
    "StationaryPair",
    "TARGETS",
    "Window",
    "block_window",
    "choose_D",
    "forward_trace",
    "guard_is_trivial",
    "sample_blocks",
    "simulate_paths",
    "simulate_stationary",
    "target_values",
]
