"""Model configuration files.

A config is a list of ``key = value`` lines; ``#`` starts a comment.  Example::

    name = cm1
    a.family = lognormal      # lognormal | constant | power | uniform | discrete | garch
    a.mu = -0.5
    a.sigma2 = 0.5
    y.family = gaussian       # constant | gaussian | affine_log_a
    y.mean = 0
    y.var = 1
    b1.family = constant      # constant | gaussian | exponential
    b1.c = 1
    b2.family = constant
    b2.c = 1

Family parameters:

    a:  lognormal(mu, sigma2)  constant(c)  power(hi, power=0)  uniform(hi)
        discrete(values, probs) with comma-separated lists  garch(lam, beta)
    y:  constant(c)  gaussian(mean, var)  affine_log_a(lam, offset); offset may be "rho"
    b:  constant(c)  gaussian(mean, var)  exponential(rate)

``y`` defaults to constant 0, ``b1`` to constant 0 and ``b2`` to constant 1.
"""
from __future__ import annotations

import math

from . import model
from .errors import ConfigError, ParameterError

_A_PARAMS = {
    "lognormal": ("mu", "sigma2"),
    "constant": ("c",),
    "power": ("hi", "power"),
    "uniform": ("hi",),
    "discrete": ("values", "probs"),
    "garch": ("lam", "beta"),
}
_Y_PARAMS = {"constant": ("c",), "gaussian": ("mean", "var"), "affine_log_a": ("lam", "offset")}
_B_PARAMS = {"constant": ("c",), "gaussian": ("mean", "var"), "exponential": ("rate",)}
_OPTIONAL = {("a", "power"): "0"}


def parse_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k or not v:
            raise ConfigError(f"line {lineno}: empty key or value")
        if k in out:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        out[k] = v
    return out


def _num(key, v) -> float:
    try:
        x = float(v)
    except ValueError:
        raise ConfigError(f"{key}: {v!r} is not a number") from None
    if not math.isfinite(x):
        raise ConfigError(f"{key}: must be finite")
    return x


def _nums(key, v) -> tuple[float, ...]:
    return tuple(_num(key, s) for s in v.split(","))


def _group(kv, prefix, table, default):
    fam = kv.get(f"{prefix}.family", default)
    if fam is None:
        raise ConfigError(f"missing {prefix}.family")
    fam = fam.lower()
    if fam not in table:
        raise ConfigError(f"{prefix}.family: unknown family {fam!r} (choose from {', '.join(table)})")
    params = {}
    for p in table[fam]:
        key = f"{prefix}.{p}"
        if key in kv:
            params[p] = kv[key]
        elif (prefix, p) in _OPTIONAL:
            params[p] = _OPTIONAL[(prefix, p)]
        else:
            raise ConfigError(f"missing {key} for family {fam}")
    return fam, params


def law_from_dict(kv: dict[str, str]) -> model.CoefficientLaw:
    allowed = {"name"}
    for prefix, table in (("a", _A_PARAMS), ("y", _Y_PARAMS), ("b1", _B_PARAMS), ("b2", _B_PARAMS)):
        fam = kv.get(f"{prefix}.family", "").lower()
        allowed.add(f"{prefix}.family")
        allowed.update(f"{prefix}.{p}" for p in table.get(fam, ()))
    unknown = sorted(set(kv) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    try:
        fam, p = _group(kv, "a", _A_PARAMS, None)
        if fam == "lognormal":
            a = model.LogNormal(_num("a.mu", p["mu"]), _num("a.sigma2", p["sigma2"]))
        elif fam == "constant":
            a = model.degenerate(_num("a.c", p["c"]))
        elif fam == "power":
            a = model.PowerLaw(_num("a.hi", p["hi"]), _num("a.power", p["power"]))
        elif fam == "uniform":
            a = model.PowerLaw(_num("a.hi", p["hi"]))
        elif fam == "discrete":
            a = model.Discrete(_nums("a.values", p["values"]), _nums("a.probs", p["probs"]))
        else:
            a = model.GarchSquare(_num("a.lam", p["lam"]), _num("a.beta", p["beta"]))

        fam, p = _group(kv, "y", _Y_PARAMS, None) if "y.family" in kv else ("none", {})
        if fam == "none":
            y = model.Constant(0.0)
        elif fam == "constant":
            y = model.Constant(_num("y.c", p["c"]))
        elif fam == "gaussian":
            y = model.Gaussian(_num("y.mean", p["mean"]), _num("y.var", p["var"]))
        else:
            off = p["offset"]
            if off.lower() == "rho":
                from .cramer import spectral_report

                base = model.CoefficientLaw(a)
                off_val = spectral_report(base, strict=False).rho
            else:
                off_val = _num("y.offset", off)
            y = model.AffineInLogA(_num("y.lam", p["lam"]), off_val)

        bs = []
        for prefix, dflt in (("b1", 0.0), ("b2", 1.0)):
            if f"{prefix}.family" not in kv:
                bs.append(model.Constant(dflt))
                continue
            fam, p = _group(kv, prefix, _B_PARAMS, None)
            if fam == "constant":
                bs.append(model.Constant(_num(f"{prefix}.c", p["c"])))
            elif fam == "gaussian":
                bs.append(model.Gaussian(_num(f"{prefix}.mean", p["mean"]), _num(f"{prefix}.var", p["var"])))
            else:
                bs.append(model.Exponential(_num(f"{prefix}.rate", p["rate"])))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    return model.CoefficientLaw(a, y, bs[0], bs[1], name=kv.get("name", ""))


def parse_config(text: str) -> model.CoefficientLaw:
    return law_from_dict(parse_text(text))


def load_config(path) -> model.CoefficientLaw:
    with open(path) as fh:
        return parse_config(fh.read())


def _fmt(x) -> str:
    return repr(float(x))


def dump_config(law: model.CoefficientLaw) -> str:
    """Config text that parses back to an equal law (built-in families only)."""
    lines = []
    if law.name:
        lines.append(f"name = {law.name}")
    a = law.a
    if isinstance(a, model.LogNormal):
        lines += ["a.family = lognormal", f"a.mu = {_fmt(a.mu)}", f"a.sigma2 = {_fmt(a.sigma2)}"]
    elif isinstance(a, model.Discrete) and a.degenerate:
        lines += ["a.family = constant", f"a.c = {_fmt(a.values[0])}"]
    elif isinstance(a, model.Discrete):
        lines += [
            "a.family = discrete",
            "a.values = " + ",".join(_fmt(v) for v in a.values),
            "a.probs = " + ",".join(_fmt(p) for p in a.probs),
        ]
    elif isinstance(a, model.PowerLaw):
        lines += ["a.family = power", f"a.hi = {_fmt(a.hi)}", f"a.power = {_fmt(a.power)}"]
    elif isinstance(a, model.GarchSquare) and a.power == 0:
        lines += ["a.family = garch", f"a.lam = {_fmt(a.lam)}", f"a.beta = {_fmt(a.beta)}"]
    else:
        raise ConfigError(f"cannot serialise a-family {a!r}")
    y = law.y
    if isinstance(y, model.Constant):
        lines += ["y.family = constant", f"y.c = {_fmt(y.c)}"]
    elif isinstance(y, model.Gaussian):
        lines += ["y.family = gaussian", f"y.mean = {_fmt(y.mean)}", f"y.var = {_fmt(y.var)}"]
    else:
        lines += ["y.family = affine_log_a", f"y.lam = {_fmt(y.lam)}", f"y.offset = {_fmt(y.offset)}"]
    for prefix, b in (("b1", law.b1), ("b2", law.b2)):
        if isinstance(b, model.Constant):
            lines += [f"{prefix}.family = constant", f"{prefix}.c = {_fmt(b.c)}"]
        elif isinstance(b, model.Gaussian):
            lines += [f"{prefix}.family = gaussian", f"{prefix}.mean = {_fmt(b.mean)}", f"{prefix}.var = {_fmt(b.var)}"]
        else:
            lines += [f"{prefix}.family = exponential", f"{prefix}.rate = {_fmt(b.rate)}"]
    return "\n".join(lines) + "\n"


__all__ = ["dump_config", "law_from_dict", "load_config", "parse_config", "parse_text"]
