"""Numerical bench for Ancona-type inequalities and the local limit exponent.

Every Green value from :mod:`greenwalk.green` is a lower bound together with
a tail estimate, so a ratio is reported with the interval obtained by
pairing lower numerators with upper denominators and vice versa.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import Domain
from .errors import InputError, InstabilityError
from .green import (DENOMINATOR_FLOOR, GreenConfig, GreenValue, _norm, green, green_restricted,
                    return_log_series)
from .groups import Element, Group
from .measures import Measure

WINDOW_NOTE = ("desk-scale window: placements use d(x,y) = d(y,z) = m n with a small multiplier m "
               "instead of the range [n, 100n]")


@dataclass(frozen=True)
class TripleOnGeodesic:
    x: Element
    y: Element
    z: Element
    d1: int
    d2: int

    @classmethod
    def make(cls, group: Group, x, y, z) -> "TripleOnGeodesic":
        x, y, z = (_norm(group, p) for p in (x, y, z))
        d1, d2 = group.distance(x, y), group.distance(y, z)
        if group.distance(x, z) != d1 + d2:
            raise InputError(f"{group.format(y)} is not on a geodesic from "
                             f"{group.format(x)} to {group.format(z)}")
        return cls(x, y, z, d1, d2)


@dataclass(frozen=True)
class QuadConfiguration:
    """Pairs ``{x, x'}`` and ``{y, y'}`` separated by ``n`` in their approximating tree."""

    x: Element
    xp: Element
    y: Element
    yp: Element
    n: int

    @classmethod
    def make(cls, group: Group, x, xp, y, yp) -> "QuadConfiguration":
        x, xp, y, yp = (_norm(group, p) for p in (x, xp, y, yp))
        d = group.distance
        sep = (d(x, y) + d(xp, yp) - d(x, xp) - d(y, yp)) / 2
        cross = (d(x, yp) + d(xp, y) - d(x, xp) - d(y, yp)) / 2
        n = min(sep, cross)
        if n < 1:
            raise InputError("the pairs {x, x'} and {y, y'} are not separated (n < 1)")
        return cls(x, xp, y, yp, int(n))


@dataclass(frozen=True)
class RatioValue:
    """A ratio with its propagated interval ``[lower, upper]``."""

    value: float
    lower: float
    upper: float
    normalized: float | None = None
    normalized_lower: float | None = None
    normalized_upper: float | None = None
    parts: tuple = ()

    @property
    def error(self) -> float:
        return max(self.value - self.lower, self.upper - self.value)

    @property
    def normalized_error(self) -> float:
        return max(self.normalized - self.normalized_lower, self.normalized_upper - self.normalized)

    def to_dict(self) -> dict:
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "normalized": self.normalized, "normalized_lower": self.normalized_lower,
                "normalized_upper": self.normalized_upper,
                "parts": [p.to_dict() for p in self.parts]}


def _hi(v: GreenValue) -> float:
    return v.value + (v.tail_estimate if math.isfinite(v.tail_estimate) else math.inf)


def _ratio(num: GreenValue, d1: GreenValue, d2: GreenValue, norm: GreenValue) -> RatioValue:
    for d in (d1, d2):
        if d.value < DENOMINATOR_FLOOR:
            raise InstabilityError(f"denominator {d.value:.3g} below the floor {DENOMINATOR_FLOOR}")
    val = num.value / (d1.value * d2.value)
    lo = num.value / (_hi(d1) * _hi(d2))
    hi = _hi(num) / (d1.value * d2.value)
    return RatioValue(val, lo, hi, val * norm.value, lo * norm.value, hi * _hi(norm),
                      (num, d1, d2, norm))


def _cfg_for(cfg: GreenConfig | None) -> GreenConfig:
    return GreenConfig(working_radius=10, center="tube") if cfg is None else cfg


def ancona_ratio(t: TripleOnGeodesic, mu: Measure, cfg: GreenConfig | None = None) -> RatioValue:
    """``G(x, z) / (G(x, y) G(y, z))`` and the same times ``G(e, e)``."""
    cfg = _cfg_for(cfg)
    gxz = green(t.x, t.z, mu, cfg)
    gxy = green(t.x, t.y, mu, cfg)
    gyz = green(t.y, t.z, mu, cfg)
    gee = green((), (), mu, cfg)
    return _ratio(gxz, gxy, gyz, gee)


def hourglass_check(t: TripleOnGeodesic, H0: float, mu: Measure,
                    cfg: GreenConfig | None = None) -> RatioValue:
    """Restricted analogue of :func:`ancona_ratio` on the hourglass around ``[x, z]``.

    The normalizing factor is ``G(y, y; Omega)``.
    """
    cfg = _cfg_for(cfg)
    g = mu.group
    om = Domain.hourglass(g, t.x, t.y, t.z, H0)
    gxz = green_restricted(t.x, t.z, om, mu, cfg)
    gxy = green_restricted(t.x, t.y, om, mu, cfg)
    gyz = green_restricted(t.y, t.z, om, mu, cfg)
    gyy = green_restricted(t.y, t.y, om, mu, cfg)
    return _ratio(gxz, gxy, gyz, gyy)


# ------------------------------------------------------------- pre-Ancona
def _placements(group: Group, y: Element, k: int, rule: str) -> list[tuple[Element, Element]]:
    """``(x, z)`` with ``d(x, y) = d(y, z) = k`` and ``y`` on ``[x, z]``."""
    if rule == "axis":
        a = group.parse(group.generators[0])
        return [(group.multiply(y, group.power(a, -k)), group.multiply(y, group.power(a, k)))]
    if rule != "all-axes":
        raise InputError(f"unknown placement rule {rule!r}")
    out = []
    for s in range(group.n_letters):
        for t in range(group.n_letters):
            u = group.power((s,), k)
            v = group.power((t,), k)
            if len(u) != k or len(v) != k:
                continue
            ui = group.invert(u)
            if len(group.multiply(ui, v)) == 2 * k and ui < v:
                out.append((group.multiply(y, ui), group.multiply(y, v)))
    return out


@dataclass(frozen=True)
class PreAnconaRow:
    n: int
    value: float
    slope: float
    placement: str
    tail_estimate: float

    def to_dict(self) -> dict:
        return {"n": self.n, "value": self.value, "slope": self.slope,
                "placement": self.placement, "tail_estimate": self.tail_estimate}


def pre_ancona_profile(y, n_values, mu: Measure, cfg: GreenConfig | None = None,
                       rule: str = "axis", multiplier: int = 1) -> list[PreAnconaRow]:
    """``sup_{placements} G(x, z; B(y, n)^c)`` and the slope ``-log(value)/n``.

    Placements put ``x`` and ``z`` at distance ``multiplier * n`` from ``y``
    on opposite sides.  The slope is ``inf`` when the value is exactly 0.
    """
    g = mu.group
    y = _norm(g, y)
    cfg = GreenConfig(working_radius=14, center=y) if cfg is None else cfg
    rows = []
    for n in n_values:
        best, best_p, best_tail = -1.0, "", 0.0
        for x, z in _placements(g, y, multiplier * n, rule):
            gv = green_restricted(x, z, Domain.ball_complement(y, n), mu, cfg)
            if gv.value > best:
                best, best_p, best_tail = gv.value, f"{g.format(x)}|{g.format(z)}", gv.tail_estimate
        slope = -math.log(best) / n if best > 0 else math.inf
        rows.append(PreAnconaRow(n, best, slope, best_p, best_tail))
    return rows


# ---------------------------------------------------------- strong Ancona
@dataclass(frozen=True)
class StrongAnconaValue:
    """``(G(x,y)/G(x',y)) / (G(x,y')/G(x',y')) - 1`` with its propagated error."""

    n: int
    deviation: float
    error: float
    inconclusive: bool

    def to_dict(self) -> dict:
        return {"n": self.n, "deviation": self.deviation, "error": self.error,
                "inconclusive": self.inconclusive}


def strong_ancona_ratio(q: QuadConfiguration, mu: Measure,
                        cfg: GreenConfig | None = None) -> StrongAnconaValue:
    cfg = _cfg_for(cfg)
    vals = [green(a, b, mu, cfg) for a, b in ((q.x, q.y), (q.xp, q.y), (q.x, q.yp), (q.xp, q.yp))]
    for v in vals:
        if v.value < DENOMINATOR_FLOOR:
            raise InstabilityError(f"Green value {v.value:.3g} below the floor {DENOMINATOR_FLOOR}")
    a, b, c, d = (v.value for v in vals)
    dev = (a * d) / (b * c) - 1.0
    rel = math.fsum(v.tail_estimate / v.value for v in vals)
    # rounding of four products and a subtraction
    err = (1.0 + abs(dev)) * (rel + 8 * np.finfo(float).eps)
    return StrongAnconaValue(q.n, dev, float(err), bool(err >= abs(dev)))


def strong_ancona_sweep(group: Group, n_values, mu: Measure, cfg: GreenConfig | None = None,
                        offsets: tuple = ("b", "bb")) -> tuple[list[StrongAnconaValue], float | None]:
    """Sweep ``n`` with ``x, x'`` hanging off ``e`` and ``y, y'`` off ``a^n``.

    Returns the rows and the fitted exponential decay rate of the deviation
    (``None`` with fewer than two nonzero deviations).
    """
    a = group.parse(group.generators[0])
    u, v = (group.parse(o) for o in offsets)
    rows = []
    for n in n_values:
        an = group.power(a, n)
        q = QuadConfiguration.make(group, u, v, group.multiply(an, u), group.multiply(an, v))
        q = QuadConfiguration(q.x, q.xp, q.y, q.yp, n)
        rows.append(strong_ancona_ratio(q, mu, cfg))
    pts = [(r.n, math.log(abs(r.deviation))) for r in rows if r.deviation != 0 and not r.inconclusive]
    rate = None
    if len(pts) >= 2:
        ns, ls = np.array(pts).T
        rate = float(-np.polyfit(ns, ls, 1)[0])
    return rows, rate


# ------------------------------------------------------------ local limit
@dataclass(frozen=True)
class LocalLimitFit:
    """Two-stage fit of ``p^n(x, y) ~ C R^-n n^exponent``.

    ``R_est`` extrapolates the consecutive ratios ``p^{n+s}/p^n`` to their
    limit; ``R_geomean`` is their plain geometric mean over the last
    quarter, reported for comparison.
    """

    R_est: float
    R_geomean: float
    exponent_est: float
    C_est: float
    residuals: np.ndarray
    n_used: np.ndarray
    step: int
    inconclusive: bool = False

    def to_dict(self) -> dict:
        return {"R_est": self.R_est, "R_geomean": self.R_geomean, "exponent_est": self.exponent_est,
                "C_est": self.C_est, "max_abs_residual": float(np.max(np.abs(self.residuals)))
                if len(self.residuals) else None, "n_samples": int(len(self.n_used)),
                "step": self.step, "inconclusive": self.inconclusive}


def local_limit_fit(mu: Measure, x=(), y=(), n_max: int = 4000) -> LocalLimitFit:
    """Fit the local limit asymptotics of ``p^n(x, y)``.

    Stage 1 fits the per-step log ratio as ``L + a/n + b/n^2`` over the last
    quarter and sets ``R_est = exp(-L)``.  Stage 2 regresses
    ``log p^n + n log R_est`` on ``log n`` over the top half of the range.
    Only ``n`` with ``p^n > 0`` are used, so periodic walks use one parity.
    """
    g = mu.group
    if not (mu.radial_profile() is not None or mu.check_symmetric()):
        raise InputError("local_limit_fit needs a symmetric measure")
    x, y = _norm(g, x), _norm(g, y)
    target = g.multiply(g.invert(x), y)
    logp = return_log_series(mu, n_max, target)
    ns = np.flatnonzero(np.isfinite(logp) & (np.arange(n_max + 1) > 0))
    if len(ns) < 40:
        return LocalLimitFit(math.nan, math.nan, math.nan, math.nan, np.zeros(0), ns, 0, True)
    step = int(np.min(np.diff(ns)))
    base = ns[np.isin(ns + step, ns)]
    tail = base[len(base) * 3 // 4:]
    r = (logp[tail + step] - logp[tail]) / step
    geo = float(math.exp(-np.mean(r)))
    X = np.column_stack([np.ones(len(tail)), 1.0 / tail, 1.0 / tail ** 2])
    coef, *_ = np.linalg.lstsq(X, r, rcond=None)
    R = float(math.exp(-coef[0]))
    top = ns[ns >= n_max // 2]
    yv = logp[top] + top * math.log(R)
    A = np.column_stack([np.log(top), np.ones(len(top))])
    (expo, c), *_ = np.linalg.lstsq(A, yv, rcond=None)
    res = yv - A @ np.array([expo, c])
    return LocalLimitFit(R, geo, float(expo), float(math.exp(c)), res, top, step)
