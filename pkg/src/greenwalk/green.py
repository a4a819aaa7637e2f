"""Green functions, restricted Green functions and related checks.

Every value is a lower bound of the true quantity: paths are confined to a
finite working region and, optionally, to a maximal length.  Diagnostics
come from re-solving on the two next smaller regions (or path caps): the
last increment, and a geometric extrapolation of the missing tail.

Two engines share one interface.  The explicit engine builds the sparse
weight matrix on the enumerated region.  The lumped engine applies when the
measure is radial on a tree group and all points involved lie on one
geodesic; it works on stabilizer orbits (see :mod:`greenwalk.lumped`) and
reaches radii far beyond what enumeration allows.
"""
from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .domains import Domain, Region
from .errors import (AdmissibilityError, DivergenceError, InputError,
                     InstabilityError, ResourceError)
from .groups import Element, Group
from .lumped import SegmentLump, radial_lump, radial_return_series
from .measures import DEFAULT_CONV_CAP, Measure
from .solvers import exact_solve, power_iteration, solve_positive

EXACT_PATH_CAP = 20
EXACT_SUPPORT_CAP = 1000
DENOMINATOR_FLOOR = 1e-300


@dataclass(frozen=True)
class GreenConfig:
    """Truncation and numeric settings.

    Parameters
    ----------
    working_radius : int
        Radius ``R_w`` of the working region.
    path_cap : int or None
        Maximal path length ``N``; ``None`` solves the finite linear system.
    mode : {"float", "rational"}
    center : {"origin", "source", "target", "tube"} or Element
        Where the working ball sits; ``"tube"`` takes all points within
        ``R_w`` of the geodesic from source to target.
    engine : {"auto", "explicit", "lumped"}
    tol : float
        Relative increment below which a value counts as converged.
    diagnostics : bool
        Re-solve at ``R_w - 1`` and ``R_w - 2`` for increments and tails.
    """

    working_radius: int = 8
    path_cap: int | None = None
    mode: str = "float"
    center: object = "origin"
    engine: str = "auto"
    tol: float = 1e-8
    diagnostics: bool = True

    def __post_init__(self):
        if self.working_radius < 0:
            raise InputError("working_radius must be >= 0")
        if self.path_cap is not None and self.path_cap < 0:
            raise InputError("path_cap must be >= 0")
        if self.mode not in ("float", "rational"):
            raise InputError(f"unknown numeric mode {self.mode!r}")
        if self.engine not in ("auto", "explicit", "lumped"):
            raise InputError(f"unknown engine {self.engine!r}")
        if isinstance(self.center, list):
            object.__setattr__(self, "center", tuple(self.center))
        if isinstance(self.center, str) and self.center not in ("origin", "source", "target", "tube"):
            raise InputError(f"unknown center {self.center!r}")
        if self.mode == "rational" and self.path_cap is not None and self.path_cap > EXACT_PATH_CAP:
            raise ResourceError(f"rational mode path cap {self.path_cap} exceeds {EXACT_PATH_CAP}")

    def with_(self, **kw) -> "GreenConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class GreenValue:
    """Lower bound of a Green quantity with convergence diagnostics.

    ``tail_estimate`` extrapolates the mass still missing from the last two
    increments (``inf`` when they do not decay, 0 when they vanish).
    """

    value: float
    increment_last: float
    converged: bool
    R_w: int
    N: int | None
    tail_estimate: float = math.inf
    exact: Fraction | None = None
    method: str = ""

    @property
    def upper_estimate(self) -> float:
        return self.value + self.tail_estimate

    @property
    def error(self) -> float:
        """Half-width used when propagating errors: the tail estimate."""
        return self.tail_estimate

    def to_dict(self) -> dict:
        return {"value": self.value, "increment_last": self.increment_last,
                "converged": self.converged, "R_w": self.R_w, "N": self.N,
                "tail_estimate": self.tail_estimate, "certified": "lower_bound",
                "method": self.method}


def _diagnose(values: list, R: int, N, tol: float, method: str, exact=None) -> GreenValue:
    """Build a GreenValue from the values at the last three truncations."""
    vals = [float(v) for v in values]
    v = vals[-1]
    inc = vals[-1] - vals[-2] if len(vals) > 1 else math.inf
    inc = max(inc, 0.0)
    tail = math.inf
    # increments at rounding level carry no decay information
    noise = 16 * 2.0 ** -52 * abs(v)
    if len(vals) > 2:
        prev = vals[-2] - vals[-3]
        if inc == 0.0:
            tail = 0.0
        elif inc <= noise and abs(prev) <= noise:
            tail = noise
        elif prev > 0 and inc < prev:
            kappa = inc / prev
            tail = inc * kappa / (1.0 - kappa)
    converged = inc <= tol * max(v, 0.0) or inc == 0.0
    return GreenValue(v, inc, converged, R, N, tail, exact, method)


# ------------------------------------------------------------------- caches
_cache_lock = threading.Lock()


def _mu_cache(mu: Measure) -> dict:
    c = getattr(mu, "_green_cache", None)
    if c is None:
        with _cache_lock:
            c = getattr(mu, "_green_cache", None)
            if c is None:
                c = {}
                mu._green_cache = c
    return c


def _support_radius(mu: Measure) -> int:
    return mu.support_radius


def _is_lumpable(mu: Measure) -> bool:
    return mu.group.is_tree and mu.radial_profile() is not None


def _collinear(group: Group, points: list) -> tuple | None:
    """Endpoints ``(a, b)`` of a geodesic containing all points, or ``None``."""
    pts = list(dict.fromkeys(points))
    if len(pts) == 1:
        return pts[0], pts[0]
    a = max(pts, key=lambda p: group.distance(pts[0], p))
    b = max(pts, key=lambda p: group.distance(a, p))
    dab = group.distance(a, b)
    if all(group.distance(a, p) + group.distance(p, b) == dab for p in pts):
        return a, b
    return None


# ------------------------------------------------------------ system setup
class _System:
    """Weight matrix on a finite state space with a level function.

    ``level[i] <= r`` selects the nested region of radius ``r``.  The source
    row ``src`` and the column towards the target describe the boundary
    terms of the restricted-Green recursion.
    """

    def __init__(self, T, level, allowed, src_row, p_src_tgt, p_to_tgt, tgt_index,
                 same, method):
        self.T = T
        self.level = level
        self.allowed = allowed
        self.src_row = src_row
        self.p_src_tgt = p_src_tgt
        self.p_to_tgt = p_to_tgt
        self.tgt_index = tgt_index
        self.same = same
        self.method = method

    def _parts(self, r):
        mask = self.allowed & (self.level <= r)
        idx = np.flatnonzero(mask)
        tgt_in = self.tgt_index is not None and mask[self.tgt_index]
        A = self.T[idx][:, idx]
        b = np.zeros(len(idx))
        if tgt_in:
            b[np.searchsorted(idx, self.tgt_index)] = 1.0
        else:
            b += self.p_to_tgt[idx]
        return idx, tgt_in, A, b

    def _finish(self, idx, tgt_in, k):
        v = (1.0 if self.same else 0.0) + float(self.src_row[idx] @ k)
        if not tgt_in:
            v += self.p_src_tgt
        return v

    def solve(self, r) -> float:
        idx, tgt_in, A, b = self._parts(r)
        return self._finish(idx, tgt_in, solve_positive(A, b))

    def capped(self, r, N) -> list[float]:
        """Values ``G_{<=m}`` for ``m = 0..N``."""
        idx, tgt_in, A, b = self._parts(r)
        out = [1.0 if self.same else 0.0]
        k = np.zeros(len(idx))
        if tgt_in:
            k[np.searchsorted(idx, self.tgt_index)] = 1.0
        # k holds path sums of length <= m-1 from each state
        for m in range(1, N + 1):
            out.append(self._finish(idx, tgt_in, k))
            k = b + A @ k
        return out


def _explicit_region(mu: Measure, x, y, cfg: GreenConfig) -> Region:
    g = mu.group
    R = cfg.working_radius
    c = cfg.center
    if c == "tube":
        core = tuple(g.geodesic(x, y))
    elif c == "origin":
        core = ((),)
    elif c == "source":
        core = (x,)
    elif c == "target":
        core = (y,)
    else:
        core = (g.reduce(c),)
    cache = _mu_cache(mu)
    key = ("region", core, R)
    reg = cache.get(key)
    if reg is None:
        reg = Region(g, core, R)
        cache[key] = reg
    return reg


def _explicit_matrix(mu: Measure, region: Region) -> sp.csr_matrix:
    cache = _mu_cache(mu)
    key = ("Q", region.key)
    Q = cache.get(key)
    if Q is not None:
        return Q
    items = [(s, float(w)) for s, w in mu.weights.items()]
    if len(items) * len(region) > DEFAULT_CONV_CAP * 5:
        raise ResourceError(f"weight matrix of {len(region)} states x {len(items)} jumps "
                            f"exceeds the work cap")
    rows, cols, vals = [], [], []
    mul = mu.group.multiply
    index = region.index
    for i, v in enumerate(region.elements):
        for s, w in items:
            j = index.get(mul(v, s))
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(w)
    n = len(region)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    cache[key] = Q
    return Q


def _row_from(mu: Measure, region: Region, x: Element) -> np.ndarray:
    row = np.zeros(len(region))
    mul = mu.group.multiply
    for s, w in mu.weights.items():
        j = region.index.get(mul(x, s))
        if j is not None:
            row[j] += float(w)
    return row


def _explicit_system(x, y, omega: Domain, mu: Measure, cfg: GreenConfig) -> _System:
    region = _explicit_region(mu, x, y, cfg)
    Q = _explicit_matrix(mu, region)
    g = mu.group
    allowed = omega.mask(region)
    ix = region.index.get(x)
    src = Q[ix].toarray().ravel() if ix is not None else _row_from(mu, region, x)
    it = region.index.get(y)
    if it is not None:
        p_to = Q[:, it].toarray().ravel()
    else:
        p_to = np.array([float(mu(g.multiply(g.invert(v), y))) for v in region.elements])
    p_xy = float(mu(g.multiply(g.invert(x), y)))
    tgt = it if omega.contains(y, g) else None
    return _System(Q, region.level, allowed, src, p_xy, p_to, tgt, x == y,
                   f"explicit[{len(region)} states]")


def _lumped_system(x, y, omega: Domain, mu: Measure, cfg: GreenConfig) -> _System | None:
    g = mu.group
    anchors = omega.anchors()
    if anchors is None:
        return None
    c = cfg.center
    pts = [x, y] + list(anchors)
    center = None
    if c == "origin":
        center = ()
    elif c == "source":
        center = x
    elif c == "target":
        center = y
    elif c != "tube":
        center = g.reduce(c)
    if center is not None:
        pts.append(center)
    seg = _collinear(g, pts)
    if seg is None:
        return None
    a, bpt = seg
    L = g.distance(a, bpt)
    pos = lambda p: g.distance(a, p)
    R = cfg.working_radius
    if center is not None:
        kc = pos(center)
        level = lambda k, h: h + abs(k - kc)
    else:
        lo, hi = sorted((pos(x), pos(y)))
        level = lambda k, h: h + max(0, lo - k, k - hi)
    profile = mu.radial_profile()
    cache = _mu_cache(mu)
    key = ("lump", L, center is None, (kc if center is not None else (lo, hi)), R)
    lump = cache.get(key)
    if lump is None:
        lump = SegmentLump(g.degree, L, [float(w) for w in profile], level, R, R)
        cache[key] = lump
    anchor_pos = {p: pos(p) for p in anchors}
    allowed = np.fromiter(
        (omega.contains_by_distance(lambda p, k=k, h=h: h + abs(k - anchor_pos[p]))
         for k, h in lump.orbits), dtype=bool, count=len(lump))
    ix = lump.index.get((pos(x), 0))
    it = lump.index.get((pos(y), 0))
    if ix is None or it is None:
        return None
    T = lump.T
    src = T[ix].toarray().ravel()
    p_to = T[:, it].toarray().ravel()
    p_xy = float(T[ix, it])
    tgt = it if omega.contains(y, g) else None
    return _System(T, lump.level, allowed, src, p_xy, p_to, tgt, x == y,
                   f"lumped[L={L},{len(lump)} orbits]")


def _float_restricted(x, y, omega, mu, cfg) -> GreenValue:
    system = None
    if cfg.engine in ("auto", "lumped") and _is_lumpable(mu):
        system = _lumped_system(x, y, omega, mu, cfg)
    if system is None:
        if cfg.engine == "lumped":
            raise InputError("lumped engine needs a radial measure on a tree group and "
                             "collinear points")
        system = _explicit_system(x, y, omega, mu, cfg)
    R = cfg.working_radius
    if cfg.path_cap is not None:
        series = system.capped(R, cfg.path_cap)
        return _diagnose(series[-3:] if cfg.diagnostics else series[-2:], R, cfg.path_cap,
                         cfg.tol, system.method)
    radii = [r for r in (R - 2, R - 1, R) if r >= 0] if cfg.diagnostics else [R]
    values = [system.solve(r) for r in radii]
    gv = _diagnose(values, R, None, cfg.tol, system.method)
    _check_transience(gv, values, x, y, mu, cfg)
    return gv


def _check_transience(gv, values, x, y, mu, cfg):
    """Increments that grow once the region comfortably holds both points."""
    if len(values) < 3 or not cfg.diagnostics:
        return
    group = mu.group
    inc1, inc2 = values[1] - values[0], values[2] - values[1]
    margin = cfg.working_radius - 2 - max(len(x), len(y), group.distance(x, y))
    if margin >= 2 * max(1, _support_radius(mu)) and inc1 > 0 and inc2 >= inc1 and inc2 > cfg.tol * values[2]:
        raise DivergenceError(
            f"increments not decaying ({inc1:.3g} -> {inc2:.3g}) at R_w={cfg.working_radius}; "
            "the Green function looks infinite for this measure")


# --------------------------------------------------------------- exact mode
def _common_denominator(mu: Measure):
    items = [(s, Fraction(w)) for s, w in mu.weights.items()]
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (w.denominator for _, w in items), 1)
    return den, [(s, int(w * den)) for s, w in items]


def exact_path_masses(x: Element, mu: Measure, N: int, targets: Iterable[Element] | None = None,
                      omega: Domain | None = None, region=None) -> dict[Element, list[Fraction]]:
    """Exact masses of paths of each length ``0..N`` from ``x`` to each target.

    Intermediate points must lie in ``omega`` (and in ``region`` when given,
    a predicate on elements).  The endpoint itself is exempt, as in the
    definition of the restricted Green function.  States that cannot reach
    any target in the remaining steps are pruned.
    """
    g = mu.group
    if N > EXACT_PATH_CAP:
        raise ResourceError(f"exact path cap {N} exceeds {EXACT_PATH_CAP}")
    if len(mu) > EXACT_SUPPORT_CAP:
        raise ResourceError(f"exact mode support {len(mu)} exceeds {EXACT_SUPPORT_CAP}")
    den, items = _common_denominator(mu)
    D = max(len(s) for s, _ in items) if items else 0
    tlist = list(dict.fromkeys(targets)) if targets is not None else None
    out: dict[Element, list[Fraction]] = {}
    cur = {x: 1}
    mul = g.multiply
    dist = g.distance
    memo_ok: dict[Element, bool] = {}

    def ok(v):
        r = memo_ok.get(v)
        if r is None:
            r = (omega is None or omega.contains(v, g)) and (region is None or region(v))
            memo_ok[v] = r
        return r

    def record(step, state):
        scale = Fraction(1, den ** step)
        for t in (tlist if tlist is not None else state):
            c = state.get(t)
            if c:
                out.setdefault(t, [Fraction(0)] * (N + 1))[step] = c * scale

    record(0, cur)
    for step in range(1, N + 1):
        nxt: dict[Element, int] = {}
        for v, c in cur.items():
            for s, w in items:
                u = mul(v, s)
                nxt[u] = nxt.get(u, 0) + c * w
        record(step, nxt)
        if step == N:
            break
        left = N - step
        cur = {}
        for u, c in nxt.items():
            if not ok(u):
                continue
            if tlist is not None and D * left < min(dist(u, t) for t in tlist):
                continue
            cur[u] = c
    for t in (tlist or ()):
        out.setdefault(t, [Fraction(0)] * (N + 1))
    return out


def _region_predicate(mu, x, y, cfg):
    g = mu.group
    R = cfg.working_radius
    c = cfg.center
    if c == "tube":
        core = g.geodesic(x, y)
        return lambda v: min(g.distance(v, p) for p in core) <= R
    center = {"origin": (), "source": x, "target": y}.get(c) if isinstance(c, str) else g.reduce(c)
    return lambda v: g.distance(center, v) <= R


def _exact_restricted(x, y, omega, mu, cfg) -> GreenValue:
    g = mu.group
    if cfg.path_cap is not None:
        N = cfg.path_cap
        masses = exact_path_masses(x, mu, N, [y], omega, _region_predicate(mu, x, y, cfg))[y]
        cum = []
        acc = Fraction(0)
        for m in masses:
            acc += m
            cum.append(acc)
        gv = _diagnose(cum[-3:] if len(cum) >= 3 else cum, cfg.working_radius, N, cfg.tol,
                       "exact-paths", exact=cum[-1])
        return gv
    region = _explicit_region(mu, x, y, cfg)
    radii = [r for r in (cfg.working_radius - 2, cfg.working_radius - 1, cfg.working_radius)
             if r >= 0] if cfg.diagnostics else [cfg.working_radius]
    vals = [exact_restricted_solve(x, y, omega, mu, region, r) for r in radii]
    return _diagnose(vals, cfg.working_radius, None, cfg.tol,
                     f"exact-solve[{len(region)} states]", exact=vals[-1])


def exact_restricted_solve(x, y, omega: Domain, mu: Measure, region: Region, radius=None) -> Fraction:
    """``G(x, y; omega)`` exactly, paths confined to ``region`` (levels ``<= radius``)."""
    g = mu.group
    radius = region.radius if radius is None else radius
    V = [v for v, lv in zip(region.elements, region.level)
         if lv <= radius and omega.contains(v, g)]
    index = {v: i for i, v in enumerate(V)}
    items = [(s, Fraction(w)) for s, w in mu.weights.items()]
    mul = g.multiply
    inv = g.invert

    def row(v):
        r = {}
        for s, w in items:
            j = index.get(mul(v, s))
            if j is not None:
                r[j] = r.get(j, 0) + w
        return r

    y_in = y in index
    rows = [row(v) for v in V]
    if y_in:
        b = [Fraction(int(v == y)) for v in V]
    else:
        b = [Fraction(mu(mul(inv(v), y))) for v in V]
    k = exact_solve(rows, b) if V else []
    val = Fraction(int(x == y))
    for j, w in row(x).items():
        val += w * k[j]
    if not y_in:
        val += Fraction(mu(mul(inv(x), y)))
    return val


# ------------------------------------------------------------- public API
def _norm(group: Group, g) -> Element:
    if isinstance(g, str):
        return group.parse(g)
    return group.reduce(tuple(g))


def green_restricted(x, y, omega: Domain, mu: Measure, cfg: GreenConfig = GreenConfig()) -> GreenValue:
    """``G(x, y; omega)``: paths whose intermediate points stay in ``omega``."""
    g = mu.group
    x, y = _norm(g, x), _norm(g, y)
    if cfg.mode == "rational":
        if not mu.exact:
            mu = mu.to_exact()
        return _exact_restricted(x, y, omega, mu, cfg)
    return _float_restricted(x, y, omega, mu, cfg)


def green(x, y, mu: Measure, cfg: GreenConfig = GreenConfig()) -> GreenValue:
    """``G(x, y) = sum_n mu^n(x^-1 y)``, as a truncated lower bound."""
    return green_restricted(x, y, Domain.full(), mu, cfg)


def first_visit(x, y, mu: Measure, cfg: GreenConfig = GreenConfig()) -> GreenValue:
    """``F(x, y) = G(x, y; {y}^c)``; for ``x = y`` the first-return mass."""
    g = mu.group
    y = _norm(g, y)
    x = _norm(g, x)
    if x == y:
        # first return: paths of length >= 1, so drop the empty path
        gv = green_restricted(x, y, Domain.point_complement(y), mu, cfg)
        ex = gv.exact - 1 if gv.exact is not None else None
        return replace(gv, value=gv.value - 1.0 if ex is None else float(ex), exact=ex)
    return green_restricted(x, y, Domain.point_complement(y), mu, cfg)


@dataclass(frozen=True)
class DecompositionResidual:
    first_visit: object
    last_visit: object

    @property
    def max(self):
        return max(self.first_visit, self.last_visit)


def decomposition_check(x, y, A: Iterable[Element], omega: Domain, mu: Measure,
                        cfg: GreenConfig = GreenConfig(mode="rational")) -> DecompositionResidual:
    """Residuals of the first- and last-visit decompositions through ``A``.

    ``omega`` is realized inside the working region as an explicit finite
    set; ``A`` must avoid ``x`` and ``y``.
    """
    g = mu.group
    x, y = _norm(g, x), _norm(g, y)
    A = {_norm(g, a) for a in A}
    if x in A or y in A:
        raise InputError("decomposition_check needs x, y outside A")
    exact = cfg.mode == "rational"
    if exact and not mu.exact:
        mu = mu.to_exact()
    region = _explicit_region(mu, x, y, cfg)
    om = {v for v in region.elements if omega.contains(v, g)}
    W = Domain.explicit(om)
    WA = Domain.explicit(om - A)
    AW = sorted(A & om)

    if exact:
        def G(u, v, dom):
            return exact_restricted_solve(u, v, dom, mu, region)
    else:
        fcfg = cfg.with_(diagnostics=False)

        def G(u, v, dom):
            return green_restricted(u, v, dom, mu, fcfg).value
    lhs = G(x, y, W)
    avoid = G(x, y, WA)
    first = avoid + sum((G(x, a, WA) * G(a, y, W) for a in AW), Fraction(0) if exact else 0.0)
    last = avoid + sum((G(x, a, W) * G(a, y, WA) for a in AW), Fraction(0) if exact else 0.0)
    return DecompositionResidual(abs(lhs - first), abs(lhs - last))


@dataclass(frozen=True)
class MartinValue:
    value: float
    rel_error: float
    numerator: GreenValue
    denominator: GreenValue


def martin_kernel(z, y, mu: Measure, cfg: GreenConfig = GreenConfig()) -> MartinValue:
    """``K_y(z) = G(z, y) / G(e, y)`` with a relative error from the tails."""
    g = mu.group
    num = green(z, y, mu, cfg)
    den = green((), y, mu, cfg)
    if den.value < DENOMINATOR_FLOOR:
        raise InstabilityError(f"G(e, {g.format(_norm(g, y))}) = {den.value:.3g} is below "
                               f"the floor {DENOMINATOR_FLOOR}")
    rel = 0.0
    if num.value > 0:
        rel += num.tail_estimate / num.value
    rel += den.tail_estimate / den.value
    return MartinValue(num.value / den.value, rel, num, den)


# ------------------------------------------------------------ spectral radius
@dataclass(frozen=True)
class SpectralEstimate:
    """Two estimators of the spectral radius.

    ``even_return`` is ``p^n(e, e)^(1/n)`` at the largest even ``n`` used;
    ``power`` is the top eigenvalue of the weight operator on the working
    ball (a lower bound of the norm).  ``extrapolated`` refits the
    even-return sequence with its ``n^(-3/2)`` correction.
    """

    even_return: float
    power: float | None
    gap: float | None
    n: int
    R_w: int
    symmetric: bool
    power_upper: float | None = None
    extrapolated: float | None = None
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("even_return", "power", "gap", "n", "R_w",
                                               "symmetric", "power_upper", "extrapolated")} | \
            {"flags": list(self.flags)}


def return_log_series(mu: Measure, n_max: int, target: Element = ()) -> np.ndarray:
    """``log p^n(e, target)`` for ``n = 0..n_max`` (``-inf`` when zero).

    Radial measures on trees use the exact radial chain; otherwise a pruned
    float convolution on the explicit support is used.
    """
    g = mu.group
    target = _norm(g, target)
    if _is_lumpable(mu):
        prof = [float(w) for w in mu.radial_profile()]
        return radial_return_series(g.degree, prof, n_max, len(target))[1]
    items = [(s, float(w)) for s, w in mu.weights.items()]
    D = max((len(s) for s, _ in items), default=0)
    out = np.full(n_max + 1, -np.inf)
    cur = {(): 1.0}
    log_scale = 0.0
    mul = g.multiply
    for n in range(n_max + 1):
        v = cur.get(target, 0.0)
        if v > 0:
            out[n] = log_scale + math.log(v)
        if n == n_max:
            break
        nxt: dict = {}
        left = n_max - n - 1
        for u, c in cur.items():
            for s, w in items:
                h = mul(u, s)
                if g.distance(h, target) <= D * left:
                    nxt[h] = nxt.get(h, 0.0) + c * w
        if len(nxt) > g.ball_cap:
            raise ResourceError(f"return series state space exceeds the cap {g.ball_cap}")
        tot = math.fsum(nxt.values())
        if tot == 0:
            break
        cur = {h: c / tot for h, c in nxt.items()}
        log_scale += math.log(tot)
    return out


def _richardson_root(logp: np.ndarray) -> float | None:
    """Limit of ``log p^{n+2}/p^n``-type ratios fitted as ``L + a/n + b/n^2``."""
    ns = np.flatnonzero(np.isfinite(logp))
    if len(ns) < 8:
        return None
    step = int(np.min(np.diff(ns)))
    ns = ns[ns + step <= ns[-1]]
    ns = ns[np.isfinite(logp[ns + step])]
    tail = ns[len(ns) * 3 // 4:]
    if len(tail) < 3:
        return None
    r = (logp[tail + step] - logp[tail]) / step
    X = np.column_stack([np.ones(len(tail)), 1.0 / tail, 1.0 / tail ** 2])
    coef, *_ = np.linalg.lstsq(X, r, rcond=None)
    return float(math.exp(coef[0]))


def spectral_radius(mu: Measure, cfg: GreenConfig = GreenConfig(working_radius=14),
                    n: int | None = None) -> SpectralEstimate:
    """Even-return root and working-ball power iteration.

    ``n`` is the path length for the even-return estimator (default 4000
    on the radial chain, 20 otherwise).
    """
    g = mu.group
    lump = _is_lumpable(mu)
    if n is None:
        n = 4000 if lump else 20
    n -= n % 2
    symmetric = mu.radial_profile() is not None or mu.check_symmetric()
    flags = []
    logp = return_log_series(mu, n)
    if not np.isfinite(logp[n]):
        raise InputError("no return to e at the chosen length; is the measure admissible?")
    even = math.exp(logp[n] / n)
    extra = _richardson_root(logp[: n + 1])
    power = upper = gap = None
    if symmetric:
        R = cfg.working_radius
        if lump:
            prof = [float(w) for w in mu.radial_profile()]
            S = radial_lump(g.degree, prof, R).symmetric_T()
        else:
            region = Region(g, [()], R)
            S = _explicit_matrix(mu, region)
        power, upper = power_iteration(S)
        gap = abs(even - power) / max(even, power)
    else:
        flags.append("non-symmetric measure: power iteration skipped")
    return SpectralEstimate(even, power, gap, n, cfg.working_radius, symmetric,
                            upper, extra, tuple(flags))


# ------------------------------------------------------------------ Harnack
def harnack_constant(mu: Measure, max_steps: int = 12) -> float:
    """``1 / min_s w(s)`` where ``w(s)`` is the best weight of a support path to ``s``.

    Each generator ``s`` is realized by the heaviest product of support
    elements (Dijkstra on ``-log`` weights), so ``G(x, z) >= G(xs, z) / C``.
    """
    g = mu.group
    items = [(s, float(w)) for s, w in mu.weights.items() if w > 0]
    window = 2 + 2 * max((len(s) for s, _ in items), default=0)
    worst = math.inf
    for s in range(g.n_letters):
        target = (s,)
        best = {(): 0.0}
        heap = [(0.0, 0, ())]
        found = None
        while heap:
            cost, steps, v = heapq.heappop(heap)
            if v == target:
                found = cost
                break
            if cost > best.get(v, math.inf) or steps >= max_steps:
                continue
            for h, w in items:
                u = g.multiply(v, h)
                if len(u) > window:
                    continue
                c = cost - math.log(w)
                if c < best.get(u, math.inf):
                    best[u] = c
                    heapq.heappush(heap, (c, steps + 1, u))
        if found is None:
            raise AdmissibilityError(f"no positive-weight path realizes generator "
                                     f"{g.symbols[s]} within {max_steps} steps")
        worst = min(worst, math.exp(-found))
    return 1.0 / worst


@dataclass(frozen=True)
class HarnackCheck:
    holds: bool
    ratio_low: float
    ratio_high: float
    C: float
    d: int


def harnack_check(x, y, z, mu: Measure, cfg: GreenConfig = GreenConfig(), C: float | None = None) -> HarnackCheck:
    """Check ``C^-d <= G(x,z)/G(y,z) <= C^d`` using lower bounds plus tails."""
    g = mu.group
    x, y, z = _norm(g, x), _norm(g, y), _norm(g, z)
    C = harnack_constant(mu) if C is None else C
    d = g.distance(x, y)
    gx = green(x, z, mu, cfg)
    gy = green(y, z, mu, cfg)
    hi_x = gx.upper_estimate
    hi_y = gy.upper_estimate
    lo = gx.value / hi_y if hi_y > 0 else 0.0
    hi = hi_x / gy.value if gy.value > 0 else math.inf
    bound_lo, bound_hi = C ** (-d), C ** d
    tol = 1e-12
    holds = hi >= bound_lo * (1 - tol) and lo <= bound_hi * (1 + tol)
    # a certified violation needs the whole interval outside the bounds
    return HarnackCheck(holds, lo, hi, C, d)


# ------------------------------------------------------- super-multiplicativity
@dataclass(frozen=True)
class SupermultCheck:
    holds: bool
    lhs: Fraction
    rhs: Fraction


def supermult_check(x, y, z, mu: Measure, n: int, m: int) -> SupermultCheck:
    """Exact capped form ``F_{<=n}(x,y) G_{<=m}(y,z) <= G_{<=n+m}(x,z)``."""
    g = mu.group
    x, y, z = _norm(g, x), _norm(g, y), _norm(g, z)
    if n + m > EXACT_PATH_CAP:
        raise ResourceError(f"caps n+m = {n + m} exceed the rational-mode limit {EXACT_PATH_CAP}")
    emu = mu.to_exact()
    masses = exact_path_masses(x, emu, n, [y], Domain.point_complement(y))[y]
    # F(x, x) is the first-return mass, so the empty path is left out
    F = sum(masses[1:] if x == y else masses, Fraction(0))
    Gyz = sum(exact_path_masses(y, emu, m, [z])[z], Fraction(0))
    Gxz = sum(exact_path_masses(x, emu, n + m, [z])[z], Fraction(0))
    lhs = F * Gyz
    return SupermultCheck(lhs <= Gxz, lhs, Gxz)


# ------------------------------------------------------------ operator split
def operator_split_norms(mu: Measure, n: int, cfg: GreenConfig = GreenConfig()) -> tuple[float, float]:
    """Norms of the small-jump part ``A_n`` (``|s| <= n/2``) and the rest ``B_n``.

    Both are top eigenvalues of the restricted operators on ``ball(e, R_w)``.
    """
    g = mu.group
    R = cfg.working_radius
    if _is_lumpable(mu):
        prof = [float(w) for w in mu.radial_profile()]
        small = [w if 2 * d <= n else 0.0 for d, w in enumerate(prof)]
        big = [w if 2 * d > n else 0.0 for d, w in enumerate(prof)]
        a = power_iteration(radial_lump(g.degree, small, R).symmetric_T())[0] if any(small) else 0.0
        b = power_iteration(radial_lump(g.degree, big, R).symmetric_T())[0] if any(big) else 0.0
        return a, b
    region = Region(g, [()], R)
    parts = []
    for keep in (lambda s: 2 * len(s) <= n, lambda s: 2 * len(s) > n):
        w = {s: v for s, v in mu.weights.items() if keep(s)}
        if not w:
            parts.append(0.0)
            continue
        sub = Measure(g, w)
        parts.append(power_iteration(_explicit_matrix(sub, region))[0])
    return parts[0], parts[1]


# ------------------------------------------------------------- r-scan (anc)
def anc_scan(mu: Measure, r_values: Iterable[float], cfg: GreenConfig = GreenConfig()) -> list[dict]:
    """Empirical check of finiteness of the Green function of ``r mu``.

    For each ``r`` report whether ``G(e, e)`` for ``r mu`` could be solved
    with decaying increments.  No radius of convergence is claimed.
    """
    rows = []
    for r in r_values:
        try:
            gv = green((), (), mu.scale(r), cfg)
            ok = math.isfinite(gv.tail_estimate)
            rows.append({"r": r, "finite": ok, "value": gv.value, "increment_last": gv.increment_last})
        except DivergenceError as exc:
            rows.append({"r": r, "finite": False, "value": math.inf, "error": str(exc)})
    return rows
