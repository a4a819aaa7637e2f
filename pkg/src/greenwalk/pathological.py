"""Measures with superexponential tails that break the Ancona inequality.

The measure is ``mu = nu + sum_i exp(-r_i n_i) mu_i`` where ``nu`` is a
symmetric finitely supported base and ``mu_i`` a symmetric probability
supported in ``ball(e, n_i)``.  Two shapes of ``mu_i`` are built:

``prop``
    ``(delta_{z_i} + delta_{z_i^-1})/2`` with ``|z_i| = n_i``.  The direct
    jump makes ``G'(e, z_i)`` much larger than ``G'(e, y_i) G'(y_i, z_i)``
    for the midpoint ``y_i``.
``thm``
    jumps to ``y_i`` at even levels and to ``y_i`` or ``z y_i`` with equal
    weights at odd levels, so that ``G'(e, z y_i)/G'(e, y_i)`` oscillates.

All certificates are closed-form evaluations of the template bounds; no
Green function is computed here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, InvariantError, ParameterError
from .groups import Element, Group
from .lumped import radial_return_series
from .measures import Measure
from .templates import (Bound, TemplateUniverse, green_upper_bound, sum_all_bound,
                        sum_max_ge, sum_max_lt_len_ge)


def _rho_lower_bound(nu: Measure | None, n: int = 400) -> float | None:
    """``p^{2n}(e, e)^(1/2n)``, a lower bound of the spectral radius of a symmetric ``nu``."""
    if nu is None:
        return None
    g = nu.group
    prof = nu.radial_profile() if g.is_tree else None
    if prof is None:
        return None
    logp = radial_return_series(g.degree, [float(w) for w in prof], 2 * n)[1]
    return math.exp(logp[2 * n] / (2 * n)) if np.isfinite(logp[2 * n]) else None


def solve_parameters(nu: Measure | None, r_limit: float, depth: int, rho_bound: float,
                     even: bool = True, s0_rule: str = "extend") -> TemplateUniverse:
    """Generate a valid universe from the rate rule ``r_i = r_limit (1 + 2^-i)``.

    ``s_{i+1}`` is the midpoint of ``(r_{i+1}, r_i)``, clipped below
    ``2 r_{i+1}``.  ``n_i`` is the smallest (even, if ``even``) integer such
    that the growth condition holds against ``n_{i-1}`` and the summability
    term of level ``i`` stays within the budget ``2^-(i+2) (1 - rho e^{r_0})``;
    the budgets add up to less than the required ``(1 - rho e^{r_0})/2``.

    ``nu`` (optional) is only used to reject a ``rho_bound`` below a certified
    lower bound of its spectral radius.

    ``s0_rule="extend"`` applies the same midpoint rule one index down,
    ``s_0 = (r_{-1} + r_0)/2``, provided ``rho e^{s_0} < 1``; ``"r0"`` uses
    ``s_0 = r_0``.

    Raises
    ------
    ParameterError
        if ``rho_bound e^{r_0} >= 1``, or ``rho_bound`` is below a certified
        lower bound of the spectral radius of ``nu``.
    """
    if r_limit <= 0 or depth < 0:
        raise ParameterError("need r_limit > 0 and depth >= 0")
    if not 0 < rho_bound < 1:
        raise ParameterError(f"rho_bound={rho_bound} must lie in (0, 1)")
    r = [r_limit * (1 + 2.0 ** -i) for i in range(depth + 1)]
    if rho_bound * math.exp(r[0]) >= 1:
        raise ParameterError(f"e^r0 * rho_bound = {rho_bound * math.exp(r[0]):.6g} >= 1 for r0 = {r[0]}; "
                             "no admissible rate sequence")
    lb = _rho_lower_bound(nu)
    if lb is not None and rho_bound < lb:
        raise ParameterError(f"rho_bound={rho_bound} is below the certified lower bound {lb:.6g} "
                             "of the spectral radius of the base measure")
    s = [r[0]]
    if s0_rule == "extend":
        s0 = 0.5 * (r_limit * 3.0 + r[0])
        s0 = min(s0, 2 * r[0] * (1 - 1e-12))
        if rho_bound * math.exp(s0) < 1:
            s[0] = s0
    elif s0_rule != "r0":
        raise InputError(f"unknown s0_rule {s0_rule!r}")
    for i in range(depth):
        s.append(min(0.5 * (r[i] + r[i + 1]), 2 * r[i + 1] * (1 - 1e-12)))
    K = 1.0 / (1.0 - rho_bound * math.exp(r[0]))
    step = 2 if even else 1
    n: list[int] = []
    for i in range(depth):
        gap = r[i] - s[i + 1]
        need = math.log(K * 2.0 ** (i + 2)) / gap
        m = max(1, math.ceil(need))
        if n:
            m = max(m, n[-1] + 1, math.ceil((r[i - 1] * n[-1] + i) / r[i]))
        if even and m % 2:
            m += 1

        def ok(m):
            if math.exp(-gap * m) > 2.0 ** -(i + 2) / K:
                return False
            return not n or r[i] * m >= r[i - 1] * n[-1] + i
        while not ok(m):
            m += step
        n.append(m)
    return TemplateUniverse(rho_bound, tuple(r), tuple(n), tuple(s), r_limit).validate()


# ------------------------------------------------------------------- spec
@dataclass(frozen=True)
class PathoSpec:
    """A realized counterexample measure.

    ``y[i]`` and ``z[i]`` are the points of level ``i``: in ``prop`` mode
    ``z_i`` (length ``n_i``) and its midpoint ``y_i``; in ``thm`` mode
    ``y_i`` and ``z y_i``.
    """

    base: Measure
    universe: TemplateUniverse
    mode: str
    atoms: tuple
    y: tuple
    z: tuple
    z_marker: Element | None = None
    unsafe: bool = False
    notes: tuple = ()

    @property
    def group(self) -> Group:
        return self.base.group

    @property
    def depth(self) -> int:
        return self.universe.depth


def _pair(group: Group, g: Element) -> Measure:
    gi = group.invert(g)
    w = {g: 0.5}
    w[gi] = w.get(gi, 0.0) + 0.5
    return Measure(group, w, symmetric=True)


def _check_atoms(spec: PathoSpec):
    g = spec.group
    for i, (m, n) in enumerate(zip(spec.atoms, spec.universe.n)):
        if abs(float(m.total_mass) - 1.0) > 1e-15:
            raise InvariantError(f"atom of level {i} has mass {float(m.total_mass)}, not 1")
        if not m.check_symmetric():
            raise InvariantError(f"atom of level {i} is not symmetric")
        if m.support_radius > n:
            raise InvariantError(f"atom of level {i} leaves ball(e, n_{i} = {n})")


def _base_ok(nu: Measure):
    if not nu.check_symmetric():
        raise InvariantError("base measure must be symmetric")
    if float(nu.total_mass) < 1 - 1e-15:
        raise InvariantError("base measure must have mass >= 1 so that G' <= G")


def prop_spec(nu: Measure, U: TemplateUniverse, generator: str = "a",
              unsafe: bool = False) -> PathoSpec:
    """``mu_i = (delta_{z_i} + delta_{z_i^-1})/2`` with ``z_i = a^{n_i}``, ``y_i = a^{n_i/2}``."""
    if not unsafe:
        U.validate()
    _base_ok(nu)
    g = nu.group
    a = g.parse(generator)
    atoms, ys, zs = [], [], []
    for i, n in enumerate(U.n):
        if n % 2:
            raise InvariantError(f"n_{i} = {n} must be even in prop mode")
        z = g.power(a, n)
        if len(z) != n:
            raise InputError(f"{generator}^{n} is not geodesic of length {n}")
        atoms.append(_pair(g, z))
        zs.append(z)
        ys.append(g.power(a, n // 2))
    spec = PathoSpec(nu, U, "prop", tuple(atoms), tuple(ys), tuple(zs), None, unsafe)
    _check_atoms(spec)
    return spec


def thm_spec(nu: Measure, U: TemplateUniverse, z_marker, generator: str = "a",
             unsafe: bool = False) -> PathoSpec:
    """Oscillating construction with ``|y_i| = floor(r_i n_i / s'_i)``.

    ``s'_i`` is the midpoint of ``(r_i, s_i)``.  Odd levels put weight 1/4
    on ``y_i, z y_i`` and their inverses; when ``z y_i`` leaves
    ``ball(e, n_i)`` the level uses ``delta_e`` instead.
    """
    if not unsafe:
        U.validate()
    _base_ok(nu)
    g = nu.group
    z = g.parse(z_marker) if isinstance(z_marker, str) else g.reduce(tuple(z_marker))
    a = g.parse(generator)
    atoms, ys, zys, notes = [], [], [], []
    for i, n in enumerate(U.n):
        sp_ = 0.5 * (U.r[i] + U.s[i])
        ly = int(math.floor(U.r[i] * n / sp_))
        y = g.power(a, ly)
        zy = g.multiply(z, y)
        ys.append(y)
        zys.append(zy)
        if i % 2 == 0:
            atoms.append(_pair(g, y))
        elif len(zy) <= n and len(y) <= n:
            w: dict = {}
            for h in (y, zy, g.invert(y), g.invert(zy)):
                w[h] = w.get(h, 0.0) + 0.25
            atoms.append(Measure(g, w, symmetric=True))
        else:
            atoms.append(Measure(g, {(): 1.0}, symmetric=True))
            notes.append(f"level {i}: z y_i leaves ball(e, n_i); delta_e used")
    spec = PathoSpec(nu, U, "thm", tuple(atoms), tuple(ys), tuple(zys), z, unsafe, tuple(notes))
    _check_atoms(spec)
    return spec


def assemble(spec: PathoSpec) -> tuple[Measure, Measure]:
    """``(mu, mu')`` with ``mu = nu + sum_i e^{-r_i n_i} mu_i`` and ``mu' = mu/mu(Gamma)``."""
    g = spec.group
    U = spec.universe
    w: dict = {h: float(v) for h, v in spec.base.items()}
    for i, m in enumerate(spec.atoms):
        c = U.jump_weight(i)
        for h, v in m.items():
            w[h] = w.get(h, 0.0) + c * float(v)
    mu = Measure(g, w, symmetric=True, label=f"patho-{spec.mode}")
    total = math.fsum(w.values())
    mup = Measure(g, {h: v / total for h, v in w.items()}, symmetric=True,
                  label=f"patho-{spec.mode}-normalized")
    return mu, mup


def total_mass(spec: PathoSpec) -> float:
    U = spec.universe
    return math.fsum([float(spec.base.total_mass)] + [U.jump_weight(i) for i in range(U.depth)])


# ---------------------------------------------------------- certificates
def _row(level, kind, b: Bound | None = None, value=None, formula="", constant=None, exponent=None):
    return {"level": level, "kind": kind,
            "formula": b.formula if b is not None else formula,
            "constant": b.constant if b is not None else constant,
            "exponent": b.exponent if b is not None else exponent,
            "value": b.value if b is not None else value}


@dataclass(frozen=True)
class ViolationCertificate:
    """``lower <= G'(e, z_i)`` and ``upper >= G'(e, y_i) G'(y_i, z_i)``."""

    level: int
    lower: float
    upper: float
    ratio: float
    rows: tuple = ()

    def to_dict(self) -> dict:
        return {"level": self.level, "lower": self.lower, "upper": self.upper,
                "ratio": self.ratio, "rows": list(self.rows)}


def certify_violation(spec: PathoSpec, i: int) -> ViolationCertificate:
    """Certified lower bound of ``G'(e, z_i) / (G'(e, y_i) G'(y_i, z_i))``.

    The lower bound is the direct jump ``mu'(z_i)``.  The upper bound uses
    ``G' <= G`` (``mu' <= mu`` since ``mu(Gamma) >= 1``) and the template
    bound at distance ``n_i/2`` for both factors.
    """
    if spec.mode != "prop":
        raise InputError("certify_violation needs a prop-mode spec")
    U = spec.universe
    if not 0 <= i < U.depth:
        raise InputError(f"level {i} outside 0..{U.depth - 1}")
    U.validate()
    mass = total_mass(spec)
    z = spec.z[i]
    direct = U.jump_weight(i) * float(spec.atoms[i](z))
    lower = direct / mass
    half = U.n[i] // 2
    if len(spec.y[i]) != half or spec.group.distance(spec.y[i], z) != half:
        raise InvariantError(f"y_{i} is not the midpoint of [e, z_{i}]")
    b = green_upper_bound(half, i, U)
    upper = b.value * b.value
    rows = (_row(i, "lower", value=lower, formula="mu'(z_i) = e^{-r_i n_i}/(2 mu(Gamma))",
                 constant=1.0 / (2 * mass), exponent=U.r[i] * U.n[i]),
            _row(i, "upper_factor", sum_max_ge(i, U)),
            _row(i, "upper_factor", sum_max_lt_len_ge(i, half, U)),
            _row(i, "upper", value=upper, formula="green_upper_bound(n_i/2, i)^2",
                 constant=b.constant ** 2, exponent=2 * b.exponent))
    return ViolationCertificate(i, lower, upper, lower / upper, rows)


def phi_geodesic_defect(z, i: int, spec: PathoSpec) -> int:
    """``min |u| + |v|`` over ``z y_i = u y_i^{+-1} v``.

    Taking ``u = z`` shows the minimum is at most ``|z|``, so an exhaustive
    scan of ``u`` over ``ball(e, |z| - 1)`` is exact.
    """
    g = spec.group
    z = g.parse(z) if isinstance(z, str) else g.reduce(tuple(z))
    y = spec.y[i]
    w = g.multiply(z, y)
    best = len(z)
    for c in (y, g.invert(y)):
        ci = g.invert(c)
        best = min(best, len(g.multiply(ci, w)), len(g.multiply(w, ci)))
    k = 0
    while k < best:
        for u in g.sphere((), k):
            ui = g.invert(u)
            for c in (y, g.invert(y)):
                v = g.mul(g.invert(c), ui, w)
                best = min(best, k + len(v))
        k += 1
    return best


@dataclass(frozen=True)
class LevelBounds:
    level: int
    parity: str
    lower: float
    upper: float
    phi: int | None = None
    sigma: tuple = ()


@dataclass(frozen=True)
class OscillationReport:
    levels: tuple
    verdict: str
    rows: tuple
    notes: tuple

    @property
    def certified(self) -> bool:
        return self.verdict == "oscillation certified"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "notes": list(self.notes), "rows": list(self.rows),
                "levels": [{"level": b.level, "parity": b.parity, "lower": b.lower,
                            "upper": b.upper, "phi": b.phi, "sigma": list(b.sigma)}
                           for b in self.levels]}


def oscillation_report(spec: PathoSpec, depth: int | None = None) -> OscillationReport:
    """Per-level certified bounds for ``G'(e, z y_i) / G'(e, y_i)``.

    Odd levels: both points are reached by a direct jump, so
    ``mu'(z y_i)/UB(e, y_i) <= ratio <= UB(e, z y_i)/mu'(y_i)``.  Even
    levels: ``G(e, z y_i)`` is split by the trajectories' jumps into four
    families (a jump above level ``i``, two level-``i`` jumps, only lower
    jumps, exactly one level-``i`` jump) and each family is bounded by the
    template closed forms.  Bounds are for the un-normalized ``mu`` and the
    lower bounds for ``mu'``; ``G' <= G`` links them.
    """
    if spec.mode != "thm":
        raise InputError("oscillation_report needs a thm-mode spec")
    U = spec.universe
    I = U.depth if depth is None else min(depth, U.depth)
    mass = total_mass(spec)
    S = sum_all_bound(U)
    g = spec.group
    z = spec.z_marker
    levels, rows, notes = [], [], list(spec.notes)
    notes.append("bounds use G' <= G for upper bounds and mu'(.) = mu(.)/mu(Gamma) for direct jumps")
    for i in range(I):
        y, zy = spec.y[i], spec.z[i]
        wi = U.jump_weight(i)
        muy = wi * float(spec.atoms[i](y)) / mass
        if i % 2 == 1:
            muzy = wi * float(spec.atoms[i](zy)) / mass
            if muy == 0 or muzy == 0:
                levels.append(LevelBounds(i, "odd", 0.0, math.inf))
                rows.append(_row(i, "odd_interval", value=None, formula="no direct jump at this level"))
                continue
            uy = green_upper_bound(len(y), i, U)
            uzy = green_upper_bound(len(zy), i, U)
            lo, hi = muzy / uy.value, uzy.value / muy
            levels.append(LevelBounds(i, "odd", lo, hi))
            rows += [_row(i, "odd_lower", value=lo, formula="mu'(z y_i)/green_upper_bound(|y_i|, i)"),
                     _row(i, "odd_upper", value=hi, formula="green_upper_bound(|z y_i|, i)/mu'(y_i)")]
        else:
            phi = phi_geodesic_defect(z, i, spec)
            s1 = sum_max_ge(i + 1, U) if i + 1 <= U.depth else Bound(0.0, 0.0)
            s2 = Bound(S ** 3 * wi * wi, S ** 3, "two level-i jumps: S^3 e^{-2 r_i n_i}",
                       2 * U.r[i] * U.n[i])
            s3 = sum_max_lt_len_ge(i, len(zy), U)
            half = sum_max_lt_len_ge(i, math.ceil(phi / 2), U)
            s4 = Bound(2 * half.value * wi * S, 2 * half.constant * S,
                       "one level-i jump: 2 S e^{-r_i n_i} sum_max_lt_len_ge(i, phi/2)",
                       U.s[i] * math.ceil(phi / 2) + U.r[i] * U.n[i])
            sig = (s1.value, s2.value, s3.value, s4.value)
            hi = math.fsum(sig) / muy if muy > 0 else math.inf
            levels.append(LevelBounds(i, "even", 0.0, hi, phi, sig))
            for name, b in zip(("sigma1", "sigma2", "sigma3", "sigma4"), (s1, s2, s3, s4)):
                rows.append(_row(i, name, b))
            rows.append(_row(i, "even_upper", value=hi, formula="(sigma1+...+sigma4)/mu'(y_i)"))
    odd = [b.lower for b in levels if b.parity == "odd" and b.lower > 0]
    even = [b.upper for b in levels if b.parity == "even"]
    if odd and even and max(even) < min(odd):
        verdict = "oscillation certified"
    else:
        verdict = "inconclusive at this depth"
    return OscillationReport(tuple(levels), verdict, tuple(rows), tuple(notes))
