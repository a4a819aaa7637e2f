"""Template calculus for measures of the form ``nu + sum_i exp(-r_i n_i) mu_i``.

A template ``(a_0, i_1, a_1, ..., i_l, a_l)`` stands for all trajectories
that make ``a_0`` steps of ``nu``, one jump of level ``i_1``, ``a_1`` steps
of ``nu`` and so on.  Its weight bounds the total mass of those
trajectories, and the closed forms below bound sums of weights over the
families that matter for Green function estimates.  Each bound returns its
fully evaluated constant alongside the value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

from .errors import DivergenceError, InputError, InvariantError, ResourceError

NO_JUMP = -math.inf


@dataclass(frozen=True)
class TemplateUniverse:
    """Parameters of the template calculus.

    Parameters
    ----------
    rho : float
        Upper bound for the spectral radius of the base measure.
    r : sequence of float
        Decreasing exponential weights; ``r[i]`` for realized levels
        ``i < depth``, optionally one more entry ``r[depth]``.
    n : sequence of int
        Increasing jump lengths, one per realized level.
    s : sequence of float, optional
        ``s[i+1]`` lies in ``(r[i+1], r[i])``; ``s[0]`` is the rate used
        for the jump-free family (defaults to ``r[0]``).  ``s`` may have
        ``depth + 1`` entries.
    r_limit : float, optional
        Limit of the ``r`` sequence, for reporting.
    """

    rho: float
    r: tuple
    n: tuple
    s: tuple = ()
    r_limit: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        s = tuple(float(v) for v in self.s)
        if not s:
            s = (self.r[0],) if self.r else ()
        object.__setattr__(self, "s", s)

    @property
    def depth(self) -> int:
        return len(self.n)

    @property
    def base_factor(self) -> float:
        """``1 / (1 - rho e^{r_0})``."""
        return 1.0 / (1.0 - self.rho * math.exp(self.r[0]))

    def jump_weight(self, i: int) -> float:
        return math.exp(-self.r[i] * self.n[i])

    def findings(self) -> list[str]:
        """All violated invariants, each naming the failing index."""
        out = []
        rho, r, s, n = self.rho, self.r, self.s, self.n
        I = self.depth
        if not 0 < rho < 1:
            out.append(f"rho={rho} must lie in (0, 1)")
        if len(r) < I:
            out.append(f"need r for every level: {len(r)} rates for depth {I}")
            return out
        if I == 0:
            return out
        for i, v in enumerate(r):
            if v <= 0:
                out.append(f"r[{i}]={v} must be positive")
        for i in range(len(r) - 1):
            if not r[i + 1] < r[i]:
                out.append(f"r is not decreasing at index {i + 1}: r[{i}]={r[i]}, r[{i + 1}]={r[i + 1]}")
        if not rho * math.exp(r[0]) < 1:
            out.append(f"e^r[0] * rho = {rho * math.exp(r[0]):.6g} must be < 1")
        if self.r_limit is not None and not all(v > self.r_limit for v in r):
            out.append("every r[i] must exceed r_limit")
        if len(s) < I + 1:
            out.append(f"need s[1..{I}] (got {len(s)} entries including s[0])")
        else:
            if not 0 < s[0] or not rho * math.exp(s[0]) < 1:
                out.append(f"s[0]={s[0]} must be positive with rho e^s[0] < 1")
            for i in range(I):
                lo = r[i + 1] if i + 1 < len(r) else 0.0
                if not lo < s[i + 1] < r[i]:
                    out.append(f"s[{i + 1}]={s[i + 1]} must lie in (r[{i + 1}], r[{i}]) = ({lo}, {r[i]})")
                if i + 1 < len(r) and not s[i + 1] < 2 * r[i + 1]:
                    out.append(f"s[{i + 1}]={s[i + 1]} must be < 2 r[{i + 1}]")
        for i, v in enumerate(n):
            if v <= 0:
                out.append(f"n[{i}]={v} must be positive")
        for i in range(I - 1):
            if not n[i + 1] > n[i]:
                out.append(f"n is not increasing at index {i + 1}")
            if not r[i + 1] * n[i + 1] >= r[i] * n[i] + i + 1:
                out.append(f"growth condition r[i+1] n[i+1] >= r[i] n[i] + i + 1 fails at index {i}: "
                           f"{r[i + 1] * n[i + 1]:.6g} < {r[i] * n[i] + i + 1:.6g}")
        if len(s) >= I + 1 and rho * math.exp(r[0]) < 1:
            total = self.base_factor * math.fsum(math.exp(-(r[i] - s[i + 1]) * n[i]) for i in range(I))
            if total > 0.5:
                worst = max(range(I), key=lambda i: math.exp(-(r[i] - s[i + 1]) * n[i]))
                out.append(f"summability condition fails: (1/(1 - rho e^r0)) sum exp(-(r_i - s_(i+1)) n_i) "
                           f"= {total:.6g} > 1/2 (largest term at index {worst})")
        return out

    def validate(self) -> "TemplateUniverse":
        f = self.findings()
        if f:
            raise InvariantError("; ".join(f))
        return self

    def to_dict(self) -> dict:
        return {"rho": self.rho, "r": list(self.r), "s": list(self.s), "n": list(self.n),
                "r_limit": self.r_limit}


@dataclass(frozen=True)
class Template:
    """``(a_0, i_1, a_1, ..., i_l, a_l)`` stored as ``a`` and ``levels``."""

    a: tuple
    levels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(int(v) for v in self.a))
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if len(self.a) != len(self.levels) + 1:
            raise InputError("a template has one more run length than jumps")
        if any(v < 0 for v in self.a) or any(v < 0 for v in self.levels):
            raise InputError("template entries must be nonnegative")

    @classmethod
    def from_entries(cls, entries: Sequence[int]) -> "Template":
        entries = list(entries)
        if len(entries) % 2 == 0:
            raise InputError("template entries alternate a_0, i_1, a_1, ..., a_l")
        return cls(tuple(entries[0::2]), tuple(entries[1::2]))

    def entries(self) -> tuple:
        out = [self.a[0]]
        for i, a in zip(self.levels, self.a[1:]):
            out += [i, a]
        return tuple(out)

    def concat(self, other: "Template") -> "Template":
        a = self.a[:-1] + (self.a[-1] + other.a[0],) + other.a[1:]
        return Template(a, self.levels + other.levels)

    __mul__ = concat


def log_weight(t: Template, U: TemplateUniverse) -> float:
    if any(i >= U.depth for i in t.levels):
        raise InputError(f"template uses a level beyond depth {U.depth}")
    return sum(t.a) * math.log(U.rho) - sum(U.r[i] * U.n[i] for i in t.levels)


def weight(t: Template, U: TemplateUniverse) -> float:
    """``rho^(sum a) prod exp(-r_i n_i)``."""
    if any(i >= U.depth for i in t.levels):
        raise InputError(f"template uses a level beyond depth {U.depth}")
    w = U.rho ** sum(t.a)
    for i in t.levels:
        w *= U.jump_weight(i)
    return w


def length(t: Template, U: TemplateUniverse) -> int:
    return sum(t.a) + sum(U.n[i] for i in t.levels)


def max_level(t: Template):
    return max(t.levels) if t.levels else NO_JUMP


# ------------------------------------------------------------- closed forms
@dataclass(frozen=True)
class Bound:
    """A closed-form bound ``value`` with its tracked constant."""

    value: float
    constant: float
    formula: str = ""
    exponent: float = 0.0

    def __float__(self):
        return self.value


def sum_all_bound(U: TemplateUniverse) -> float:
    """Sum of all template weights, summed as a geometric series in the jump count."""
    S = 1.0 / (1.0 - U.rho)
    q = S * math.fsum(U.jump_weight(i) for i in range(U.depth))
    if q >= 1:
        raise DivergenceError(f"geometric ratio {q:.6g} >= 1: the template sum diverges")
    return S / (1.0 - q)


def sum_max_ge(i: int, U: TemplateUniverse) -> Bound:
    """Bound for the sum over templates with a jump of level ``>= i``.

    ``value = S^2 sum_{j >= i} e^{-r_j n_j}`` and ``C = S^2 e/(e-1)`` so that
    ``value <= C e^{-r_i n_i}`` under the growth condition.
    """
    if not 0 <= i <= U.depth:
        raise InputError(f"level {i} outside 0..{U.depth}")
    S = sum_all_bound(U)
    C = S * S * math.e / (math.e - 1.0)
    if i == U.depth:
        return Bound(0.0, C, "sum_max_ge", math.inf)
    tail = math.fsum(U.jump_weight(j) for j in range(i, U.depth))
    return Bound(S * S * tail, C, "sum_max_ge", U.r[i] * U.n[i])


def _small_factor(i: int, U: TemplateUniverse) -> float:
    """``1/(1 - rho e^max(r_0, s_i))``; the maximum only matters at ``i = 0``."""
    x = U.rho * math.exp(max(U.r[0], U.s[i]))
    if x >= 1:
        raise InvariantError(f"rho e^s[{i}] = {x:.6g} >= 1")
    return 1.0 / (1.0 - x)


def sum_max_lt_len_ge(i: int, n: float, U: TemplateUniverse) -> Bound:
    """Bound for templates with all jumps of level ``< i`` and length ``>= n``.

    ``value = e^{-s_i n} K / (1 - g)`` with ``K = 1/(1 - rho e^{r_0})`` and
    ``g = K sum_{j < i} e^{-(r_j - s_{j+1}) n_j}``.
    """
    if not 0 <= i <= U.depth:
        raise InputError(f"level {i} outside 0..{U.depth}")
    if len(U.s) <= i:
        raise InputError(f"s[{i}] is not defined in this universe")
    K = _small_factor(i, U)
    g = U.base_factor * math.fsum(math.exp(-(U.r[j] - U.s[j + 1]) * U.n[j]) for j in range(i))
    if g >= 1:
        raise InvariantError(f"geometric ratio g = {g:.6g} >= 1 at level {i}")
    C = K / (1.0 - g)
    return Bound(math.exp(-U.s[i] * n) * C, C, "sum_max_lt_len_ge", U.s[i] * n)


def green_upper_bound(z_length: float, i: int, U: TemplateUniverse) -> Bound:
    """``G(e, z) <= sum_max_ge(i) + sum_max_lt_len_ge(i, |z|)``."""
    if not 0 <= i < U.depth:
        raise InputError(f"level {i} outside 0..{U.depth - 1}")
    a = sum_max_ge(i, U)
    b = sum_max_lt_len_ge(i, z_length, U)
    return Bound(a.value + b.value, max(a.constant, b.constant), "green_upper_bound",
                 min(a.exponent, b.exponent))


# -------------------------------------------------------------- enumeration
def enumerate_templates(U: TemplateUniverse, weight_floor: float,
                        cap: int = 2_000_000) -> Iterator[tuple[Template, float]]:
    """All templates with weight ``>= weight_floor``, depth-first.

    Raises
    ------
    ResourceError
        after ``cap`` templates.
    """
    if not weight_floor > 0:
        raise InputError("weight_floor must be > 0")
    lf = math.log(weight_floor)
    lr = math.log(U.rho)
    jumps = [U.r[i] * U.n[i] for i in range(U.depth)]
    count = 0

    def runs(prefix_a, prefix_l, logw):
        nonlocal count
        # extend the last run by k steps, then either stop or jump
        k = 0
        while True:
            lw = logw + k * lr
            if lw < lf:
                return
            a = prefix_a[:-1] + (prefix_a[-1] + k,)
            count += 1
            if count > cap:
                raise ResourceError(f"template stream exceeded the cap {cap}")
            yield Template(a, prefix_l), math.exp(lw)
            for i, c in enumerate(jumps):
                if lw - c >= lf:
                    yield from runs(a + (0,), prefix_l + (i,), lw - c)
            k += 1

    yield from runs((0,), (), 0.0)


@dataclass(frozen=True)
class TemplateClass:
    """Templates sharing jump sequence and total run length.

    They all have the same weight, length and max; there are
    ``C(total_a + l, l)`` of them.
    """

    levels: tuple
    total_a: int
    multiplicity: int
    weight: float
    length: int

    @property
    def max_level(self):
        return max(self.levels) if self.levels else NO_JUMP

    @property
    def mass(self) -> float:
        return self.multiplicity * self.weight


def enumerate_classes(U: TemplateUniverse, weight_floor: float,
                      cap: int = 5_000_000) -> Iterator[TemplateClass]:
    """Aggregated enumeration: every template of weight ``>= weight_floor`` is in exactly one class."""
    if not weight_floor > 0:
        raise InputError("weight_floor must be > 0")
    lf = math.log(weight_floor)
    lr = math.log(U.rho)
    jumps = [U.r[i] * U.n[i] for i in range(U.depth)]
    count = 0
    stack = [((), 0.0)]
    while stack:
        levels, lw = stack.pop()
        ell = len(levels)
        jl = sum(U.n[i] for i in levels)
        A = 0
        while lw + A * lr >= lf:
            count += 1
            if count > cap:
                raise ResourceError(f"template class stream exceeded the cap {cap}")
            yield TemplateClass(levels, A, comb(A + ell, ell), math.exp(lw + A * lr), A + jl)
            A += 1
        for i in reversed(range(U.depth)):
            if lw - jumps[i] >= lf:
                stack.append((levels + (i,), lw - jumps[i]))
