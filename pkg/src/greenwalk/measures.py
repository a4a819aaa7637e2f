"""Finitely supported measures on a group, convolution, and tail families.

Weights are either all ``Fraction`` (exact mode) or all ``float``.  Radial
measures (weight depending only on word length) additionally carry their
per-length profile so that the tree engines never need the explicit support,
which for heavy-tailed families can be far larger than any ball we want to
hold in memory.  The explicit dictionary is then materialized on first use,
subject to the group's enumeration cap.
"""
from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .errors import InputError, ResourceError
from .groups import Element, Group

DEFAULT_CONV_CAP = 2 * 10**7
DEFAULT_WEIGHT_FLOOR = 1e-300


@dataclass(frozen=True)
class TruncationReceipt:
    """Where a family was cut and how much mass was left out.

    ``discarded_mass`` is the analytic tail of the family beyond ``radius``
    (already normalized); ``pruned_mass`` accumulates weight dropped below
    the convolution floor.
    """

    radius: int
    discarded_mass: float
    family: str = ""
    pruned_mass: float = 0.0

    def to_dict(self) -> dict:
        return {"radius": self.radius, "discarded_mass": self.discarded_mass,
                "family": self.family, "pruned_mass": self.pruned_mass}


def _fsum(values, exact: bool):
    if exact:
        return sum(values, Fraction(0))
    return math.fsum(values)


class Measure:
    """Immutable nonnegative weight function with finite support.

    Parameters
    ----------
    group : Group
    weights : mapping Element -> weight, optional
        Zero weights are dropped.  Either this or ``radial`` must be given.
    radial : sequence, optional
        ``radial[n]`` is the weight of every element of length ``n``; the
        support is then ``ball(e, len(radial) - 1)`` minus zero levels.
    symmetric : bool, optional
        Known symmetry; ``None`` leaves the flag unchecked.
    """

    def __init__(self, group: Group, weights: Mapping[Element, object] | None = None,
                 radial=None, symmetric: bool | None = None,
                 receipt: TruncationReceipt | None = None, label: str = ""):
        self.group = group
        self.receipt = receipt
        self.label = label
        self._weights: dict[Element, object] | None = None
        self._radial = None
        if radial is not None:
            prof = list(radial)
            while len(prof) > 1 and prof[-1] == 0:
                prof.pop()
            if any(w < 0 for w in prof):
                raise InputError("negative weight in radial profile")
            self._radial = tuple(prof)
            self.exact = all(isinstance(w, (int, Fraction)) for w in prof)
            if self.exact:
                self._radial = tuple(Fraction(w) for w in prof)
            sizes = group.sphere_sizes(len(prof) - 1)
            self.total_mass = _fsum([w * s for w, s in zip(self._radial, sizes)], self.exact)
            self._symmetric = True
        else:
            if weights is None:
                raise InputError("measure needs weights or a radial profile")
            w = {}
            for g, v in weights.items():
                g = tuple(g)
                if v < 0:
                    raise InputError(f"negative weight at {group.format(g)}")
                if v:
                    w[g] = v
            self.exact = all(isinstance(v, (int, Fraction)) for v in w.values())
            if self.exact:
                w = {g: Fraction(v) for g, v in w.items()}
            else:
                w = {g: float(v) for g, v in w.items()}
            self._weights = dict(sorted(w.items(), key=lambda kv: (len(kv[0]), kv[0])))
            self.total_mass = _fsum(self._weights.values(), self.exact)
            self._symmetric = symmetric
            if symmetric:
                self._require_symmetric()

    # ------------------------------------------------------------------ access
    @property
    def weights(self) -> dict[Element, object]:
        if self._weights is None:
            radius = len(self._radial) - 1
            ball = self.group.ball((), radius)
            self._weights = {g: self._radial[len(g)] for g in ball if self._radial[len(g)]}
        return self._weights

    @property
    def radial(self):
        """Per-length weight profile when the measure is radial, else ``None``."""
        if self._radial is not None:
            return self._radial
        return None

    def radial_profile(self):
        """Detect radiality of an explicit measure on a tree group."""
        if self._radial is not None:
            return self._radial
        if not self.group.is_tree:
            return None
        prof: dict[int, object] = {}
        for g, v in self._weights.items():
            if prof.setdefault(len(g), v) != v:
                return None
        radius = max(prof, default=0)
        sizes = self.group.sphere_sizes(radius)
        count = defaultdict(int)
        for g in self._weights:
            count[len(g)] += 1
        if any(count[n] != sizes[n] for n in prof):
            return None
        zero = Fraction(0) if self.exact else 0.0
        return tuple(prof.get(n, zero) for n in range(radius + 1))

    def __call__(self, g: Element):
        if self._radial is not None:
            n = len(g)
            if n < len(self._radial):
                return self._radial[n]
            return Fraction(0) if self.exact else 0.0
        return self._weights.get(tuple(g), Fraction(0) if self.exact else 0.0)

    def __len__(self):
        if self._weights is not None:
            return len(self._weights)
        return sum(s for s, w in zip(self.group.sphere_sizes(len(self._radial) - 1),
                                     self._radial) if w)

    def __repr__(self):
        kind = "exact" if self.exact else "float"
        name = f" {self.label}" if self.label else ""
        return f"<Measure{name} on {self.group}, {kind}, mass={float(self.total_mass):.6g}>"

    @property
    def support_radius(self) -> int:
        if self._radial is not None:
            return max((n for n, w in enumerate(self._radial) if w), default=0)
        return max((len(g) for g in self._weights), default=0)

    def sphere_masses(self) -> list:
        """Mass carried by each sphere ``S(e, n)``, ``n = 0..support_radius``."""
        R = self.support_radius
        if self._radial is not None:
            sizes = self.group.sphere_sizes(R)
            return [self._radial[n] * sizes[n] for n in range(R + 1)]
        buckets = [[] for _ in range(R + 1)]
        for g, v in self._weights.items():
            buckets[len(g)].append(v)
        return [_fsum(b, self.exact) for b in buckets]

    # ------------------------------------------------------------- symmetry
    @property
    def symmetric_flag(self) -> str:
        if self._symmetric is None:
            return "unchecked"
        return "yes" if self._symmetric else "no"

    def check_symmetric(self) -> bool:
        if self._symmetric is None:
            inv = self.group.invert
            self._symmetric = all(self(inv(g)) == v for g, v in self._weights.items())
        return self._symmetric

    def _require_symmetric(self):
        inv = self.group.invert
        for g, v in self._weights.items():
            if self._weights.get(inv(g), 0) != v:
                raise InputError(f"measure flagged symmetric but weight differs at "
                                 f"{self.group.format(g)}")

    # ----------------------------------------------------------- conversions
    def scale(self, c) -> "Measure":
        if self._radial is not None:
            return Measure(self.group, radial=[c * w for w in self._radial],
                           receipt=self.receipt, label=self.label)
        return Measure(self.group, {g: c * v for g, v in self._weights.items()},
                       symmetric=self._symmetric, receipt=self.receipt, label=self.label)

    def normalized(self) -> "Measure":
        return self.scale(1 / self.total_mass)

    def to_float(self) -> "Measure":
        if not self.exact:
            return self
        if self._radial is not None:
            return Measure(self.group, radial=[float(w) for w in self._radial],
                           receipt=self.receipt, label=self.label)
        return Measure(self.group, {g: float(v) for g, v in self._weights.items()},
                       symmetric=self._symmetric, receipt=self.receipt, label=self.label)

    def to_exact(self) -> "Measure":
        """Exact copy; floats are converted to the rationals they represent."""
        if self.exact:
            return self
        if self._radial is not None:
            return Measure(self.group, radial=[Fraction(w) for w in self._radial],
                           receipt=self.receipt, label=self.label)
        return Measure(self.group, {g: Fraction(v) for g, v in self._weights.items()},
                       symmetric=self._symmetric, receipt=self.receipt, label=self.label)

    def __add__(self, other: "Measure") -> "Measure":
        if other.group != self.group:
            raise InputError("measures live on different groups")
        if self._radial is not None and other._radial is not None:
            n = max(len(self._radial), len(other._radial))
            a = list(self._radial) + [0] * (n - len(self._radial))
            b = list(other._radial) + [0] * (n - len(other._radial))
            return Measure(self.group, radial=[x + y for x, y in zip(a, b)])
        out = dict(self.weights)
        for g, v in other.weights.items():
            out[g] = out.get(g, 0) + v
        sym = True if (self._symmetric and other._symmetric) else None
        return Measure(self.group, out, symmetric=sym)

    def items(self):
        return self.weights.items()


# ---------------------------------------------------------------- constructors
def delta(group: Group, g: Element = ()) -> Measure:
    return Measure(group, {tuple(g): Fraction(1)}, label=f"delta_{group.format(g)}")


def srw(group: Group) -> Measure:
    """Uniform measure on the symmetric generating set."""
    return Measure(group, radial=[Fraction(0), Fraction(1, group.n_letters)], label="srw")


def nearest_neighbor(group: Group, letter_weights: Mapping[str, object]) -> Measure:
    """Measure on generators given by symbol name, e.g. ``{"a": 0.4, "A": 0.4}``."""
    w = {}
    for sym, v in letter_weights.items():
        g = group.parse(sym)
        if len(g) != 1:
            raise InputError(f"{sym!r} is not a single generator")
        w[g] = w.get(g, 0) + v
    return Measure(group, w, label="nearest-neighbor")


def lazy(mu: Measure, hold=Fraction(1, 2)) -> Measure:
    """``hold * delta_e + (1 - hold) * mu``."""
    if not mu.exact:
        hold = float(hold)
    return delta(mu.group).scale(hold) + mu.scale(1 - hold)


def symmetrize(mu: Measure) -> Measure:
    g = mu.group
    half = Fraction(1, 2) if mu.exact else 0.5
    out: dict[Element, object] = {}
    for x, v in mu.weights.items():
        out[x] = out.get(x, 0) + half * v
        xi = g.invert(x)
        out[xi] = out.get(xi, 0) + half * v
    return Measure(g, out, symmetric=True, label=f"sym({mu.label})" if mu.label else "")


# ----------------------------------------------------------------- convolution
def _conv_chunk(group, items, nu_items, floor, exact):
    acc: dict[Element, list] = defaultdict(list)
    mul = group.multiply
    for h, a in items:
        for k, b in nu_items:
            acc[mul(h, k)].append(a * b)
    return acc


def convolve(mu: Measure, nu: Measure, *, cap: int = DEFAULT_CONV_CAP,
             floor: float = DEFAULT_WEIGHT_FLOOR, threads: int = 1) -> Measure:
    """``(mu * nu)(g) = sum_h mu(h) nu(h^-1 g)``.

    Float mode sums every target with ``math.fsum``; weights below ``floor``
    are dropped and their mass reported in the receipt.  Work is split over
    the support of ``mu``; partial results merge in chunk order so the output
    does not depend on ``threads``.
    """
    if mu.group != nu.group:
        raise InputError("measures live on different groups")
    a_items = list(mu.weights.items())
    b_items = list(nu.weights.items())
    if len(a_items) * len(b_items) > cap:
        raise ResourceError(f"convolution of supports {len(a_items)} x {len(b_items)} "
                            f"exceeds the product cap {cap}")
    exact = mu.exact and nu.exact
    if not exact:
        a_items = [(g, float(v)) for g, v in a_items]
        b_items = [(g, float(v)) for g, v in b_items]
    nchunk = max(1, min(threads, len(a_items)))
    step = -(-len(a_items) // nchunk) if a_items else 1
    chunks = [a_items[i:i + step] for i in range(0, len(a_items), step)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda c: _conv_chunk(mu.group, c, b_items, floor, exact), chunks))
    else:
        parts = [_conv_chunk(mu.group, c, b_items, floor, exact) for c in chunks]
    merged: dict[Element, list] = defaultdict(list)
    for part in parts:
        for g, vals in part.items():
            merged[g].extend(vals)
    out = {}
    pruned = []
    for g, vals in merged.items():
        v = _fsum(vals, exact)
        if not exact and v < floor:
            pruned.append(v)
        else:
            out[g] = v
    prev = [r.pruned_mass for r in (mu.receipt, nu.receipt) if r is not None]
    receipt = None
    if pruned or prev:
        receipt = TruncationReceipt(radius=-1, discarded_mass=0.0, family="convolution",
                                    pruned_mass=math.fsum(pruned) + math.fsum(prev))
    sym = True if (mu._symmetric and nu._symmetric and mu is nu) else None
    return Measure(mu.group, out, symmetric=sym, receipt=receipt)


def power(mu: Measure, n: int, **kw) -> Measure:
    """``n``-fold convolution power; ``power(mu, 0) = delta_e``."""
    if n < 0:
        raise InputError("power needs n >= 0")
    one = Fraction(1) if mu.exact else 1.0
    result = Measure(mu.group, {(): one})
    base = mu
    first = True
    while n:
        if n & 1:
            result = base if first else convolve(result, base, **kw)
            first = False
        n >>= 1
        if n:
            base = convolve(base, base, **kw)
    return result


# ---------------------------------------------------------------- tail family
@dataclass(frozen=True)
class TailFamily:
    """Radial heavy- or light-tailed jump law.

    Every element of length ``n >= 1`` gets weight proportional to
    ``theta**n`` (geometric) or ``exp(-beta n^2)`` (gaussian).  The gaussian
    kind is the library's choice of superexponential family.  ``base`` mixes
    in a probability measure with weight ``base_weight``.
    """

    kind: str
    param: float
    base: Measure | None = field(default=None, compare=False)
    base_weight: float = 0.0

    def __post_init__(self):
        if self.kind == "geometric":
            if not 0 < self.param < 1:
                raise InputError("geometric family needs theta in (0, 1)")
        elif self.kind == "gaussian":
            if not self.param > 0:
                raise InputError("gaussian family needs beta > 0")
        else:
            raise InputError(f"unknown tail family {self.kind!r}")
        if not 0 <= self.base_weight < 1:
            raise InputError("base_weight must lie in [0, 1)")
        if self.base_weight and self.base is None:
            raise InputError("base_weight given without a base measure")

    @classmethod
    def gaussian(cls, beta: float, **kw) -> "TailFamily":
        return cls("gaussian", beta, **kw)

    @classmethod
    def geometric(cls, theta: float, **kw) -> "TailFamily":
        return cls("geometric", theta, **kw)

    def describe(self) -> str:
        name = "beta" if self.kind == "gaussian" else "theta"
        return f"{self.kind}({name}={self.param})"

    def log_element_weight(self, n: int) -> float:
        if self.kind == "gaussian":
            return -self.param * n * n
        return n * math.log(self.param)

    def log_sphere_terms(self, group: Group, n_max: int) -> list[float]:
        """``log(|S_n| w(n))`` for ``n = 1..n_max`` (index 0 unused, -inf)."""
        sizes = group.sphere_sizes(n_max)
        return [-math.inf] + [math.log(sizes[n]) + self.log_element_weight(n)
                              for n in range(1, n_max + 1)]


def _family_series(family: TailFamily, group: Group):
    """Normalizer ``Z`` and the list of sphere-term logs up to negligible size."""
    n_max = 16
    while True:
        logs = family.log_sphere_terms(group, n_max)
        peak = max(logs[1:])
        # stop once terms are 1e-320 below the peak and clearly shrinking
        if logs[-1] < peak - 740 and logs[-1] < logs[-2]:
            break
        if n_max > 4096:
            raise InputError(f"{family.describe()} is not summable on {group}")
        n_max *= 2
    if logs[-1] >= logs[-2]:
        raise InputError(f"{family.describe()} is not summable on {group}")
    shift = max(logs[1:])
    z = math.fsum(math.exp(l - shift) for l in logs[1:])
    return shift + math.log(z), logs


def _tail_after(logs, logZ, R) -> float:
    return math.fsum(math.exp(l - logZ) for l in logs[R + 1:])


def realize(group: Group, family: TailFamily, mass_eps: float, *,
            exact: bool = False, materialize: bool = False) -> tuple[Measure, TruncationReceipt]:
    """Cut the family at the smallest radius whose analytic tail is ``<= mass_eps``.

    The weights are the family's normalized weights (so realized mass plus
    discarded mass is 1, up to rounding); the receipt states the exact tail.
    The result is radial unless a base measure is mixed in.  ``exact``
    converts each float weight to the rational it represents.
    """
    if not mass_eps > 0:
        raise InputError("mass_eps must be > 0")
    logZ, logs = _family_series(family, group)
    scale = 1.0 - family.base_weight
    R = 1
    while scale * _tail_after(logs, logZ, R) > mass_eps:
        R += 1
        if R >= len(logs) - 1:
            raise InputError("tail never drops below mass_eps")
    size = group.ball_size(R)
    if size > group.ball_cap and (materialize or family.base is not None):
        raise ResourceError(f"radius {R} needed for mass_eps={mass_eps} has {size} "
                            f"elements, over the enumeration cap {group.ball_cap}")
    discarded = scale * _tail_after(logs, logZ, R)
    receipt = TruncationReceipt(radius=R, discarded_mass=discarded, family=family.describe())
    prof = [0.0] + [scale * math.exp(family.log_element_weight(n) - logZ) for n in range(1, R + 1)]
    if exact:
        prof = [Fraction(w) for w in prof]
    mu = Measure(group, radial=prof, receipt=receipt, label=family.describe())
    if family.base is not None and family.base_weight:
        base = family.base.normalized()
        base = base.scale(Fraction(family.base_weight) if exact else family.base_weight)
        base = base.to_exact() if exact else base.to_float()
        mu = Measure(group, dict((mu + base).weights), symmetric=None,
                     receipt=receipt, label=family.describe() + "+base")
    if materialize:
        mu.weights
    return mu, receipt


def tail_profile(mu: Measure) -> list:
    """``n -> mu(B(e, n)^c)`` for ``n = 0..support_radius`` (last entry 0)."""
    masses = mu.sphere_masses()
    R = len(masses) - 1
    return [_fsum(masses[n + 1:], mu.exact) if n < R else
            (Fraction(0) if mu.exact else 0.0) for n in range(R + 1)]


# --------------------------------------------------------------- admissibility
@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    witness: Element | None = None
    steps: int = 0

    def __bool__(self):
        return self.admissible


def admissibility_check(mu: Measure, max_steps: int = 12, cap: int = 200_000) -> Admissibility:
    """BFS closure of support products against the nonidentity part of ``ball(e, 2)``.

    Targets are checked in shortlex order; the first one never reached is
    the witness.  Products are pruned to a window of lengths that can still
    matter, so the search stays bounded.
    """
    group = mu.group
    targets = group.ball((), 2)[1:]
    if mu.radial is not None:
        if len(mu.radial) > 1 and mu.radial[1]:
            return Admissibility(True, steps=1)
    support = [g for g in mu.weights]
    sset = set(support)
    if all((i,) in sset for i in range(group.n_letters)):
        return Admissibility(True, steps=2)
    window = 2 + 2 * mu.support_radius
    reached = set(support)
    frontier = set(support)
    steps = 1
    remaining = [t for t in targets if t not in reached]
    while remaining and steps < max_steps and frontier:
        nxt = set()
        for g in frontier:
            for s in support:
                h = group.multiply(g, s)
                if len(h) <= window and h not in reached:
                    nxt.add(h)
        reached |= nxt
        frontier = nxt
        steps += 1
        if len(reached) > cap:
            raise ResourceError(f"admissibility BFS exceeded {cap} elements")
        remaining = [t for t in remaining if t not in reached]
    if remaining:
        return Admissibility(False, witness=remaining[0], steps=steps)
    return Admissibility(True, steps=steps)


# --------------------------------------------------------------- serialization
def dumps(mu: Measure) -> str:
    lines = []
    for g, v in mu.weights.items():
        lines.append(f"{mu.group.format(g)} {v if mu.exact else repr(v)}")
    return "\n".join(lines) + "\n"


def loads(group: Group, text: str, exact: bool | None = None) -> Measure:
    """Parse ``word weight`` lines; ``#`` starts a comment."""
    w: dict[Element, object] = {}
    rational = True
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        word, _, val = line.rpartition(" ")
        if not word:
            raise InputError(f"line {lineno}: expected 'word weight'")
        rows.append((word.strip(), val))
        if any(c in val for c in ".eE") and not val.lower().startswith("inf"):
            rational = False
    use_exact = rational if exact is None else exact
    for word, val in rows:
        g = group.parse(word)
        v = Fraction(val) if use_exact else float(Fraction(val) if "/" in val else val)
        w[g] = w.get(g, 0) + v
    return Measure(group, w)
