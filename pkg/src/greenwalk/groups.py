"""Word arithmetic on free groups and free products of cyclic groups.

Elements are plain tuples of letter indices in normal form, so they hash
cheaply and can key dictionaries directly.  Every factor is cyclic (``Z`` for
free groups, ``Z/m`` otherwise); a syllable ``x^p`` is rendered with the
shorter of ``x`` or ``x^-1`` repeated, ties going to the generator letter.
Rendered this way the normal form is a geodesic word for the generating set
``{x, x^-1}`` of every factor, and ``len(g)`` is the word length.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InputError, ResourceError

Element = tuple

DEFAULT_BALL_CAP = 10**6

_DEFAULT_SYMBOLS = "abcdfghijklmnopqrstuvwxyz"  # 'e' is reserved for the identity


@dataclass(frozen=True)
class GroupSpec:
    """Description of a supported group.

    ``kind`` is ``"free"`` (with ``rank``) or ``"free_product"`` (with the
    finite cyclic ``orders``).  ``symbols`` optionally renames the factor
    generators.
    """

    kind: str
    rank: int | None = None
    orders: tuple[int, ...] | None = None
    symbols: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind == "free":
            if self.rank is None or self.rank < 2:
                raise InputError("free group needs rank >= 2 (rank 1 is amenable)")
            if self.orders is not None:
                raise InputError("free group takes 'rank', not 'orders'")
        elif self.kind == "free_product":
            if not self.orders or len(self.orders) < 2:
                raise InputError("free product needs at least two cyclic factors")
            if any(int(m) < 2 for m in self.orders):
                raise InputError("cyclic factor orders must be >= 2")
            if tuple(sorted(self.orders)) == (2, 2):
                raise InputError("Z/2 * Z/2 is amenable (infinite dihedral); not supported")
            object.__setattr__(self, "orders", tuple(int(m) for m in self.orders))
        else:
            raise InputError(f"unknown group kind {self.kind!r}")
        n = self.n_factors
        if self.symbols is not None:
            syms = tuple(self.symbols)
            if len(syms) != n or len(set(syms)) != n:
                raise InputError(f"need {n} distinct generator symbols, got {syms}")
            object.__setattr__(self, "symbols", syms)

    @property
    def n_factors(self) -> int:
        return self.rank if self.kind == "free" else len(self.orders)

    @classmethod
    def free(cls, rank: int) -> "GroupSpec":
        return cls("free", rank=rank)

    @classmethod
    def free_product(cls, *orders: int, symbols: Sequence[str] | None = None) -> "GroupSpec":
        return cls("free_product", orders=tuple(orders),
                   symbols=tuple(symbols) if symbols else None)

    @classmethod
    def from_dict(cls, d: dict) -> "GroupSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        rank = d.pop("rank", None)
        orders = d.pop("orders", None)
        symbols = d.pop("symbols", None)
        if d:
            raise InputError(f"unknown group keys: {sorted(d)}")
        return cls(kind, rank=rank, orders=tuple(orders) if orders else None,
                   symbols=tuple(symbols) if symbols else None)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "free":
            out["rank"] = self.rank
        else:
            out["orders"] = list(self.orders)
        if self.symbols:
            out["symbols"] = list(self.symbols)
        return out


class Interner:
    """Stable integer ids for elements; lookups are lock-free, inserts locked."""

    def __init__(self):
        self._ids: dict[Element, int] = {}
        self._elements: list[Element] = []
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._elements)

    def id_of(self, g: Element) -> int:
        i = self._ids.get(g)
        if i is not None:
            return i
        with self._lock:
            i = self._ids.get(g)
            if i is None:
                i = len(self._elements)
                self._elements.append(g)
                self._ids[g] = i
            return i

    def get(self, g: Element, default=None):
        return self._ids.get(g, default)

    def element(self, i: int) -> Element:
        return self._elements[i]


class Group:
    """A free group or a free product of finite cyclic groups."""

    def __init__(self, spec: GroupSpec, ball_cap: int = DEFAULT_BALL_CAP):
        self.spec = spec
        self.ball_cap = ball_cap
        if spec.kind == "free":
            self.orders: tuple[int | None, ...] = (None,) * spec.rank
        else:
            self.orders = spec.orders
        nf = len(self.orders)
        names = spec.symbols or tuple(_DEFAULT_SYMBOLS[:nf])
        if len(names) < nf:
            raise InputError("too many factors for default symbols; pass symbols")
        # generators first (factor order), then inverse letters
        factor, exp, sym = [], [], []
        for f, name in enumerate(names):
            factor.append(f)
            exp.append(1)
            sym.append(name)
        for f, name in enumerate(names):
            if self.orders[f] != 2:
                factor.append(f)
                exp.append(-1)
                sym.append(name.upper() if len(name) == 1 and name.islower() else name + "^-1")
        self._factor = tuple(factor)
        self._exp = tuple(exp)
        self.symbols = tuple(sym)
        self._gen_letter = tuple(range(nf))
        inv_letter = list(range(nf))
        for i in range(nf, len(sym)):
            inv_letter[factor[i]] = i
        self._inv_letter_of_factor = tuple(inv_letter)
        self._inverse = tuple(
            self._gen_letter[f] if e == -1 else inv_letter[f]
            for f, e in zip(factor, exp)
        )
        # longest symbols first so multi-character names tokenize greedily
        self._tokens = sorted(
            [(s, i) for i, s in enumerate(sym)]
            + [(s + "⁻¹", self._inverse[i]) for i, s in enumerate(sym[:nf])]
            + [(s + "^-1", self._inverse[i]) for i, s in enumerate(sym[:nf])],
            key=lambda t: -len(t[0]),
        )
        self._interner = Interner()

    # ------------------------------------------------------------------ basics
    def __repr__(self):
        if self.spec.kind == "free":
            return f"F_{self.spec.rank}"
        return " * ".join(f"Z/{m}" for m in self.orders)

    def __eq__(self, other):
        return isinstance(other, Group) and other.spec == self.spec

    def __hash__(self):
        return hash(self.spec)

    @property
    def identity(self) -> Element:
        return ()

    @property
    def n_letters(self) -> int:
        return len(self.symbols)

    @property
    def generators(self) -> list[Element]:
        """The symmetric generating set, in alphabet order."""
        return [(i,) for i in range(self.n_letters)]

    @property
    def is_tree(self) -> bool:
        """True when the Cayley graph is a regular tree."""
        return self.spec.kind == "free" or all(m == 2 for m in self.orders)

    @property
    def degree(self) -> int:
        return self.n_letters

    @property
    def interner(self) -> Interner:
        return self._interner

    def letter_inverse(self, letter: int) -> int:
        return self._inverse[letter]

    # ------------------------------------------------------------- normal form
    def _render(self, f: int, e: int) -> tuple:
        m = self.orders[f]
        if m is None:
            if e > 0:
                return (self._gen_letter[f],) * e
            return (self._inv_letter_of_factor[f],) * (-e)
        p = e % m
        if p == 0:
            return ()
        if 2 * p <= m:
            return (self._gen_letter[f],) * p
        return (self._inv_letter_of_factor[f],) * (m - p)

    def reduce(self, word) -> Element:
        """Normal form of a raw word (string or sequence of letter indices)."""
        if isinstance(word, str):
            letters = self._tokenize(word)
        else:
            letters = list(word)
            n = self.n_letters
            for l in letters:
                if not isinstance(l, int) or not 0 <= l < n:
                    raise InputError(f"unknown letter index {l!r} for {self}")
        syl: list[list[int]] = []
        for l in letters:
            f, e = self._factor[l], self._exp[l]
            if syl and syl[-1][0] == f:
                top = syl[-1]
                top[1] += e
                m = self.orders[f]
                if m is not None:
                    top[1] %= m
                if top[1] == 0:
                    syl.pop()
            else:
                syl.append([f, e])
        out: list[int] = []
        for f, e in syl:
            out.extend(self._render(f, e))
        return tuple(out)

    def _tokenize(self, s: str) -> list[int]:
        s = s.strip()
        if s in ("", "e", "1"):
            return []
        out: list[int] = []
        for chunk in s.split():
            pos = 0
            while pos < len(chunk):
                for tok, letter in self._tokens:
                    if chunk.startswith(tok, pos):
                        out.append(letter)
                        pos += len(tok)
                        break
                else:
                    raise InputError(f"unknown symbol at {chunk[pos:]!r} in {s!r} for {self}")
        return out

    def parse(self, s: str) -> Element:
        return self.reduce(s)

    def format(self, g: Element) -> str:
        if not g:
            return "e"
        syms = [self.symbols[l] for l in g]
        sep = "" if all(len(x) == 1 for x in self.symbols) else " "
        return sep.join(syms)

    def is_reduced(self, g: Element) -> bool:
        return self.reduce(g) == tuple(g)

    # -------------------------------------------------------------- arithmetic
    def multiply(self, g: Element, h: Element) -> Element:
        if not g:
            return h
        if not h:
            return g
        fac = self._factor
        left = list(g)
        i = 0
        while left and i < len(h):
            f = fac[left[-1]]
            if fac[h[i]] != f:
                break
            j = len(left)
            while j > 0 and fac[left[j - 1]] == f:
                j -= 1
            k = i
            while k < len(h) and fac[h[k]] == f:
                k += 1
            e = sum(self._exp[l] for l in left[j:]) + sum(self._exp[l] for l in h[i:k])
            del left[j:]
            i = k
            merged = self._render(f, e)
            if merged:
                left.extend(merged)
                break
        return tuple(left) + tuple(h[i:])

    def mul(self, *elements: Element) -> Element:
        out: Element = ()
        for g in elements:
            out = self.multiply(out, g)
        return out

    def invert(self, g: Element) -> Element:
        # reversing a normal form and inverting letters can break the tie rule
        # for even-order syllables, so re-render through reduce
        return self.reduce([self._inverse[l] for l in reversed(g)])

    def power(self, g: Element, n: int) -> Element:
        if n < 0:
            return self.power(self.invert(g), -n)
        out: Element = ()
        for _ in range(n):
            out = self.multiply(out, g)
        return out

    def length(self, g: Element) -> int:
        return len(g)

    def distance(self, g: Element, h: Element) -> int:
        return len(self.multiply(self.invert(g), h))

    # ---------------------------------------------------------------- geometry
    def geodesic(self, g: Element, h: Element) -> list[Element]:
        """Deterministic geodesic from ``g`` to ``h``, endpoints included."""
        w = self.multiply(self.invert(g), h)
        return [self.multiply(g, w[:k]) for k in range(len(w) + 1)]

    def _extensions(self, w: Element) -> Iterable[int]:
        """Letters ``s`` such that ``w + (s,)`` is again a normal form."""
        if not w:
            yield from range(self.n_letters)
            return
        last = w[-1]
        f = self._factor[last]
        m = self.orders[f]
        run = 1
        while run < len(w) and w[-1 - run] == last:
            run += 1
        for s in range(self.n_letters):
            if self._factor[s] != f:
                yield s
            elif s == last:
                if m is None:
                    yield s
                elif self._exp[s] == 1 and 2 * (run + 1) <= m:
                    yield s
                elif self._exp[s] == -1 and 2 * (run + 1) < m:
                    yield s

    def sphere_sizes(self, radius: int) -> list[int]:
        """``|sphere(e, n)|`` for ``n = 0..radius`` without enumerating."""
        if self.is_tree:
            q = self.degree - 1
            return [1] + [self.degree * q ** (n - 1) for n in range(1, radius + 1)]
        # count normal forms by (last letter, run length)
        sizes = [1]
        frontier: dict[tuple, int] = {None: 1}
        for _ in range(radius):
            nxt: dict[tuple, int] = {}
            for state, c in frontier.items():
                for s in self._next_letters_state(state):
                    key = (s, state[1] + 1 if state is not None and state[0] == s else 1)
                    nxt[key] = nxt.get(key, 0) + c
            frontier = nxt
            sizes.append(sum(frontier.values()))
        return sizes

    def _next_letters_state(self, state):
        if state is None:
            return range(self.n_letters)
        last, run = state
        f = self._factor[last]
        m = self.orders[f]
        out = []
        for s in range(self.n_letters):
            if self._factor[s] != f:
                out.append(s)
            elif s == last:
                if m is None or (self._exp[s] == 1 and 2 * (run + 1) <= m) or (
                    self._exp[s] == -1 and 2 * (run + 1) < m
                ):
                    out.append(s)
        return out

    def ball_size(self, radius: int) -> int:
        return sum(self.sphere_sizes(radius))

    def _check_cap(self, radius: int):
        size = self.ball_size(radius)
        if size > self.ball_cap:
            raise ResourceError(
                f"ball of radius {radius} in {self} has {size} elements, "
                f"over the enumeration cap {self.ball_cap}"
            )

    def ball(self, center: Element = (), radius: int = 0) -> list[Element]:
        """Exact enumeration, shortlex order of ``center^-1 g``."""
        if radius < 0:
            return []
        self._check_cap(radius)
        level = [()]
        out = [()]
        for _ in range(radius):
            nxt = []
            for w in level:
                for s in self._extensions(w):
                    nxt.append(w + (s,))
            out.extend(nxt)
            level = nxt
        if center:
            return [self.multiply(center, w) for w in out]
        return out

    def sphere(self, center: Element = (), radius: int = 0) -> list[Element]:
        if radius < 0:
            return []
        self._check_cap(radius)
        level = [()]
        for _ in range(radius):
            level = [w + (s,) for w in level for s in self._extensions(w)]
        if center:
            return [self.multiply(center, w) for w in level]
        return level

    def gromov_product(self, u: Element, v: Element, base: Element = ()) -> Fraction:
        return Fraction(
            self.distance(u, base) + self.distance(v, base) - self.distance(u, v), 2
        )

    def delta_estimate(self, points: Sequence[Element]) -> Fraction:
        """Largest four-point defect over all quadruples of ``points``.

        For a quadruple the three pair-sums are sorted and half the gap
        between the two largest is the defect; trees give 0.
        """
        pts = list(dict.fromkeys(tuple(p) for p in points))
        if len(points) > 8:
            raise InputError("delta_estimate accepts at most 8 points")
        if len(pts) < 4:
            return Fraction(0)
        d = {(p, q): self.distance(p, q) for p in pts for q in pts}
        best = Fraction(0)
        for x, y, z, w in itertools.combinations(pts, 4):
            sums = sorted(
                (d[x, y] + d[z, w], d[x, z] + d[y, w], d[x, w] + d[y, z]), reverse=True
            )
            best = max(best, Fraction(sums[0] - sums[1], 2))
        return best


def free_group(rank: int = 2) -> Group:
    return Group(GroupSpec.free(rank))


def free_product(*orders: int, symbols: Sequence[str] | None = None) -> Group:
    return Group(GroupSpec.free_product(*orders, symbols=symbols))
