"""Domains for restricted Green functions and finite working regions.

A :class:`Domain` is a possibly infinite subset of the group described by
anchor points (ball complements, hourglasses) or by an explicit finite set.
Membership of anchor-based domains only needs distances to the anchors,
which is what lets the tree engines evaluate it on whole orbits at once.

A :class:`Region` is the finite working set in which paths must stay: a
ball around one point or a tube (union of balls) around a geodesic.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .errors import InputError, ResourceError
from .groups import Element, Group


@dataclass(frozen=True)
class Domain:
    """Allowed set for the intermediate points of a path.

    kinds
        ``full``; ``ball_complement`` (``center``, ``radius``);
        ``explicit`` (``elements``); ``complement`` of an explicit finite set;
        ``hourglass`` (``x``, ``y``, ``z``, ``H0``): the union over ``w`` on
        the geodesic ``[x, z]`` of ``B(w, H0 + d(w, y)/2)``.
    """

    kind: str = "full"
    center: Element | None = None
    radius: int | None = None
    elements: frozenset | None = None
    x: Element | None = None
    y: Element | None = None
    z: Element | None = None
    H0: float = 2
    path: tuple | None = None  # geodesic [x, z] for hourglasses, filled by the constructor

    @classmethod
    def full(cls) -> "Domain":
        return cls("full")

    @classmethod
    def ball_complement(cls, center: Element, radius: int) -> "Domain":
        if radius < 0:
            raise InputError("ball radius must be >= 0")
        return cls("ball_complement", center=tuple(center), radius=int(radius))

    @classmethod
    def point_complement(cls, point: Element) -> "Domain":
        return cls.ball_complement(point, 0)

    @classmethod
    def explicit(cls, elements: Iterable[Element]) -> "Domain":
        return cls("explicit", elements=frozenset(tuple(g) for g in elements))

    @classmethod
    def complement(cls, elements: Iterable[Element]) -> "Domain":
        return cls("complement", elements=frozenset(tuple(g) for g in elements))

    @classmethod
    def hourglass(cls, group: Group, x: Element, y: Element, z: Element, H0: float = 2) -> "Domain":
        path = tuple(group.geodesic(x, z))
        if tuple(y) not in path:
            raise InputError("hourglass needs y on the geodesic [x, z]")
        return cls("hourglass", x=tuple(x), y=tuple(y), z=tuple(z), H0=H0, path=path)

    # ------------------------------------------------------------ membership
    def anchors(self) -> tuple | None:
        """Points whose distances decide membership; ``None`` if not anchor-based."""
        if self.kind == "full":
            return ()
        if self.kind == "ball_complement":
            return (self.center,)
        if self.kind == "hourglass":
            return self.path
        return None

    def contains_by_distance(self, dist: Callable[[Element], int]) -> bool:
        """Membership given a distance oracle to the anchors."""
        if self.kind == "full":
            return True
        if self.kind == "ball_complement":
            return dist(self.center) > self.radius
        if self.kind == "hourglass":
            dy = {w: i for i, w in enumerate(self.path)}
            iy = dy[self.y]
            return any(dist(w) <= self.H0 + Fraction(abs(i - iy), 2) for w, i in dy.items())
        raise InputError(f"domain {self.kind} is not anchor-based")

    def contains(self, g: Element, group: Group) -> bool:
        if self.kind == "explicit":
            return g in self.elements
        if self.kind == "complement":
            return g not in self.elements
        return self.contains_by_distance(lambda p: group.distance(g, p))

    def mask(self, region: "Region") -> np.ndarray:
        g = region.group
        return np.fromiter((self.contains(v, g) for v in region.elements), dtype=bool,
                           count=len(region))

    def describe(self, group: Group) -> str:
        f = group.format
        if self.kind == "full":
            return "full"
        if self.kind == "ball_complement":
            return f"B({f(self.center)},{self.radius})^c"
        if self.kind == "hourglass":
            return f"hourglass({f(self.x)},{f(self.y)},{f(self.z)};H0={self.H0})"
        return f"{self.kind}[{len(self.elements)}]"


class Region:
    """Finite working set: all points within ``radius`` of the ``core`` points.

    Elements are stored in BFS order with their distance to the core, so
    nested regions with smaller radius are prefixes by ``level``.
    """

    def __init__(self, group: Group, core: Iterable[Element], radius: int,
                 cap: int | None = None):
        self.group = group
        self.core = tuple(dict.fromkeys(tuple(c) for c in core))
        self.radius = radius
        cap = group.ball_cap if cap is None else cap
        if len(self.core) == 1 and group.ball_size(radius) > cap:
            raise ResourceError(f"working ball of radius {radius} has "
                                f"{group.ball_size(radius)} elements, over the enumeration cap {cap}")
        level = {c: 0 for c in self.core}
        order = list(self.core)
        queue = deque(self.core)
        gens = range(group.n_letters)
        mul = group.multiply
        while queue:
            v = queue.popleft()
            lv = level[v]
            if lv == radius:
                continue
            for s in gens:
                u = mul(v, (s,))
                if u not in level:
                    level[u] = lv + 1
                    order.append(u)
                    queue.append(u)
                    if len(order) > cap:
                        raise ResourceError(f"working region exceeds the enumeration cap {cap}")
        self.elements = order
        self.index = {g: i for i, g in enumerate(order)}
        self.level = np.fromiter((level[g] for g in order), dtype=np.int64, count=len(order))
        for g in order:
            group.interner.id_of(g)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g in self.index

    @property
    def key(self):
        return (self.core, self.radius)

    def size_at(self, radius: int) -> int:
        return int(np.count_nonzero(self.level <= radius))


def ball_region(group: Group, center: Element, radius: int) -> Region:
    return Region(group, [center], radius)


def tube_region(group: Group, x: Element, y: Element, radius: int) -> Region:
    return Region(group, group.geodesic(x, y), radius)
