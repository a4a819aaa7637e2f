"""Exact orbit lumping for radial measures on regular trees.

Fix a geodesic segment ``s_0, ..., s_L`` in a ``(q+1)``-regular tree.  Its
pointwise stabilizer acts on the remaining vertices, and the orbit of ``v``
is ``(k, h)``: ``s_k`` is the projection of ``v`` on the segment and ``h``
the distance to it.  A radial measure commutes with the stabilizer, so a
Green function towards a segment point, restricted to a stabilizer-invariant
domain, is constant on orbits and solves a small system over orbits.

``T[o, o']`` is the total weight of jumps from one vertex of ``o`` into all
of ``o'``.  With ``L = 0`` this is the radial birth-death chain.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError


def branch_counts(L: int, q: int) -> list[int]:
    """Number of off-segment neighbours of each segment point."""
    if L == 0:
        return [q + 1]
    return [q] + [q - 1] * (L - 1) + [q]


def orbit_targets(k: int, h: int, d: int, L: int, q: int, b: Sequence[int]):
    """Orbits reached by jumps of length ``d`` from one vertex of ``(k, h)``.

    Yields ``((k2, h2), count)``; the counts sum to the sphere size.  A jump
    goes ``j`` steps towards the segment and then away from the path it came
    by: either into a new branch before reaching the segment, or along the
    segment and then off it.
    """
    if d == 0:
        yield (k, h), 1
        return
    if h >= 1:
        for j in range(0, min(h - 1, d) + 1):
            e = d - j
            if e == 0:
                yield (k, h - j), 1
            else:
                avail = q if j == 0 else q - 1
                if avail:
                    yield (k, h - j + e), avail * q ** (e - 1)
    if d >= h:
        m = d - h
        if m == 0:
            yield (k, 0), 1
            return
        nb = b[k] - (1 if h >= 1 else 0)
        if nb:
            yield (k, m), nb * q ** (m - 1)
        for t in range(1, m + 1):
            r = m - t
            for k2 in (k - t, k + t):
                if 0 <= k2 <= L:
                    if r == 0:
                        yield (k2, 0), 1
                    elif b[k2]:
                        yield (k2, r), b[k2] * q ** (r - 1)


class SegmentLump:
    """Lumped transition structure over the orbits inside a working region.

    Parameters
    ----------
    degree : int
        Tree degree ``q + 1``.
    L : int
        Segment length.
    profile : sequence of float
        ``profile[d]`` is the weight of each single element of length ``d``.
    level : callable ``(k, h) -> int``
        Distance-like level; orbits with ``level <= radius`` form the region.
    radius : int
    h_max : int
        Upper bound for ``h`` inside the region.
    """

    def __init__(self, degree: int, L: int, profile: Sequence[float],
                 level: Callable[[int, int], int], radius: int, h_max: int):
        if degree < 3:
            raise InputError("tree lumping needs degree >= 3")
        self.q = q = degree - 1
        self.L = L
        self.b = b = branch_counts(L, q)
        self.profile = [float(w) for w in profile]
        orbits = [(k, h) for k in range(L + 1) for h in range(h_max + 1)
                  if level(k, h) <= radius]
        self.orbits = orbits
        self.index = {o: i for i, o in enumerate(orbits)}
        self.level = np.array([level(k, h) for k, h in orbits], dtype=np.int64)
        self.radius = radius
        self.log_size = np.array([0.0 if h == 0 else math.log(b[k]) + (h - 1) * math.log(q)
                                  for k, h in orbits])
        rows, cols, vals = [], [], []
        jumps = [(d, w) for d, w in enumerate(self.profile) if w > 0]
        idx = self.index
        for i, (k, h) in enumerate(orbits):
            acc: dict[int, float] = {}
            for d, w in jumps:
                for o2, c in orbit_targets(k, h, d, L, q, b):
                    j = idx.get(o2)
                    if j is not None:
                        acc[j] = acc.get(j, 0.0) + w * c
            for j, v in acc.items():
                rows.append(i)
                cols.append(j)
                vals.append(v)
        n = len(orbits)
        self.T = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def __len__(self):
        return len(self.orbits)

    def orbit_size(self, o) -> int:
        k, h = o
        return 1 if h == 0 else self.b[k] * self.q ** (h - 1)

    def symmetric_T(self) -> sp.csr_matrix:
        """``D^(1/2) T D^(-1/2)`` with ``D`` the orbit sizes (symmetric for radial weights)."""
        T = self.T.tocoo()
        f = np.exp(0.5 * (self.log_size[T.row] - self.log_size[T.col]))
        return sp.csr_matrix((T.data * f, (T.row, T.col)), shape=T.shape)


def radial_lump(degree: int, profile: Sequence[float], radius: int) -> SegmentLump:
    """Radial chain on ``ball(e, radius)``: states are distances to the centre."""
    return SegmentLump(degree, 0, profile, lambda k, h: h, radius, radius)


def radial_return_series(degree: int, profile: Sequence[float], n_max: int,
                         target_radius: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Untruncated ``log p^n(e, v)`` for ``|v| = target_radius``, ``n = 0..n_max``.

    Positions beyond ``(n_max D + r)/2`` (``D`` the support radius) can never
    reach the target in time, so dropping them is exact.  The distribution
    is renormalized each step and the scale kept in logs, so nothing
    underflows.  Returns ``(n, log_p)``; ``log_p`` is ``-inf`` where the
    probability is zero.
    """
    D = max((d for d, w in enumerate(profile) if w > 0), default=0)
    H = (n_max * D + target_radius) // 2 + 1
    lump = radial_lump(degree, profile, H)
    TT = lump.T.T.tocsr()
    pi = np.zeros(len(lump))
    pi[lump.index[(0, 0)]] = 1.0
    t_idx = lump.index[(0, target_radius)]
    log_orbit = lump.log_size[t_idx]
    log_scale = 0.0
    out = np.full(n_max + 1, -np.inf)
    for n in range(n_max + 1):
        v = pi[t_idx]
        if v > 0:
            out[n] = log_scale + math.log(v) - log_orbit
        if n == n_max:
            break
        pi = TT @ pi
        s = pi.sum()
        if s == 0:
            break
        pi /= s
        log_scale += math.log(s)
    return np.arange(n_max + 1), out
