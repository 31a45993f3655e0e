"""Closed-form relative entropy of geodesic configurations in the hyperbolic plane.

A geodesic with ideal endpoints ``a < b`` is the upper half circle
``y**2 + (x - a)(x - b) = 0``. Its length above height ``eps`` is known in
closed form, so relative entropies of unions of geodesics with the same
endpoints reduce to sums of logarithms of endpoint gaps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, EmptyTruncationError, IncomparableError
from .halfspace import MobiusMap


@dataclass(frozen=True)
class GeodesicH2:
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise DomainError("geodesics through infinity are not supported")
        if not self.a < self.b:
            raise DomainError(f"need a < b, got a={self.a}, b={self.b}")

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def radius(self) -> float:
        return 0.5 * (self.b - self.a)

    def point(self, theta):
        """Point at polar angle ``theta`` in ``[0, pi]`` measured from the ``b`` end."""
        theta = np.asarray(theta, dtype=float)
        return np.stack([self.center + self.radius * np.cos(theta), self.radius * np.sin(theta)], axis=-1)

    def implicit(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts[..., 1] ** 2 + (pts[..., 0] - self.a) * (pts[..., 0] - self.b)


def truncated_length_exact(g: GeodesicH2, eps: float) -> float:
    """Hyperbolic length of ``g`` above height ``eps``."""
    gap = g.b - g.a
    if not eps > 0:
        raise DomainError("eps must be positive")
    if eps >= 0.5 * gap:
        raise EmptyTruncationError(f"eps={eps} is at or above the apex height {0.5 * gap}")
    disc = math.sqrt((gap - 2 * eps) * (gap + 2 * eps))
    return 2.0 * math.log((gap + disc) / (2.0 * eps))


def cross_ratio(a1: float, a2: float, a3: float, a4: float) -> float:
    """``((a2 - a1)(a4 - a3)) / ((a3 - a1)(a4 - a2))`` for ``a1 < a2 < a3 < a4``."""
    if not (a1 < a2 < a3 < a4):
        raise DomainError("cross_ratio needs strictly increasing arguments")
    return ((a2 - a1) * (a4 - a3)) / ((a3 - a1) * (a4 - a2))


class GeodesicConfig:
    """A finite union of geodesics given by a perfect matching of boundary points.

    Parameters
    ----------
    pairs : iterable of (a, b)
        Endpoint pairs; each pair is sorted internally. Every endpoint must
        be distinct.
    """

    def __init__(self, pairs):
        geos = []
        for p in pairs:
            lo, hi = sorted(float(v) for v in p)
            geos.append(GeodesicH2(lo, hi))
        pts = [v for g in geos for v in (g.a, g.b)]
        if len(set(pts)) != len(pts):
            raise DomainError("endpoints must be distinct (multiplicity one)")
        if not geos:
            raise DomainError("a configuration needs at least one geodesic")
        self.geodesics = tuple(sorted(geos, key=lambda g: (g.a, g.b)))
        self.endpoints = tuple(sorted(pts))

    @property
    def pairs(self):
        return tuple((g.a, g.b) for g in self.geodesics)

    def __eq__(self, other):
        return isinstance(other, GeodesicConfig) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def __repr__(self):
        return f"GeodesicConfig({list(self.pairs)!r})"

    def comparable(self, other: "GeodesicConfig") -> bool:
        return self.endpoints == other.endpoints

    def truncated_length(self, eps: float) -> float:
        """Closed-form length above ``eps``; components below the cut contribute 0."""
        total = 0.0
        for g in self.geodesics:
            if eps < g.radius:
                total += truncated_length_exact(g, eps)
        return total

    def log_gap_sum(self) -> float:
        return sum(math.log(g.b - g.a) for g in self.geodesics)

    def transform(self, m: MobiusMap) -> "GeodesicConfig":
        """Image under a Moebius map whose pole lies outside the endpoint hull."""
        pole = m.pole()
        if np.isfinite(pole) and self.endpoints[0] <= pole <= self.endpoints[-1]:
            raise DomainError("the map sends an endpoint region through infinity")
        return GeodesicConfig([(m.apply_boundary(g.a), m.apply_boundary(g.b)) for g in self.geodesics])


def relative_entropy_exact(c1: GeodesicConfig, c2: GeodesicConfig) -> float:
    """``E_rel[c1, c2] = 2 sum log(gaps of c1) - 2 sum log(gaps of c2)``."""
    if not c1.comparable(c2):
        raise IncomparableError("configurations have different endpoint sets")
    if c1 == c2:
        return 0.0
    return 2.0 * (c1.log_gap_sum() - c2.log_gap_sum())


def _matchings(points):
    if not points:
        yield ()
        return
    first, rest = points[0], points[1:]
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for m in _matchings(remaining):
            yield ((first, partner),) + m


def perfect_matchings(endpoints):
    """All perfect matchings of an even number of sorted endpoints."""
    pts = tuple(sorted(float(v) for v in endpoints))
    if len(pts) % 2:
        raise DomainError("need an even number of endpoints")
    return [GeodesicConfig(m) for m in _matchings(pts)]


@dataclass
class PairingTable:
    configs: list
    entropy: np.ndarray

    def cross_ratio_values(self) -> np.ndarray:
        """``exp(E/2)``: each off-diagonal entry is a permutation of the cross ratio."""
        return np.exp(0.5 * self.entropy)


def enumerate_pairings(endpoints) -> PairingTable:
    """The three matchings of four boundary points and their 3x3 entropy table.

    Ordering: ``{(a1,a2),(a3,a4)}``, ``{(a1,a3),(a2,a4)}``, ``{(a1,a4),(a2,a3)}``.
    Entry ``[i, j]`` is ``E_rel[config_i, config_j]``.
    """
    pts = [float(v) for v in endpoints]
    if len(pts) != 4:
        raise DomainError("enumerate_pairings takes exactly four endpoints")
    if sorted(pts) != pts or len(set(pts)) != 4:
        raise DomainError("endpoints must be distinct and sorted")
    a1, a2, a3, a4 = pts
    configs = [
        GeodesicConfig([(a1, a2), (a3, a4)]),
        GeodesicConfig([(a1, a3), (a2, a4)]),
        GeodesicConfig([(a1, a4), (a2, a3)]),
    ]
    table = np.zeros((3, 3))
    for i, j in itertools.product(range(3), repeat=2):
        table[i, j] = relative_entropy_exact(configs[i], configs[j])
    return PairingTable(configs, table)
