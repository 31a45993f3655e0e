"""Poincare half-space geometry.

Points, the conformal factor ``1/y**2``, a concrete family of boundary
defining functions, Moebius isometries of the half-plane and the normal
extension field of a geodesic semicircle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DomainError


@dataclass(frozen=True)
class HalfSpacePoint:
    """A point ``(x, y)`` of the upper half-space, ``x`` in R^n and ``y > 0``."""

    x: tuple
    y: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if x.ndim != 1:
            raise DomainError("x must be a flat vector")
        y = float(self.y)
        if not (y > 0.0) or not np.isfinite(y):
            raise DomainError(f"half-space points need y > 0, got y={self.y!r}")
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.x)

    def as_array(self) -> np.ndarray:
        return np.array(self.x + (self.y,))

    @classmethod
    def from_array(cls, arr) -> "HalfSpacePoint":
        arr = np.asarray(arr, dtype=float)
        return cls(tuple(arr[:-1]), float(arr[-1]))


def conformal_factor(p: HalfSpacePoint) -> float:
    """Return ``1/y**2``, the factor relating the hyperbolic and Euclidean metrics."""
    return 1.0 / (p.y * p.y)


def hyperbolic_distance(p, q) -> float:
    """Hyperbolic distance between two points of the half-space model."""
    a = p.as_array() if isinstance(p, HalfSpacePoint) else np.asarray(p, float)
    b = q.as_array() if isinstance(q, HalfSpacePoint) else np.asarray(q, float)
    d2 = float(np.sum((a - b) ** 2))
    # arccosh(1 + u) loses precision for small u; use the log1p form.
    u = d2 / (2.0 * a[-1] * b[-1])
    return float(np.log1p(u + np.sqrt(u * (u + 2.0))))


_KINDS = ("height", "scaled", "tilted")


@dataclass(frozen=True)
class DefiningFunction:
    """Boundary defining function ``r`` used to truncate hypersurfaces.

    Three kinds are provided:

    * ``height``: ``r = y``
    * ``scaled``: ``r = y / (1 + alpha*|x - center|**2 + alpha*y**2)``
    * ``tilted``: ``r = y * (1 + beta*y)`` with ``|beta| < 1``

    Use the :meth:`height`, :meth:`scaled` and :meth:`tilted` constructors.
    """

    kind: str = "height"
    center: tuple = ()
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown defining function kind {self.kind!r}")
        if self.alpha < 0:
            raise DomainError("alpha must be nonnegative")
        if not abs(self.beta) < 1:
            raise DomainError("tilted defining functions need |beta| < 1")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @classmethod
    def height(cls) -> "DefiningFunction":
        return cls("height")

    @classmethod
    def scaled(cls, center: Sequence[float] | float = 0.0, alpha: float = 1.0) -> "DefiningFunction":
        return cls("scaled", center=tuple(np.atleast_1d(np.asarray(center, float))), alpha=float(alpha))

    @classmethod
    def tilted(cls, beta: float) -> "DefiningFunction":
        return cls("tilted", beta=float(beta))

    @classmethod
    def from_dict(cls, d: dict) -> "DefiningFunction":
        kind = d.get("kind", "height")
        if kind == "height":
            return cls.height()
        if kind == "scaled":
            return cls.scaled(d.get("center", 0.0), d.get("alpha", 1.0))
        if kind == "tilted":
            return cls.tilted(d.get("beta", 0.0))
        raise DomainError(f"unknown defining function kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "height":
            return {"kind": "height"}
        if self.kind == "scaled":
            return {"kind": "scaled", "center": list(self.center), "alpha": self.alpha}
        return {"kind": "tilted", "beta": self.beta}

    def __call__(self, points) -> np.ndarray:
        """Evaluate on an array of points with shape ``(..., n + 1)``."""
        pts = np.asarray(points, dtype=float)
        y = pts[..., -1]
        if self.kind == "height":
            return y.copy()
        if self.kind == "tilted":
            return y * (1.0 + self.beta * y)
        x = pts[..., :-1]
        c = np.zeros(x.shape[-1])
        c[: min(len(self.center), x.shape[-1])] = self.center[: x.shape[-1]]
        d2 = np.sum((x - c) ** 2, axis=-1)
        return y / (1.0 + self.alpha * d2 + self.alpha * y * y)

    def ratio_to_height(self, points) -> np.ndarray:
        """``r/y``, smooth and positive up to the ideal boundary."""
        pts = np.asarray(points, dtype=float)
        y = pts[..., -1]
        if self.kind == "height":
            return np.ones_like(y)
        if self.kind == "tilted":
            return 1.0 + self.beta * y
        x = pts[..., :-1]
        c = np.zeros(x.shape[-1])
        c[: min(len(self.center), x.shape[-1])] = self.center[: x.shape[-1]]
        return 1.0 / (1.0 + self.alpha * np.sum((x - c) ** 2, axis=-1) + self.alpha * y * y)

    def is_radial_about(self, axis) -> bool:
        """True when ``r`` is invariant under rotations about the vertical line through ``axis``."""
        if self.kind != "scaled" or self.alpha == 0.0:
            return True
        axis = np.atleast_1d(np.asarray(axis, float))
        c = np.zeros(len(axis))
        c[: min(len(self.center), len(axis))] = self.center[: len(axis)]
        return bool(np.allclose(c, axis, rtol=0, atol=0))


def eval_defining(r: DefiningFunction, p: HalfSpacePoint) -> float:
    return float(r(p.as_array()))


@dataclass(frozen=True)
class MobiusMap:
    """Orientation-preserving isometry ``z -> (a z + b)/(c z + d)`` of the half-plane."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not self.det > 0:
            raise DomainError(f"Moebius map needs ad - bc > 0, got {self.det}")

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        """``self o other``."""
        return MobiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    __matmul__ = compose

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def pole(self) -> float:
        """Boundary point sent to infinity (``inf`` for affine maps)."""
        return -self.d / self.c if self.c != 0 else np.inf

    def apply_boundary(self, t):
        """Act on boundary reals; raises if an input is the pole."""
        t = np.asarray(t, dtype=float)
        den = self.c * t + self.d
        if np.any(den == 0):
            raise DomainError("boundary point is mapped to infinity")
        out = (self.a * t + self.b) / den
        return float(out) if out.ndim == 0 else out

    def apply_point(self, p: HalfSpacePoint) -> HalfSpacePoint:
        if p.n != 1:
            raise DomainError("Moebius maps act on the half-plane (n = 1) only")
        z = complex(p.x[0], p.y)
        w = (self.a * z + self.b) / (self.c * z + self.d)
        return HalfSpacePoint((w.real,), w.imag)


def mobius_apply(m: MobiusMap, p):
    """Apply ``m`` to a :class:`HalfSpacePoint` or to boundary reals."""
    if isinstance(p, HalfSpacePoint):
        return m.apply_point(p)
    return m.apply_boundary(p)


@dataclass(frozen=True)
class NormalField:
    """Normal extension field of the geodesic semicircle with center ``center`` and radius ``radius``.

    Radial projection ``Pi(q) = c + R (q - c)/|q - c|`` onto the semicircle
    gives ``X(q) = y(Pi(q)) * (q - c)/|q - c|``: the hyperbolic unit normal
    transported along the projection.
    """

    center: float
    radius: float
    band: float = field(default=0.5)

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("radius must be positive")

    def _offset(self, q):
        q = np.asarray(q, dtype=float)
        d = q - np.array([self.center, 0.0])
        rho = np.hypot(d[..., 0], d[..., 1])
        if np.any(rho == 0):
            raise DomainError("projection is undefined at the center of the semicircle")
        return d, rho

    def project(self, q) -> np.ndarray:
        d, rho = self._offset(q)
        return np.array([self.center, 0.0]) + self.radius * d / rho[..., None]

    def unit_normal(self, q) -> np.ndarray:
        """Euclidean unit normal of the semicircle at ``Pi(q)`` (the normalized field)."""
        d, rho = self._offset(q)
        return d / rho[..., None]

    def field(self, q) -> np.ndarray:
        d, rho = self._offset(q)
        y_proj = self.radius * d[..., 1] / rho
        return y_proj[..., None] * d / rho[..., None]

    def hyperbolic_divergence(self, q, rel_step: float = 1e-5) -> np.ndarray:
        """``div X`` in the hyperbolic metric by central differences, step ``rel_step * y``."""
        q = np.asarray(q, dtype=float)
        h = rel_step * q[..., 1]
        ex = np.zeros(q.shape)
        ex[..., 0] = h
        ey = np.zeros(q.shape)
        ey[..., 1] = h
        dxx = (self.field(q + ex)[..., 0] - self.field(q - ex)[..., 0]) / (2 * h)
        dyy = (self.field(q + ey)[..., 1] - self.field(q - ey)[..., 1]) / (2 * h)
        # div_g X = y^2 d_i(y^-2 X^i) in dimension 2
        return dxx + dyy - 2.0 * self.field(q)[..., 1] / q[..., 1]


def normal_projection_field(f: NormalField, q: HalfSpacePoint):
    """Evaluate the normal field at ``q``.

    Returns the Euclidean components of ``X(q)`` and a diagnostics dict with
    ``height_component`` (``y(Pi(q))**2 / R``) and ``divergence_estimate``.
    """
    arr = q.as_array() if isinstance(q, HalfSpacePoint) else np.asarray(q, float)
    vec = f.field(arr)
    diag = {
        "height_component": float(vec[1]),
        "divergence_estimate": float(f.hyperbolic_divergence(arr)),
    }
    return vec, diag
