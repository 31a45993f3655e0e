"""Admissible weights ``psi(p, v) = f0(p) + v . Q(p) v`` and their norms.

``p`` is a point of the half-space (last coordinate ``y``) and ``v`` a
Euclidean unit vector. The quadratic representation makes ``psi`` even in
``v`` and gives the sphere derivatives in closed form:

    grad_S psi = 2 (Q v - (v.Q v) v),    Hess_S psi = 2 P Q P - 2 (v.Q v) P,

with ``P = I - v v^T`` the tangential projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .expansion import EntropyEstimate, relative_entropy_numeric
from .halfspace import NormalField
from .quadrature import phi_ramp, weighted_vol_eps


def _zero_f0(p):
    return np.zeros(np.asarray(p).shape[:-1])


class Weight:
    """Quadratic-in-``v`` weight.

    Parameters
    ----------
    f0 : callable ``p -> (...)`` or None
    Q : callable ``p -> (..., d, d)`` or None
        Symmetrized on evaluation.
    dim : int
        Ambient dimension ``d = n + 1``.
    """

    def __init__(self, f0=None, Q=None, dim: int = 2):
        self.dim = dim
        self._f0 = f0 if f0 is not None else _zero_f0
        self._Q = Q

    # evaluation ---------------------------------------------------------
    def f0(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.asarray(self._f0(p), dtype=float), p.shape[:-1])

    def Q(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self._Q is None:
            return np.zeros(p.shape[:-1] + (self.dim, self.dim))
        q = np.broadcast_to(np.asarray(self._Q(p), dtype=float), p.shape[:-1] + (self.dim, self.dim))
        return 0.5 * (q + np.swapaxes(q, -1, -2))

    @property
    def is_v_independent(self) -> bool:
        return self._Q is None

    def __call__(self, p, v) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self._Q is None:
            return self.f0(p) + 0.0 * v[..., 0]
        Q = self.Q(p)
        return self.f0(p) + np.einsum("...i,...ij,...j->...", v, Q, v)

    def sphere_gradient(self, p, v) -> np.ndarray:
        Q = self.Q(p)
        v = np.asarray(v, dtype=float)
        Qv = np.einsum("...ij,...j->...i", Q, v)
        vQv = np.einsum("...i,...i->...", v, Qv)
        return 2.0 * (Qv - vQv[..., None] * v)

    def sphere_hessian(self, p, v) -> np.ndarray:
        Q = self.Q(p)
        v = np.asarray(v, dtype=float)
        P = np.eye(self.dim) - v[..., :, None] * v[..., None, :]
        vQv = np.einsum("...i,...ij,...j->...", v, Q, v)
        return 2.0 * P @ Q @ P - 2.0 * vQv[..., None, None] * P

    # algebra -------------------------------------------------------------
    def __add__(self, other: "Weight") -> "Weight":
        if not isinstance(other, Weight):
            return NotImplemented
        if other.dim != self.dim:
            raise DomainError("weights live in different dimensions")
        Q = None
        if self._Q is not None or other._Q is not None:
            Q = lambda p: self.Q(p) + other.Q(p)  # noqa: E731
        return Weight(lambda p: self.f0(p) + other.f0(p), Q, self.dim)

    def __mul__(self, c: float) -> "Weight":
        c = float(c)
        Q = None if self._Q is None else (lambda p: c * self.Q(p))
        return Weight(lambda p: c * self.f0(p), Q, self.dim)

    __rmul__ = __mul__

    # constructors --------------------------------------------------------
    @classmethod
    def constant(cls, c: float = 1.0, dim: int = 2) -> "Weight":
        c = float(c)
        return cls(lambda p: np.full(np.asarray(p).shape[:-1], c), None, dim)

    @classmethod
    def from_matrix(cls, Q, dim: int | None = None) -> "Weight":
        """Constant quadratic form ``v . Q v``."""
        Q = np.asarray(Q, dtype=float)
        dim = Q.shape[0] if dim is None else dim
        return cls(None, lambda p: np.broadcast_to(Q, np.asarray(p).shape[:-1] + Q.shape), dim)

    @classmethod
    def vertical_square(cls, dim: int = 2) -> "Weight":
        """``(e_y . v)^2``."""
        Q = np.zeros((dim, dim))
        Q[-1, -1] = 1.0
        return cls.from_matrix(Q)

    @classmethod
    def product(cls, Y1, Y2, dim: int = 2) -> "Weight":
        """``(Y1(p).v)(Y2(p).v)`` for vector fields (or constant vectors) ``Y1, Y2``."""
        f1 = Y1 if callable(Y1) else (lambda p, c=np.asarray(Y1, float): np.broadcast_to(c, np.asarray(p).shape))
        f2 = Y2 if callable(Y2) else (lambda p, c=np.asarray(Y2, float): np.broadcast_to(c, np.asarray(p).shape))
        return cls(None, lambda p: 0.5 * (f1(p)[..., :, None] * f2(p)[..., None, :]
                                         + f2(p)[..., :, None] * f1(p)[..., None, :]), dim)


class ScalarField:
    """Ambient function ``f(p)`` (optionally ``f(p, t)``) with derivative evaluators.

    Derivatives not supplied are taken by central differences with step
    ``h * y`` (``10 h y`` for the Hessian).
    """

    def __init__(self, value, grad=None, hess=None, dt=None, h: float = 1e-4, constant: float | None = None):
        self._value, self._grad, self._hess, self._dt = value, grad, hess, dt
        self.h = h
        self.constant_value = constant

    @classmethod
    def constant(cls, c: float = 1.0) -> "ScalarField":
        c = float(c)
        return cls(lambda p: np.full(np.asarray(p).shape[:-1], c),
                   grad=lambda p: np.zeros(np.asarray(p).shape),
                   hess=lambda p: np.zeros(np.asarray(p).shape + (np.asarray(p).shape[-1],)),
                   constant=c)

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None

    @property
    def has_exact_derivatives(self) -> bool:
        return self._grad is not None and self._hess is not None

    def value(self, p):
        return np.asarray(self._value(np.asarray(p, dtype=float)), dtype=float)

    def _steps(self, p):
        return self.h * np.maximum(p[..., -1], 1e-300)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(p), dtype=float)
        h = self._steps(p)
        out = np.empty(p.shape)
        for i in range(p.shape[-1]):
            e = np.zeros(p.shape)
            e[..., i] = h
            out[..., i] = (self.value(p + e) - self.value(p - e)) / (2 * h)
        return out

    def hess(self, p):
        p = np.asarray(p, dtype=float)
        if self._hess is not None:
            return np.asarray(self._hess(p), dtype=float)
        h = 10 * self._steps(p)  # wider step keeps round-off in second differences near 1e-10
        d = p.shape[-1]
        out = np.empty(p.shape + (d,))
        for i in range(d):
            e = np.zeros(p.shape)
            e[..., i] = h
            g_plus = self.grad(p + e) if self._grad is not None else None
            if g_plus is not None:
                out[..., i, :] = (g_plus - self.grad(p - e)) / (2 * h[..., None])
            else:
                for j in range(d):
                    f = np.zeros(p.shape)
                    f[..., j] = h
                    out[..., i, j] = (self.value(p + e + f) - self.value(p + e - f)
                                      - self.value(p - e + f) + self.value(p - e - f)) / (4 * h * h)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def time_derivative(self, p):
        p = np.asarray(p, dtype=float)
        if self._dt is None:
            return np.zeros(p.shape[:-1])
        return np.asarray(self._dt(p), dtype=float)

    def as_weight(self, dim: int = 2) -> Weight:
        return Weight(self.value, None, dim)

    def evolution_weight(self, dim: int = 2) -> Weight:
        """``d_t f - Delta f + <nabla_n nabla f, n>`` in the hyperbolic metric, as a weight in ``v``.

        With ``n = y v``: ``Delta f = y^2 Delta_E f - (d-2) y f_y`` and
        ``Hess f(n, n) = y^2 v.D^2f v + 2 y (v.e_y)(v.grad f) - y f_y``.
        """
        def f0(p):
            y = p[..., -1]
            lap = np.trace(self.hess(p), axis1=-2, axis2=-1)
            fy = self.grad(p)[..., -1]
            return self.time_derivative(p) - y * y * lap + (dim - 3) * y * fy

        def Q(p):
            y = p[..., -1]
            g = self.grad(p)
            ey = np.zeros(dim)
            ey[-1] = 1.0
            outer = ey[:, None] * g[..., None, :] + g[..., :, None] * ey[None, :]
            return (y * y)[..., None, None] * self.hess(p) + y[..., None, None] * outer

        return Weight(f0, Q, dim)


# --- norm estimate ------------------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    """Sampling of ``band x sphere`` for :func:`x_norm_estimate`."""

    y_min: float = 1e-4
    y_max: float = 1.0
    n_y: int = 25
    x_range: tuple = (-2.0, 2.0)
    n_x: int = 9
    n_sphere: int = 64
    fd_step: float = 1e-5


def _sphere_grid(dim, n):
    if dim == 2:
        a = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
        return np.stack([np.cos(a), np.sin(a)], axis=-1)
    # Fibonacci points on S^2
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5 ** 0.5) * k
    rr = np.sqrt(1 - z * z)
    return np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=-1)


def _band_points(dim, spec):
    ys = np.geomspace(spec.y_min, spec.y_max, spec.n_y)
    xs = np.linspace(*spec.x_range, spec.n_x)
    grids = np.meshgrid(*([xs] * (dim - 1) + [ys]), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def x_norm_estimate(w: Weight, sample_spec: SampleSpec = SampleSpec(), terms: bool = False):
    """Sampled lower estimate of the admissible-weight norm.

    Maximum over samples of the five-term sum: ``psi``, its first and second
    sphere derivatives, and ``y`` times the ambient derivatives of ``psi``
    and of its sphere gradient (central differences, step ``fd_step * y``).
    With ``terms=True`` the per-term suprema are returned as well.
    """
    dim = w.dim
    P = _band_points(dim, sample_spec)
    V = _sphere_grid(dim, sample_spec.n_sphere)
    p = np.repeat(P, V.shape[0], axis=0)
    v = np.tile(V, (P.shape[0], 1))
    y = p[:, -1]
    parts = {
        "value": np.abs(w(p, v)),
        "sphere_gradient": np.linalg.norm(w.sphere_gradient(p, v), axis=-1),
        "sphere_hessian": np.linalg.norm(w.sphere_hessian(p, v), ord=2, axis=(-2, -1)),
    }
    h = sample_spec.fd_step * y
    dpsi = np.empty(p.shape)
    dgrad = np.empty(p.shape + (dim,))
    for i in range(dim):
        e = np.zeros(p.shape)
        e[:, i] = h
        dpsi[:, i] = (w(p + e, v) - w(p - e, v)) / (2 * h)
        dgrad[:, i, :] = (w.sphere_gradient(p + e, v) - w.sphere_gradient(p - e, v)) / (2 * h[:, None])
    parts["scaled_gradient"] = y * np.linalg.norm(dpsi, axis=-1)
    parts["scaled_mixed"] = y * np.linalg.norm(dgrad, ord=2, axis=(-2, -1))
    total = float(np.max(sum(np.broadcast_to(a, y.shape) for a in parts.values())))
    sup = {k: float(np.max(a)) for k, a in parts.items()}
    return (total, sup) if terms else total


# --- quadratic reduction --------------------------------------------------------

@dataclass
class QuadraticReduction:
    Y_psi: object
    psi_bar: Weight
    X_bar: object
    eps: float


def quadratic_reduction(w: Weight, background: NormalField, eps: float = 0.2) -> QuadraticReduction:
    """``Y_psi(p) = grad_S psi(p, Xbar(p))`` and ``psi_bar = psi - (1 - phi)(Y_psi.v)(Xbar.v)``.

    ``Xbar`` is the unit normal of the background semicircle at the radial
    projection of ``p``; ``phi`` is the smoothstep ramp that is 1 for
    ``y >= eps`` and 0 for ``y <= eps/2``, so the sphere gradient of
    ``psi_bar`` at ``Xbar`` vanishes wherever ``y <= eps/2``.
    """
    if w.dim != 2:
        raise DomainError("the normal-field reduction is implemented for curves in H^2")

    def X_bar(p):
        p = np.asarray(p, dtype=float)
        d = p - np.array([background.center, 0.0])
        rho = np.hypot(d[..., 0], d[..., 1])
        if np.any(np.abs(rho - background.radius) > background.band * background.radius):
            raise DomainError("point outside the band around the background geodesic")
        return background.unit_normal(p)

    def Y_psi(p):
        return w.sphere_gradient(p, X_bar(p))

    def Q_bar(p):
        p = np.asarray(p, dtype=float)
        X = X_bar(p)
        Y = Y_psi(p)
        cut = 1.0 - phi_ramp(p[..., -1], eps, 0.5 * eps)
        sym = 0.5 * (Y[..., :, None] * X[..., None, :] + X[..., :, None] * Y[..., None, :])
        return w.Q(p) - cut[..., None, None] * sym

    return QuadraticReduction(Y_psi, Weight(w.f0, Q_bar, w.dim), X_bar, eps)


def reduction_invariant(red: QuadraticReduction, background: NormalField, n_y: int = 20, n_r: int = 7) -> float:
    """Largest ``|grad_S psi_bar(p, Xbar(p))|`` over band points with ``y <= eps/2``."""
    ys = np.geomspace(1e-4 * min(1.0, background.radius), 0.5 * red.eps, n_y)
    scale = 1.0 + np.linspace(-0.5, 0.5, n_r) * background.band
    Y, S = np.meshgrid(ys, scale * background.radius)
    Y = np.minimum(Y, 0.999 * S)
    P = np.stack([background.center + np.sqrt(S ** 2 - Y ** 2), Y], axis=-1)
    P = np.concatenate([P, P * np.array([-1.0, 1.0]) + np.array([2 * background.center, 0.0])])
    G = red.psi_bar.sphere_gradient(P, red.X_bar(P))
    return float(np.max(np.linalg.norm(G, axis=-1)))


# --- weighted entropy -----------------------------------------------------------

def weighted_entropy(s1, s2, w: Weight, r=None, eps_grid=None, tol: float = 1e-11,
                     sample_spec: SampleSpec | None = None) -> EntropyEstimate:
    """Extrapolated limit of ``int_{s1} psi - int_{s2} psi`` over ``{r >= eps}``.

    The unweighted entropy is computed first (it must be finite); the
    diagnostic ``ratio = |E_w| / ((|E| + 1) ||psi||)`` is reported, never asserted.
    """
    plain = relative_entropy_numeric(s1, s2, r, eps_grid, tol)
    est = relative_entropy_numeric(s1, s2, r, eps_grid, tol, psi=w)
    norm = x_norm_estimate(w, sample_spec or SampleSpec(n_y=9, n_x=5, n_sphere=32))
    est.diagnostics["unweighted"] = plain.value
    est.diagnostics["x_norm"] = norm
    est.diagnostics["ratio"] = abs(est.value) / ((abs(plain.value) + 1.0) * norm) if norm > 0 else 0.0
    return est


def weighted_tail_slope(s1, s2, w: Weight, r=None, eps_grid=None, tol: float = 1e-12) -> dict:
    """Log-log slope of the Cauchy increments ``|E_w(eps_k) - E_w(eps_k+1)|`` against ``eps_k+1``."""
    eps_grid = np.geomspace(0.1, 0.1 / 32, 6) if eps_grid is None else np.asarray(eps_grid, float)
    vals = np.array([weighted_vol_eps(s1, r, e, w, tol).value - weighted_vol_eps(s2, r, e, w, tol).value
                     for e in eps_grid])
    inc = np.abs(np.diff(vals))
    keep = inc > 0
    if keep.sum() < 2:
        return {"slope": float("inf"), "eps": eps_grid, "values": vals, "increments": inc}
    slope = np.polyfit(np.log(eps_grid[1:][keep]), np.log(inc[keep]), 1)[0]
    return {"slope": float(slope), "eps": eps_grid, "values": vals, "increments": inc}
