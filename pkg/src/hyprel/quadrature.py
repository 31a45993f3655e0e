"""Truncated hyperbolic length/area of parametrized hypersurfaces.

Curves in H^2 and surfaces of revolution in H^3 are described by profile
pieces ``t -> (a(t), y(t))`` with derivatives; for curves ``a`` is the
horizontal coordinate, for revolution surfaces it is the distance to the
rotation axis. Integrals over ``{r >= eps}`` are computed piece by piece:
the level set is located by bracketing + Brent refinement along each
parameter line and each sub-interval is integrated with an adaptive
Gauss-Legendre rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import BudgetExceededError, DomainError
from .halfspace import DefiningFunction

GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
DEFAULT_BUDGET = 2 ** 20


@dataclass
class QuadResult:
    value: float
    error_bound: float
    nodes: int = 0
    empty: bool = False

    def __iter__(self):
        yield self.value
        yield self.error_bound


def _gl_cells(f, lo, hi):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    return half * (vals @ _GL_W)


def adaptive_gauss_legendre(f, a, b, tol=1e-10, rtol=0.0, budget=DEFAULT_BUDGET, initial=4):
    """Integrate a vectorized ``f`` over ``[a, b]``.

    Every cell is compared with its two halves; a cell is accepted once the
    difference is below its share ``max(tol, rtol*|I|) * len/(b - a)`` of the
    tolerance. The reported error is the sum of those differences, which
    overestimates the error of the (refined) value that is returned.
    """
    if b <= a:
        return QuadResult(0.0, 0.0, 0, empty=True)
    edges = np.linspace(a, b, initial + 1)
    lo, hi = edges[:-1], edges[1:]
    coarse = _gl_cells(f, lo, hi)
    nodes = GL_ORDER * lo.size
    total_len = b - a
    min_len = 1e-14 * max(total_len, abs(a), abs(b))
    acc_lo, acc_val, acc_err = [], [], []
    accepted_sum = 0.0
    while lo.size:
        mid = 0.5 * (lo + hi)
        left = _gl_cells(f, lo, mid)
        right = _gl_cells(f, mid, hi)
        nodes += 2 * GL_ORDER * lo.size
        fine = left + right
        err = np.abs(fine - coarse)
        est = accepted_sum + float(np.sum(fine))
        share = max(tol, rtol * abs(est)) * (hi - lo) / total_len
        # cells whose estimate is already at round-off level cannot improve
        floor = 64 * np.finfo(float).eps * np.abs(fine)
        ok = (err <= np.maximum(share, floor)) | ((hi - lo) <= min_len)
        if np.any(ok):
            acc_lo.append(lo[ok])
            acc_val.append(fine[ok])
            acc_err.append(err[ok])
            accepted_sum += float(np.sum(fine[ok]))
        bad = ~ok
        if not np.any(bad):
            break
        if nodes > budget:
            lo_all = np.concatenate(acc_lo + [lo[bad]])
            val_all = np.concatenate(acc_val + [fine[bad]])
            err_all = np.concatenate(acc_err + [err[bad]])
            order = np.argsort(lo_all, kind="stable")
            raise BudgetExceededError(
                f"node budget {budget} exhausted",
                value=float(np.sum(val_all[order])),
                error_bound=float(np.sum(err_all)),
            )
        lo, mid, hi = lo[bad], mid[bad], hi[bad]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        coarse = np.concatenate([left[bad], right[bad]])
    lo_all = np.concatenate(acc_lo)
    order = np.argsort(lo_all, kind="stable")
    # fixed parameter order + numpy pairwise summation: deterministic result
    value = float(np.sum(np.concatenate(acc_val)[order]))
    error = float(np.sum(np.concatenate(acc_err)[order]))
    return QuadResult(value, error, nodes)


@dataclass
class ProfilePiece:
    """One smooth piece of a profile curve.

    ``func(t)`` returns ``(a, y, da, dy)`` arrays for parameters ``t`` in
    ``[t0, t1]``.
    """

    func: Callable
    t0: float
    t1: float

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))


class SampledImmersion:
    """A parametrized curve (``dim=1``) or surface of revolution (``dim=2``).

    Parameters
    ----------
    dim : {1, 2}
    pieces : sequence of ProfilePiece
    axis : sequence of float, optional
        Boundary coordinates of the rotation axis (``dim=2`` only).
    boundary : object, optional
        Descriptor of the asymptotic boundary, e.g. endpoint tuple or circle radii.
    """

    def __init__(self, dim: int, pieces: Sequence[ProfilePiece], axis=None, boundary=None, label: str = ""):
        if dim not in (1, 2):
            raise DomainError("only curves (dim=1) and revolution surfaces (dim=2) are supported")
        self.dim = dim
        self.pieces = list(pieces)
        self.axis = np.zeros(2) if axis is None else np.asarray(axis, dtype=float)
        self.boundary = boundary
        self.label = label

    def evaluate(self, k: int, t, phi=None):
        """Points, unit Euclidean normals and Euclidean length/area element at ``t``."""
        a, y, da, dy = self.pieces[k](t)
        speed = np.hypot(da, dy)
        n_a, n_y = dy / speed, -da / speed
        if self.dim == 1:
            pts = np.stack([a, y], axis=-1)
            nrm = np.stack([n_a, n_y], axis=-1)
            return pts, nrm, speed
        phi = 0.0 if phi is None else phi
        c, s = np.cos(phi), np.sin(phi)
        pts = np.stack([self.axis[0] + a * c, self.axis[1] + a * s, y], axis=-1)
        nrm = np.stack([n_a * c, n_a * s, n_y], axis=-1)
        return pts, nrm, np.abs(a) * speed

    def max_height(self, samples: int = 2049) -> float:
        best = 0.0
        for p in self.pieces:
            t = np.linspace(p.t0, p.t1, samples)
            best = max(best, float(np.max(p(t)[1])))
        return best


def _sample_params(t0, t1, n=257):
    u = np.linspace(0.0, 1.0, n)
    g = np.geomspace(1e-10, 1.0 / (n - 1), 30)
    u = np.unique(np.concatenate([u, g, 1.0 - g]))
    return t0 + (t1 - t0) * u


def level_crossings(g, t0, t1, levels, n=257):
    """Parameters in ``(t0, t1)`` where ``g(t)`` crosses any of ``levels``."""
    t = _sample_params(t0, t1, n)
    vals = g(t)
    out = []
    span = t1 - t0
    for lev in levels:
        d = vals - lev
        sgn = np.sign(d)
        idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        for i in idx:
            root = brentq(lambda s: float(g(np.array([s]))[0]) - lev, t[i], t[i + 1],
                          xtol=1e-14 * max(span, 1.0), rtol=4 * np.finfo(float).eps, maxiter=200)
            out.append(root)
        # exact hits on sample nodes
        out.extend(t[1:-1][d[1:-1] == 0.0].tolist())
    return np.unique(np.asarray(out, dtype=float))


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def phi_ramp(t, t1: float, delta: float):
    """Smooth cutoff: 1 for ``t >= t1``, 0 for ``t <= t1 - delta``; slope at most ``1.5/delta``."""
    return smoothstep((np.asarray(t, dtype=float) - (t1 - delta)) / delta)


@dataclass(frozen=True)
class CutoffProfile:
    """Bump ``phi_{t1,delta} - phi_{t2+delta,delta}``: 1 on ``[t1, t2]``, 0 off ``[t1-delta, t2+delta]``."""

    t1: float
    t2: float
    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and self.t1 - self.delta > 0):
            raise DomainError("need 0 < t1 - delta")
        if not self.t1 <= self.t2:
            raise DomainError("need t1 <= t2")

    def __call__(self, t):
        return phi_ramp(t, self.t1, self.delta) - phi_ramp(t, self.t2 + self.delta, self.delta)

    @property
    def breakpoints(self):
        return (self.t1 - self.delta, self.t1, self.t2, self.t2 + self.delta)


def _line_integral(s, k, phi, r, levels, mask_fn, factor_fn, weight, tol, rtol, budget):
    """Integrate one parameter line of piece ``k`` split at the level crossings of ``r``."""
    piece = s.pieces[k]

    def r_of_t(t):
        pts, _, _ = s.evaluate(k, t, phi)
        return r(pts)

    cuts = level_crossings(r_of_t, piece.t0, piece.t1, levels)
    edges = np.concatenate([[piece.t0], cuts, [piece.t1]])
    dim = s.dim

    def density(t):
        pts, nrm, jac = s.evaluate(k, t, phi)
        val = jac / pts[..., -1] ** dim
        if factor_fn is not None:
            val = val * factor_fn(r(pts))
        if weight is not None:
            val = val * weight(pts, nrm)
        return val

    value, err, nodes, used = 0.0, 0.0, 0, False
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        pts, _, _ = s.evaluate(k, np.array([mid]), phi)
        if not mask_fn(r(pts)[0]):
            continue
        res = adaptive_gauss_legendre(density, lo, hi, tol=tol, rtol=rtol, budget=budget)
        value += res.value
        err += res.error_bound
        nodes += res.nodes
        used = True
    return value, err, nodes, used


def _integrate(s, r, levels, mask_fn, factor_fn, weight, tol, rtol, budget):
    r = DefiningFunction.height() if r is None else r
    n_lines = sum(1 for _ in s.pieces)
    line_tol = tol / n_lines
    total, err, nodes, used = 0.0, 0.0, 0, False
    if s.dim == 1 or (weight is None and r.is_radial_about(s.axis)):
        scale = 1.0 if s.dim == 1 else 2.0 * np.pi
        for k in range(len(s.pieces)):
            v, e, nn, u = _line_integral(s, k, None, r, levels, mask_fn, factor_fn, weight,
                                         line_tol / scale, rtol, budget)
            total += scale * v
            err += scale * e
            nodes += nn
            used |= u
        return QuadResult(total, err, nodes, empty=not used)

    # genuinely two-dimensional: adaptive outer rule over the rotation angle
    for k in range(len(s.pieces)):
        state = {"used": False, "err": 0.0, "nodes": 0}

        def inner(phis, k=k, state=state):
            out = np.empty(phis.size)
            for i, ph in enumerate(phis):
                v, e, nn, u = _line_integral(s, k, ph, r, levels, mask_fn, factor_fn, weight,
                                             line_tol / (4 * np.pi), rtol, budget)
                out[i] = v
                state["used"] |= u
                state["err"] = max(state["err"], e)
                state["nodes"] += nn
            return out

        res = adaptive_gauss_legendre(inner, 0.0, 2 * np.pi, tol=line_tol / 2, rtol=rtol, budget=budget, initial=2)
        total += res.value
        err += res.error_bound + 2 * np.pi * state["err"]
        nodes += state["nodes"]
        used |= state["used"]
    return QuadResult(total, err, nodes, empty=not used)


def vol_eps(s: SampledImmersion, r: DefiningFunction | None, eps: float, tol: float = 1e-10,
            rtol: float = 0.0, budget: int = DEFAULT_BUDGET) -> QuadResult:
    """Hyperbolic length/area of ``s`` inside ``{r >= eps}``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if not tol > 0:
        raise DomainError("tol must be positive")
    return _integrate(s, r, [eps], lambda rv: rv >= eps, None, None, tol, rtol, budget)


def weighted_vol_eps(s: SampledImmersion, r: DefiningFunction | None, eps: float, psi,
                     tol: float = 1e-10, rtol: float = 0.0, budget: int = DEFAULT_BUDGET) -> QuadResult:
    """Integral of ``psi(p, v)`` over ``s`` inside ``{r >= eps}`` (``v``: unit Euclidean normal)."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    return _integrate(s, r, [eps], lambda rv: rv >= eps, None, psi, tol, rtol, budget)


def cutoff_vol(s: SampledImmersion, r: DefiningFunction | None, c: CutoffProfile, tol: float = 1e-10,
               rtol: float = 0.0, budget: int = DEFAULT_BUDGET, psi=None) -> QuadResult:
    """Integral of the smooth cutoff ``c(r)`` (optionally times ``psi``) over ``s``."""
    lo, hi = c.breakpoints[0], c.breakpoints[-1]
    return _integrate(s, r, list(c.breakpoints), lambda rv: lo < rv < hi, c, psi, tol, rtol, budget)


# --- builders -------------------------------------------------------------

def _geodesic_piece(center: float, radius: float) -> ProfilePiece:
    def f(theta):
        c, s = np.cos(theta), np.sin(theta)
        return center + radius * c, radius * s, -radius * s, radius * c
    return ProfilePiece(f, 0.0, np.pi)


def geodesic_immersion(geodesics, label: str = "") -> SampledImmersion:
    """Union of geodesic semicircles (``GeodesicConfig`` or iterable of ``GeodesicH2``)."""
    geos = getattr(geodesics, "geodesics", geodesics)
    pieces = [_geodesic_piece(g.center, g.radius) for g in geos]
    endpoints = tuple(sorted(v for g in geos for v in (g.a, g.b)))
    return SampledImmersion(1, pieces, boundary=endpoints, label=label)


def hemisphere_immersion(radius: float, axis=(0.0, 0.0)) -> SampledImmersion:
    """Totally geodesic hemisphere of Euclidean radius ``radius`` centred on ``axis``."""
    R = float(radius)

    def f(t):
        c, s = np.cos(t), np.sin(t)
        return R * c, R * s, -R * s, R * c

    return SampledImmersion(2, [ProfilePiece(f, 0.0, 0.5 * np.pi)], axis=axis, boundary=(R,), label="hemisphere")
