"""Rotationally symmetric minimal surfaces in H^3.

A surface of revolution about the vertical axis through the origin is given
by a profile ``(rho, y)``. Minimality (critical points of
``int rho/y^2 sqrt(drho^2 + dy^2)``) in arclength form reads

    rho' = cos(alpha),  y' = sin(alpha),  alpha' = -sin(alpha)/rho - 2 cos(alpha)/y

and, written as a graph ``rho(y)`` with ``p = rho'``,

    rho'' = (1 + p^2) (1/rho + 2 p / y).

The graph form is singular at ``y = 0``; surfaces are started from the
boundary power series ``rho = a0 + a2 y^2 + a3 y^3 + a4 y^4`` in which ``a3``
is free, then continued with the arclength ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from ._io import write_csv
from .exceptions import DomainError, EmptyTruncationError, GeometryError
from .quadrature import ProfilePiece, SampledImmersion, adaptive_gauss_legendre

MAX_TAYLOR_ORDER = 4


@dataclass(frozen=True)
class BoundaryTaylor:
    """Taylor coefficients of ``rho(y)`` at ``y = 0``; ``coefficients[k]`` multiplies ``y**k``."""

    r0: float
    coefficients: tuple
    order: int

    @property
    def a3(self) -> float:
        return self.coefficients[3] if self.order >= 3 else 0.0

    def rho(self, y):
        return P.polyval(y, self.coefficients)

    def drho(self, y):
        return P.polyval(y, P.polyder(self.coefficients))

    def d2rho(self, y):
        return P.polyval(y, P.polyder(self.coefficients, 2))


def _graph_residual(c, k):
    """Coefficient of ``y**(k-1)`` in ``y rho rho'' - (1 + p^2)(y + 2 p rho)`` (truncated series)."""
    c = np.asarray(c, dtype=float)
    p = P.polyder(c)
    q = P.polyder(c, 2)
    lhs = P.polymul([0.0, 1.0], P.polymul(c, q))
    rhs = P.polymul(P.polyadd([1.0], P.polymul(p, p)), P.polyadd([0.0, 1.0], 2.0 * P.polymul(p, c)))
    res = P.polysub(lhs, rhs)
    return res[k - 1] if k - 1 < res.size else 0.0


def boundary_taylor(r0: float, a3: float, order: int = 4) -> BoundaryTaylor:
    """Series of a minimal profile leaving the boundary circle of radius ``r0`` orthogonally.

    Matching the coefficient of ``y**(k-1)`` gives ``a0 k (k-3) a_k = -(rest)``:
    ``a1 = 0`` and ``a2 = -1/(2 r0)`` are forced, ``a3`` is free, higher
    coefficients follow.
    """
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    if not (isinstance(order, (int, np.integer)) and 0 <= order <= MAX_TAYLOR_ORDER):
        raise DomainError(f"order must be an integer in [0, {MAX_TAYLOR_ORDER}]")
    c = np.zeros(order + 1)
    c[0] = r0
    for k in range(1, order + 1):
        if k == 3:
            c[3] = a3
            continue
        c[k] = 0.0
        c[k] = -_graph_residual(c, k) / (r0 * k * (k - 3))
    return BoundaryTaylor(float(r0), tuple(float(v) for v in c), int(order))


def profile_rhs(s, z):
    rho, y, alpha = z
    return [math.cos(alpha), math.sin(alpha), -math.sin(alpha) / rho - 2.0 * math.cos(alpha) / y]


def _alpha_prime(rho, y, alpha):
    return -np.sin(alpha) / rho - 2.0 * np.cos(alpha) / y


# --- profile segments ---------------------------------------------------------

class _Segment:
    """Profile segment: ``geom(t)`` returns ``rho, y, drho, dy, d2rho, d2y``."""

    t0 = 0.0
    t1 = 0.0

    def geom(self, t):
        raise NotImplementedError

    def piece(self) -> ProfilePiece:
        def f(t):
            rho, y, dr, dy, _, _ = self.geom(t)
            return rho, y, dr, dy
        return ProfilePiece(f, self.t0, self.t1)


class _SeriesSegment(_Segment):
    def __init__(self, taylor: BoundaryTaylor, y_top: float):
        self.taylor = taylor
        self.t0, self.t1 = 0.0, float(y_top)

    def geom(self, t):
        t = np.asarray(t, dtype=float)
        one = np.ones_like(t)
        return self.taylor.rho(t), t, self.taylor.drho(t), one, self.taylor.d2rho(t), 0.0 * t


class _OdeSegment(_Segment):
    def __init__(self, sol, s_end: float):
        self.sol = sol
        self.t0, self.t1 = 0.0, float(s_end)

    def geom(self, t):
        t = np.asarray(t, dtype=float)
        rho, y, alpha = self.sol(t)
        ap = _alpha_prime(rho, y, alpha)
        c, s = np.cos(alpha), np.sin(alpha)
        return rho, y, c, s, -s * ap, c * ap

    def alpha(self, t):
        return self.sol(np.asarray(t, dtype=float))[2]


class _ArcSegment(_Segment):
    def __init__(self, radius: float):
        self.R = float(radius)
        self.t0, self.t1 = 0.0, 0.5 * math.pi

    def geom(self, t):
        t = np.asarray(t, dtype=float)
        c, s = np.cos(t), np.sin(t)
        R = self.R
        return R * c, R * s, -R * s, R * c, -R * c, -R * s


def _curvatures(seg, t):
    rho, y, dr, dy, d2r, d2y = seg.geom(t)
    v = np.hypot(dr, dy)
    k1 = (dr * d2y - dy * d2r) / v ** 3
    k2 = dy / (rho * v)
    return rho, y, dr, dy, v, k1, k2


class RevolutionSurface:
    """Minimal surface of revolution asymptotic to one or two concentric circles.

    Attributes
    ----------
    radii : tuple
        ``(R,)`` for disk type, ``(r1, r2)`` for annulus type.
    topology : str
        ``"disk"`` or ``"annulus"``.
    a3 : float or None
        Free series coefficient at the inner circle.
    landing : float or None
        Outer radius actually reached by the integrated profile.
    """

    def __init__(self, segments, radii, topology, a3=None, landing=None, b3=None, label=""):
        self._segments = list(segments)
        self.radii = tuple(float(r) for r in radii)
        self.topology = topology
        self.a3 = a3
        self.b3 = b3
        self.landing = landing
        self.label = label

    @property
    def euler_characteristic(self) -> int:
        return 1 if self.topology == "disk" else 0

    def immersion(self) -> SampledImmersion:
        return SampledImmersion(2, [s.piece() for s in self._segments], axis=(0.0, 0.0),
                                boundary=self.radii, label=self.label or self.topology)

    def max_height(self) -> float:
        return self.immersion().max_height()

    def profile_samples(self, per_segment: int = 201) -> np.ndarray:
        """Rows ``(s, rho, y)`` ordered along the profile, ``s`` the Euclidean arclength."""
        rows, s0 = [], 0.0
        for k, seg in enumerate(self._segments):
            t = np.linspace(seg.t0, seg.t1, per_segment)
            rho, y, dr, dy, _, _ = seg.geom(t)
            speed = np.hypot(dr, dy)
            ds = np.concatenate([[0.0], 0.5 * (speed[1:] + speed[:-1]) * np.diff(t)])
            s = s0 + np.cumsum(ds)
            if k == len(self._segments) - 1 and self.topology == "annulus":
                # the outer series runs from the boundary upwards; reverse it to follow the profile
                s = s0 + (s[-1] - s0) - (s - s0)
                order = np.argsort(s)
                s, rho, y = s[order], rho[order], y[order]
            rows.append(np.stack([s, rho, y], axis=-1)[(1 if k else 0):])
            s0 = float(np.max(s))
        return np.concatenate(rows)

    def boundary_slopes(self) -> list:
        """``drho/dy`` at each end of the profile (0 for orthogonal intersection)."""
        out = []
        for seg in (self._segments[0], self._segments[-1]):
            _, _, dr, dy, _, _ = seg.geom(np.array([0.0]))
            out.append(float(dr[0] / dy[0]))
        return out

    def ode_residual(self, samples: int = 200, h: float = 1e-3) -> float:
        """Max relative defect of ``alpha' = -sin/rho - 2cos/y`` with ``alpha'`` from a 5-point stencil."""
        worst = 0.0
        for seg in self._segments:
            if not isinstance(seg, _OdeSegment):
                continue
            t = np.linspace(seg.t0 + 4 * h, seg.t1 - 4 * h, samples)
            a = seg.alpha
            d = (a(t - 2 * h) - 8 * a(t - h) + 8 * a(t + h) - a(t + 2 * h)) / (12 * h)
            rho, y, alpha = seg.sol(t)
            rhs = _alpha_prime(rho, y, alpha)
            worst = max(worst, float(np.max(np.abs(d - rhs) / (1.0 + np.abs(rhs)))))
        return worst

    def mean_curvature_fd(self, samples: int = 200, h: float = 1e-3) -> float:
        """Max ``|H|`` in the hyperbolic metric, from finite differences of the profile positions only.

        ``H = y (k1 + k2) + 2 nu_y`` with the Euclidean principal curvatures
        ``k1, k2`` and unit normal ``nu``; it is the first variation density
        of the area functional.
        """
        worst = 0.0
        for seg in self._segments:
            lo, hi = seg.t0 + 4 * h, seg.t1 - 4 * h
            if hi <= lo:
                continue
            t = np.linspace(lo, hi, samples)

            def pos(u):
                g = seg.geom(u)
                return g[0], g[1]

            (r_m2, y_m2), (r_m1, y_m1), (r0, y0), (r_p1, y_p1), (r_p2, y_p2) = (
                pos(t - 2 * h), pos(t - h), pos(t), pos(t + h), pos(t + 2 * h))
            dr = (r_m2 - 8 * r_m1 + 8 * r_p1 - r_p2) / (12 * h)
            dy = (y_m2 - 8 * y_m1 + 8 * y_p1 - y_p2) / (12 * h)
            d2r = (-r_m2 + 16 * r_m1 - 30 * r0 + 16 * r_p1 - r_p2) / (12 * h * h)
            d2y = (-y_m2 + 16 * y_m1 - 30 * y0 + 16 * y_p1 - y_p2) / (12 * h * h)
            v = np.hypot(dr, dy)
            k1 = (dr * d2y - dy * d2r) / v ** 3
            k2 = dy / (r0 * v)
            H = y0 * (k1 + k2) + 2.0 * dr / v
            worst = max(worst, float(np.max(np.abs(H))))
        return worst

    def graph_rho(self, y, side: int = 0):
        """``rho`` as a function of height along the inner (``side=0``) or outer (``side=1``) branch."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        seg_series = self._segments[0] if side == 0 else self._segments[-1]
        out = np.empty_like(y)
        if not isinstance(seg_series, _SeriesSegment):
            raise GeometryError("graph_rho is only defined for shooting-produced surfaces")
        ode = self._segments[1]
        ts = np.linspace(ode.t0, ode.t1, 4001)
        yy = ode.sol(ts)[1]
        i_top = int(np.argmax(yy))
        for i, yv in enumerate(y):
            if yv <= seg_series.t1:
                out[i] = seg_series.taylor.rho(yv)
                continue
            if side == 0:
                lo, hi = 0, i_top
            else:
                lo, hi = i_top, ts.size - 1
            branch = yy[lo:hi + 1]
            if yv > branch.max():
                raise GeometryError(f"height {yv} is above the profile")
            # branch is monotone in y on each side of the top
            j = np.nonzero((branch[:-1] - yv) * (branch[1:] - yv) <= 0)[0]
            if j.size == 0:
                raise GeometryError(f"height {yv} not reached on this branch")
            a, b = ts[lo + j[0]], ts[lo + j[0] + 1]
            s_root = brentq(lambda s: ode.sol(s)[1] - yv, a, b, xtol=1e-15, rtol=1e-15)
            out[i] = ode.sol(s_root)[0]
        return out

    def write_profile_csv(self, path, per_segment: int = 201) -> None:
        write_csv(path, ("s", "rho", "y"), self.profile_samples(per_segment))


def hemisphere_surface(R: float) -> RevolutionSurface:
    if not R > 0:
        raise DomainError("R must be positive")
    return RevolutionSurface([_ArcSegment(R)], (R,), "disk", a3=0.0, label="hemisphere")


def hemisphere_vol_eps(R: float, eps: float) -> float:
    """Hyperbolic area of the hemisphere of radius ``R`` above height ``eps``: ``2 pi (R/eps - 1)``."""
    if not (R > 0 and eps > 0):
        raise DomainError("R and eps must be positive")
    if eps >= R:
        raise EmptyTruncationError(f"eps={eps} is at or above the top of the hemisphere (R={R})")
    return 2.0 * math.pi * (R / eps - 1.0)


# --- shooting ---------------------------------------------------------------

@dataclass(frozen=True)
class ShootingControls:
    """Parameters of the catenoid shooting scan.

    ``y_start`` is relative to ``r1``; ``n_grid`` points cover ``[-A, A]``
    uniformly and ``n_near_zero`` geometric points on each side resolve the
    landing map near the branch point ``a3 = 0``.
    """

    y_start: float = 1e-3
    rtol: float = 1e-13
    atol: float = 1e-15
    n_grid: int = 512
    n_near_zero: int = 24
    a_initial: float = 1.0
    a_max: float = 1e4
    root_xtol: float = 1e-12
    max_arclength: float = 200.0
    order: int = 4

    def __post_init__(self):
        if not (0 < self.y_start < 0.1):
            raise DomainError("y_start must lie in (0, 0.1)")
        if self.n_grid < 4:
            raise DomainError("n_grid must be at least 4")


@dataclass
class Shot:
    a3: float
    landing: float
    b3: float = float("nan")
    status: str = "landed"
    sol: object = None
    s_end: float = float("nan")


def _invert_outer_series(rho_e, p_e, y):
    """Solve for (R, b) with rho(y) = R - y^2/(2R) + b y^3 - y^4/(8R^3) matching value and slope."""
    R, b = rho_e, 0.0
    for _ in range(50):
        f1 = R - y * y / (2 * R) + b * y ** 3 - y ** 4 / (8 * R ** 3) - rho_e
        f2 = -y / R + 3 * b * y * y - y ** 3 / (2 * R ** 3) - p_e
        J = np.array([[1 + y * y / (2 * R * R) + y ** 4 / (2 * R ** 4), y ** 3],
                      [y / (R * R) + 3 * y ** 3 / (2 * R ** 4), 3 * y * y]])
        dR, db = np.linalg.solve(J, [-f1, -f2])
        R, b = R + dR, b + db
        if abs(dR) <= 1e-16 * abs(R) and abs(db) <= 1e-14 * (1 + abs(b)):
            break
    return float(R), float(b)


def shoot(r1: float, a3: float, controls: ShootingControls = ShootingControls(), dense: bool = False) -> Shot:
    """Integrate the profile leaving the circle ``r1`` with series parameter ``a3``."""
    ys = controls.y_start * r1
    tay = boundary_taylor(r1, a3, controls.order)
    rho0, p0 = float(tay.rho(ys)), float(tay.drho(ys))
    alpha0 = math.atan2(1.0, p0)

    def down(s, z):
        return z[1] - ys
    down.terminal, down.direction = True, -1

    def axis(s, z):
        return z[0] - 1e-6 * r1
    axis.terminal = True

    def escape(s, z):
        return z[1] - 100.0 * r1
    escape.terminal = True

    sol = solve_ivp(profile_rhs, (0.0, controls.max_arclength * r1), [rho0, ys, alpha0], method="DOP853",
                    rtol=controls.rtol, atol=controls.atol * r1, events=[down, axis, escape], dense_output=dense)
    if sol.status == -1:
        return Shot(a3, float("nan"), status="integrator-failure")
    if sol.t_events[0].size:
        rho_e, y_e, alpha_e = sol.y_events[0][0]
        p_e = math.cos(alpha_e) / math.sin(alpha_e)
        R, b = _invert_outer_series(rho_e, p_e, ys)
        return Shot(a3, R, b, "landed", sol.sol if dense else None, float(sol.t_events[0][0]))
    if sol.t_events[1].size:
        return Shot(a3, float("nan"), status="reached-axis")
    return Shot(a3, float("nan"), status="escaped")


@dataclass
class ShootingResult:
    surfaces: list
    trace: np.ndarray  # rows (a3, landing radius); nan where the profile did not land
    statuses: list = field(default_factory=list)
    scan_half_width: float = 0.0

    def write_trace_csv(self, path) -> None:
        write_csv(path, ("a3", "landing_radius"), self.trace)


def _scan_grid(A, controls):
    half = controls.n_grid // 2
    pos = np.linspace(0.0, A, half + 1)[1:]
    near = np.geomspace(A * 1e-5, pos[0], controls.n_near_zero + 1)[:-1]
    pos = np.concatenate([near, pos])
    return np.concatenate([-pos[::-1], pos])


def shoot_catenoid(r1: float, r2: float, controls: ShootingControls = ShootingControls(),
                   workers: int = 1) -> ShootingResult:
    """Find the minimal annuli spanning the circles ``r1 < r2`` by shooting in ``a3``.

    The landing map ``a3 -> outer radius`` is scanned, sign changes of
    ``landing - r2`` are refined by bracketing root finding and each root is
    turned into a :class:`RevolutionSurface`. The scan never brackets across
    ``a3 = 0``, where the landing map is singular.
    """
    if not (r1 > 0 and r2 > 0):
        raise DomainError("radii must be positive")
    if not (1.0 < r2 / r1 <= 4.0):
        raise DomainError("need 1 < r2/r1 <= 4")
    A = controls.a_initial
    while A < controls.a_max:
        L = shoot(r1, A, controls).landing
        if np.isfinite(L) and L < r2:
            break
        A *= 2.0
    grid = _scan_grid(A, controls)

    def land(a):
        return shoot(r1, a, controls)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            shots = list(ex.map(land, grid))
    else:
        shots = [land(a) for a in grid]
    L = np.array([s.landing for s in shots])
    trace = np.stack([grid, L], axis=-1)
    roots = []
    for i in range(grid.size - 1):
        a, b = grid[i], grid[i + 1]
        if a * b <= 0 or not (np.isfinite(L[i]) and np.isfinite(L[i + 1])):
            continue
        fa, fb = L[i] - r2, L[i + 1] - r2
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(lambda t: shoot(r1, t, controls).landing - r2, a, b,
                                xtol=controls.root_xtol, rtol=4 * np.finfo(float).eps))
    surfaces = [_build_surface(r1, r2, a3, controls) for a3 in roots]
    return ShootingResult(surfaces, trace, [s.status for s in shots], A)


def _build_surface(r1, r2, a3, controls) -> RevolutionSurface:
    shot = shoot(r1, a3, controls, dense=True)
    ys = controls.y_start * r1
    inner = _SeriesSegment(boundary_taylor(r1, a3, controls.order), ys)
    outer = _SeriesSegment(boundary_taylor(shot.landing, shot.b3, controls.order), ys)
    body = _OdeSegment(shot.sol, shot.s_end)
    return RevolutionSurface([inner, body, outer], (r1, r2), "annulus", a3=float(a3),
                             landing=shot.landing, b3=shot.b3, label=f"catenoid(a3={a3:.6g})")


def alexakis_mazzeo_area(s: RevolutionSurface, tol: float = 1e-10) -> dict:
    """``-2 pi chi - (1/2) int |A_traceless|^2`` for a minimal surface of revolution.

    For a surface of revolution ``|A_traceless|^2 dmu = (k1 - k2)^2 rho / 2 dt dphi``
    with Euclidean principal curvatures ``k1, k2``. Returns the area and the
    curvature integral, with the contribution of the boundary series pieces
    as a tail diagnostic.
    """
    total, err, tail = 0.0, 0.0, 0.0
    for seg in s._segments:
        def dens(t, seg=seg):
            rho, y, dr, dy, v, k1, k2 = _curvatures(seg, t)
            return (k1 - k2) ** 2 * rho * v
        res = adaptive_gauss_legendre(dens, seg.t0, seg.t1, tol=tol)
        total += res.value
        err += res.error_bound
        if isinstance(seg, _SeriesSegment):
            tail += res.value
    if not np.isfinite(total):
        raise GeometryError("curvature integral does not converge")
    integral = 0.5 * math.pi * total
    return {
        "area": -2.0 * math.pi * s.euler_characteristic - integral,
        "curvature_integral": 2.0 * integral,
        "error_bound": 0.5 * math.pi * err,
        "tail_fraction": abs(tail) / abs(total) if total else 0.0,
    }


@dataclass
class SeparationResult:
    slope: float
    coincident: bool
    heights: np.ndarray
    gaps: np.ndarray
    intercept: float = float("nan")


def separation_rate(s1: RevolutionSurface, s2: RevolutionSurface, y_range=(1e-3, 1e-1), samples: int = 25,
                    side: int = 0) -> SeparationResult:
    """Log-log slope of ``|rho1(y) - rho2(y)|`` on ``y in y_range * r1``."""
    if len(s1.radii) != len(s2.radii) or not np.allclose(s1.radii, s2.radii, rtol=1e-9, atol=0):
        raise GeometryError(f"asymptotic boundaries differ: {s1.radii} vs {s2.radii}")
    r1 = s1.radii[0]
    y = r1 * np.geomspace(y_range[0], y_range[1], samples)
    try:
        gaps = np.abs(s1.graph_rho(y, side) - s2.graph_rho(y, side))
    except GeometryError as exc:
        raise GeometryError(f"surfaces are not graphs over each other near the boundary: {exc}") from exc
    if np.all(gaps == 0):
        return SeparationResult(float("nan"), True, y, gaps)
    if np.any(gaps == 0):
        raise GeometryError("separation vanishes at some sampled heights")
    slope, intercept = np.polyfit(np.log(y), np.log(gaps), 1)
    return SeparationResult(float(slope), False, y, gaps, float(intercept))
