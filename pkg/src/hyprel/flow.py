"""Mean curvature flow of curves in H^2 written as radial graphs over a geodesic.

A curve is ``theta -> c + R(theta) (cos theta, sin theta)``, ``0 < theta < pi``,
with ``R = R0`` at both ends (same ideal endpoints as the background
semicircle of radius ``R0``). Its hyperbolic length is
``L[R] = int sqrt(R'^2 + R^2) / (R sin theta) dtheta`` and curve shortening
flow becomes

    R_t = R sin^2(theta) (R R'' - R'^2) / (R'^2 + R^2) - sin(theta) cos(theta) R'.

The module also evolves the ``n = 1`` near-boundary graph equation
``u_t = y^2 u_yy / (1 + u_y^2) - y u_y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from ._io import write_csv
from .exceptions import DomainError, StepRejectedError
from .expansion import EntropyEstimate, entropy_limit, geometric_eps_grid, relative_entropy_numeric
from .geodesics import GeodesicH2
from .quadrature import ProfilePiece, SampledImmersion, geodesic_immersion
from .weights import ScalarField, Weight


@dataclass(frozen=True)
class RadialCurveState:
    """Values ``R`` at the ``N`` interior nodes ``theta_i = i pi / (N + 1)``."""

    center: float
    R0: float
    R: np.ndarray
    t: float = 0.0
    band: float | None = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.ndim != 1 or R.size < 3:
            raise DomainError("R must be a vector of at least 3 interior values")
        if not self.R0 > 0 or np.any(~np.isfinite(R)) or np.any(R <= 0):
            raise DomainError("radii must be positive and finite")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)
        if self.band is not None and np.max(np.abs(R - self.R0)) > self.band * (1 + 1e-12) + 1e-13 * self.R0:
            raise DomainError("state leaves its trapping band")

    @classmethod
    def from_function(cls, center: float, R0: float, N: int, func, band: float | None = None) -> "RadialCurveState":
        theta = np.arange(1, N + 1) * math.pi / (N + 1)
        R = np.asarray(func(theta), dtype=float) * np.ones(N)
        if band is None:
            band = float(np.max(np.abs(R - R0)))
        return cls(float(center), float(R0), R, 0.0, band)

    @classmethod
    def perturbed(cls, R0: float = 1.0, amplitude: float = 0.1, N: int = 400, center: float = 0.0) -> "RadialCurveState":
        """``R = R0 + amplitude sin^2(theta)``; the reference run uses the defaults."""
        return cls.from_function(center, R0, N, lambda th: R0 + amplitude * np.sin(th) ** 2)

    @property
    def N(self) -> int:
        return self.R.size

    @property
    def dtheta(self) -> float:
        return math.pi / (self.N + 1)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(1, self.N + 1) * self.dtheta

    def points(self) -> np.ndarray:
        th = self.theta
        return np.stack([self.center + self.R * np.cos(th), self.R * np.sin(th)], axis=-1)

    def with_values(self, R, t) -> "RadialCurveState":
        return replace(self, R=np.asarray(R, dtype=float), t=float(t))


def _derivatives(state: RadialCurveState):
    full = np.concatenate([[state.R0], state.R, [state.R0]])
    h = state.dtheta
    d1 = (full[2:] - full[:-2]) / (2 * h)
    d2 = (full[2:] - 2 * full[1:-1] + full[:-2]) / (h * h)
    return d1, d2


def _length_gradient(state):
    """``dL/dR`` per unit ``dtheta``, plus the pieces reused by callers."""
    th = state.theta
    R = state.R
    d1, d2 = _derivatives(state)
    S = np.sqrt(d1 * d1 + R * R)
    s, c = np.sin(th), np.cos(th)
    EL = -(R * d2 - d1 * d1) / (S ** 3 * s) + d1 * c / (S * R * s * s)
    return EL, S, d1, d2, s, c


def curvature(state: RadialCurveState) -> np.ndarray:
    """Hyperbolic geodesic curvature at the nodes (positive when moving outward shortens the curve)."""
    EL, S, d1, d2, s, c = _length_gradient(state)
    y = state.R * s
    return -EL * y * y / state.R


def radial_velocity(state: RadialCurveState) -> np.ndarray:
    """``dR/dt`` under curve shortening flow."""
    R = state.R
    d1, d2 = _derivatives(state)
    th = state.theta
    s, c = np.sin(th), np.cos(th)
    return R * s * s * (R * d2 - d1 * d1) / (d1 * d1 + R * R) - s * c * d1


def dissipation(state: RadialCurveState, weight=None) -> float:
    """``int H^2 ds`` (hyperbolic), optionally weighted by ``weight(points)``."""
    v = radial_velocity(state)
    d1, _ = _derivatives(state)
    s = np.sin(state.theta)
    S = np.sqrt(d1 * d1 + state.R ** 2)
    dens = v * v / (state.R * s ** 3 * S)
    if weight is not None:
        dens = dens * weight(state.points())
    # trapezoid with zero end values
    return float(np.sum(dens) * state.dtheta)


def entropy_direct(state: RadialCurveState) -> float:
    """``int_0^pi (S/R - 1)/sin(theta) dtheta``: the relative entropy against the background written as one convergent integral."""
    d1, _ = _derivatives(state)
    R = state.R
    ratio = d1 / R
    # S/R - 1 without cancellation
    dens = ratio * ratio / (np.sqrt(1.0 + ratio * ratio) + 1.0) / np.sin(state.theta)
    return float(np.sum(dens) * state.dtheta)


class _Stepper:
    """Array-level scheme shared by :func:`step` and :func:`run` (grid trig cached)."""

    def __init__(self, N: int, R0: float):
        self.N, self.R0 = N, R0
        self.h = math.pi / (N + 1)
        th = np.arange(1, N + 1) * self.h
        self.s, self.c = np.sin(th), np.cos(th)
        self.s2 = self.s * self.s
        self.s3 = self.s2 * self.s
        self.sc = self.s * self.c
        self.ab = np.zeros((3, N))
        self.full = np.empty(N + 2)
        self.full[0] = self.full[-1] = R0

    def derivatives(self, R):
        full = self.full
        full[1:-1] = R
        d1 = (full[2:] - full[:-2]) / (2 * self.h)
        d2 = (full[2:] - 2 * R + full[:-2]) / (self.h * self.h)
        return d1, d2

    def diagnostics(self, R):
        """``(entropy_direct, dissipation)`` for the values ``R``."""
        d1, d2 = self.derivatives(R)
        S2 = d1 * d1 + R * R
        vel = R * self.s2 * (R * d2 - d1 * d1) / S2 - self.sc * d1
        ratio = d1 / R
        ent = np.sum(ratio * ratio / (np.sqrt(1.0 + ratio * ratio) + 1.0) / self.s) * self.h
        diss = np.sum(vel * vel / (R * self.s3 * np.sqrt(S2))) * self.h
        return float(ent), float(diss)

    def max_dt(self, R):
        d1, _ = self.derivatives(R)
        return self.h / (0.5 + float(np.max(np.abs(d1 / R))))

    def advance(self, R, dt, scale):
        d1, _ = self.derivatives(R)
        S2 = d1 * d1 + R * R
        k = dt * (R * R * self.s2 / S2) / (self.h * self.h)
        b = -R * self.s2 * d1 * d1 / S2 - self.sc * d1
        ab = self.ab
        ab[0, 1:] = -k[:-1]
        ab[1, :] = 1.0 + 2.0 * k
        ab[2, :-1] = -k[1:]
        rhs = R + dt * b
        rhs[0] += k[0] * self.R0
        rhs[-1] += k[-1] * self.R0
        new = solve_banded((1, 1), ab, rhs, overwrite_b=True, check_finite=False)
        if not np.all(np.isfinite(new)) or np.max(np.abs(new - R)) > 0.5 * scale or np.any(new <= 0):
            raise StepRejectedError("step produced an unstable update", suggested_dt=0.25 * dt)
        return new


def max_stable_dt(state: RadialCurveState) -> float:
    """Bound for the explicitly treated first-order terms (the diffusion is implicit)."""
    return _Stepper(state.N, state.R0).max_dt(state.R)


def step(state: RadialCurveState, dt: float) -> RadialCurveState:
    """One semi-implicit step: ``(I - dt a D2) R_new = R + dt b`` with ``a, b`` frozen at ``R``.

    ``a = R^2 sin^2 / S^2`` multiplies ``R''``; ``b`` collects the remaining
    first-order terms. Dirichlet values ``R0`` sit at the two ghost nodes.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    st = _Stepper(state.N, state.R0)
    limit = st.max_dt(state.R)
    if dt > limit:
        raise StepRejectedError(f"dt={dt:.3g} exceeds the stability bound {limit:.3g}", suggested_dt=0.5 * limit)
    scale = state.band if state.band else state.R0
    return replace(state, R=st.advance(state.R, dt, scale), t=state.t + dt)


def curve_immersion(state: RadialCurveState) -> SampledImmersion:
    """Smooth curve through the nodes: ``R = R0 + sin^2(theta) v(theta)`` with ``v`` a cubic spline."""
    th = state.theta
    v = (state.R - state.R0) / np.sin(th) ** 2
    spl = CubicSpline(th, v, bc_type="natural", extrapolate=True)
    dspl = spl.derivative()
    c, R0 = state.center, state.R0

    def f(t):
        s, co = np.sin(t), np.cos(t)
        vv = spl(t)
        R = R0 + s * s * vv
        dR = 2 * s * co * vv + s * s * dspl(t)
        return c + R * co, R * s, dR * co - R * s, dR * s + R * co

    return SampledImmersion(1, [ProfilePiece(f, 0.0, math.pi)], boundary=(c - R0, c + R0), label=f"flow t={state.t:.6g}")


def background_immersion(state: RadialCurveState) -> SampledImmersion:
    return geodesic_immersion([GeodesicH2(state.center - state.R0, state.center + state.R0)])


def default_flow_eps_grid(state: RadialCurveState) -> np.ndarray:
    return geometric_eps_grid(0.3 * state.R0, 1e-3 * state.R0, 0.8)


def flow_entropy(state: RadialCurveState, r=None, eps_grid=None, tol: float = 1e-11, psi=None) -> EntropyEstimate:
    """Relative entropy of the curve against the background geodesic.

    Matched truncated lengths are extrapolated to ``eps = 0``; the truncation
    tail below the smallest ``eps`` is folded into the error bar.
    """
    grid = default_flow_eps_grid(state) if eps_grid is None else eps_grid
    if np.array_equal(state.R, np.full(state.N, state.R0)) and psi is None:
        return EntropyEstimate(0.0, 0.0, np.asarray(grid), "Richardson", {"stationary": True})
    return relative_entropy_numeric(curve_immersion(state), background_immersion(state), r, grid, tol, psi)


@dataclass
class FlowTrajectory:
    """Snapshots of a run plus per-step diagnostics.

    ``rows`` holds ``(t, E_rel, E_rel_error, dissipation, maxH, band)`` at
    snapshot times; ``step_t``, ``step_entropy`` and ``step_dissipation``
    hold the convergent-integral entropy and ``int H^2`` after every step.
    """

    rows: list
    states: list
    step_t: np.ndarray
    step_entropy: np.ndarray
    step_dissipation: np.ndarray
    step_band: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def entropies(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def state_at(self, t: float) -> RadialCurveState:
        for s in self.states:
            if math.isclose(s.t, t, rel_tol=0, abs_tol=1e-12):
                return s
        raise DomainError(f"no stored state at t={t}")

    def max_step_increase(self) -> float:
        """Largest increase of the entropy between consecutive steps (0 if monotone)."""
        d = np.diff(self.step_entropy)
        return float(max(0.0, np.max(d))) if d.size else 0.0

    def max_snapshot_increase(self) -> float:
        d = np.diff(self.entropies)
        return float(max(0.0, np.max(d))) if d.size else 0.0

    def write_csv(self, path) -> None:
        write_csv(path, ("t", "E_rel", "E_rel_error", "dissipation", "maxH", "band"), self.rows)


def run(state: RadialCurveState, t_end: float, dt: float | None = None, n_snapshots: int = 40,
        store_every: int | None = None, entropy_tol: float = 1e-11, eps_grid=None) -> FlowTrajectory:
    """Advance ``state`` to ``t_end``.

    Snapshots (with quadrature-based entropy) are taken at ``n_snapshots + 1``
    equally spaced step counts; intermediate states are kept every
    ``store_every`` steps for weighted checks.
    """
    dt = 0.25 * state.dtheta ** 2 if dt is None else float(dt)
    n_steps = max(1, int(math.ceil((t_end - state.t) / dt - 1e-9)))
    dt = (t_end - state.t) / n_steps
    snap_steps = set(np.unique(np.round(np.linspace(0, n_steps, n_snapshots + 1)).astype(int)).tolist())
    if store_every is None:
        store_every = max(1, n_steps // 200)
    band0 = state.band if state.band is not None else float(np.max(np.abs(state.R - state.R0)))
    state = replace(state, band=band0)

    stepper = _Stepper(state.N, state.R0)
    limit = stepper.max_dt(state.R)
    if dt > limit:
        raise StepRejectedError(f"dt={dt:.3g} exceeds the stability bound {limit:.3g}", suggested_dt=0.5 * limit)
    step_t = state.t + dt * np.arange(n_steps + 1)
    step_E = np.empty(n_steps + 1)
    step_D = np.empty(n_steps + 1)
    step_band = np.empty(n_steps + 1)
    states, snap_index = [], {}
    R = np.array(state.R)
    scale = band0 if band0 else state.R0
    for k in range(n_steps + 1):
        if k:
            R = stepper.advance(R, dt, scale)
        step_E[k], step_D[k] = stepper.diagnostics(R)
        step_band[k] = float(np.max(np.abs(R - state.R0)))
        if k in snap_steps or k % store_every == 0:
            st = replace(state, R=R.copy(), t=float(step_t[k]))
            states.append(st)
            if k in snap_steps:
                snap_index[k] = st
    rows = []
    for k in sorted(snap_index):
        st = snap_index[k]
        est = flow_entropy(st, eps_grid=eps_grid, tol=entropy_tol)
        rows.append((st.t, est.value, est.error_bar, step_D[k], float(np.max(np.abs(curvature(st)))), step_band[k]))
    meta = {
        "N": state.N, "R0": state.R0, "center": state.center, "dt": dt, "steps": n_steps,
        "scheme": "semi-implicit (diffusion implicit, first-order terms lagged), central differences",
        "band": band0, "t_end": t_end,
    }
    return FlowTrajectory(rows, states, step_t, step_E, step_D, step_band, meta)


def _time_integral(t, values, t0, t1):
    mask = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    return float(np.trapezoid(values[mask], t[mask])) if hasattr(np, "trapezoid") else float(np.trapz(values[mask], t[mask]))


def monotonicity_check(traj: FlowTrajectory, t: float, s: float) -> dict:
    """Residual of ``E(t) - E(s) = int_t^s int H^2`` (snapshot entropies, per-step trapezoid in time)."""
    if not t < s:
        raise DomainError("need t < s")
    times = traj.times
    i = int(np.argmin(np.abs(times - t)))
    j = int(np.argmin(np.abs(times - s)))
    if abs(times[i] - t) > 1e-9 or abs(times[j] - s) > 1e-9:
        raise DomainError("t and s must be snapshot times")
    diss = _time_integral(traj.step_t, traj.step_dissipation, t, s)
    lhs = traj.rows[i][1] - traj.rows[j][1]
    res = abs(lhs - diss)
    return {
        "residual": res,
        "relative": res / diss if diss > 0 else (0.0 if res == 0 else math.inf),
        "entropy_drop": lhs,
        "dissipation": diss,
        "error_bar": traj.rows[i][2] + traj.rows[j][2],
    }


def weighted_monotonicity_check(traj: FlowTrajectory, f: ScalarField, t: float, s: float,
                                n_entropy: int = 21, tol: float = 1e-10, eps_grid=None) -> dict:
    """Residual of the three-term weighted identity between stored times ``t < s``.

    ``E(t; f) - E(s; f) - int int f H^2 + int E(r; d_t f - Delta f + Hess f(n, n)) dr``
    with the time integrals taken by the trapezoid rule over stored states.
    """
    if f.is_constant:
        base = monotonicity_check(traj, t, s)
        c = f.constant_value
        return {k: (c * v if k in ("residual", "entropy_drop", "dissipation", "error_bar") else v)
                for k, v in base.items()} | {"evolution_term": 0.0}
    if not t < s:
        raise DomainError("need t < s")
    st = [x for x in traj.states if t - 1e-12 <= x.t <= s + 1e-12]
    if len(st) < 3:
        raise DomainError("not enough stored states between t and s")
    if abs(st[0].t - t) > 1e-9 or abs(st[-1].t - s) > 1e-9:
        raise DomainError("t and s must be stored times")
    fw = f.as_weight(2)
    lw = f.evolution_weight(2)

    # finite-difference Hessians carry round-off noise that quadrature cannot resolve below ~1e-8
    ev_tol = tol if f.has_exact_derivatives else max(tol, 1e-8)

    def E(state, w, tol=tol):
        return flow_entropy(state, eps_grid=eps_grid, tol=tol, psi=w)

    Et, Es = E(st[0], fw), E(st[-1], fw)
    tt = np.array([x.t for x in st])
    diss = np.array([dissipation(x, f.value) for x in st])
    weighted_diss = _time_integral(tt, diss, t, s)
    idx = np.unique(np.round(np.linspace(0, len(st) - 1, n_entropy)).astype(int))
    ev = np.array([E(st[k], lw, ev_tol).value for k in idx])
    evolution = _time_integral(tt[idx], ev, t, s)
    lhs = Et.value - Es.value
    res = abs(lhs - weighted_diss + evolution)
    scale = abs(weighted_diss) + abs(evolution)
    return {
        "residual": res,
        "relative": res / scale if scale > 0 else (0.0 if res == 0 else math.inf),
        "entropy_drop": lhs,
        "dissipation": weighted_diss,
        "evolution_term": evolution,
        "error_bar": Et.error_bar + Es.error_bar,
    }


# --- near-boundary graph -------------------------------------------------------

@dataclass(frozen=True)
class NearBoundaryGraph:
    """``u`` on the grid ``y_j = j * Y / J`` (``j = 1..J``) with ``u(0) = a``; ``u(Y)`` is held fixed."""

    y: np.ndarray
    u: np.ndarray
    a: float
    t: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if y.shape != u.shape or y.ndim != 1 or y.size < 3:
            raise DomainError("y and u must be matching vectors")
        if np.any(y <= 0) or np.any(np.diff(y) <= 0):
            raise DomainError("grid must be positive and increasing")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", u)

    @classmethod
    def quadratic(cls, a: float, c: float, Y: float = 1.0, J: int = 200) -> "NearBoundaryGraph":
        y = np.arange(1, J + 1) * (Y / J)
        return cls(y, a + c * y * y, float(a))

    @property
    def dy(self) -> float:
        return float(self.y[0])

    def barrier_constant(self) -> float:
        return float(np.max(np.abs(self.u - self.a) / self.y ** 2))

    def rescaled(self, lam: float) -> "NearBoundaryGraph":
        """Initial data ``(1/lam) u(lam y)`` on the grid ``y / lam``."""
        return NearBoundaryGraph(self.y / lam, self.u / lam, self.a / lam, self.t)


def graph_step(g: NearBoundaryGraph, dt: float) -> NearBoundaryGraph:
    """Semi-implicit step; the last node (``y = Y``) is a fixed Dirichlet value."""
    h = g.dy
    y, u = g.y, g.u
    full = np.concatenate([[g.a], u])
    ux = (full[2:] - full[:-2]) / (2 * h)
    yi = y[:-1]
    a = yi * yi / (1.0 + ux * ux) / (h * h)
    k = dt * a
    adv = dt * yi * ux
    n = yi.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -k[:-1]
    ab[1, :] = 1.0 + 2.0 * k
    ab[2, :-1] = -k[1:]
    rhs = u[:-1] - adv
    rhs[0] += k[0] * g.a
    rhs[-1] += k[-1] * u[-1]
    new = solve_banded((1, 1), ab, rhs)
    if not np.all(np.isfinite(new)):
        raise StepRejectedError("graph step diverged", suggested_dt=0.25 * dt)
    return NearBoundaryGraph(y, np.concatenate([new, u[-1:]]), g.a, g.t + dt)


def evolve_graph(g: NearBoundaryGraph, t_end: float, dt: float, track_barrier: bool = True):
    n = max(1, int(round((t_end - g.t) / dt)))
    worst = g.barrier_constant()
    for _ in range(n):
        g = graph_step(g, dt)
        if track_barrier:
            worst = max(worst, g.barrier_constant())
    return g, worst


def graph_scaling_test(g: NearBoundaryGraph, lam: float, t_end: float = 0.5, dt: float = 1e-3) -> dict:
    """Evolve ``u`` and ``u_lam(y) = (1/lam) u(lam y)`` separately and compare at ``t_end``.

    ``u_lam`` lives on the grid ``y / lam``, so node ``j`` of both runs
    corresponds to the same point after rescaling.
    """
    if not 0 < lam <= 1:
        raise DomainError("lambda must lie in (0, 1]")
    C0 = g.barrier_constant()
    g1, worst1 = evolve_graph(g, t_end, dt)
    g2, worst2 = evolve_graph(g.rescaled(lam), t_end, dt)
    diff = float(np.max(np.abs(g1.u / lam - g2.u)))
    return {
        "sup_difference": diff,
        "barrier_initial": C0,
        # the rescaled graph's constant is lam times the original one
        "barrier_max": max(worst1, worst2 / lam),
        "final": g1,
        "final_scaled": g2,
    }
