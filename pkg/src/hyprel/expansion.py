"""Asymptotic expansions of truncated areas and relative-entropy limits.

The truncated area of an ``n``-dimensional minimal hypersurface behaves like

    c_0 eps^-(n-1) + c_2 eps^-(n-3) + ... [+ c_{n-1} log(1/eps)] + c_n + o(1)

(the log term only for odd ``n``). :class:`RenormalizedAreaRegressor` fits
this model, with two extra tail columns ``eps`` and ``eps**2`` that absorb the
``o(1)`` remainder, and exposes ``c_n`` as ``intercept_``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._io import read_csv, write_csv
from .exceptions import DomainError, IllConditionedFitError, IncomparableError
from .quadrature import vol_eps, weighted_vol_eps

MAX_CONDITION = 1e12


def geometric_eps_grid(eps_max: float = 0.3, eps_min: float = 1e-3, ratio: float = 0.8) -> np.ndarray:
    """Decreasing geometric grid from ``eps_max`` down to (at least) ``eps_min``."""
    if not (0 < eps_min < eps_max and 0 < ratio < 1):
        raise DomainError("need 0 < eps_min < eps_max and 0 < ratio < 1")
    count = int(math.ceil(math.log(eps_min / eps_max) / math.log(ratio))) + 1
    return eps_max * ratio ** np.arange(count)


def basis_names(n: int, tail: int = 2) -> list:
    names = [f"eps^-{k}" for k in range(n - 1, 0, -2)]
    if n % 2 == 1:
        names.append("log(1/eps)")
    names.append("1")
    names += ["eps"] + [f"eps^{k}" for k in range(2, tail + 1)] if tail else []
    return names


def design_matrix(eps, n: int, tail: int = 2) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    cols = [eps ** (-k) for k in range(n - 1, 0, -2)]
    if n % 2 == 1:
        cols.append(np.log(1.0 / eps))
    cols.append(np.ones_like(eps))
    cols += [eps ** k for k in range(1, tail + 1)]
    return np.stack(cols, axis=-1)


def _scaled_lstsq(A, b):
    """Least squares via QR of the column-scaled design; returns coef, R, scale, cond."""
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    As = A / scale
    Q, R = np.linalg.qr(As)
    sv = np.linalg.svd(R, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedFitError(
            f"design matrix is numerically rank deficient (cond={cond:.3g})",
            diagnostics={"condition": cond, "singular_values": sv.tolist(), "rows": A.shape[0], "cols": A.shape[1]},
        )
    coef = np.linalg.solve(R, Q.T @ b) / scale
    return coef, R, scale, cond


class RenormalizedAreaRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of the truncated-area expansion in ``eps``.

    Parameters
    ----------
    n : int
        Dimension of the hypersurface.
    tail : int
        Number of positive powers ``eps, eps^2, ...`` modelling the remainder.
    holdout_every : int
        Every ``holdout_every``-th sample (in input order) is kept out of the
        fit and used for ``residual_norm_``; 0 disables the hold-out.

    Attributes
    ----------
    coef_ : ndarray
        Coefficients in the order of ``basis_names_``.
    intercept_ : float
        The constant term ``c_n``.
    residual_norm_ : float
        RMS residual on the held-out samples.
    condition_ : float
    intercept_stderr_ : float
    """

    def __init__(self, n: int = 2, tail: int = 2, holdout_every: int = 4):
        self.n = n
        self.tail = tail
        self.holdout_every = holdout_every

    def fit(self, X, y):
        eps = np.asarray(X, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if eps.shape != y.shape:
            raise DomainError("X and y have different lengths")
        if np.any(eps <= 0):
            raise DomainError("eps values must be positive")
        names = basis_names(self.n, self.tail)
        p = len(names)
        if eps.size < p + 2:
            raise DomainError(f"need at least {p + 2} samples for {p} basis functions, got {eps.size}")
        mask = np.ones(eps.size, dtype=bool)
        if self.holdout_every:
            mask[self.holdout_every - 1 :: self.holdout_every] = False
        if mask.sum() < p:
            raise DomainError("too few training samples after hold-out")
        A = design_matrix(eps, self.n, self.tail)
        coef, R, scale, cond = _scaled_lstsq(A[mask], y[mask])
        idx_one = names.index("1")
        res_train = y[mask] - A[mask] @ coef
        dof = max(int(mask.sum()) - p, 1)
        sigma2 = float(res_train @ res_train) / dof
        Rinv = np.linalg.inv(R)
        cov_scaled = sigma2 * (Rinv @ Rinv.T)
        self.intercept_stderr_ = float(math.sqrt(cov_scaled[idx_one, idx_one]) / scale[idx_one])
        held = ~mask
        if held.any():
            r = y[held] - A[held] @ coef
            self.residual_norm_ = float(np.sqrt(np.mean(r * r)))
        else:
            self.residual_norm_ = float(np.sqrt(np.mean(res_train ** 2)))
        self.coef_ = coef
        self.basis_names_ = names
        self.intercept_ = float(coef[idx_one])
        self.condition_ = cond
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        eps = np.asarray(X, dtype=float).reshape(-1)
        return design_matrix(eps, self.n, self.tail) @ self.coef_


@dataclass
class ExpansionFit:
    n: int
    coefficients: dict
    log_coefficient: float | None
    constant_term: float
    constant_error: float
    residual_norm: float
    condition_estimate: float
    eps_range: tuple = (0.0, 0.0)

    @property
    def leading_coefficient(self) -> float:
        return next(iter(self.coefficients.values()))


def _unpack(samples):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise DomainError("samples must be rows of (eps, value[, error])")
    err = arr[:, 2] if arr.shape[1] > 2 else np.zeros(arr.shape[0])
    return arr[:, 0], arr[:, 1], err


def fit_expansion(samples, n: int, tail: int = 2, holdout_every: int = 4) -> ExpansionFit:
    """Fit the expansion to ``(eps, value[, error])`` rows.

    ``constant_error`` combines the change of ``c_n`` when one tail column is
    dropped with twice its standard error.
    """
    eps, val, _ = _unpack(samples)
    if eps.max() / eps.min() < 10.0:
        raise DomainError("samples must span at least a decade in eps")
    model = RenormalizedAreaRegressor(n=n, tail=tail, holdout_every=holdout_every).fit(eps, val)
    spread = 0.0
    if tail > 0:
        try:
            lower = RenormalizedAreaRegressor(n=n, tail=tail - 1, holdout_every=holdout_every).fit(eps, val)
            spread = abs(model.intercept_ - lower.intercept_)
        except (DomainError, IllConditionedFitError):
            spread = 0.0
    coefs = {k: float(v) for k, v in zip(model.basis_names_, model.coef_)}
    return ExpansionFit(
        n=n,
        coefficients=coefs,
        log_coefficient=coefs.get("log(1/eps)") if n % 2 == 1 else None,
        constant_term=model.intercept_,
        constant_error=spread + 2.0 * model.intercept_stderr_,
        residual_norm=model.residual_norm_,
        condition_estimate=model.condition_,
        eps_range=(float(eps.min()), float(eps.max())),
    )


@dataclass
class EntropyEstimate:
    value: float
    error_bar: float
    eps_sequence: np.ndarray
    method: str = "Richardson"
    diagnostics: dict = field(default_factory=dict)


def _poly_extrapolate(eps, vals, degree):
    """Value at 0 of the interpolating polynomial of given degree, plus |Lagrange weights|."""
    V = np.vander(eps, degree + 1, increasing=True)
    e0 = np.zeros(degree + 1)
    e0[0] = 1.0
    w = np.linalg.solve(V.T, e0)  # value at 0 = w @ vals
    return float(w @ vals), np.abs(w)


def _divergence_check(eps, vals, tol):
    m = min(eps.size, 10)
    if m < 6:
        return {"singular_inverse": 0.0, "singular_log": 0.0}
    e, v = eps[-m:], vals[-m:]
    A = np.stack([1.0 / e, np.log(1.0 / e), np.ones_like(e), e, e * e], axis=-1)
    scale = np.linalg.norm(A, axis=0)
    coef = np.linalg.lstsq(A / scale, v, rcond=None)[0] / scale
    # size of each singular term at the smallest eps, relative to the data scale
    ref = max(1.0, float(np.max(np.abs(v))))
    inv_part = abs(coef[0]) / e[-1] / ref
    log_part = abs(coef[1]) * math.log(1.0 / e[-1]) / ref
    if inv_part > tol or log_part > tol:
        raise IncomparableError(
            f"truncated differences diverge (1/eps part {inv_part:.3g}, log part {log_part:.3g}); "
            "the surfaces do not share an ideal boundary"
        )
    return {"singular_inverse": inv_part, "singular_log": log_part}


def entropy_limit(diff_samples, method: str = "Richardson", divergence_tol: float = 1e-3) -> EntropyEstimate:
    """Extrapolate ``Delta(eps) = E + a eps + b eps^2`` to ``eps = 0``.

    Rows are ``(eps, delta[, quad_error])``. The error bar adds the last
    Richardson correction, the drift against the previous eps triple and the
    propagated quadrature error.
    """
    eps, val, qerr = _unpack(diff_samples)
    order = np.argsort(-eps, kind="stable")
    eps, val, qerr = eps[order], val[order], qerr[order]
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DomainError("eps values must be positive and distinct")
    diag = _divergence_check(eps, val, divergence_tol)
    if method == "plain-limit":
        drift = abs(val[-1] - val[-2]) if eps.size > 1 else 0.0
        # linear tail: the remaining distance to the limit is about eps/(step) times the last change
        ratio = eps[-1] / (eps[-2] - eps[-1]) if eps.size > 1 else 0.0
        return EntropyEstimate(float(val[-1]), float(drift * ratio + drift + qerr[-1]), eps, method, diag)
    if method != "Richardson":
        raise DomainError(f"unknown method {method!r}")
    if eps.size < 3:
        raise DomainError("Richardson extrapolation needs at least 3 samples")
    e3, w3 = _poly_extrapolate(eps[-3:], val[-3:], 2)
    e2, _ = _poly_extrapolate(eps[-2:], val[-2:], 1)
    bar = abs(e3 - e2) + float(w3 @ qerr[-3:])
    if eps.size >= 4:
        e3p, _ = _poly_extrapolate(eps[-4:-1], val[-4:-1], 2)
        diag["previous_triple"] = e3p
        bar += abs(e3 - e3p)
    diag["linear_estimate"] = e2
    return EntropyEstimate(e3, float(bar), eps, "Richardson", diag)


def _check_boundaries(s1, s2):
    b1, b2 = getattr(s1, "boundary", None), getattr(s2, "boundary", None)
    if b1 is not None and b2 is not None and tuple(b1) != tuple(b2):
        raise IncomparableError(f"ideal boundaries differ: {b1} vs {b2}")


def difference_samples(s1, s2, r, eps_grid, tol: float = 1e-11, psi=None) -> np.ndarray:
    """Rows ``(eps, Vol_eps(s1) - Vol_eps(s2), error)`` on ``eps_grid``."""
    _check_boundaries(s1, s2)
    if s1 is s2:
        # the same quadrature on both sides: the difference is exactly zero
        return np.array([(float(e), 0.0, 0.0) for e in eps_grid])
    rows = []
    for e in eps_grid:
        if psi is None:
            a, b = vol_eps(s1, r, e, tol), vol_eps(s2, r, e, tol)
        else:
            a, b = weighted_vol_eps(s1, r, e, psi, tol), weighted_vol_eps(s2, r, e, psi, tol)
        rows.append((float(e), a.value - b.value, a.error_bound + b.error_bound))
    return np.asarray(rows)


def relative_entropy_numeric(s1, s2, r=None, eps_grid=None, tol: float = 1e-11, psi=None) -> EntropyEstimate:
    """``lim (Vol_eps(s1) - Vol_eps(s2))`` by quadrature and Richardson extrapolation.

    Without an explicit grid, curves in H^2 use the default grid scaled by
    the smallest gap between boundary points.
    """
    if eps_grid is None:
        scale = 1.0
        if s1.dim == 1 and len(s1.boundary) > 1:
            scale = min(1.0, float(np.min(np.diff(np.sort(s1.boundary)))))
        eps_grid = geometric_eps_grid() * scale
    rows = difference_samples(s1, s2, r, eps_grid, tol, psi)
    est = entropy_limit(rows)
    est.diagnostics["samples"] = rows
    return est


def write_samples_csv(path, rows, header=("eps", "value", "error_bound")) -> None:
    write_csv(path, header, rows)


def read_samples_csv(path) -> np.ndarray:
    header, rows = read_csv(path)
    if header is None or header[:2] != ["eps", "value"]:
        raise DomainError("CSV needs a header row starting with eps,value")
    return np.array([[float(v) for v in row] for row in rows])
