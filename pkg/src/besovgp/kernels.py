"""Covariance kernels of the supported Gaussian process families.

Every closed-form kernel is vectorized over numpy arrays and validates its
parameter domain up front, raising DomainError with the violated constraint
spelled out.  The heat-type covariance has no closed form and is evaluated
with nested adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specialfn import (
    DomainError,
    QuadratureSettings,
    UnsupportedRegionError,
    _adaptive_finite,
    _Budget,
    decomposition_constants,
)

FAMILIES = ("fbm", "bfbm", "sfbm", "xk", "xhk", "yk", "g")

_FAMILY_PARAMS = {
    "fbm": ("H",),
    "bfbm": ("H", "K"),
    "sfbm": ("H",),
    "xk": ("K",),
    "xhk": ("H", "K"),
    "yk": ("K",),
    "g": ("H", "gamma"),
}


@dataclass(frozen=True)
class ProcessSpec:
    """Identifies one process family together with its parameters.

    Exactly the parameters used by the family may be set; validation names
    the violated constraint.
    """

    family: str
    H: float | None = None
    K: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(
                f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        needed = _FAMILY_PARAMS[self.family]
        for p in ("H", "K", "gamma"):
            val = getattr(self, p)
            if p in needed and val is None:
                raise DomainError(f"{self.family} requires parameter {p}")
            if p not in needed and val is not None:
                raise DomainError(f"{self.family} does not take parameter {p}")
        if "H" in needed and not 0.0 < self.H < 1.0:
            raise DomainError(f"{self.family} requires 0 < H < 1; got H={self.H:g}")
        if "K" in needed and not 0.0 < self.K < 2.0:
            raise DomainError(f"{self.family} requires 0 < K < 2; got K={self.K:g}")
        if self.family == "bfbm" and not self.H * self.K < 1.0:
            raise DomainError(
                f"bfbm requires HK < 1; got H={self.H:g} K={self.K:g} "
                f"(HK={self.H * self.K:g})")
        if self.family == "g":
            if not 0.5 < self.H < 1.0:
                raise DomainError(f"g requires 1/2 < H < 1; got H={self.H:g}")
            if not 0.0 < self.gamma < 2.0 * self.H:
                raise DomainError(
                    f"g requires 0 < gamma < 2H; got gamma={self.gamma:g} "
                    f"with 2H={2.0 * self.H:g}")

    def label(self) -> str:
        parts = []
        for p in _FAMILY_PARAMS[self.family]:
            parts.append(f"{p}={getattr(self, p):g}")
        return f"{self.family}({', '.join(parts)})"


@dataclass(frozen=True)
class CovarianceMatrix:
    spec: ProcessSpec
    times: np.ndarray
    matrix: np.ndarray


def _as_nonneg(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError(f"{name} must be nonnegative")
    return x


def _maybe_scalar(x):
    return float(x) if x.ndim == 0 else x


def _check_H(H):
    if not 0.0 < H < 1.0:
        raise DomainError(f"requires 0 < H < 1; got H={H:g}")


def _check_K(K):
    if not 0.0 < K < 2.0:
        raise DomainError(f"requires 0 < K < 2; got K={K:g}")


def cov_fbm(H, t, s):
    """Fractional covariance (t^2H + s^2H - |t-s|^2H)/2."""
    _check_H(H)
    t = _as_nonneg("t", t)
    s = _as_nonneg("s", s)
    h2 = 2.0 * H
    return _maybe_scalar(0.5 * (t ** h2 + s ** h2 - np.abs(t - s) ** h2))


def cov_bfbm(H, K, t, s):
    """Bifractional covariance 2^-K ((t^2H + s^2H)^K - |t-s|^2HK)."""
    _check_H(H)
    _check_K(K)
    if not H * K < 1.0:
        raise DomainError(f"requires HK < 1; got H={H:g} K={K:g}")
    t = _as_nonneg("t", t)
    s = _as_nonneg("s", s)
    h2 = 2.0 * H
    out = 2.0 ** (-K) * ((t ** h2 + s ** h2) ** K - np.abs(t - s) ** (h2 * K))
    return _maybe_scalar(out)


def cov_sfbm(H, t, s):
    """Subfractional covariance t^2H + s^2H - ((t+s)^2H + |t-s|^2H)/2."""
    _check_H(H)
    t = _as_nonneg("t", t)
    s = _as_nonneg("s", s)
    h2 = 2.0 * H
    out = t ** h2 + s ** h2 - 0.5 * ((t + s) ** h2 + np.abs(t - s) ** h2)
    return _maybe_scalar(out)


def _psi(K, a):
    """(a^K - a)/(K - 1), continued through K = 1 where it equals a log a.

    Evaluated as a log(a) phi((K-1) log a) with phi(x) = expm1(x)/x so that a
    single expression covers all K in (0, 2) without cancellation blowup.
    """
    a = np.asarray(a, dtype=float)
    shape = a.shape
    a = np.atleast_1d(a)
    out = np.zeros(a.shape)
    pos = a > 0
    if np.any(pos):
        la = np.log(a[pos])
        x = (K - 1.0) * la
        safe = np.where(x == 0.0, 1.0, x)
        phi = np.where(x == 0.0, 1.0, np.expm1(x) / safe)
        out[pos] = a[pos] * la * phi
    return out.reshape(shape)


def cov_xk(K, u, v):
    """Covariance Gamma(2-K)/(K(K-1)) ((u+v)^K - u^K - v^K) of the X process.

    The K = 1 value is the limit (u+v)log(u+v) - u log u - v log v; the psi
    form below is exact for every K in (0, 2) because the linear terms of
    psi cancel in the combination.
    """
    _check_K(K)
    u = _as_nonneg("u", u)
    v = _as_nonneg("v", v)
    u, v = np.broadcast_arrays(u, v)
    # grouping keeps the expression exactly symmetric under u <-> v
    out = math.gamma(2.0 - K) / K * (_psi(K, u + v) - (_psi(K, u) + _psi(K, v)))
    return _maybe_scalar(np.asarray(out))


def cov_xhk(H, K, t, s):
    """Covariance of X composed with the time change t -> t^2H."""
    _check_H(H)
    t = _as_nonneg("t", t)
    s = _as_nonneg("s", s)
    h2 = 2.0 * H
    return cov_xk(K, t ** h2, s ** h2)


def cov_yk(K, u, v):
    """Stationary-increment kernel Gamma(2-K) (u+v)^(K-2).

    Diverges on u + v = 0, so the origin is rejected: the process variance
    at time zero is infinite for K < 2.
    """
    _check_K(K)
    u = _as_nonneg("u", u)
    v = _as_nonneg("v", v)
    w = u + v
    if np.any(w == 0.0):
        raise DomainError("cov_yk requires u + v > 0 (variance diverges at 0)")
    return _maybe_scalar(math.gamma(2.0 - K) * w ** (K - 2.0))


def cov_g(H, gamma, t, s, settings: QuadratureSettings | None = None):
    """Covariance of the self-similar mixture process of order alpha = 2H - gamma.

    kappa cov_fbm(alpha/2) + lambda cov_xk(2 alpha + 1), with the weights
    evaluated by quadrature.  Only alpha < 1/2 is representable; larger alpha
    raises UnsupportedRegionError because the second component would need its
    divergent K = 2 endpoint.
    """
    consts = decomposition_constants("gprocess", H=H, gamma=gamma, settings=settings)
    alpha = consts["alpha"]
    t = _as_nonneg("t", t)
    s = _as_nonneg("s", s)
    out = (consts["kappa"] * cov_fbm(0.5 * alpha, t, s)
           + consts["lambda"] * cov_xk(2.0 * alpha + 1.0, t, s))
    return out


def _heat_normalization(gamma):
    # radial Gaussian integral int_0^inf e^(-r^2/2) r^(2 gamma - 1) dr closes
    # to 2^(gamma-1) Gamma(gamma); the planar normalization has a pole at
    # gamma = 1 and unit normalization is used from there on
    if gamma < 1.0:
        return 2.0 ** (gamma - 1.0) * math.gamma(gamma) / (2.0 * math.pi * (1.0 - gamma))
    return 1.0


def cov_heat_numeric(H, gamma, t, s, settings: QuadratureSettings | None = None) -> float:
    """Numeric covariance of the fractional heat-type solution at one (t, s).

    D alpha_H int_0^t int_0^s |u-v|^(2H-2) (t+s-u-v)^(-gamma) du dv with
    alpha_H = H(2H-1).  The inner integral is split at u = v and the |u-v|
    singularity is removed exactly by the substitution w = z^(1/(2H-1)); the
    outer integral is adaptive, so the integrable corner at u = v = min(t,s)
    is resolved by refinement.  Scalar t, s only.
    """
    if not 0.5 < H < 1.0:
        raise DomainError(f"requires 1/2 < H < 1; got H={H:g}")
    if not 0.0 < gamma < 2.0 * H:
        raise DomainError(f"requires 0 < gamma < 2H; got gamma={gamma:g}")
    t = float(t)
    s = float(s)
    if t < 0 or s < 0:
        raise DomainError("t and s must be nonnegative")
    tt, ss = max(t, s), min(t, s)
    if ss == 0.0:
        return 0.0
    # the nested scheme spends an inner integration per outer node, so the
    # default subdivision budget is raised and the inner tolerances sit one
    # decade above the outer ones
    st = settings or QuadratureSettings(max_subdivisions=2 ** 19)
    budget = _Budget(st.max_subdivisions)
    p = 2.0 * H - 1.0
    invp = 1.0 / p
    in_abs = st.abs_tol
    in_rel = st.rel_tol * 10.0

    if tt == ss:
        # reflected form: substituting u -> t-u, v -> t-v moves the corner
        # singularity of the v-integrand (order gamma+1-2H, which can exceed
        # any fixed refinement depth at v = t) to the origin, where the x^2
        # stretch below can follow it without hitting the spacing of doubles
        def inner_diag(b):
            def g(z):
                return (2.0 * b - z ** invp) ** -gamma

            i, _ = _adaptive_finite(g, 0.0, b ** p, in_abs, in_rel, budget)
            return i * invp

        def outer_diag(xs):
            vals = (2.0 * x * inner_diag(x * x) for x in xs)
            return np.fromiter(vals, dtype=float, count=len(xs))

        val, _ = _adaptive_finite(outer_diag, 0.0, math.sqrt(tt),
                                  st.abs_tol * 10.0, st.rel_tol * 10.0, budget)
        val *= 2.0
    else:
        c = t + s
        # for t != s the v-integrand is finite up to v = ss (at worst a
        # (ss-v)^(1-gamma) or logarithmic kink), softened by v = ss - x^2
        def inner(v):
            def near(z):
                w = z ** invp
                return (c - 2.0 * v + w) ** -gamma

            def far(z):
                w = z ** invp
                return np.maximum(c - 2.0 * v - w, 1e-300) ** -gamma

            i1, _ = _adaptive_finite(near, 0.0, v ** p, in_abs, in_rel, budget)
            i2, _ = _adaptive_finite(far, 0.0, (tt - v) ** p, in_abs, in_rel, budget)
            return (i1 + i2) * invp

        # the v-integrand grows without bound as v -> ss when gamma >= 1, so
        # deep refinement must never evaluate at v == ss itself; the clamp
        # perturbs an x-mass of order 1e-11 and keeps the inner integral
        # resolvable in double precision
        v_hi = ss * (1.0 - 1e-11)

        def outer(xs):
            vals = (2.0 * x * inner(min(max(ss - x * x, 0.0), v_hi)) for x in xs)
            return np.fromiter(vals, dtype=float, count=len(xs))

        val, _ = _adaptive_finite(outer, 0.0, math.sqrt(ss),
                                  st.abs_tol * 10.0, st.rel_tol * 10.0, budget)
    return _heat_normalization(gamma) * H * p * val


def covariance(spec: ProcessSpec, t, s):
    """Covariance of the given process family at times t, s (broadcast)."""
    if spec.family == "fbm":
        return cov_fbm(spec.H, t, s)
    if spec.family == "bfbm":
        return cov_bfbm(spec.H, spec.K, t, s)
    if spec.family == "sfbm":
        return cov_sfbm(spec.H, t, s)
    if spec.family == "xk":
        return cov_xk(spec.K, t, s)
    if spec.family == "xhk":
        return cov_xhk(spec.H, spec.K, t, s)
    if spec.family == "yk":
        return cov_yk(spec.K, t, s)
    return cov_g(spec.H, spec.gamma, t, s)


_BLOCK_ROWS = 512


def build_covariance_matrix(spec: ProcessSpec, grid) -> CovarianceMatrix:
    """Dense covariance matrix of the process on a time grid.

    Accepts a Grid-like object with a .points array or any 1-d array of
    times.  Rows are evaluated in blocks to bound peak memory on fine grids.
    """
    times = np.asarray(getattr(grid, "points", grid), dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise DomainError("grid must be a nonempty 1-d array of times")
    n = len(times)
    if spec.family == "g":
        # evaluate the quadrature weights once for the whole matrix
        consts = decomposition_constants("gprocess", H=spec.H, gamma=spec.gamma)
        alpha = consts["alpha"]

        def block(rows):
            return (consts["kappa"] * cov_fbm(0.5 * alpha, rows, times[None, :])
                    + consts["lambda"] * cov_xk(2.0 * alpha + 1.0, rows, times[None, :]))
    else:
        def block(rows):
            return covariance(spec, rows, times[None, :])

    mat = np.empty((n, n))
    for i0 in range(0, n, _BLOCK_ROWS):
        i1 = min(i0 + _BLOCK_ROWS, n)
        mat[i0:i1] = block(times[i0:i1, None])
    return CovarianceMatrix(spec=spec, times=times, matrix=mat)
