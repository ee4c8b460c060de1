"""Closed-form constants and adaptive quadrature for improper integrals.

The constants of the covariance decompositions all reduce to Gamma-function
expressions plus a handful of improper integrals on (0, infinity).  The
integrals are evaluated with a Gauss-Kronrod 7/15 adaptive engine after a
substitution that maps the half line onto finite panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG2 = math.log(2.0)


class DomainError(ValueError):
    """A parameter lies outside the mathematical domain of an operation."""


class UnsupportedRegionError(ValueError):
    """Parameters are formally admissible but outside the implemented region."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge within the subdivision budget.

    Carries the partial value and the achieved error estimate so callers can
    inspect how far the integration got.
    """

    def __init__(self, message, value, error_estimate, subdivisions):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate
        self.subdivisions = subdivisions


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerance and budget knobs for the adaptive quadrature engine."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2 ** 16
    infinite_domain_substitution: str = "log-map"

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be > 0")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be > 0")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.infinite_domain_substitution not in ("log-map", "rational-map"):
            raise DomainError(
                "infinite_domain_substitution must be 'log-map' or 'rational-map'")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    subdivisions: int

    def __float__(self):
        return self.value


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1].  The 7-point Gauss rule
# uses the odd-indexed Kronrod abscissae.
_XGK_HALF = np.array([
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0,
])
_WGK_HALF = np.array([
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278,
])
_WG_HALF = np.array([
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694,
])

_XGK = np.concatenate([-_XGK_HALF[:7], _XGK_HALF[::-1]])
_WGK = np.concatenate([_WGK_HALF[:7], _WGK_HALF[::-1]])
_WG = np.zeros(15)
_WG[1:14:2] = np.concatenate([_WG_HALF[:3], _WG_HALF[::-1]])


def _vectorized(f):
    def g(x):
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.fromiter((f(t) for t in x), dtype=float, count=len(x))

    return g


def _gk_panels(f, lo, hi):
    """Evaluate the GK 7/15 pair on a batch of panels.

    lo, hi are 1-d arrays of panel endpoints.  Returns (k15, err, mag) where
    err is |k15 - g7| and mag the integral of |f|, the scale of the rounding
    floor below which err carries no information.
    """
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _XGK[None, :]
    fv = f(pts.ravel()).reshape(pts.shape)
    k15 = half * (fv @ _WGK)
    g7 = half * (fv @ _WG)
    mag = half * (np.abs(fv) @ _WGK)
    return k15, np.abs(k15 - g7), mag


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def take(self, n):
        self.used += n
        return self.used <= self.limit


_EPS = float(np.finfo(float).eps)


def _adaptive_finite(f, a, b, abs_tol, rel_tol, budget):
    """Globally adaptive GK integration of a vectorized f over [a, b].

    Each round bisects the panels whose error estimate is within a factor
    four of the current worst, so refinement follows the dominant error and
    cannot cascade.  Panels at the rounding floor of the estimator or at the
    spacing of doubles are never split; if only such panels remain, the
    achieved (value, error) pair is returned as is.
    """
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    budget.take(1)
    val, err, mag = _gk_panels(f, lo, hi)
    while True:
        if not np.isfinite(val).all():
            ok = np.isfinite(val)
            raise QuadratureError(
                "integrand produced non-finite values",
                val[ok].sum(), err[ok].sum(), budget.used)
        total = val.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        toterr = err.sum()
        if toterr <= tol:
            return total, toterr
        mid = 0.5 * (lo + hi)
        can = (err > 50.0 * _EPS * mag) & (mid > lo) & (mid < hi)
        if not can.any():
            return total, toterr
        bad = can & (err >= 0.25 * (err * can).max())
        if not budget.take(2 * int(bad.sum())):
            raise QuadratureError(
                "subdivision budget exhausted on finite panel",
                total, toterr, budget.used)
        bmid = mid[bad]
        nval, nerr, nmag = _gk_panels(f, np.concatenate([lo[bad], bmid]),
                                      np.concatenate([bmid, hi[bad]]))
        lo = np.concatenate([lo[~bad], lo[bad], bmid])
        hi = np.concatenate([hi[~bad], bmid, hi[bad]])
        val = np.concatenate([val[~bad], nval])
        err = np.concatenate([err[~bad], nerr])
        mag = np.concatenate([mag[~bad], nmag])


# Extension horizon for the doubling panels.  Under the log-map this spans
# theta in [exp(-700), exp(700)], essentially the whole double range; probing
# further only manufactures overflow.
_EXT_CAP = 700.0


def _adaptive_semiinfinite(f, abs_tol, rel_tol, budget):
    """Integrate a vectorized, decaying f over [0, infinity).

    Doubling panels [0,1], [1,2], [2,4], ... are each integrated adaptively;
    extension stops once two consecutive panels contribute nothing at the
    working tolerance.
    """
    total = 0.0
    toterr = 0.0
    edges = [0.0, 1.0]
    calm = 0
    while True:
        a, b = edges[-2], edges[-1]
        tol_here = max(abs_tol, rel_tol * abs(total)) / 8.0
        v, e = _adaptive_finite(f, a, b, tol_here, rel_tol / 4.0, budget)
        total += v
        toterr += e
        cutoff = max(abs_tol, rel_tol * abs(total)) / 16.0
        calm = calm + 1 if abs(v) <= cutoff else 0
        if calm >= 2 and len(edges) >= 8:
            return total, toterr
        if b >= _EXT_CAP:
            if calm >= 1:
                return total, toterr
            raise QuadratureError(
                "integrand tail has not decayed within the representable range",
                total, toterr, budget.used)
        edges.append(min(2.0 * b, _EXT_CAP))
        if not budget.take(0) or len(edges) > 1200:
            raise QuadratureError(
                "integrand tail does not decay within the panel budget",
                total, toterr, budget.used)


def quad_improper(integrand, settings: QuadratureSettings | None = None) -> QuadratureResult:
    """Integrate an absolutely integrable function over (0, infinity).

    With the default log-map substitution the domain is split at 1; each half
    is mapped onto [0, infinity) by theta = exp(-y) resp. theta = exp(x) so
    that algebraic endpoint behaviour turns into exponential decay.  The
    rational-map alternative uses theta = x / (1 - x) on a single finite
    interval.  Raises QuadratureError (carrying the partial value) when the
    subdivision budget is exhausted before the tolerances are met.
    """
    s = settings or QuadratureSettings()
    f = _vectorized(integrand)
    budget = _Budget(s.max_subdivisions)
    if s.infinite_domain_substitution == "rational-map":
        def g(x):
            x = np.clip(x, 1e-300, 1.0 - 1e-16)
            u = x / (1.0 - x)
            return f(u) / (1.0 - x) ** 2

        val, err = _adaptive_finite(g, 0.0, 1.0, s.abs_tol, s.rel_tol, budget)
        return QuadratureResult(val, err, budget.used)

    def g_low(y):
        u = np.exp(-y)
        return f(u) * u

    def g_high(x):
        u = np.exp(x)
        return f(u) * u

    v1, e1 = _adaptive_semiinfinite(g_low, 0.5 * s.abs_tol, s.rel_tol, budget)
    v2, e2 = _adaptive_semiinfinite(g_high, 0.5 * s.abs_tol, s.rel_tol, budget)
    return QuadratureResult(v1 + v2, e1 + e2, budget.used)


def eval_cp(p) -> float:
    """p-th absolute moment constant of a standard Gaussian, to the power 1/p.

    c_p = (2^(p/2) Gamma((p+1)/2) / sqrt(pi))^(1/p); c_2 = 1.
    """
    if not p >= 1:
        raise DomainError("eval_cp requires p >= 1")
    logc = (0.5 * p * LOG2 + math.lgamma(0.5 * (p + 1)) - 0.5 * math.log(math.pi)) / p
    return math.exp(logc)


def eval_CprimeK(K) -> float:
    """The square [0,1]^2 integral of (x+y)^(K-2).

    Equals (2^K - 2)/(K (K-1)) for K != 1 and 2 log 2 at K = 1; evaluated in
    a single expm1-based form that is continuous through K = 1.
    """
    if not 0.0 < K < 2.0:
        raise DomainError("eval_CprimeK requires 0 < K < 2")
    x = (K - 1.0) * LOG2
    phi = 1.0 if x == 0.0 else math.expm1(x) / x
    return 2.0 * LOG2 * phi / K


def eval_CK(K) -> float:
    """Variance of the unit-time value of the process X^K.

    C_K = integral of (1-e^(-theta))^2 theta^(-1-K) over (0, infinity),
    which closes to Gamma(2-K) times eval_CprimeK(K).
    """
    if not 0.0 < K < 2.0:
        raise DomainError("eval_CK requires 0 < K < 2 (integral diverges at endpoints)")
    return math.gamma(2.0 - K) * eval_CprimeK(K)


def _ck_integrand(K):
    # evaluated in log space: the raw product (1-e^-t)^2 t^(-1-K) overflows
    # for K > 1 at tiny t even where the integral is perfectly tame
    def f(t):
        t = np.asarray(t, dtype=float)
        return np.exp(2.0 * np.log(-np.expm1(-t)) - (1.0 + K) * np.log(t))

    return f


def eval_CK_quadrature(K, settings: QuadratureSettings | None = None) -> QuadratureResult:
    """eval_CK evaluated directly from its defining integral (cross-check path)."""
    if not 0.0 < K < 2.0:
        raise DomainError("eval_CK requires 0 < K < 2 (integral diverges at endpoints)")
    return quad_improper(_ck_integrand(K), settings)


def _kappa(gamma_, settings=None):
    if not 0.0 < gamma_ < 2.0:
        raise DomainError("kappa requires 0 < gamma < 2")
    r = quad_improper(lambda z: z ** (gamma_ - 1.0) / (1.0 + z * z), settings)
    return r.value / math.gamma(gamma_), r.error_estimate


def _lambda(H, gamma_, settings=None):
    if not 0.0 < H < 1.0:
        raise DomainError("lambda requires 0 < H < 1")
    r = quad_improper(lambda e: e ** (1.0 - 2.0 * H) / (1.0 + e * e), settings)
    pref = 4.0 * math.pi / (math.gamma(gamma_) * math.gamma(2.0 * H + 1.0)
                            * math.sin(math.pi * H))
    return pref * r.value, pref * r.error_estimate


DECOMPOSITION_NAMES = (
    "bfbm-low-k", "bfbm-high-k", "sfbm-low-h", "sfbm-high-h", "gprocess",
)


def decomposition_constants(name, H=None, K=None, gamma=None,
                            settings: QuadratureSettings | None = None) -> dict:
    """Named constants of one of the five covariance decompositions.

    bfbm-low-k  (0<K<1):  c1 = sqrt(K 2^-K / Gamma(1-K)), c2 = 2^((1-K)/2)
    bfbm-high-k (1<K<2):  a = sqrt(2^(1-K)), b = sqrt(K(K-1)/(2^K Gamma(2-K)))
    sfbm-low-h  (H<1/2):  c3 = sqrt(H(1-2H)/Gamma(2-2H))
    sfbm-high-h (H>1/2):  c4 = sqrt(H(2H-1)/Gamma(2-2H))
    gprocess:             kappa, lambda by quadrature of their defining
                          integrals, plus alpha = 2H - gamma

    Raises DomainError naming the violated constraint; the gprocess variant
    raises UnsupportedRegionError when alpha >= 1/2 (its second component
    would need K = 2 alpha + 1 >= 2, where the X^K integral diverges).
    """
    if name == "bfbm-low-k":
        if H is None or K is None:
            raise DomainError("bfbm-low-k needs H and K")
        if not 0.0 < H < 1.0:
            raise DomainError("bfbm-low-k requires 0 < H < 1")
        if not 0.0 < K <= 1.0 - 1e-6:
            raise DomainError(
                "bfbm-low-k requires 0 < K < 1 (c1 has a Gamma(1-K) pole at K=1)")
        c1 = math.sqrt(K * 2.0 ** (-K) / math.gamma(1.0 - K))
        c2 = 2.0 ** (0.5 * (1.0 - K))
        return {"c1": c1, "c2": c2}
    if name == "bfbm-high-k":
        if H is None or K is None:
            raise DomainError("bfbm-high-k needs H and K")
        if not 0.0 < H < 1.0:
            raise DomainError("bfbm-high-k requires 0 < H < 1")
        if not 1.0 < K < 2.0:
            raise DomainError("bfbm-high-k requires 1 < K < 2")
        if not H * K < 1.0:
            raise DomainError("bfbm-high-k requires HK < 1")
        a = math.sqrt(2.0 ** (1.0 - K))
        b = math.sqrt(K * (K - 1.0) / (2.0 ** K * math.gamma(2.0 - K)))
        return {"a": a, "b": b}
    if name == "sfbm-low-h":
        if H is None:
            raise DomainError("sfbm-low-h needs H")
        if not 0.0 < H < 0.5:
            raise DomainError("sfbm-low-h requires 0 < H < 1/2")
        return {"c3": math.sqrt(H * (1.0 - 2.0 * H) / math.gamma(2.0 - 2.0 * H))}
    if name == "sfbm-high-h":
        if H is None:
            raise DomainError("sfbm-high-h needs H")
        if not 0.5 < H < 1.0:
            raise DomainError("sfbm-high-h requires 1/2 < H < 1")
        return {"c4": math.sqrt(H * (2.0 * H - 1.0) / math.gamma(2.0 - 2.0 * H))}
    if name == "gprocess":
        if H is None or gamma is None:
            raise DomainError("gprocess needs H and gamma")
        if not 0.5 < H < 1.0:
            raise DomainError("gprocess requires 1/2 < H < 1")
        if not 0.0 < gamma < 2.0 * H:
            raise DomainError("gprocess requires 0 < gamma < 2H")
        alpha = 2.0 * H - gamma
        if alpha >= 0.5:
            raise UnsupportedRegionError(
                "gprocess decomposition needs alpha = 2H - gamma < 1/2; "
                f"got alpha = {alpha:g}")
        kap, kap_err = _kappa(gamma, settings)
        lam, lam_err = _lambda(H, gamma, settings)
        return {"kappa": kap, "lambda": lam, "alpha": alpha,
                "kappa_error": kap_err, "lambda_error": lam_err}
    raise DomainError(f"unknown decomposition name {name!r}; "
                      f"expected one of {', '.join(DECOMPOSITION_NAMES)}")
