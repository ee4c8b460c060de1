"""Covariance decompositions: composite sampling and identity verification.

Each supported decomposition states that one family's covariance equals a
weighted sum of two other families' covariances, with weights supplied by
specialfn.decomposition_constants.  For centered Gaussian processes this
covariance identity is equivalent to the corresponding equality in law, so
verifying it analytically on a grid is the exact testable form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kernels import ProcessSpec, build_covariance_matrix, cov_heat_numeric
from .sampling import Grid, PathEnsemble, sample_process
from .specialfn import (
    DECOMPOSITION_NAMES,
    DomainError,
    QuadratureSettings,
    decomposition_constants,
)

IDENTITY_TOLERANCE = 1e-10
HEAT_MATCH_TOLERANCE = 1e-3


@dataclass(frozen=True)
class DecompositionSpec:
    """One decomposition: lhs covariance = sum of weight**2 * component covariance."""

    name: str
    lhs: ProcessSpec
    components: tuple

    def __post_init__(self):
        if self.name not in DECOMPOSITION_NAMES:
            raise DomainError(
                f"unknown decomposition {self.name!r}; expected one of "
                f"{', '.join(DECOMPOSITION_NAMES)}")
        if not self.components:
            raise DomainError("decomposition needs at least one component")
        for weight, comp in self.components:
            if not isinstance(comp, ProcessSpec):
                raise DomainError(f"component {comp!r} is not a process spec")
            if not np.isfinite(weight):
                raise DomainError(f"component weight {weight!r} is not finite")
        if not any(weight != 0.0 for weight, _ in self.components):
            raise DomainError("decomposition weights are all zero")

    def describe(self) -> str:
        rhs = " + ".join(f"({w:.17g})^2 {c.label()}" for w, c in self.components)
        return f"{self.name}: {self.lhs.label()} = {rhs}"


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one analytic covariance comparison on a grid."""

    spec: str
    grid_level: int
    max_abs_err: float
    passed: bool
    worst_point: tuple
    errors: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "spec": self.spec,
            "grid_level": self.grid_level,
            "max_abs_err": self.max_abs_err,
            "pass": self.passed,
            "worst_point": list(self.worst_point),
        }, sort_keys=True)


def make_decomposition(name: str, H=None, K=None, gamma=None) -> DecompositionSpec:
    """Instantiate a named decomposition with its exact constants.

    bfbm-low-k:  fbm(HK)   = (1/c2)^2 bfbm(H,K) + (c1/c2)^2 xhk(H,K)
    bfbm-high-k: bfbm(H,K) = a^2 fbm(HK) + b^2 xhk(H,K)
    sfbm-low-h:  sfbm(H)   = fbm(H) + c3^2 xk(2H)
    sfbm-high-h: fbm(H)    = sfbm(H) + c4^2 xk(2H)
    gprocess:    g(H,gamma) = kappa fbm(alpha/2) + lambda xk(2 alpha + 1)
    """
    consts = decomposition_constants(name, H=H, K=K, gamma=gamma)
    if name == "bfbm-low-k":
        c1, c2 = consts["c1"], consts["c2"]
        return DecompositionSpec(
            name, ProcessSpec("fbm", H=H * K),
            ((1.0 / c2, ProcessSpec("bfbm", H=H, K=K)),
             (c1 / c2, ProcessSpec("xhk", H=H, K=K))))
    if name == "bfbm-high-k":
        return DecompositionSpec(
            name, ProcessSpec("bfbm", H=H, K=K),
            ((consts["a"], ProcessSpec("fbm", H=H * K)),
             (consts["b"], ProcessSpec("xhk", H=H, K=K))))
    if name == "sfbm-low-h":
        return DecompositionSpec(
            name, ProcessSpec("sfbm", H=H),
            ((1.0, ProcessSpec("fbm", H=H)),
             (consts["c3"], ProcessSpec("xk", K=2.0 * H))))
    if name == "sfbm-high-h":
        return DecompositionSpec(
            name, ProcessSpec("fbm", H=H),
            ((1.0, ProcessSpec("sfbm", H=H)),
             (consts["c4"], ProcessSpec("xk", K=2.0 * H))))
    alpha = consts["alpha"]
    return DecompositionSpec(
        name, ProcessSpec("g", H=H, gamma=gamma),
        ((np.sqrt(consts["kappa"]), ProcessSpec("fbm", H=0.5 * alpha)),
         (np.sqrt(consts["lambda"]), ProcessSpec("xk", K=2.0 * alpha + 1.0))))


def _component_seed(seed, index) -> int:
    ss = np.random.SeedSequence((seed, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def compose_paths(spec: DecompositionSpec, grid: Grid, M: int, seed: int) -> PathEnsemble:
    """Sample the lhs law as the weighted sum of independent component draws."""
    total = np.zeros((M, grid.n_points))
    for index, (weight, comp) in enumerate(spec.components):
        ens = sample_process(comp, grid, M, _component_seed(seed, index))
        total += weight * ens.paths
    return PathEnsemble(grid=grid, paths=total, seed=int(seed),
                        sampler_id="composite", process=spec.lhs)


def verify_covariance_identity(spec: DecompositionSpec, grid: Grid) -> IdentityReport:
    """Check lhs kernel against the weighted component sum analytically."""
    lhs = build_covariance_matrix(spec.lhs, grid).matrix
    rhs = np.zeros_like(lhs)
    for weight, comp in spec.components:
        rhs += weight ** 2 * build_covariance_matrix(comp, grid).matrix
    errors = np.abs(lhs - rhs)
    i, j = np.unravel_index(int(np.argmax(errors)), errors.shape)
    pts = grid.points
    worst = float(errors[i, j])
    return IdentityReport(spec=spec.describe(), grid_level=grid.level,
                          max_abs_err=worst, passed=worst <= IDENTITY_TOLERANCE,
                          worst_point=(float(pts[i]), float(pts[j])),
                          errors=errors)


def verify_G_against_heat(H: float, gamma: float, grid: Grid,
                          settings: QuadratureSettings | None = None) -> IdentityReport:
    """Compare the correlation shapes of the g kernel and the heat-type kernel.

    Both matrices are normalized to unit diagonal before comparison, so any
    global constant between the two kernels drops out.  The origin is skipped
    because both variances vanish there.
    """
    decomposition_constants("gprocess", H=H, gamma=gamma)
    spec = ProcessSpec("g", H=H, gamma=gamma)
    pts = grid.points[1:]
    gmat = build_covariance_matrix(spec, pts).matrix
    n = pts.size
    heat = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            heat[i, j] = cov_heat_numeric(H, gamma, pts[i], pts[j], settings)
            heat[j, i] = heat[i, j]
    corr_g = gmat / np.sqrt(np.outer(np.diagonal(gmat), np.diagonal(gmat)))
    corr_heat = heat / np.sqrt(np.outer(np.diagonal(heat), np.diagonal(heat)))
    errors = np.abs(corr_g - corr_heat)
    i, j = np.unravel_index(int(np.argmax(errors)), errors.shape)
    worst = float(errors[i, j])
    label = (f"gprocess-vs-heat: correlation of {spec.label()} vs the "
             f"numerically integrated heat-type kernel")
    return IdentityReport(spec=label, grid_level=grid.level,
                          max_abs_err=worst, passed=worst <= HEAT_MATCH_TOLERANCE,
                          worst_point=(float(pts[i]), float(pts[j])),
                          errors=errors)
