"""Exact and approximate Gaussian path samplers on dyadic grids.

Paths are drawn on the uniform dyadic grid t_i = i * 2**-J of [0, 1].  Every
sampler derives one independent random substream per path from the run seed,
so the output is a pure function of (spec, grid, M, seed, policy) no matter
how the work is scheduled.  Dense linear algebra runs with the thread pool
pinned to one thread for the same reason.
"""

from __future__ import annotations

import json
import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .kernels import ProcessSpec, build_covariance_matrix
from .specialfn import DomainError, UnsupportedRegionError

SAMPLER_POLICIES = ("auto", "cholesky", "circulant", "spectral")

_BINARY_MAGIC = b"GPBE"
_BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")

# escalation schedule for the diagonal regularization; entries multiply the
# mean diagonal of the factored block
_JITTER_LADDER = (0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)

# design matrices up to this many entries are built once and reused across
# path chunks; larger ones are rebuilt block by block to bound memory
_DESIGN_CACHE_ENTRIES = 2 ** 24
_PATH_CHUNK = 256
_NODE_BLOCK = 4096


class FactorizationError(RuntimeError):
    """Covariance factorization failed after the whole jitter ladder."""

    def __init__(self, message, smallest_eigenvalue):
        super().__init__(f"{message} (smallest eigenvalue {smallest_eigenvalue:.6e})")
        self.smallest_eigenvalue = smallest_eigenvalue


@dataclass(frozen=True)
class Grid:
    """Uniform dyadic grid t_i = i * 2**-level covering [0, 1]."""

    level: int

    def __post_init__(self):
        if not isinstance(self.level, (int, np.integer)) or isinstance(self.level, bool):
            raise DomainError(f"grid level must be an integer; got {self.level!r}")
        if self.level < 1:
            raise DomainError(f"grid level must be >= 1; got {self.level}")

    @property
    def spacing(self) -> float:
        return 2.0 ** -self.level

    @property
    def n_points(self) -> int:
        return 2 ** self.level + 1

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n_points, dtype=float) * self.spacing


@dataclass(frozen=True)
class PathEnsemble:
    """Immutable batch of sampled paths with its provenance.

    paths has shape (M, 2**J + 1); row m is one path evaluated on the grid.
    jitter records the diagonal regularization applied during factorization,
    0.0 when none was needed.
    """

    grid: Grid
    paths: np.ndarray
    seed: int
    sampler_id: str
    process: ProcessSpec
    jitter: float = 0.0

    def __post_init__(self):
        if self.paths.ndim != 2 or self.paths.shape[1] != self.grid.n_points:
            raise ValueError(
                f"paths shape {self.paths.shape} does not match grid with "
                f"{self.grid.n_points} points")
        if self.paths.shape[0] < 1:
            raise DomainError("ensemble needs at least one path")
        if self.paths[:, 0].any():
            raise ValueError("paths must start at 0 at t=0")
        self.paths.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]


@dataclass(frozen=True)
class SpectralScheme:
    """Finite quadrature rule for the spectral representation of the x family.

    Geometric placement puts nodes at the geometric midpoints of a
    geometrically spaced partition of [theta_min, theta_max] and weighs each
    node by its cell width.
    """

    placement: str = "geometric"
    theta_min: float = 1e-8
    theta_max: float = 1e8
    count: int = 2 ** 14

    def __post_init__(self):
        if self.placement != "geometric":
            raise DomainError(
                f"unknown node placement {self.placement!r}; expected 'geometric'")
        if not 0.0 < self.theta_min < self.theta_max:
            raise DomainError(
                f"scheme requires 0 < theta_min < theta_max; got "
                f"[{self.theta_min:g}, {self.theta_max:g}]")
        if self.count < 2:
            raise DomainError(f"scheme requires count >= 2; got {self.count}")

    @property
    def edges(self) -> np.ndarray:
        return np.geomspace(self.theta_min, self.theta_max, self.count + 1)

    @property
    def nodes(self) -> np.ndarray:
        e = self.edges
        return np.sqrt(e[:-1] * e[1:])

    @property
    def weights(self) -> np.ndarray:
        return np.diff(self.edges)


def default_scheme() -> SpectralScheme:
    """Geometric scheme on [1e-8, 1e8] with 2**14 nodes."""
    return SpectralScheme()


def _path_rng(seed, index) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, index))))


def _check_run_args(M, seed):
    if not isinstance(M, (int, np.integer)) or isinstance(M, bool) or M < 1:
        raise DomainError(f"path count must be a positive integer; got {M!r}")
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise DomainError(f"seed must be a nonnegative integer; got {seed!r}")


def _factor_with_jitter(mat):
    """Cholesky factor with escalating diagonal regularization.

    Returns (L, applied_jitter) where applied_jitter is the multiple of the
    mean diagonal that was added, or raises FactorizationError carrying the
    smallest eigenvalue once the ladder is exhausted.
    """
    scale = float(np.mean(np.diagonal(mat)))
    eye = np.eye(mat.shape[0])
    with threadpool_limits(limits=1):
        for eps in _JITTER_LADDER:
            try:
                return np.linalg.cholesky(mat + (eps * scale) * eye if eps else mat), eps
            except np.linalg.LinAlgError:
                continue
        smallest = float(np.linalg.eigvalsh(mat)[0])
    raise FactorizationError("covariance factorization failed", smallest)


def _stack_path_draws(seed, indices, width):
    z = np.empty((len(indices), width))
    for row, m in enumerate(indices):
        z[row] = _path_rng(seed, m).standard_normal(width)
    return z


def cholesky_sample(spec: ProcessSpec, grid: Grid, M: int, seed: int) -> PathEnsemble:
    """Exact sampler for any family with a computable covariance matrix.

    Grid points with zero variance (t=0 for every family here) are excluded
    from the factorization and filled with exact zeros.
    """
    _check_run_args(M, seed)
    mat = build_covariance_matrix(spec, grid).matrix
    live = np.diagonal(mat) > 0.0
    sub = mat[np.ix_(live, live)]
    L, eps = _factor_with_jitter(sub)
    z = _stack_path_draws(seed, range(M), sub.shape[0])
    paths = np.zeros((M, grid.n_points))
    with threadpool_limits(limits=1):
        paths[:, live] = z @ L.T
    return PathEnsemble(grid=grid, paths=paths, seed=int(seed),
                        sampler_id="cholesky", process=spec, jitter=eps)


def _embedding_spectrum(H, N, spacing):
    """Eigenvalues of the circulant extension of the increment autocovariance."""
    k = np.arange(N + 1, dtype=float)
    acov = 0.5 * spacing ** (2.0 * H) * (
        (k + 1.0) ** (2.0 * H) + np.abs(k - 1.0) ** (2.0 * H) - 2.0 * k ** (2.0 * H))
    first_row = np.concatenate([acov, acov[N - 1:0:-1]])
    return np.fft.fft(first_row).real


def circulant_sample_fbm(H: float, grid: Grid, M: int, seed: int) -> PathEnsemble:
    """Exact fbm sampler via circulant embedding of the increment sequence.

    Falls back to cholesky_sample with a warning if the embedding spectrum
    has negative eigenvalues beyond the clip tolerance.
    """
    spec = ProcessSpec("fbm", H=H)
    _check_run_args(M, seed)
    N = 2 ** grid.level
    lam = _embedding_spectrum(H, N, grid.spacing)
    lam_min = float(lam.min())
    if lam_min < 0.0:
        if -lam_min <= 1e-10 * float(lam.max()):
            lam = np.clip(lam, 0.0, None)
        else:
            warnings.warn(
                f"circulant embedding for H={H:g} at level {grid.level} has "
                f"negative eigenvalues (min {lam_min:.3e}); falling back to "
                f"dense factorization")
            return cholesky_sample(spec, grid, M, seed)
    root = np.sqrt(lam)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    norm = 1.0 / np.sqrt(2.0 * N)
    paths = np.zeros((M, N + 1))
    for m in range(M):
        rng = _path_rng(seed, m)
        a = rng.standard_normal(N + 1)
        b = rng.standard_normal(N - 1)
        zeta = np.empty(2 * N, dtype=complex)
        zeta[0] = a[0]
        zeta[N] = a[N]
        zeta[1:N] = (a[1:N] + 1j * b) * inv_sqrt2
        zeta[N + 1:] = (a[N - 1:0:-1] - 1j * b[::-1]) * inv_sqrt2
        walk = np.fft.fft(root * zeta) * norm
        paths[m, 1:] = np.cumsum(walk[:N].real)
    return PathEnsemble(grid=grid, paths=paths, seed=int(seed),
                        sampler_id="circulant", process=spec)


def _design_columns(u, nodes, amplitude):
    return -np.expm1(-np.outer(u, nodes)) * amplitude


def scheme_covariance(scheme: SpectralScheme, K: float, u) -> np.ndarray:
    """Exact covariance of the finite spectral approximation at the values u.

    This finite sum is the analytic covariance of spectral_sample_x output and
    converges to cov_xk as the scheme refines.
    """
    u = np.asarray(u, dtype=float)
    nodes = scheme.nodes
    amp = nodes ** (-0.5 * (1.0 + K)) * np.sqrt(scheme.weights)
    F = _design_columns(u, nodes, amp)
    return F @ F.T


def spectral_sample_x(K: float, H_timechange, scheme: SpectralScheme,
                      grid: Grid, M: int, seed: int) -> PathEnsemble:
    """Approximate the x-family Wiener integral by a finite Gaussian sum.

    H_timechange None samples the K-indexed process on the grid times; a
    value H evaluates it at t**(2H) instead.
    """
    _check_run_args(M, seed)
    if H_timechange is None:
        spec = ProcessSpec("xk", K=K)
        u = grid.points
    else:
        spec = ProcessSpec("xhk", H=H_timechange, K=K)
        u = grid.points ** (2.0 * H_timechange)
    nodes = scheme.nodes
    amp = nodes ** (-0.5 * (1.0 + K)) * np.sqrt(scheme.weights)
    n = grid.n_points
    cache = n * scheme.count <= _DESIGN_CACHE_ENTRIES
    F = _design_columns(u, nodes, amp) if cache else None
    paths = np.empty((M, n))
    for start in range(0, M, _PATH_CHUNK):
        idx = range(start, min(start + _PATH_CHUNK, M))
        z = _stack_path_draws(seed, idx, scheme.count)
        with threadpool_limits(limits=1):
            if cache:
                block = z @ F.T
            else:
                block = np.zeros((len(idx), n))
                for lo in range(0, scheme.count, _NODE_BLOCK):
                    hi = min(lo + _NODE_BLOCK, scheme.count)
                    Fb = _design_columns(u, nodes[lo:hi], amp[lo:hi])
                    block += z[:, lo:hi] @ Fb.T
        paths[start:start + len(idx)] = block
    return PathEnsemble(grid=grid, paths=paths, seed=int(seed),
                        sampler_id="spectral", process=spec)


def sample_process(spec: ProcessSpec, grid: Grid, M: int, seed: int,
                   sampler_policy: str = "auto") -> PathEnsemble:
    """Route a process spec to a sampler.

    auto sends fbm to the circulant sampler, g to composite sampling from its
    decomposition, and everything else to dense factorization.
    """
    if sampler_policy not in SAMPLER_POLICIES:
        raise DomainError(
            f"unknown sampler policy {sampler_policy!r}; expected one of "
            f"{', '.join(SAMPLER_POLICIES)}")
    if spec.family == "yk":
        raise UnsupportedRegionError(
            "the yk family has unbounded variance at t=0 and cannot be "
            "sampled on a grid containing 0")
    if sampler_policy == "auto":
        if spec.family == "fbm":
            return circulant_sample_fbm(spec.H, grid, M, seed)
        if spec.family == "g":
            from .decomposition import compose_paths, make_decomposition

            dec = make_decomposition("gprocess", H=spec.H, gamma=spec.gamma)
            return compose_paths(dec, grid, M, seed)
        return cholesky_sample(spec, grid, M, seed)
    if sampler_policy == "cholesky":
        return cholesky_sample(spec, grid, M, seed)
    if sampler_policy == "circulant":
        if spec.family != "fbm":
            raise DomainError(
                f"circulant sampling applies to fbm only; got {spec.family}")
        return circulant_sample_fbm(spec.H, grid, M, seed)
    if spec.family == "xk":
        return spectral_sample_x(spec.K, None, default_scheme(), grid, M, seed)
    if spec.family == "xhk":
        return spectral_sample_x(spec.K, spec.H, default_scheme(), grid, M, seed)
    raise DomainError(
        f"spectral sampling applies to xk and xhk only; got {spec.family}")


def _spec_params(spec: ProcessSpec) -> dict:
    return {p: getattr(spec, p) for p in ("H", "K", "gamma")
            if getattr(spec, p) is not None}


def _sidecar_path(path: str) -> str:
    return path + ".json"


def save_ensemble(ensemble: PathEnsemble, path: str, fmt: str = "csv") -> None:
    """Persist an ensemble as csv or bin plus a JSON provenance sidecar."""
    if fmt not in ("csv", "bin"):
        raise DomainError(f"unknown format {fmt!r}; expected csv or bin")
    M, n = ensemble.paths.shape
    if fmt == "csv":
        np.savetxt(path, ensemble.paths, fmt="%.17g", delimiter=",")
    else:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_BINARY_MAGIC, _BINARY_VERSION, M, n))
            fh.write(np.ascontiguousarray(ensemble.paths, dtype="<f8").tobytes())
    sidecar = {
        "data_file": os.path.basename(path),
        "format": fmt,
        "grid_level": ensemble.grid.level,
        "jitter": ensemble.jitter,
        "n_paths": M,
        "process": {"family": ensemble.process.family, **_spec_params(ensemble.process)},
        "sampler_id": ensemble.sampler_id,
        "seed": ensemble.seed,
        "version": _BINARY_VERSION,
    }
    with open(_sidecar_path(path), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ensemble(path: str) -> PathEnsemble:
    """Rebuild a persisted ensemble from its data file and sidecar."""
    with open(_sidecar_path(path)) as fh:
        meta = json.load(fh)
    spec = ProcessSpec(meta["process"]["family"],
                       **{k: v for k, v in meta["process"].items() if k != "family"})
    grid = Grid(meta["grid_level"])
    if meta["format"] == "csv":
        paths = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        with open(path, "rb") as fh:
            magic, version, M, n = _HEADER.unpack(fh.read(_HEADER.size))
            if magic != _BINARY_MAGIC:
                raise ValueError(f"bad magic {magic!r} in {path}")
            if version != _BINARY_VERSION:
                raise ValueError(f"unsupported version {version} in {path}")
            paths = np.frombuffer(fh.read(), dtype="<f8").reshape(M, n).copy()
    return PathEnsemble(grid=grid, paths=paths, seed=meta["seed"],
                        sampler_id=meta["sampler_id"], process=spec,
                        jitter=meta["jitter"])
