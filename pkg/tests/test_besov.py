"""Tests for the discretized norm engine against analytic and brute-force oracles."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import besovgp.besov as besov
from besovgp.besov import (
    NormParams,
    NormReport,
    besov_orlicz_norm,
    besov_seminorm,
    evaluate_paths,
    lp_norm,
    orlicz_norm,
    shifted_lp_norm,
    ynp_statistic,
)
from besovgp.kernels import ProcessSpec
from besovgp.sampling import Grid, cholesky_sample
from besovgp.specialfn import DomainError


def _brute_orlicz(abs_values, weight, p_max, beta):
    best = 0.0
    for p in range(1, p_max + 1):
        best = max(best, float(p) ** (-1.0 / beta)
                   * besov._power_mean(abs_values, weight, float(p)))
    return best


def _brute_besov_orlicz(path, grid, alpha, p_max, beta):
    base = _brute_orlicz(np.abs(path[1:]), grid.spacing, p_max, beta)
    semi = 0.0
    for n in range(1, grid.level + 1):
        inc = np.abs(besov._shift_increments(path, grid, n))
        semi = max(semi, 2.0 ** (n * alpha)
                   * _brute_orlicz(inc, grid.spacing, p_max, beta))
    return base + semi


def _random_paths(count, grid, seed):
    rng = np.random.default_rng(seed)
    paths = rng.standard_normal((count, grid.n_points))
    paths[:, 0] = 0.0
    return paths


@pytest.mark.parametrize("p", [1, 2, 7, 100])
def test_lp_norm_of_one_is_one(p):
    grid = Grid(5)
    assert lp_norm(np.ones(grid.n_points), grid, p) == pytest.approx(1.0, rel=1e-14)


def test_lp_norm_of_zero_is_zero():
    grid = Grid(5)
    assert lp_norm(np.zeros(grid.n_points), grid, 3) == 0.0


def test_lp_norm_of_identity_matches_riemann_sum():
    grid = Grid(8)
    n = 2 ** grid.level
    value = lp_norm(grid.points, grid, 2)
    exact_sum = np.sqrt(n * (n + 1) * (2 * n + 1) / 6.0 / n ** 3)
    assert value == pytest.approx(exact_sum, rel=1e-14)
    assert abs(value - np.sqrt(1.0 / 3.0)) <= 2.0 * 2.0 ** -grid.level


def test_lp_norm_validation():
    grid = Grid(3)
    with pytest.raises(DomainError, match="p >= 1"):
        lp_norm(np.ones(grid.n_points), grid, 0.5)
    with pytest.raises(DomainError, match="does not fit"):
        lp_norm(np.ones(7), grid, 2)


def test_shifted_lp_norm_constant_path_vanishes():
    grid = Grid(5)
    path = np.full(grid.n_points, 3.7)
    assert all(shifted_lp_norm(path, grid, 2, n) == 0.0
               for n in range(1, grid.level + 1))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_shifted_lp_norm_of_identity(n):
    grid = Grid(6)
    h = 2.0 ** -n
    assert shifted_lp_norm(grid.points, grid, 1, n) == h * (1.0 - h)
    got = shifted_lp_norm(grid.points, grid, 3, n)
    assert got == pytest.approx(h * (1.0 - h) ** (1.0 / 3.0), rel=1e-14)


def test_shifted_lp_norm_finest_lag_matches_direct_increments():
    grid = Grid(4)
    path = _random_paths(1, grid, 5)[0]
    inc = np.abs(np.diff(path)[:-1])
    expected = besov._power_mean(inc, grid.spacing, 2.0)
    assert shifted_lp_norm(path, grid, 2, grid.level) == expected


@pytest.mark.parametrize("n", [0, 7, 2.0, -1])
def test_shifted_lp_norm_shift_validation(n):
    grid = Grid(6)
    with pytest.raises(DomainError):
        shifted_lp_norm(grid.points, grid, 2, n)


def test_orlicz_norm_of_constant_is_the_constant():
    grid = Grid(5)
    assert orlicz_norm(np.full(grid.n_points, 2.5), grid) == 2.5
    assert orlicz_norm(np.zeros(grid.n_points), grid) == 0.0


def test_orlicz_norm_equals_brute_force():
    grid = Grid(6)
    for path in _random_paths(20, grid, 11):
        fast = orlicz_norm(path, grid, p_max=1024)
        brute = _brute_orlicz(np.abs(path[1:]), grid.spacing, 1024, 2.0)
        assert fast == brute


def test_orlicz_norm_dominates_tabulated_lp():
    grid = Grid(5)
    for path in _random_paths(10, grid, 13):
        orl = orlicz_norm(path, grid)
        for p in (1, 2, 4):
            assert orl >= float(p) ** -0.5 * lp_norm(path, grid, p)


def test_besov_seminorm_constant_path_vanishes():
    grid = Grid(5)
    assert besov_seminorm(np.full(grid.n_points, 9.0), grid, 2, 0.5) == 0.0


def test_besov_seminorm_of_identity_attained_at_coarsest_shift():
    grid = Grid(6)
    value = besov_seminorm(grid.points, grid, 2, 0.5)
    expected = 2.0 ** 0.5 * shifted_lp_norm(grid.points, grid, 2, 1)
    assert value == expected
    assert np.isfinite(value)


def test_besov_seminorm_monotone_in_alpha():
    grid = Grid(5)
    path = _random_paths(1, grid, 17)[0]
    values = [besov_seminorm(path, grid, 2, a) for a in (0.2, 0.5, 0.8)]
    assert values[0] <= values[1] <= values[2]


def test_besov_orlicz_norm_of_constant_is_the_constant():
    grid = Grid(5)
    assert besov_orlicz_norm(np.full(grid.n_points, 1.5), grid, 0.5) == 1.5
    assert besov_orlicz_norm(np.zeros(grid.n_points), grid, 0.5) == 0.0


def test_besov_orlicz_norm_equals_brute_force():
    grid = Grid(5)
    for path in _random_paths(10, grid, 19):
        fast = besov_orlicz_norm(path, grid, 0.4, p_max=1024)
        brute = _brute_besov_orlicz(path, grid, 0.4, 1024, 2.0)
        assert fast == brute


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.floats(0.5, 50.0))
def test_norm_homogeneity(seed, c):
    grid = Grid(4)
    path = _random_paths(1, grid, seed)[0]
    for norm in (lambda f: lp_norm(f, grid, 3),
                 lambda f: shifted_lp_norm(f, grid, 2, 2),
                 lambda f: orlicz_norm(f, grid),
                 lambda f: besov_orlicz_norm(f, grid, 0.6)):
        assert norm(c * path) == pytest.approx(c * norm(path), rel=1e-12)


@pytest.mark.parametrize("seed", [23, 29, 31])
def test_norm_triangle_inequality(seed):
    grid = Grid(4)
    f, g = _random_paths(2, grid, seed)
    for norm in (lambda x: lp_norm(x, grid, 2),
                 lambda x: shifted_lp_norm(x, grid, 4, 1),
                 lambda x: orlicz_norm(x, grid),
                 lambda x: besov_orlicz_norm(x, grid, 0.3)):
        assert norm(f + g) <= norm(f) + norm(g) + 1e-10


def test_lp_norm_grid_refinement_consistency():
    lipschitz = 2.0 * np.pi
    coarse, fine = Grid(6), Grid(8)
    a = lp_norm(np.sin(2.0 * np.pi * coarse.points), coarse, 2)
    b = lp_norm(np.sin(2.0 * np.pi * fine.points), fine, 2)
    assert abs(a - b) <= 4.0 * 2.0 ** -coarse.level * lipschitz


def test_ynp_statistic_definition_and_validation():
    grid = Grid(5)
    path = _random_paths(1, grid, 37)[0]
    assert (ynp_statistic(path, grid, 0.5, 0.8, 3, 2)
            == 2.0 ** (3 * 0.4) * shifted_lp_norm(path, grid, 2, 3))
    assert ynp_statistic(np.full(grid.n_points, 4.0), grid, 0.5, 0.8, 2, 2) == 0.0
    with pytest.raises(DomainError, match="0 < H < 1"):
        ynp_statistic(path, grid, 1.5, 0.8, 2, 2)
    with pytest.raises(DomainError, match="0 < K < 2"):
        ynp_statistic(path, grid, 0.5, 2.3, 2, 2)


def test_ynp_second_moment_decays_for_timechanged_process():
    grid = Grid(8)
    ens = cholesky_sample(ProcessSpec("xhk", H=0.5, K=0.8), grid, 256, 20250307)
    means = []
    for n in range(2, grid.level + 1):
        vals = [ynp_statistic(path, grid, 0.5, 0.8, n, 2) ** 2
                for path in ens.paths]
        means.append(float(np.mean(vals)))
    assert all(a > b for a, b in zip(means, means[1:]))


@pytest.mark.parametrize("kwargs", [
    {"alpha": 0.0}, {"alpha": 1.0}, {"alpha": 0.5, "beta": 0.0},
    {"alpha": 0.5, "p_max": 0}, {"alpha": 0.5, "p_max": 2.5},
    {"alpha": 0.5, "n_range": (0, 3)}, {"alpha": 0.5, "n_range": (4, 2)},
])
def test_norm_params_validation(kwargs):
    with pytest.raises(DomainError):
        NormParams(**kwargs)


def test_evaluate_paths_report_structure():
    grid = Grid(4)
    paths = _random_paths(6, grid, 41)
    report = evaluate_paths(paths, grid, NormParams(alpha=0.5))
    assert report.n_paths == 6
    assert report.lp_norms.shape == (6, 3)
    assert report.ynp is None
    assert np.all(report.orlicz_norms >= 0.0)
    assert np.all(report.besov_orlicz_norms
                  >= report.orlicz_norms + report.besov_seminorms * 0.0)
    for col, p in enumerate(report.p_table):
        assert np.all(report.orlicz_norms
                      >= p ** -0.5 * report.lp_norms[:, col] - 1e-15)
    assert not report.truncated.any()
    assert np.all(report.seminorm_argmax >= 1)


def test_evaluate_paths_with_ynp_table():
    grid = Grid(4)
    paths = _random_paths(3, grid, 43)
    report = evaluate_paths(paths, grid, NormParams(alpha=0.5), H=0.5, K=0.8)
    assert report.ynp.shape == (3, 4, 3)
    assert report.ynp[1, 2, 1] == ynp_statistic(paths[1], grid, 0.5, 0.8, 3, 2.0)
    with pytest.raises(DomainError, match="together"):
        evaluate_paths(paths, grid, NormParams(alpha=0.5), H=0.5)


def test_evaluate_paths_flags_uncertified_truncation():
    grid = Grid(3)
    spike = np.zeros(grid.n_points)
    spike[4] = 100.0
    report = evaluate_paths(spike, grid, NormParams(alpha=0.5, p_max=1))
    assert report.truncated[0]


def test_report_serialization_round_trip():
    grid = Grid(3)
    paths = _random_paths(2, grid, 47)
    report = evaluate_paths(paths, grid, NormParams(alpha=0.4), H=0.6, K=1.4)
    payload = json.loads(report.to_json())
    assert payload["grid_level"] == 3
    assert len(payload["besov_orlicz_norms"]) == 2
    assert payload["ynp"] is not None
    csv_text = report.to_csv()
    lines = csv_text.strip().split("\n")
    assert len(lines) == 3
    header = lines[0].split(",")
    row = lines[1].split(",")
    assert len(header) == len(row)
    orlicz_col = header.index("orlicz")
    assert float(row[orlicz_col]) == report.orlicz_norms[0]
