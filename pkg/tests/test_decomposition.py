"""Tests for decomposition specs, composite sampling, and identity checks."""

import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from besovgp.decomposition import (
    DecompositionSpec,
    IdentityReport,
    compose_paths,
    make_decomposition,
    verify_covariance_identity,
    verify_G_against_heat,
)
from besovgp.kernels import ProcessSpec, cov_bfbm, cov_fbm, covariance
from besovgp.sampling import Grid, sample_process
from besovgp.specialfn import (
    DomainError,
    UnsupportedRegionError,
    decomposition_constants,
)

# max correlation deviation between the g kernel and the heat-type kernel at
# (H, gamma) = (0.7, 1.0) on the level-3 grid, computed once with the nested
# quadrature at default settings; the two shapes genuinely disagree
HEAT_MISMATCH_AT_07_10 = 0.6994578071766435


def _band_fraction(empirical, exact, M, factor=3.0):
    se = np.sqrt((np.outer(np.diagonal(exact), np.diagonal(exact))
                  + exact ** 2) / M)
    return float(np.mean(np.abs(empirical - exact) <= factor * se + 1e-15))


def test_bfbm_low_k_structure_and_weights():
    dec = make_decomposition("bfbm-low-k", H=0.5, K=0.5)
    consts = decomposition_constants("bfbm-low-k", H=0.5, K=0.5)
    assert dec.lhs == ProcessSpec("fbm", H=0.25)
    (w1, comp1), (w2, comp2) = dec.components
    assert comp1 == ProcessSpec("bfbm", H=0.5, K=0.5)
    assert comp2 == ProcessSpec("xhk", H=0.5, K=0.5)
    assert w1 == 1.0 / consts["c2"]
    assert w2 == consts["c1"] / consts["c2"]


def test_bfbm_high_k_structure_and_weights():
    dec = make_decomposition("bfbm-high-k", H=0.6, K=1.4)
    consts = decomposition_constants("bfbm-high-k", H=0.6, K=1.4)
    assert dec.lhs == ProcessSpec("bfbm", H=0.6, K=1.4)
    (w1, comp1), (w2, comp2) = dec.components
    assert comp1 == ProcessSpec("fbm", H=0.84)
    assert comp2 == ProcessSpec("xhk", H=0.6, K=1.4)
    assert w1 == consts["a"]
    assert w2 == consts["b"]


@pytest.mark.parametrize("name,H,xk_weight_key", [
    ("sfbm-low-h", 0.25, "c3"),
    ("sfbm-high-h", 0.75, "c4"),
])
def test_sfbm_structure_and_weights(name, H, xk_weight_key):
    dec = make_decomposition(name, H=H)
    consts = decomposition_constants(name, H=H)
    (w1, comp1), (w2, comp2) = dec.components
    assert w1 == 1.0
    assert comp2 == ProcessSpec("xk", K=2.0 * H)
    assert w2 == consts[xk_weight_key]
    if name == "sfbm-low-h":
        assert dec.lhs == ProcessSpec("sfbm", H=H)
        assert comp1 == ProcessSpec("fbm", H=H)
    else:
        assert dec.lhs == ProcessSpec("fbm", H=H)
        assert comp1 == ProcessSpec("sfbm", H=H)


def test_gprocess_structure_and_weights():
    dec = make_decomposition("gprocess", H=0.7, gamma=1.0)
    consts = decomposition_constants("gprocess", H=0.7, gamma=1.0)
    assert dec.lhs == ProcessSpec("g", H=0.7, gamma=1.0)
    (w1, comp1), (w2, comp2) = dec.components
    assert comp1 == ProcessSpec("fbm", H=0.5 * consts["alpha"])
    assert comp2 == ProcessSpec("xk", K=2.0 * consts["alpha"] + 1.0)
    assert w1 == np.sqrt(consts["kappa"])
    assert w2 == np.sqrt(consts["lambda"])


@pytest.mark.parametrize("H,K", [
    (0.3, 0.5), (0.5, 0.5), (0.7, 0.9), (0.6, 1.4), (0.45, 1.9),
])
def test_bfbm_identities_on_level6_grid(H, K):
    name = "bfbm-low-k" if K < 1.0 else "bfbm-high-k"
    report = verify_covariance_identity(make_decomposition(name, H=H, K=K), Grid(6))
    assert report.passed
    assert report.max_abs_err <= 1e-10


@pytest.mark.parametrize("H", [0.2, 0.35, 0.65, 0.8])
def test_sfbm_identities_on_level6_grid(H):
    name = "sfbm-low-h" if H < 0.5 else "sfbm-high-h"
    report = verify_covariance_identity(make_decomposition(name, H=H), Grid(6))
    assert report.passed
    assert report.max_abs_err <= 1e-10


@pytest.mark.parametrize("H,gamma", [(0.7, 1.0), (0.8, 1.3)])
def test_gprocess_identity_on_level6_grid(H, gamma):
    report = verify_covariance_identity(
        make_decomposition("gprocess", H=H, gamma=gamma), Grid(6))
    assert report.passed
    assert report.max_abs_err <= 1e-10


@settings(max_examples=40, deadline=None)
@given(H=st.floats(0.05, 0.95), K=st.floats(0.05, 1.95))
def test_bfbm_identity_for_random_parameters(H, K):
    assume(abs(K - 1.0) > 1e-3)
    assume(H * K < 0.999)
    name = "bfbm-low-k" if K < 1.0 else "bfbm-high-k"
    report = verify_covariance_identity(make_decomposition(name, H=H, K=K), Grid(4))
    assert report.max_abs_err <= 1e-10


@settings(max_examples=40, deadline=None)
@given(H=st.floats(0.05, 0.95))
def test_sfbm_identity_for_random_parameters(H):
    assume(abs(H - 0.5) > 1e-3)
    name = "sfbm-low-h" if H < 0.5 else "sfbm-high-h"
    report = verify_covariance_identity(make_decomposition(name, H=H), Grid(4))
    assert report.max_abs_err <= 1e-10


def test_identity_report_json_fields():
    report = verify_covariance_identity(
        make_decomposition("sfbm-low-h", H=0.25), Grid(3))
    payload = json.loads(report.to_json())
    assert set(payload) == {"spec", "grid_level", "max_abs_err", "pass", "worst_point"}
    assert payload["pass"] is True
    assert payload["grid_level"] == 3
    assert "sfbm-low-h" in payload["spec"]
    assert len(payload["worst_point"]) == 2


@pytest.mark.parametrize("kwargs", [
    {"name": "nonsense", "lhs": ProcessSpec("fbm", H=0.5), "components": ((1.0, ProcessSpec("fbm", H=0.5)),)},
    {"name": "sfbm-low-h", "lhs": ProcessSpec("sfbm", H=0.25), "components": ()},
    {"name": "sfbm-low-h", "lhs": ProcessSpec("sfbm", H=0.25), "components": ((0.0, ProcessSpec("fbm", H=0.25)),)},
    {"name": "sfbm-low-h", "lhs": ProcessSpec("sfbm", H=0.25), "components": ((np.inf, ProcessSpec("fbm", H=0.25)),)},
    {"name": "sfbm-low-h", "lhs": ProcessSpec("sfbm", H=0.25), "components": ((1.0, "fbm"),)},
])
def test_decomposition_spec_validation(kwargs):
    with pytest.raises(DomainError):
        DecompositionSpec(**kwargs)


def test_make_decomposition_rejects_invalid_parameters():
    with pytest.raises(DomainError, match="K < 1"):
        make_decomposition("bfbm-low-k", H=0.5, K=1.4)
    with pytest.raises(DomainError, match="1 < K < 2"):
        make_decomposition("bfbm-high-k", H=0.5, K=0.5)
    with pytest.raises(DomainError, match="H < 1/2"):
        make_decomposition("sfbm-low-h", H=0.75)
    with pytest.raises(UnsupportedRegionError, match="alpha"):
        make_decomposition("gprocess", H=0.9, gamma=0.1)


def test_compose_paths_lhs_covariance_low_k():
    dec = make_decomposition("bfbm-low-k", H=0.5, K=0.5)
    ens = compose_paths(dec, Grid(4), 20000, 20250304)
    pts = ens.grid.points
    exact = cov_fbm(0.25, pts[:, None], pts[None, :])
    emp = ens.paths.T @ ens.paths / ens.n_paths
    assert _band_fraction(emp, exact, ens.n_paths) >= 0.99
    assert ens.sampler_id == "composite"
    assert ens.process == dec.lhs


def test_compose_paths_lhs_covariance_high_k():
    dec = make_decomposition("bfbm-high-k", H=0.6, K=1.4)
    ens = compose_paths(dec, Grid(4), 20000, 20250305)
    pts = ens.grid.points
    exact = cov_bfbm(0.6, 1.4, pts[:, None], pts[None, :])
    emp = ens.paths.T @ ens.paths / ens.n_paths
    assert _band_fraction(emp, exact, ens.n_paths) >= 0.99


def test_compose_paths_deterministic():
    dec = make_decomposition("sfbm-high-h", H=0.75)
    a = compose_paths(dec, Grid(3), 6, 41)
    b = compose_paths(dec, Grid(3), 6, 41)
    assert np.array_equal(a.paths, b.paths)


def test_component_streams_differ():
    dec = make_decomposition("sfbm-low-h", H=0.25)
    ens = compose_paths(dec, Grid(3), 4, 43)
    solo = sample_process(dec.components[0][1], Grid(3), 4, 43)
    assert not np.array_equal(ens.paths, solo.paths)


def test_sample_process_routes_g_to_composite():
    spec = ProcessSpec("g", H=0.7, gamma=1.0)
    ens = sample_process(spec, Grid(4), 20000, 20250306)
    assert ens.sampler_id == "composite"
    assert ens.process == spec
    pts = ens.grid.points
    exact = covariance(spec, pts[:, None], pts[None, :])
    emp = ens.paths.T @ ens.paths / ens.n_paths
    assert _band_fraction(emp, exact, ens.n_paths) >= 0.99


def test_g_heat_correlation_mismatch_is_reported():
    report = verify_G_against_heat(0.7, 1.0, Grid(3))
    assert not report.passed
    assert report.max_abs_err == pytest.approx(HEAT_MISMATCH_AT_07_10, rel=1e-6)
    assert report.worst_point == (0.125, 1.0)
    assert float(np.max(np.abs(np.diagonal(report.errors)))) <= 1e-14
    payload = json.loads(report.to_json())
    assert payload["pass"] is False


def test_g_heat_rejects_alpha_above_half():
    with pytest.raises(UnsupportedRegionError, match="alpha"):
        verify_G_against_heat(0.9, 0.1, Grid(3))
