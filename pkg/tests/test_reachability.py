import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehcmm.errors import InvalidInputError, SchemaError, UnusableMapError
from ehcmm.reachability import (
    BOUNDARY_SCORE,
    ReachabilityMap,
    SigParams,
    build_map,
    cached_map,
    canonical_directions,
    directional_threshold,
    fk_coverage_scores,
    load_map,
    omega,
    save_map,
    sig,
)

from conftest import CACHE


@pytest.fixture(scope="module")
def small_map(model):
    return cached_map(model, CACHE, samples=10_000, voxel_size=0.15, seed=3)


def brute_threshold(rmap, e, tie=0.05):
    """Scan every voxel of the grid directly."""
    best = None
    cands = []
    e = np.asarray(e, float) / np.linalg.norm(e)
    nx, ny, nz = rmap.grid.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if rmap.grid[i, j, k] <= 0.95:
                    continue
                c = rmap.origin + (np.array([i, j, k]) + 0.5) * rmap.voxel_size
                n = np.linalg.norm(c)
                if n == 0:
                    continue
                a = math.acos(max(-1.0, min(1.0, float(c @ e) / n)))
                cands.append((a, n, c))
                best = a if best is None else min(best, a)
    tied = [x for x in cands if x[0] <= best + tie]
    return max(tied, key=lambda x: x[1])[2]


def test_canonical_directions():
    d = canonical_directions()
    assert d.shape == (26, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
    assert len({tuple(np.round(v, 9)) for v in d}) == 26


def test_sig_closed_form():
    p = SigParams()
    assert sig(1.0, p) == 0.5
    assert abs(sig(0.0, p) - 1.0 / (1.0 + math.exp(8.0))) < 1e-15
    assert abs(sig(0.0, p) - 3.35e-4) < 1e-6
    assert sig(1e6, p) == 1.0 and 0.0 < sig(0.0, SigParams(k=50.0)) < 1.0


def test_sig_monotone_on_grid():
    w = np.linspace(0, 3, 1000)
    s = np.array([sig(x) for x in w])
    assert np.all(np.diff(s) > 0)
    assert np.all((s > 0) & (s < 1))


def test_default_map_has_boundary_shell(model, rmap):
    p, _, n = rmap.boundary_set()
    assert len(p) > 100
    assert rmap.score_at([0.0, 0.0, 0.0]) < 0.2
    assert rmap.score_at([model.reach + 0.1, 0.0, 0.0]) == 0.0
    assert rmap.score_at([5.0, 5.0, 5.0]) == 0.0
    assert n.max() < model.reach


def test_boundary_voxels_confirmed_by_dense_forward_sampling(model, rmap):
    """Voxels the IK map calls > 95 % reachable are well covered by raw FK samples."""
    cov = fk_coverage_scores(model, 2_000_000, rmap.voxel_size, 11, origin=rmap.origin,
                             dims=rmap.grid.shape)
    mask = rmap.grid > BOUNDARY_SCORE
    assert mask.sum() > 0
    assert float(cov[mask].mean()) > 0.8
    # and voxels the map scores zero see hardly any forward samples
    far = rmap.grid == 0
    assert float(cov[far].mean()) < 0.05


def test_directional_threshold_matches_brute_force(small_map):
    rng = np.random.default_rng(0)
    for _ in range(30):
        e = rng.normal(size=3)
        assert np.allclose(directional_threshold(small_map, e), brute_threshold(small_map, e))


def test_symmetric_axis_threshold(rmap):
    p = directional_threshold(rmap, [1.0, 0.0, 0.0])
    ang = math.acos(p[0] / np.linalg.norm(p))
    # within roughly one voxel of angular width at that radius plus the tie band
    assert ang < math.atan(rmap.voxel_size / np.linalg.norm(p)) + 0.05 + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)),
       st.floats(0.01, 100.0))
def test_threshold_depends_on_direction_only(v, scale):
    from ehcmm.kinematics import default_model

    e = np.array(v)
    if np.linalg.norm(e) < 1e-3:
        return
    rmap = cached_map(default_model(), CACHE, samples=10_000, voxel_size=0.15, seed=3)
    assert np.array_equal(directional_threshold(rmap, e), directional_threshold(rmap, scale * e))


def test_omega_arithmetic(rmap):
    e = np.array([0.3, 0.2, -0.1])
    thr = np.linalg.norm(directional_threshold(rmap, e))
    u = e / np.linalg.norm(e)
    w = omega(rmap, 2.0 * thr * u)
    assert abs(w.omega - 0.5) < 1e-12
    w1 = omega(rmap, thr * u)
    assert abs(w1.omega - 1.0) < 1e-12 and abs(w1.sig_value - 0.5) < 1e-12
    assert w.threshold_norm == pytest.approx(thr)


def test_omega_capped_at_zero_error(rmap):
    w = omega(rmap, np.zeros(3))
    assert w.omega == 10.0


def test_omega_scale_invariance(rmap):
    """Scaling map units and error together leaves omega unchanged."""
    scaled = ReachabilityMap(rmap.voxel_size * 2.0, rmap.origin * 2.0, rmap.grid,
                             rmap.sample_count, rmap.seed)
    e = np.array([0.4, -0.1, 0.2])
    assert abs(omega(rmap, e).omega - omega(scaled, 2.0 * e).omega) < 1e-12


def test_empty_map_is_unusable():
    m = ReachabilityMap(0.1, np.zeros(3), np.zeros((3, 3, 3)), 1)
    with pytest.raises(UnusableMapError):
        directional_threshold(m, [1.0, 0, 0])
    with pytest.raises(UnusableMapError):
        omega(m, [0.0, 0, 0])


def test_invalid_map_inputs(model):
    with pytest.raises(InvalidInputError):
        build_map(model, 100, voxel_size=5.0)
    with pytest.raises(InvalidInputError):
        ReachabilityMap(0.1, np.zeros(3), np.full((2, 2, 2), 1.5), 1)


def test_build_is_bit_identical(model, small_map):
    again = build_map(model, 10_000, 0.15, 3)
    assert again == small_map
    assert again.grid.tobytes() == small_map.grid.tobytes()


def test_save_load_roundtrip(tmp_path, small_map):
    p = tmp_path / "m.bin"
    save_map(small_map, p)
    assert load_map(p) == small_map
    raw = p.read_bytes()
    assert raw[:4] == b"EHRM"
    (tmp_path / "bad.bin").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(SchemaError):
        load_map(tmp_path / "bad.bin")
    (tmp_path / "short.bin").write_bytes(raw[:-4])
    with pytest.raises(SchemaError):
        load_map(tmp_path / "short.bin")
