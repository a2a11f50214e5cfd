"""Keypoint clustering, per-instance seeding, and the DoG baseline."""

import numpy as np
import pytest

from scatterkit.ascmodel import FrequencyGrid, Scatterer, synth_image
from scatterkit.errors import EmptyInput, NoCandidates
from scatterkit.keypoints import (DogParams, KeypointSet, cluster_keypoints,
                                  dog_candidates, dog_keypoints, dog_response,
                                  fit_regions, instance_seed, skaa_keypoints,
                                  to_global)
from scatterkit.raster import AmplitudeRaster
from scatterkit.spectral import taylor_window_2d

# sha256("0:chip_00000:0") as an integer; pins the seed derivation forever
PINNED_SEED = 111036133852682233449187380584068176767193868072678492542894896991942400593282


def test_instance_seed_is_stable_and_distinct():
    assert instance_seed(0, "chip_00000", 0) == PINNED_SEED
    assert instance_seed(0, "chip_00000", 0) == instance_seed(0, "chip_00000", 0)
    seeds = {instance_seed(m, i, n)
             for m in (0, 1) for i in ("a", "b") for n in (0, 1)}
    assert len(seeds) == 8


def test_keypoint_set_validation_and_translation():
    kps = KeypointSet(points=((1.0, 2.0), (3.0, 4.0)), k=2)
    np.testing.assert_array_equal(kps.as_array(), [[1, 2], [3, 4]])
    moved = kps.translated(10.0, -1.0)
    assert moved.points == ((11.0, 1.0), (13.0, 3.0))
    with pytest.raises(ValueError):
        KeypointSet(points=((1.0, 2.0),), k=2)
    with pytest.raises(ValueError):
        KeypointSet(points=(), k=0)
    with pytest.raises(ValueError):
        KeypointSet(points=((np.nan, 0.0),), k=1)


def test_cluster_exact_count_is_identity_sorted_row_major():
    pts = [(5.0, 1.0), (0.0, 3.0), (9.0, 0.0), (2.0, 3.0)]
    kps = cluster_keypoints(pts, k=4, rng_seed=0)
    assert kps.points == ((9.0, 0.0), (5.0, 1.0), (0.0, 3.0), (2.0, 3.0))


def test_cluster_tight_pairs_reduce_to_midpoints():
    centers = [(float(10 + 50 * (i % 3)), float(10 + 50 * (i // 3)))
               for i in range(9)]
    pts = []
    for cx, cy in centers:
        pts += [(cx - 0.1, cy), (cx + 0.1, cy)]
    expected = sorted(centers, key=lambda p: (p[1], p[0]))
    for seed in range(20):
        kps = cluster_keypoints(pts, k=9, rng_seed=seed)
        np.testing.assert_allclose(kps.as_array(), expected, rtol=0, atol=1e-9)


def test_cluster_replicates_when_short():
    pts = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)]
    kps = cluster_keypoints(pts, k=9, rng_seed=0)
    assert kps.k == 9 and len(kps.points) == 9
    assert set(kps.points) == set(pts)  # every input survives replication


def test_cluster_rejects_empty_and_bad_k():
    with pytest.raises(EmptyInput):
        cluster_keypoints([], k=3)
    with pytest.raises(ValueError):
        cluster_keypoints([(0.0, 0.0)], k=0)


def test_cluster_determinism_and_bounding_box():
    rng = np.random.Generator(np.random.PCG64(50))
    for trial in range(10):
        pts = [tuple(map(float, rng.uniform(0, 100, 2))) for _ in range(25)]
        a = cluster_keypoints(pts, k=6, rng_seed=trial)
        b = cluster_keypoints(pts, k=6, rng_seed=trial)
        assert a.points == b.points
        arr = a.as_array()
        raw = np.array(pts)
        assert np.all(arr.min(axis=0) >= raw.min(axis=0) - 1e-9)
        assert np.all(arr.max(axis=0) <= raw.max(axis=0) + 1e-9)
        ys = arr[:, 1]
        assert np.all(np.diff(ys) >= 0)  # row-major output order


def naive_blur3x3(img, sigma):
    ij = np.arange(-1, 2, dtype=np.float64)
    g = np.exp(-(ij[:, None] ** 2 + ij[None, :] ** 2) / (2 * sigma * sigma))
    g /= g.sum()
    h, w = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    acc += g[dy + 1, dx + 1] * img[yy, xx]
            out[y, x] = acc
    return out


def test_dog_response_matches_naive_convolution():
    rng = np.random.Generator(np.random.PCG64(51))
    vals = rng.random((12, 14))
    r = AmplitudeRaster(vals)
    params = DogParams()
    got = dog_response(r, params)
    lo, hi = vals.min(), vals.max()
    norm = (vals - lo) * 255.0 / (hi - lo)
    expect = naive_blur3x3(norm, params.sigma2) - naive_blur3x3(norm, params.sigma1)
    np.testing.assert_allclose(got, expect, rtol=0, atol=1e-12)


def test_dog_candidates_match_naive_ranking():
    rng = np.random.Generator(np.random.PCG64(52))
    vals = rng.random((16, 16))
    r = AmplitudeRaster(vals)
    params = DogParams(threshold=0.5, top_n=12)
    got = dog_candidates(r, params)
    mag = np.abs(dog_response(r, params)).ravel()
    idx = [int(q) for q in np.flatnonzero(mag > params.threshold)]
    idx.sort(key=lambda q: (-mag[q], q))
    expect = [(float(q % 16), float(q // 16)) for q in idx[:12]]
    assert got == expect


def test_dog_constant_raster_has_no_candidates():
    r = AmplitudeRaster(np.full((8, 8), 3.0))
    with pytest.raises(NoCandidates):
        dog_response(r)
    with pytest.raises(NoCandidates):
        dog_keypoints(r, k=1)


def test_dog_threshold_is_strict():
    rng = np.random.Generator(np.random.PCG64(53))
    r = AmplitudeRaster(rng.random((10, 10)))
    peak = float(np.abs(dog_response(r)).max())
    with pytest.raises(NoCandidates):
        dog_candidates(r, DogParams(threshold=peak))
    assert dog_candidates(r, DogParams(threshold=peak * 0.999))


def test_dog_impulse_keypoint_lands_near_impulse():
    vals = np.zeros((16, 16))
    vals[6, 9] = 1.0
    kps = dog_keypoints(AmplitudeRaster(vals), k=1)
    (x, y), = kps.points
    assert np.hypot(x - 9, y - 6) <= 2.0


def test_dog_is_affine_invariant():
    rng = np.random.Generator(np.random.PCG64(54))
    vals = rng.random((12, 12))
    a = AmplitudeRaster(vals)
    b = AmplitudeRaster(3.7 * vals + 2.0)
    np.testing.assert_allclose(dog_response(a), dog_response(b), rtol=0, atol=1e-9)
    assert dog_candidates(a, DogParams(threshold=1.0)) == \
        dog_candidates(b, DogParams(threshold=1.0))


def test_dog_keypoints_requires_enough_candidates():
    with pytest.raises(ValueError):
        dog_keypoints(AmplitudeRaster(np.ones((4, 4))), DogParams(top_n=3), k=5)


def test_to_global_translation_round_trip():
    kps = KeypointSet(points=((1.0, 2.0), (3.5, 4.5)), k=2)
    shifted = to_global(kps, (10.0, 20.0))
    assert shifted.points == ((11.0, 22.0), (13.5, 24.5))
    back = shifted.translated(-10.0, -20.0)
    assert back.points == kps.points


def test_fit_regions_recovers_separated_truths():
    grid = FrequencyGrid(48, 48)
    window = taylor_window_2d(48, 48)
    truths = [Scatterer(10.0, 10.0, 1.0), Scatterer(35.0, 12.0, 0.9),
              Scatterer(12.0, 36.0, 0.8), Scatterer(36.0, 38.0, 0.7)]
    fits = fit_regions(synth_image(truths, grid, window), grid, window)
    assert len(fits) >= 4
    for truth, fit in zip(truths, fits):
        assert np.hypot(fit.x - truth.x, fit.y - truth.y) <= 1.0
    amps = [f.amplitude for f in fits[:4]]
    assert amps == sorted(amps, reverse=True)


def test_skaa_keypoints_deterministic_set():
    grid = FrequencyGrid(48, 48)
    window = taylor_window_2d(48, 48)
    chip = synth_image([Scatterer(10.0, 10.0, 1.0), Scatterer(35.0, 12.0, 0.9),
                        Scatterer(12.0, 36.0, 0.8)], grid, window)
    a = skaa_keypoints(chip, grid, window, k=3, rng_seed=7)
    b = skaa_keypoints(chip, grid, window, k=3, rng_seed=7)
    assert a.points == b.points
    assert a.k == 3
