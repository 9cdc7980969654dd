import numpy as np
import pytest

import lpknn


def two_tone(size=16):
    image = np.empty((size, size, 3), dtype=np.uint8)
    image[:, : size // 2] = (200, 40, 30)
    image[:, size // 2 :] = (30, 60, 190)
    trimap = np.full((size, size), 128, dtype=np.uint8)
    m, q = size // 2, size // 4
    for r, c in [(q, q), (3 * q, q), (m, q), (m, 1), (m, m - 1)]:
        trimap[r, c] = 255
    for r, c in [(q, 3 * q), (3 * q, 3 * q), (m, 3 * q), (m, size - 2), (m, m)]:
        trimap[r, c] = 64
    truth = np.zeros((size, size), dtype=np.uint8)
    truth[:, : size // 2] = 255
    return image, trimap, truth


def test_hsv():
    assert lpknn.rgb_to_hsv(1.0, 0.0, 0.0) == pytest.approx((0.0, 1.0, 1.0))
    assert lpknn.rgb_to_hsv(0.5, 0.5, 0.5) == pytest.approx((0.0, 0.0, 0.5))


def test_features_shape_and_standardization():
    image, _, _ = two_tone()
    f = lpknn.extract_features(image)
    assert f.shape == (256, 23)
    assert len(lpknn.FEATURE_NAMES) == 23
    assert np.allclose(f[:, 0].mean(), 0.0)
    assert np.allclose(f[:, 0].std(), 1.0)
    zero = lpknn.extract_features(image, [0.0] * 23)
    assert not zero.any()


def test_knn_graph_matches_brute_force():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(60, 5))
    offsets, neighbors = lpknn.build_knn_graph(pts, 4)
    d = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    want = set()
    for i in range(60):
        for j in np.argsort(d[i], kind="stable")[:4]:
            want.add((min(i, j), max(i, j)))
    got = {
        (min(i, j), max(i, j))
        for i in range(60)
        for j in neighbors[offsets[i] : offsets[i + 1]]
    }
    assert got == want


def test_propagate_path():
    offsets = np.array([0, 1, 3, 5, 6])
    neighbors = np.array([1, 0, 2, 1, 3, 2])
    out = lpknn.propagate(offsets, neighbors, np.array([1, 0, 0, 2]), 2)
    assert out["converged"]
    assert list(out["labels"]) == [1, 1, 2, 2]
    assert np.allclose(out["domination"].sum(axis=1), 1.0)


def test_segment_two_tone():
    image, trimap, truth = two_tone()
    out = lpknn.segment(image, trimap, k=6)
    assert out["converged"]
    assert out["labels"].shape == (16, 16)
    assert (out["mask"][:, :8] == 255).all() and (out["mask"][:, 8:] == 0).all()
    assert lpknn.error_rate(out["labels"], truth, trimap) == 0.0


def test_errors():
    image, trimap, _ = two_tone()
    bad = trimap.copy()
    bad[0, 0] = 100
    with pytest.raises(lpknn.DecodeError):
        lpknn.segment(image, bad)
    with pytest.raises(lpknn.ParamError):
        lpknn.segment(image, trimap, k=0)
    with pytest.raises(lpknn.DimensionError):
        lpknn.segment(image, trimap[:8])
