import os
import subprocess
import sys

import numpy as np
import pytest

from reachbench import _accel, kernels

needs_numba = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


@needs_numba
def test_fk_backends_agree(chain):
    q = np.random.default_rng(0).uniform(-3, 3, size=(64, 6))
    args = (chain.axes, chain.translations, np.ascontiguousarray(chain.base_pose[:3, :3]),
            np.ascontiguousarray(chain.base_pose[:3, 3]), chain.ee_offset, q)
    np.testing.assert_allclose(kernels.fk_frames_numba(*args), kernels.fk_frames_numpy(*args),
                               atol=1e-14)


@needs_numba
def test_adam_backends_agree():
    outs = []
    for fn in (kernels.adam_update_numba, kernels.adam_update_numpy):
        rng = np.random.default_rng(0)
        p, g, m = rng.normal(size=50), rng.normal(size=50), rng.normal(size=50)
        v = rng.uniform(0, 1, size=50)
        fn(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        outs.append((p, m, v))
    for a, b in zip(*outs):
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-16)


@needs_numba
@pytest.mark.parametrize("shape", ["disk", "segment"])
def test_raster_backends_agree(shape):
    color = np.array([30, 60, 220], dtype=np.uint8)
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = np.zeros((64, 64, 3), dtype=np.uint8)
        b = a.copy()
        if shape == "disk":
            cx, cy, r = rng.uniform(-5, 70), rng.uniform(-5, 70), rng.uniform(0.5, 9)
            kernels.draw_disk_numba(a, cx, cy, r, color)
            kernels.draw_disk_numpy(b, cx, cy, r, color)
        else:
            x0, y0, x1, y1 = rng.uniform(-10, 74, size=4)
            kernels.draw_segment_numba(a, x0, y0, x1, y1, 1.5, color)
            kernels.draw_segment_numpy(b, x0, y0, x1, y1, 1.5, color)
        np.testing.assert_array_equal(a, b)


@needs_numba
def test_diff_stats_backends_agree():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(40, 50, 3), dtype=np.uint8)
    mask = rng.integers(0, 256, size=(40, 50, 3), dtype=np.uint8)
    assert kernels.diff_blob_stats_numba(img, mask, 40) == kernels.diff_blob_stats_numpy(img, mask, 40)


def test_disk_pixels_are_centered():
    img = np.zeros((32, 32, 3), dtype=np.uint8)
    kernels.draw_disk(img, 10.0, 20.0, 6.0, np.array([255, 0, 0], dtype=np.uint8))
    rows, cols = np.nonzero(img[..., 0])
    assert cols.mean() == 10.0 and rows.mean() == 20.0
    assert len(rows) == sum(1 for r in range(-6, 7) for c in range(-6, 7) if r * r + c * c <= 36)


def test_diff_stats_counts_threshold_inclusive():
    img = np.zeros((2, 2, 3), dtype=np.uint8)
    mask = img.copy()
    img[0, 1] = (40, 0, 0)
    img[1, 0] = (0, 39, 0)
    assert tuple(kernels.diff_blob_stats(img, mask, 40)) == (1, 1.0, 0.0)


def test_env_flag_selects_numpy():
    env = dict(os.environ, REACH_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", "from reachbench import _accel; print(_accel.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
