import io
import math

import numpy as np
import pytest

from gradevents import GrayImage, TernaryField, mse, ssim
from gradevents.codec import CodecState, EventFrame, encode_frame
from gradevents.metrics import (MetricsReport, brightness_event_probability, build_report,
                                event_probability, event_stats)

from conftest import random_image


def mse_loops(a, b):
    total = 0.0
    h, w = a.shape
    for y in range(h):
        for x in range(w):
            total += (a[y, x] - b[y, x]) ** 2
    return total / (h * w)


def ssim_loops(a, b, size=11, sigma=1.5):
    """Textbook SSIM: Gaussian-weighted statistics per fully-contained window."""
    r = size // 2
    g = np.array([math.exp(-((i - r) ** 2) / (2 * sigma ** 2)) for i in range(size)])
    wgt = np.outer(g, g)
    wgt /= wgt.sum()
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    h, w = a.shape
    vals = []
    for y in range(r, h - r):
        for x in range(r, w - r):
            pa = a[y - r:y + r + 1, x - r:x + r + 1]
            pb = b[y - r:y + r + 1, x - r:x + r + 1]
            ma, mb = (wgt * pa).sum(), (wgt * pb).sum()
            va = (wgt * (pa - ma) ** 2).sum()
            vb = (wgt * (pb - mb) ** 2).sum()
            cov = (wgt * (pa - ma) * (pb - mb)).sum()
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_mse_basic():
    a = GrayImage(np.zeros((4, 4)))
    assert mse(a, a) == 0.0
    assert mse(a, GrayImage(np.full((4, 4), 0.1))) == pytest.approx(0.01, abs=1e-15)


def test_mse_matches_loops(rng):
    a, b = random_image(rng, 13, 17), random_image(rng, 13, 17)
    assert abs(mse(a, b) - mse_loops(a.data, b.data)) < 1e-12
    assert mse(a, b) == mse(b, a)


def test_mse_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        mse(GrayImage(np.zeros((4, 4))), GrayImage(np.zeros((4, 5))))


def test_ssim_identical():
    img = GrayImage(np.random.default_rng(1).random((20, 20)))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)
    flat = GrayImage(np.full((12, 12), 0.3))
    assert ssim(flat, flat) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_images_closed_form():
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    expected = (c1 * c2) / ((1 + c1) * c2)
    got = ssim(GrayImage(np.zeros((16, 16))), GrayImage(np.ones((16, 16))))
    assert got == pytest.approx(expected, rel=1e-9)


def test_ssim_matches_textbook_loops(rng):
    a = random_image(rng, 24, 30)
    b = GrayImage(np.clip(a.data + rng.normal(0, 0.1, a.shape), 0, 1))
    assert abs(ssim(a, b) - ssim_loops(a.data, b.data)) < 1e-9
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)


def test_ssim_matches_scikit_image(rng):
    metrics = pytest.importorskip("skimage.metrics")
    a = random_image(rng, 40, 50)
    b = GrayImage(np.clip(a.data * 0.7 + 0.2 + rng.normal(0, 0.05, a.shape), 0, 1))
    ref = metrics.structural_similarity(a.data, b.data, data_range=1.0, gaussian_weights=True,
                                       sigma=1.5, use_sample_covariance=False)
    assert abs(ssim(a, b) - ref) < 1e-6


def test_ssim_size_and_shape_errors():
    with pytest.raises(ValueError, match="at least"):
        ssim(GrayImage(np.zeros((10, 20))), GrayImage(np.zeros((10, 20))))
    with pytest.raises(ValueError, match="dimension"):
        ssim(GrayImage(np.zeros((12, 12))), GrayImage(np.zeros((12, 13))))


# -- event statistics -------------------------------------------------------

def test_event_probability_zero_and_cap():
    assert event_probability(EventFrame(0, np.zeros((4, 6)), np.zeros((4, 6)))) == 0.0
    full = np.ones((4, 6))
    assert event_probability(EventFrame(0, full, full, compressed=True)) == 1.0
    assert event_probability(EventFrame(0, full, full)) == 2.0


def test_event_probability_counts_both_channels():
    ex = np.zeros((4, 4))
    ey = np.zeros((4, 4))
    ex[0, 0] = 1
    ey[1, 2] = -1
    ey[2, 2] = 1
    assert event_probability(EventFrame(0, ex, ey)) == 3 / 16


def test_unchanged_ternary_gives_zero_probability(rng):
    tx = rng.integers(-1, 2, size=(6, 6))
    tx[:, -1] = 0
    t = TernaryField(tx, np.zeros((6, 6)))
    assert event_probability(encode_frame(CodecState(t), t, 0)) == 0.0


def test_event_stats_histogram():
    frames = [EventFrame(i, np.zeros((4, 4)), np.zeros((4, 4))) for i in range(3)]
    ex = np.ones((4, 4))
    frames.append(EventFrame(3, ex, np.zeros((4, 4))))
    s = event_stats(frames, bins=4)
    assert s.probabilities == [0.0, 0.0, 0.0, 1.0]
    assert s.histogram == [3, 0, 1, 0]
    assert s.bin_edges == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert s.mean == 0.25
    assert s.to_dict()["frames"] == 4


def test_brightness_probability_counts_pixels_once():
    # two frames' worth of intervals on a 4x2 sensor
    t = [1, 2, 3, 12, 15, 20, 25]
    x = [0, 0, 1, 3, 3, 2, 0]
    y = [0, 0, 1, 1, 1, 0, 0]
    p = brightness_event_probability(t, x, y, [0, 10, 20], 4, 2)
    # (0,0) twice and (1,1) in the first interval; (3,1) twice and (2,0) in the second; t=25 is after
    np.testing.assert_array_equal(p, [2 / 8, 2 / 8])


def test_brightness_probability_validation():
    with pytest.raises(ValueError):
        brightness_event_probability([1], [5], [0], [0, 10], 4, 2)
    with pytest.raises(ValueError):
        brightness_event_probability([1], [0], [0], [10, 0], 4, 2)


def test_report_round_trip_and_summary(rng):
    refs = [random_image(rng, 12, 12) for _ in range(3)]
    rep = build_report(refs, refs, [0.1, 0.2, 0.3])
    assert rep.mse == [0.0] * 3
    assert all(s == pytest.approx(1.0) for s in rep.ssim)
    buf = io.StringIO()
    rep.write(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 4 and '"summary"' in lines[-1]
    back = MetricsReport.read(io.StringIO(buf.getvalue()))
    assert back.mse == rep.mse and back.event_probability == rep.event_probability
    assert rep.mean_event_probability == pytest.approx(0.2)
    with pytest.raises(ValueError):
        build_report(refs, refs[:2])
