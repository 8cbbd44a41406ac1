from pathlib import Path

import numpy as np
import pytest
from PIL import Image
from scipy.ndimage import map_coordinates

from gradevents import GrayImage

DATA = Path(__file__).parent / "data"
DEFAULT_THRESHOLDS = (4 / 255, 8 / 255, 16 / 255)


def natural_image_paths():
    return sorted((DATA / "natural").glob("*.png"))


def load_gray(path):
    return GrayImage.from_uint8(np.asarray(Image.open(path)))


def pan_video(n_frames=24, width=240, height=180, step=(1.7, 0.9)):
    """Camera pan across the bundled source still, bilinear resampled to 8 bits."""
    src = np.asarray(Image.open(DATA / "pan_source.png"), dtype=np.float64)
    yy, xx = np.mgrid[:height, :width].astype(np.float64)
    frames = []
    for k in range(n_frames):
        coords = [yy + 10 + k * step[1], xx + 10 + k * step[0]]
        f = map_coordinates(src, coords, order=1, mode="nearest")
        frames.append(GrayImage.from_uint8(np.rint(f).astype(np.uint8)))
    return frames


def random_image(rng, height, width):
    return GrayImage(rng.random((height, width)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def natural_images():
    return {p.stem: load_gray(p) for p in natural_image_paths()}


# acceptance summary: one line per criterion-marked test

_criteria = []


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    if call.excinfo is None:
        status = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        status = "SKIP"
    else:
        status = "FAIL"
    _criteria.append((number, status, title, item.name, call.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, name, duration in sorted(_criteria, key=lambda c: (c[0], c[3])):
        terminalreporter.write_line(f"criterion {number}: {status:4s} {title} [{name}, {duration:.2f}s]")
