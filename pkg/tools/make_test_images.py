"""Regenerate the bundled test images from scikit-image's sample photographs.

Every photograph is converted to grayscale, centre-cropped to 4:3 and
area-downsampled to the DAVIS240 frame size (240x180), then stored as 8-bit
PNG. The larger pan source is used to synthesise short panning clips.

    python tools/make_test_images.py tests/data
"""
import sys
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data
from skimage.color import rgb2gray
from skimage.transform import resize

PHOTOS = ["camera", "astronaut", "coffee", "chelsea", "rocket"]


def gray(name):
    a = getattr(data, name)()
    return rgb2gray(a[..., :3]) if a.ndim == 3 else a / 255.0


def crop_4_3(a):
    h, w = a.shape
    tw = min(w, h * 4 // 3)
    th = tw * 3 // 4
    y0, x0 = (h - th) // 2, (w - tw) // 2
    return a[y0:y0 + th, x0:x0 + tw]


def to_png(a, shape, path):
    a = resize(a, shape, anti_aliasing=True)
    Image.fromarray(np.rint(np.clip(a, 0, 1) * 255).astype(np.uint8), mode="L").save(path)


def main(out):
    out = Path(out)
    (out / "natural").mkdir(parents=True, exist_ok=True)
    for name in PHOTOS:
        to_png(crop_4_3(gray(name)), (180, 240), out / "natural" / f"{name}.png")
    to_png(crop_4_3(gray("coffee")), (300, 400), out / "pan_source.png")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
