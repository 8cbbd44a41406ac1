"""Reconstruction quality (MSE, SSIM) and event statistics."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy.ndimage import correlate1d

from .codec import EventFrame
from .core import GrayImage

__all__ = [
    "mse",
    "ssim",
    "event_probability",
    "brightness_event_probability",
    "EventStats",
    "event_stats",
    "MetricsReport",
    "build_report",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _planes(a, b) -> tuple[np.ndarray, np.ndarray]:
    pa = a.data if isinstance(a, GrayImage) else np.asarray(a, dtype=np.float64)
    pb = b.data if isinstance(b, GrayImage) else np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise ValueError(f"dimension mismatch: {pa.shape} vs {pb.shape}")
    return pa, pb


def mse(a: GrayImage, b: GrayImage) -> float:
    pa, pb = _planes(a, b)
    return float(np.mean((pa - pb) ** 2))


def _gaussian_taps(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _window_mean(p: np.ndarray, taps: np.ndarray) -> np.ndarray:
    r = len(taps) // 2
    out = correlate1d(correlate1d(p, taps, axis=0), taps, axis=1)
    return out[r:-r, r:-r]


def ssim(a: GrayImage, b: GrayImage) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5) on data range 1.

    Only windows lying fully inside the image contribute; local variances use
    the population (biased) estimator.
    """
    pa, pb = _planes(a, b)
    if min(pa.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {pa.shape}")
    taps = _gaussian_taps()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_a = _window_mean(pa, taps)
    mu_b = _window_mean(pb, taps)
    var_a = _window_mean(pa * pa, taps) - mu_a * mu_a
    var_b = _window_mean(pb * pb, taps) - mu_b * mu_b
    cov = _window_mean(pa * pb, taps) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def event_probability(frame: EventFrame) -> float:
    """Non-zero events per pixel.

    Both channels count, so uncompressed frames range over [0, 2]; compressed
    frames count each duplicate pair once and range over [0, 1].
    """
    return frame.event_count() / float(frame.width * frame.height)


def brightness_event_probability(t, x, y, frame_times: Sequence[float], width: int, height: int) -> np.ndarray:
    """Fraction of pixels with at least one event in each inter-frame interval.

    Interval ``i`` is ``(frame_times[i], frame_times[i + 1]]``; the result has
    ``len(frame_times) - 1`` entries. Polarity is irrelevant here.
    """
    t = np.asarray(t)
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    ft = np.asarray(frame_times)
    if not (t.shape == x.shape == y.shape):
        raise ValueError("t, x and y must have equal length")
    if np.any(np.diff(ft) < 0):
        raise ValueError("frame times must be non-decreasing")
    if np.any((x < 0) | (x >= width) | (y < 0) | (y >= height)):
        raise ValueError("event coordinates outside the sensor")
    # interval index k means frame_times[k] < t <= frame_times[k + 1]
    k = np.searchsorted(ft, t, side="left") - 1
    keep = (k >= 0) & (k < len(ft) - 1)
    k, pix = k[keep], (y * width + x)[keep]
    pairs = np.unique(k * (width * height) + pix)
    counts = np.bincount(pairs // (width * height), minlength=max(len(ft) - 1, 0))
    return counts / float(width * height)


@dataclass
class EventStats:
    probabilities: list[float]
    bin_edges: list[float]
    histogram: list[int]
    compressed: bool

    @property
    def mean(self) -> float:
        return float(np.mean(self.probabilities)) if self.probabilities else 0.0

    def to_dict(self) -> dict:
        return {
            "frames": len(self.probabilities),
            "compressed": self.compressed,
            "mean_probability": self.mean,
            "probabilities": self.probabilities,
            "histogram": {"bin_edges": self.bin_edges, "counts": self.histogram},
        }


def event_stats(frames: Iterable[EventFrame], bins: int = 20) -> EventStats:
    frames = list(frames)
    probs = [event_probability(f) for f in frames]
    compressed = bool(frames and frames[0].compressed)
    top = 1.0 if compressed else 2.0
    counts, edges = np.histogram(probs, bins=bins, range=(0.0, top))
    return EventStats(probs, edges.tolist(), counts.tolist(), compressed)


@dataclass
class MetricsReport:
    mse: list[float] = field(default_factory=list)
    ssim: list[float] = field(default_factory=list)
    event_probability: list[float | None] = field(default_factory=list)

    @property
    def frame_count(self) -> int:
        return len(self.mse)

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse)) if self.mse else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.ssim)) if self.ssim else float("nan")

    @property
    def mean_event_probability(self) -> float | None:
        known = [p for p in self.event_probability if p is not None]
        return float(np.mean(known)) if known else None

    def add(self, reference: GrayImage, estimate: GrayImage, probability: float | None = None) -> None:
        self.mse.append(mse(reference, estimate))
        self.ssim.append(ssim(reference, estimate))
        self.event_probability.append(probability)

    def write(self, out: TextIO) -> None:
        """One JSON record per frame, then a summary record."""
        for i, (m, s, p) in enumerate(zip(self.mse, self.ssim, self.event_probability)):
            out.write(json.dumps({"frame": i, "mse": m, "ssim": s, "event_probability": p}) + "\n")
        summary = {"frames": self.frame_count, "mean_mse": self.mean_mse,
                   "mean_ssim": self.mean_ssim, "mean_event_probability": self.mean_event_probability}
        out.write(json.dumps({"summary": summary}) + "\n")

    @classmethod
    def read(cls, src: TextIO) -> "MetricsReport":
        rep = cls()
        for line in src:
            rec = json.loads(line)
            if "summary" in rec:
                continue
            rep.mse.append(rec["mse"])
            rep.ssim.append(rec["ssim"])
            rep.event_probability.append(rec["event_probability"])
        return rep


def build_report(references: Sequence[GrayImage], estimates: Sequence[GrayImage],
                 probabilities: Sequence[float] | None = None) -> MetricsReport:
    if len(references) != len(estimates):
        raise ValueError(f"{len(references)} reference frames but {len(estimates)} estimates")
    if probabilities is not None and len(probabilities) != len(references):
        raise ValueError("one event probability per frame is required")
    rep = MetricsReport()
    for i, (r, e) in enumerate(zip(references, estimates)):
        rep.add(r, e, None if probabilities is None else probabilities[i])
    return rep
