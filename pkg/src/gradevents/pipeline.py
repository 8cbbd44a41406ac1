"""Frame ingestion and the encode / decode / reconstruct / eval / stats flows."""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .codec import (EventFrame, StreamHeader, CodecState, decode_sequence, encode_frame,
                    read_stream, write_stream)
from .core import (GrayImage, ThresholdMatrix, build_threshold_matrix, compress_resolution,
                   compute_gradients, ternarize)
from .metrics import MetricsReport, build_report, event_probability, event_stats
from .reconstruct import ReconstructionParams, reconstruct_stream

FRAME_PERIOD_US = 33333
IMAGE_SUFFIXES = {".png", ".pgm", ".bmp", ".tif", ".tiff"}
DEFAULT_THRESHOLDS = (4.0, 8.0, 16.0)


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the subcommands.

    ``thresholds`` are 8-bit numerators: ``(4, 8, 16)`` means
    ``{4/255, 8/255, 16/255}``. ``mean_bias`` of None takes the per-frame mean
    of the ground-truth frames in ``ground_truth``.
    """

    input: Path | None = None
    output: Path | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    compressed: bool = False
    alpha: float = 1.97
    iterations: int = 100
    scale: float = 3.6
    mean_bias: float | None = None
    warm_start: bool = False
    timestamps: Path | None = None
    ground_truth: Path | None = None
    events: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.thresholds:
            raise ValueError("at least one threshold is required")
        if any(not np.isfinite(t) or t <= 0 for t in self.thresholds):
            raise ValueError(f"thresholds must be positive, got {self.thresholds}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        # range checks for alpha/iterations/scale/bias
        self.params(0.5 if self.mean_bias is None else self.mean_bias)

    @property
    def threshold_values(self) -> tuple[float, ...]:
        return tuple(t / 255.0 for t in self.thresholds)

    def params(self, mean_bias: float | None = None) -> ReconstructionParams:
        bias = self.mean_bias if mean_bias is None else mean_bias
        return ReconstructionParams(self.alpha, self.iterations, self.scale,
                                    0.5 if bias is None else bias)

    def theta(self, width: int, height: int) -> ThresholdMatrix:
        return build_threshold_matrix(width, height, self.threshold_values)


def read_timestamps(path: Path) -> list[int]:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                v = int(line)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not an integer microsecond timestamp: {line!r}") from None
            if v < 0:
                raise ValueError(f"{path}:{lineno}: negative timestamp {v}")
            values.append(v)
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError(f"{path}: timestamps must be non-decreasing")
    return values


def frame_files(directory: Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"frame directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_frame(path: Path) -> GrayImage:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except OSError as exc:
        raise OSError(f"cannot read frame {path}: {exc}") from exc
    if mode != "L":
        raise ValueError(f"{path}: expected an 8-bit grayscale image (mode L), got mode {mode}")
    return GrayImage.from_uint8(arr)


def save_frame(img: GrayImage, path: Path) -> None:
    Image.fromarray(img.to_uint8(), mode="L").save(path)


def ingest_frames(directory: Path, timestamps: Path | None = None) -> list[tuple[int, GrayImage]]:
    """Load a directory of 8-bit grayscale frames in filename order.

    Timestamps come from the sidecar file when given, else frame index times
    33333 us.
    """
    files = frame_files(directory)
    if not files:
        raise ValueError(f"no frames ({', '.join(sorted(IMAGE_SUFFIXES))}) in {directory}")
    frames = []
    for f in files:
        img = load_frame(f)
        if frames and img.shape != frames[0].shape:
            raise ValueError(f"{f}: frame is {img.width}x{img.height}, "
                             f"expected {frames[0].width}x{frames[0].height}")
        frames.append(img)
    if timestamps is None:
        ts = [i * FRAME_PERIOD_US for i in range(len(frames))]
    else:
        ts = read_timestamps(timestamps)
        if len(ts) != len(frames):
            raise ValueError(f"{timestamps}: {len(ts)} timestamps for {len(frames)} frames")
    return list(zip(ts, frames))


def encode_frames(frames: Sequence[tuple[int, GrayImage]], theta: ThresholdMatrix,
                  compressed: bool = False) -> tuple[StreamHeader, list[EventFrame]]:
    """Gradient events for a frame sequence, starting from an all-zero state."""
    header = StreamHeader.for_matrix(theta, compressed)
    state = CodecState.zeros(theta.width, theta.height, compressed)
    events = []
    for ts, img in frames:
        g = compute_gradients(img)
        if compressed:
            g = compress_resolution(g)
        events.append(encode_frame(state, ternarize(g, theta), ts))
    return header, events


def load_stream(path: Path) -> tuple[StreamHeader, list[EventFrame]]:
    with open(path, "rb") as fh:
        return read_stream(fh)


def _require(value, flag: str):
    if value is None:
        raise ValueError(f"{flag} is required for this command")
    return Path(value)


def cmd_encode(cfg: RunConfig) -> None:
    frames = ingest_frames(_require(cfg.input, "--input"), cfg.timestamps)
    out = _require(cfg.output, "--output")
    h, w = frames[0][1].shape
    header, events = encode_frames(frames, cfg.theta(w, h), cfg.compressed)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as fh:
        write_stream(header, events, fh)


def cmd_decode(cfg: RunConfig) -> None:
    """Write ``frame_NNNNNN.npy`` int8 arrays of shape (2, H, W) holding T_X, T_Y."""
    header, events = load_stream(_require(cfg.input, "--input"))
    out = _require(cfg.output, "--output")
    out.mkdir(parents=True, exist_ok=True)
    for i, tern in enumerate(decode_sequence(events)):
        np.save(out / f"frame_{i:06d}.npy", np.stack([tern.tx, tern.ty]))
    (out / "timestamps.txt").write_text("".join(f"{ev.timestamp}\n" for ev in events))


def ground_truth_means(cfg: RunConfig, count: int) -> list[float] | None:
    if cfg.mean_bias is not None:
        return None
    if cfg.ground_truth is None:
        raise ValueError("--mean-bias gt needs ground-truth frames (--gt DIR); "
                         "pass a number to --mean-bias otherwise")
    gt = ingest_frames(Path(cfg.ground_truth))
    if len(gt) != count:
        raise ValueError(f"{len(gt)} ground-truth frames for a stream of {count} frames")
    return [float(img.data.mean()) for _, img in gt]


def reconstruct_file(cfg: RunConfig) -> tuple[StreamHeader, list[EventFrame], list[GrayImage]]:
    header, events = load_stream(_require(cfg.input, "--input"))
    theta = cfg.theta(header.width, header.height)
    if not header.matches(theta):
        raise ValueError(f"stream thresholds {[round(t * 255, 3) for t in header.thresholds]} (x/255) "
                         f"differ from --thresholds {list(cfg.thresholds)}")
    biases = ground_truth_means(cfg, len(events))
    images = list(reconstruct_stream(header, events, theta, cfg.params(), warm_start=cfg.warm_start,
                                     mean_bias=biases, workers=cfg.workers))
    return header, events, images


def cmd_reconstruct(cfg: RunConfig) -> None:
    out = _require(cfg.output, "--output")
    _, events, images = reconstruct_file(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(images):
        save_frame(img, out / f"frame_{i:06d}.png")
    (out / "timestamps.txt").write_text("".join(f"{ev.timestamp}\n" for ev in events))


def cmd_eval(cfg: RunConfig) -> MetricsReport:
    estimates = [img for _, img in ingest_frames(_require(cfg.input, "--input"))]
    references = [img for _, img in ingest_frames(_require(cfg.ground_truth, "--gt"))]
    probs = None
    if cfg.events is not None:
        _, events = load_stream(Path(cfg.events))
        probs = [event_probability(ev) for ev in events]
    report = build_report(references, estimates, probs)
    if cfg.output is None:
        report.write(sys.stdout)
    else:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        with open(cfg.output, "w") as fh:
            report.write(fh)
    return report


def cmd_stats(cfg: RunConfig) -> None:
    _, events = load_stream(_require(cfg.input, "--input"))
    text = json.dumps(event_stats(events).to_dict(), indent=2) + "\n"
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        cfg.output.write_text(text)
