"""Gradient events: lossless temporal delta coding of ternary gradients.

An event is a function of the previous and current ternary gradient at a
pixel. ``GRADIENT_EVENT_RULE[prev + 1, cur + 1]`` gives the event value:

    prev \\ cur   -1   0  +1
        -1        0  -1  +1
         0       -1   0  +1
        +1       -1  +1   0

Every row is a permutation of {-1, 0, +1} with a zero on the diagonal, so the
current value is recoverable from the previous value and the event.

GEV1 stream layout (little-endian)::

    header  magic b"GEV1" | version u16 | width u16 | height u16
            | flags u8 (bit0: compressed) | n u8 | n x threshold f32
    frame   timestamp u64 (us) | record count u32 | records
    record  x u16 | y u16 | channel u8 (0 = X, 1 = Y) | polarity i8 (+-1)

Compressed streams carry only the even member of each duplicate pair
(even ``x`` for X records, even ``y`` for Y records).
"""
from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from .core import TernaryField, ThresholdMatrix, unique_slots

__all__ = [
    "GRADIENT_EVENT_RULE",
    "MAGIC",
    "VERSION",
    "EventFrame",
    "CodecState",
    "StreamHeader",
    "StreamFormatError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedStreamError",
    "RecordOutOfBoundsError",
    "InvalidRecordError",
    "apply_rule",
    "invert_rule",
    "is_lossless_rule",
    "enumerate_lossless_rules",
    "encode_frame",
    "decode_frame",
    "encode_sequence",
    "decode_sequence",
    "write_stream",
    "read_stream",
]

GRADIENT_EVENT_RULE = np.array([[0, -1, 1],
                                [-1, 0, 1],
                                [-1, 1, 0]], dtype=np.int8)
GRADIENT_EVENT_RULE.setflags(write=False)

MAGIC = b"GEV1"
VERSION = 1

_HEADER = struct.Struct("<4sHHHBB")
_FRAME = struct.Struct("<QI")
RECORD_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("channel", "u1"), ("polarity", "i1")])
_MAX_DIM = 0xFFFF


class StreamFormatError(ValueError):
    """Base class for malformed GEV1 input."""


class BadMagicError(StreamFormatError):
    pass


class VersionMismatchError(StreamFormatError):
    pass


class TruncatedStreamError(StreamFormatError):
    pass


class RecordOutOfBoundsError(StreamFormatError):
    pass


class InvalidRecordError(StreamFormatError):
    pass


def apply_rule(rule: np.ndarray, prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    return np.asarray(rule, dtype=np.int8)[np.asarray(prev) + 1, np.asarray(cur) + 1]


def invert_rule(rule: np.ndarray) -> np.ndarray:
    """Table ``inv[prev + 1, event + 1] = cur`` for a lossless rule."""
    rule = np.asarray(rule)
    if not is_lossless_rule(rule):
        raise ValueError("rule is not lossless")
    inv = np.empty((3, 3), dtype=np.int8)
    for p in range(3):
        for c in range(3):
            inv[p, rule[p, c] + 1] = c - 1
    return inv


def is_lossless_rule(rule) -> bool:
    rule = np.asarray(rule)
    if rule.shape != (3, 3):
        return False
    if any(rule[i, i] != 0 for i in range(3)):
        return False
    return all(sorted(row.tolist()) == [-1, 0, 1] for row in rule)


def enumerate_lossless_rules() -> list[np.ndarray]:
    """All 3x3 event rules that are lossless and zero on the diagonal.

    Found by exhaustive search over the 3**9 candidate tables.
    """
    rules = []
    for values in itertools.product((-1, 0, 1), repeat=9):
        rule = np.array(values, dtype=np.int8).reshape(3, 3)
        if is_lossless_rule(rule):
            rules.append(rule)
    return rules


_DECODE = invert_rule(GRADIENT_EVENT_RULE)


@dataclass(frozen=True, eq=False)
class EventFrame:
    """Gradient events of one frame; same plane conventions as TernaryField."""

    timestamp: int
    ex: np.ndarray
    ey: np.ndarray
    compressed: bool = False

    def __post_init__(self):
        ex = np.asarray(self.ex)
        ey = np.asarray(self.ey)
        if ex.ndim != 2 or ex.shape != ey.shape:
            raise ValueError(f"ex and ey must be 2-D planes of equal shape, got {ex.shape} and {ey.shape}")
        for plane in (ex, ey):
            if not np.all((plane == -1) | (plane == 0) | (plane == 1)):
                raise ValueError("event values must be -1, 0 or +1")
        ex = np.array(ex, dtype=np.int8)
        ey = np.array(ey, dtype=np.int8)
        compressed = bool(self.compressed)
        if compressed:
            h, w = ex.shape
            if h % 2 or w % 2:
                raise ValueError("compressed event frames need even width and height")
            if not (np.array_equal(ex[:, 0::2], ex[:, 1::2]) and np.array_equal(ey[0::2], ey[1::2])):
                raise ValueError("compressed event frame: duplicate-pair members differ")
        ts = int(self.timestamp)
        if ts < 0 or ts >= 2**64:
            raise ValueError(f"timestamp out of range: {self.timestamp}")
        ex.setflags(write=False)
        ey.setflags(write=False)
        object.__setattr__(self, "timestamp", ts)
        object.__setattr__(self, "ex", ex)
        object.__setattr__(self, "ey", ey)
        object.__setattr__(self, "compressed", compressed)

    @property
    def height(self) -> int:
        return self.ex.shape[0]

    @property
    def width(self) -> int:
        return self.ex.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.ex.shape

    def event_count(self) -> int:
        """Non-zero events, counting each duplicate pair once."""
        ux, uy = unique_slots(self.ex, self.ey, self.compressed)
        return int(np.count_nonzero(ux) + np.count_nonzero(uy))

    def __eq__(self, other):
        if not isinstance(other, EventFrame):
            return NotImplemented
        return (self.timestamp == other.timestamp and self.compressed == other.compressed
                and np.array_equal(self.ex, other.ex) and np.array_equal(self.ey, other.ey))

    __hash__ = None


class CodecState:
    """Previous ternary gradients, shared in lock-step by encoder and decoder."""

    def __init__(self, prev: TernaryField):
        self.prev = prev

    @classmethod
    def zeros(cls, width: int, height: int, compressed: bool = False) -> "CodecState":
        return cls(TernaryField.zeros(width, height, compressed))

    def __repr__(self):
        return f"CodecState({self.prev.width}x{self.prev.height}, compressed={self.prev.compressed})"


def _check_state(state: CodecState, shape, compressed: bool) -> None:
    if state.prev.shape != shape:
        raise ValueError(f"codec state is {state.prev.width}x{state.prev.height}, "
                         f"frame is {shape[1]}x{shape[0]}")
    if state.prev.compressed != compressed:
        raise ValueError("codec state and frame disagree on resolution compression")


def encode_frame(state: CodecState, tern: TernaryField, timestamp: int) -> EventFrame:
    _check_state(state, tern.shape, tern.compressed)
    prev = state.prev
    ev = EventFrame(timestamp,
                    apply_rule(GRADIENT_EVENT_RULE, prev.tx, tern.tx),
                    apply_rule(GRADIENT_EVENT_RULE, prev.ty, tern.ty),
                    tern.compressed)
    state.prev = tern
    return ev


def decode_frame(state: CodecState, ev: EventFrame) -> TernaryField:
    _check_state(state, ev.shape, ev.compressed)
    prev = state.prev
    tern = TernaryField(_DECODE[prev.tx + 1, ev.ex + 1],
                        _DECODE[prev.ty + 1, ev.ey + 1],
                        ev.compressed)
    state.prev = tern
    return tern


def encode_sequence(terns: Iterable[TernaryField], timestamps: Iterable[int]) -> list[EventFrame]:
    """Encode from an all-zero state."""
    terns = list(terns)
    timestamps = list(timestamps)
    if len(terns) != len(timestamps):
        raise ValueError(f"{len(terns)} frames but {len(timestamps)} timestamps")
    if not terns:
        return []
    state = CodecState.zeros(terns[0].width, terns[0].height, terns[0].compressed)
    return [encode_frame(state, t, ts) for t, ts in zip(terns, timestamps)]


def decode_sequence(frames: Iterable[EventFrame]) -> list[TernaryField]:
    frames = list(frames)
    if not frames:
        return []
    state = CodecState.zeros(frames[0].width, frames[0].height, frames[0].compressed)
    return [decode_frame(state, ev) for ev in frames]


def _f32(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values, dtype=np.float32))


@dataclass(frozen=True)
class StreamHeader:
    """GEV1 header. Thresholds are held at float32 precision, as stored."""

    width: int
    height: int
    compressed: bool
    thresholds: tuple[float, ...]
    version: int = VERSION

    def __post_init__(self):
        w, h = int(self.width), int(self.height)
        if not (2 <= w <= _MAX_DIM and 2 <= h <= _MAX_DIM):
            raise ValueError(f"stream geometry {w}x{h} outside 2..{_MAX_DIM}")
        if self.compressed and (w % 2 or h % 2):
            raise ValueError("compressed streams need even width and height")
        th = _f32(self.thresholds)
        if not 1 <= len(th) <= 255:
            raise ValueError(f"need 1..255 thresholds, got {len(th)}")
        if any(not np.isfinite(t) or t <= 0 for t in th):
            raise ValueError(f"thresholds must be positive, got {th}")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "compressed", bool(self.compressed))
        object.__setattr__(self, "thresholds", th)

    @classmethod
    def for_matrix(cls, theta: ThresholdMatrix, compressed: bool) -> "StreamHeader":
        return cls(theta.width, theta.height, compressed, theta.thresholds)

    def matches(self, theta: ThresholdMatrix) -> bool:
        return (self.width == theta.width and self.height == theta.height
                and self.thresholds == _f32(theta.thresholds))

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, self.version, self.width, self.height,
                            1 if self.compressed else 0, len(self.thresholds))
        return head + np.asarray(self.thresholds, dtype="<f4").tobytes()


def _frame_records(ev: EventFrame) -> np.ndarray:
    ux, uy = unique_slots(ev.ex, ev.ey, ev.compressed)
    step = 2 if ev.compressed else 1
    parts = []
    for channel, plane, (sx, sy) in ((0, ux, (step, 1)), (1, uy, (1, step))):
        ys, xs = np.nonzero(plane)
        rec = np.empty(len(ys), dtype=RECORD_DTYPE)
        rec["x"] = xs * sx
        rec["y"] = ys * sy
        rec["channel"] = channel
        rec["polarity"] = plane[ys, xs]
        parts.append(rec)
    return np.concatenate(parts)


def write_stream(header: StreamHeader, frames: Iterable[EventFrame], sink: BinaryIO) -> int:
    """Serialize ``frames`` to ``sink``; returns the number of bytes written."""
    n = sink.write(header.to_bytes())
    for i, ev in enumerate(frames):
        if ev.shape != (header.height, header.width) or ev.compressed != header.compressed:
            raise ValueError(f"frame {i} ({ev.width}x{ev.height}, compressed={ev.compressed}) "
                             f"does not fit header ({header.width}x{header.height}, "
                             f"compressed={header.compressed})")
        rec = _frame_records(ev)
        n += sink.write(_FRAME.pack(ev.timestamp, len(rec)))
        n += sink.write(rec.tobytes())
    return n


def _read_exact(source: BinaryIO, size: int, what: str) -> bytes:
    buf = source.read(size)
    if len(buf) != size:
        raise TruncatedStreamError(f"stream ends inside {what}: wanted {size} bytes, got {len(buf)}")
    return buf


def _read_header(source: BinaryIO) -> StreamHeader:
    magic = source.read(4)
    if len(magic) < 4:
        if MAGIC.startswith(magic):
            raise TruncatedStreamError(f"stream ends inside the magic tag ({len(magic)} bytes)")
        raise BadMagicError(f"not a GEV1 stream (starts with {magic!r})")
    if magic != MAGIC:
        raise BadMagicError(f"not a GEV1 stream (magic {magic!r}, expected {MAGIC!r})")
    rest = _read_exact(source, _HEADER.size - 4, "the header")
    _, version, width, height, flags, n = _HEADER.unpack(magic + rest)
    if version != VERSION:
        raise VersionMismatchError(f"GEV1 version {version} is not supported (expected {VERSION})")
    if flags & ~1:
        raise StreamFormatError(f"unknown header flags {flags:#04x}")
    if n == 0:
        raise StreamFormatError("header declares zero thresholds")
    th = np.frombuffer(_read_exact(source, 4 * n, "the threshold list"), dtype="<f4")
    try:
        return StreamHeader(width, height, bool(flags & 1), tuple(th), version)
    except ValueError as exc:
        raise StreamFormatError(f"invalid header: {exc}") from None


def _frame_from_records(header: StreamHeader, index: int, ts: int, rec: np.ndarray) -> EventFrame:
    w, h = header.width, header.height
    bad = (rec["x"] >= w) | (rec["y"] >= h)
    if bad.any():
        r = rec[np.argmax(bad)]
        raise RecordOutOfBoundsError(
            f"frame {index}: record at ({r['x']}, {r['y']}) outside {w}x{h}")
    if np.any(rec["channel"] > 1):
        raise InvalidRecordError(f"frame {index}: channel must be 0 or 1")
    if np.any(np.abs(rec["polarity"].astype(np.int16)) != 1):
        raise InvalidRecordError(f"frame {index}: polarity must be -1 or +1")
    is_x = rec["channel"] == 0
    if header.compressed:
        odd = np.where(is_x, rec["x"] & 1, rec["y"] & 1).astype(bool)
        if odd.any():
            raise InvalidRecordError(f"frame {index}: compressed stream holds a record at an odd pair slot")
    key = (rec["channel"].astype(np.int64) * h + rec["y"]) * w + rec["x"]
    if len(np.unique(key)) != len(key):
        raise InvalidRecordError(f"frame {index}: repeated record position")
    ex = np.zeros((h, w), dtype=np.int8)
    ey = np.zeros((h, w), dtype=np.int8)
    rx, ry = rec[is_x], rec[~is_x]
    ex[rx["y"], rx["x"]] = rx["polarity"]
    ey[ry["y"], ry["x"]] = ry["polarity"]
    if header.compressed:
        ex[:, 1::2] = ex[:, 0::2]
        ey[1::2, :] = ey[0::2, :]
    return EventFrame(ts, ex, ey, header.compressed)


def read_stream(source: BinaryIO) -> tuple[StreamHeader, list[EventFrame]]:
    header = _read_header(source)
    frames = []
    while True:
        head = source.read(_FRAME.size)
        if not head:
            break
        if len(head) < _FRAME.size:
            raise TruncatedStreamError(f"stream ends inside the header of frame {len(frames)}")
        ts, count = _FRAME.unpack(head)
        body = _read_exact(source, count * RECORD_DTYPE.itemsize, f"the records of frame {len(frames)}")
        rec = np.frombuffer(body, dtype=RECORD_DTYPE)
        frames.append(_frame_from_records(header, len(frames), ts, rec))
    return header, frames
