"""Image-domain math: gradients, position-dependent ternary quantization,
dequantization and resolution compression.

All planes are stored as ``(height, width)`` numpy arrays indexed ``[y, x]``.
Field objects copy their inputs and mark them read-only, so they can be shared
between threads without further care.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "GrayImage",
    "GradientField",
    "TernaryField",
    "ThresholdMatrix",
    "compute_gradients",
    "build_threshold_matrix",
    "ternarize",
    "dequantize",
    "quantize",
    "compress_resolution",
    "unique_slots",
]


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True, order="C")
    out.setflags(write=False)
    return out


def _check_pair_structure(name: str, px: np.ndarray, py: np.ndarray, compressed: bool) -> None:
    h, w = px.shape
    if compressed:
        if h % 2 or w % 2:
            raise ValueError(f"compressed {name} needs even width and height, got {w}x{h}")
        if not np.array_equal(px[:, 0::2], px[:, 1::2]):
            raise ValueError(f"compressed {name}: X channel columns 2m and 2m+1 differ")
        if not np.array_equal(py[0::2, :], py[1::2, :]):
            raise ValueError(f"compressed {name}: Y channel rows 2m and 2m+1 differ")
    else:
        if np.any(px[:, -1] != 0):
            raise ValueError(f"{name}: last column of the X channel must be zero")
        if np.any(py[-1, :] != 0):
            raise ValueError(f"{name}: last row of the Y channel must be zero")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale intensities in [0, 1], shape ``(height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data, np.float64)
        if data.ndim != 2:
            raise ValueError(f"GrayImage needs a 2-D plane, got shape {data.shape}")
        if data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(f"GrayImage must be at least 2x2, got {data.shape[1]}x{data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise ValueError("GrayImage contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("GrayImage values must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_uint8(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
        return cls(arr.astype(np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return np.rint(self.data * 255.0).astype(np.uint8)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GradientField:
    """Horizontal (``gx``) and vertical (``gy``) gradient planes.

    Uncompressed fields carry a zero last column in ``gx`` and a zero last row
    in ``gy``. Compressed fields hold pairwise duplicates instead: columns
    ``2m, 2m+1`` of ``gx`` and rows ``2m, 2m+1`` of ``gy`` are equal.
    """

    gx: np.ndarray
    gy: np.ndarray
    compressed: bool = False

    def __post_init__(self):
        gx = _frozen(self.gx, np.float64)
        gy = _frozen(self.gy, np.float64)
        if gx.ndim != 2 or gx.shape != gy.shape:
            raise ValueError(f"gx and gy must be 2-D planes of equal shape, got {gx.shape} and {gy.shape}")
        if gx.shape[0] < 2 or gx.shape[1] < 2:
            raise ValueError("GradientField must be at least 2x2")
        for plane in (gx, gy):
            if not np.all(np.isfinite(plane)):
                raise ValueError("GradientField contains non-finite values")
            if np.abs(plane).max() > 1.0:
                raise ValueError("gradient values must lie in [-1, 1]")
        _check_pair_structure("GradientField", gx, gy, bool(self.compressed))
        object.__setattr__(self, "gx", gx)
        object.__setattr__(self, "gy", gy)
        object.__setattr__(self, "compressed", bool(self.compressed))

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape

    def __eq__(self, other):
        if not isinstance(other, GradientField):
            return NotImplemented
        return (self.compressed == other.compressed
                and np.array_equal(self.gx, other.gx)
                and np.array_equal(self.gy, other.gy))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TernaryField:
    """Ternary planes ``tx``/``ty`` over {-1, 0, +1} (int8).

    Same boundary and duplicate-pair structure as :class:`GradientField`.
    """

    tx: np.ndarray
    ty: np.ndarray
    compressed: bool = False

    def __post_init__(self):
        tx = np.asarray(self.tx)
        ty = np.asarray(self.ty)
        if tx.ndim != 2 or tx.shape != ty.shape:
            raise ValueError(f"tx and ty must be 2-D planes of equal shape, got {tx.shape} and {ty.shape}")
        if tx.shape[0] < 2 or tx.shape[1] < 2:
            raise ValueError("TernaryField must be at least 2x2")
        for plane in (tx, ty):
            if not np.all((plane == -1) | (plane == 0) | (plane == 1)):
                raise ValueError("ternary values must be -1, 0 or +1")
        tx = _frozen(tx, np.int8)
        ty = _frozen(ty, np.int8)
        _check_pair_structure("TernaryField", tx, ty, bool(self.compressed))
        object.__setattr__(self, "tx", tx)
        object.__setattr__(self, "ty", ty)
        object.__setattr__(self, "compressed", bool(self.compressed))

    @classmethod
    def zeros(cls, width: int, height: int, compressed: bool = False) -> "TernaryField":
        z = np.zeros((height, width), dtype=np.int8)
        return cls(z, z, compressed)

    @property
    def height(self) -> int:
        return self.tx.shape[0]

    @property
    def width(self) -> int:
        return self.tx.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.tx.shape

    def __eq__(self, other):
        if not isinstance(other, TernaryField):
            return NotImplemented
        return (self.compressed == other.compressed
                and np.array_equal(self.tx, other.tx)
                and np.array_equal(self.ty, other.ty))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ThresholdMatrix:
    """Per-pixel quantization thresholds drawn from a small threshold set.

    Without an explicit ``plane`` the thresholds cycle along anti-diagonals:
    ``plane[y, x] = thresholds[(x + y) % n]``.
    """

    width: int
    height: int
    thresholds: tuple[float, ...]
    plane: np.ndarray = field(default=None)

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        if not thresholds:
            raise ValueError("threshold set must not be empty")
        if any(not np.isfinite(t) or t <= 0 for t in thresholds):
            raise ValueError(f"thresholds must be positive and finite, got {thresholds}")
        w, h = int(self.width), int(self.height)
        if w < 2 or h < 2:
            raise ValueError(f"threshold matrix must be at least 2x2, got {w}x{h}")
        if self.plane is None:
            y, x = np.indices((h, w))
            plane = np.asarray(thresholds, dtype=np.float64)[(x + y) % len(thresholds)]
        else:
            plane = np.asarray(self.plane, dtype=np.float64)
            if plane.shape != (h, w):
                raise ValueError(f"plane shape {plane.shape} does not match {w}x{h}")
            if not np.all(np.isin(plane, thresholds)):
                raise ValueError("every plane value must come from the threshold set")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "plane", _frozen(plane, np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def channel_planes(self, compressed: bool) -> tuple[np.ndarray, np.ndarray]:
        """Threshold planes applied to the X and Y channels.

        For compressed fields each duplicate pair uses the threshold of its
        even member, copied to the odd member.
        """
        if not compressed:
            return self.plane, self.plane
        px = np.repeat(self.plane[:, 0::2], 2, axis=1)
        py = np.repeat(self.plane[0::2, :], 2, axis=0)
        return px, py


def compute_gradients(img: GrayImage) -> GradientField:
    """Forward differences with zeroed last column (X) and last row (Y)."""
    i = img.data
    gx = np.zeros_like(i)
    gy = np.zeros_like(i)
    gx[:, :-1] = i[:, 1:] - i[:, :-1]
    gy[:-1, :] = i[1:, :] - i[:-1, :]
    return GradientField(gx, gy, compressed=False)


def build_threshold_matrix(width: int, height: int, thresholds: Sequence[float]) -> ThresholdMatrix:
    return ThresholdMatrix(width, height, tuple(thresholds))


def _check_dims(a, b) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[1]}x{a.shape[0]} vs {b.shape[1]}x{b.shape[0]}")


def _ternary(g: np.ndarray, theta: np.ndarray) -> np.ndarray:
    # |g| == theta fires an event
    return np.where(np.abs(g) < theta, 0, np.sign(g)).astype(np.int8)


def ternarize(grad: GradientField, theta: ThresholdMatrix) -> TernaryField:
    """Threshold each gradient against its pixel's threshold.

    Compressed fields are quantized once per duplicate pair, at the even
    member, and the result is copied to the odd member.
    """
    _check_dims(grad, theta)
    if grad.compressed:
        tx = _ternary(grad.gx[:, 0::2], theta.plane[:, 0::2]).repeat(2, axis=1)
        ty = _ternary(grad.gy[0::2, :], theta.plane[0::2, :]).repeat(2, axis=0)
    else:
        tx = _ternary(grad.gx, theta.plane)
        ty = _ternary(grad.gy, theta.plane)
    return TernaryField(tx, ty, grad.compressed)


def dequantize(tern: TernaryField, theta: ThresholdMatrix) -> GradientField:
    """Element-wise product of ternary gradients and thresholds."""
    _check_dims(tern, theta)
    px, py = theta.channel_planes(tern.compressed)
    return GradientField(tern.tx * px, tern.ty * py, tern.compressed)


def quantize(grad: GradientField, theta: ThresholdMatrix) -> GradientField:
    return dequantize(ternarize(grad, theta), theta)


def compress_resolution(grad: GradientField) -> GradientField:
    """Average X gradients over column pairs and Y gradients over row pairs."""
    if grad.compressed:
        raise ValueError("gradient field is already resolution compressed")
    h, w = grad.shape
    if h % 2 or w % 2:
        raise ValueError(f"resolution compression needs even width and height, got {w}x{h}")
    mx = (grad.gx[:, 0::2] + grad.gx[:, 1::2]) / 2.0
    my = (grad.gy[0::2, :] + grad.gy[1::2, :]) / 2.0
    return GradientField(mx.repeat(2, axis=1), my.repeat(2, axis=0), compressed=True)


def unique_slots(px: np.ndarray, py: np.ndarray, compressed: bool) -> tuple[np.ndarray, np.ndarray]:
    """Views holding one entry per independent sample of a two-channel field."""
    if compressed:
        return px[:, 0::2], py[0::2, :]
    return px, py
