"""Grayscale reconstruction from quantized gradients.

The approximate Laplacian is the sum of backward differences of the
(dequantized) gradients. Poisson's equation is then solved with red-black
successive over-relaxation: every iteration first updates all cells with
``(x + y)`` even, then all cells with ``(x + y)`` odd. Cells of one colour
share no neighbours, so a half-sweep can be split over any number of workers
without changing the result.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .codec import CodecState, EventFrame, StreamHeader, decode_frame
from .core import GradientField, GrayImage, TernaryField, ThresholdMatrix, dequantize

__all__ = [
    "LaplacianField",
    "ReconstructionParams",
    "approximate_laplacian",
    "sor_solve",
    "solve_frame",
    "reconstruct_frame",
    "reconstruct_stream",
]


@dataclass(frozen=True, eq=False)
class LaplacianField:
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="C")
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(f"LaplacianField needs a 2-D plane of at least 2x2, got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def scaled(self, c: float) -> "LaplacianField":
        return LaplacianField(self.data * c)


@dataclass(frozen=True)
class ReconstructionParams:
    """SOR and post-processing settings.

    alpha : over-relaxation factor in [1, 2]; the cell step is ``alpha / 4``.
    iterations : number of full red-black iterations.
    scale : multiplier applied to the approximate Laplacian before solving.
    mean_bias : mean intensity given to the output.
    """

    alpha: float = 1.97
    iterations: int = 100
    scale: float = 3.6
    mean_bias: float = 0.5

    def __post_init__(self):
        if not 1.0 <= self.alpha <= 2.0:
            raise ValueError(f"alpha must be in [1, 2], got {self.alpha}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError(f"iterations must be a positive integer, got {self.iterations}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0.0 <= self.mean_bias <= 1.0:
            raise ValueError(f"mean_bias must be in [0, 1], got {self.mean_bias}")
        object.__setattr__(self, "iterations", int(self.iterations))

    @property
    def beta(self) -> float:
        return self.alpha / 4.0


def approximate_laplacian(grad: GradientField) -> LaplacianField:
    """Backward differences of the gradients, one-sided at x=0 and y=0."""
    ax = grad.gx.copy()
    ax[:, 1:] -= grad.gx[:, :-1]
    ay = grad.gy.copy()
    ay[1:, :] -= grad.gy[:-1, :]
    return LaplacianField(ax + ay)


def _bands(height: int, workers: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, height, min(workers, height) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def sor_solve(lap: LaplacianField, params: ReconstructionParams, initial=None,
              *, workers: int = 1, backend: str | None = None) -> np.ndarray:
    """Run ``params.iterations`` red-black SOR iterations on ``lap``.

    Each cell update is ``R += beta * (sum of 4 neighbours - 4 R - L)`` with
    ``beta = alpha / 4``; missing neighbours contribute the centre value.

    Parameters
    ----------
    lap : LaplacianField
        Right-hand side of the Poisson equation.
    params : ReconstructionParams
        Only ``alpha`` and ``iterations`` are used here.
    initial : GrayImage or ndarray, optional
        Starting estimate; zeros when omitted.
    workers : int
        Threads sharing each half-sweep. The result does not depend on it.
    backend : {"numba", "numpy"}, optional
        Kernel implementation; defaults to the process-wide choice.

    Returns
    -------
    ndarray
        Unclamped solution, shape ``(height, width)``.
    """
    L = lap.data
    if not np.all(np.isfinite(L)):
        raise ValueError("Laplacian contains non-finite entries")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if initial is None:
        R = np.zeros(L.shape, dtype=np.float64)
    else:
        init = initial.data if isinstance(initial, GrayImage) else initial
        R = np.array(init, dtype=np.float64, order="C")
        if R.shape != L.shape:
            raise ValueError(f"initial estimate shape {R.shape} does not match Laplacian {L.shape}")
        if not np.all(np.isfinite(R)):
            raise ValueError("initial estimate contains non-finite values")
    kern = _kernels.get_backend(backend)
    beta = params.beta
    bands = _bands(R.shape[0], workers)
    if len(bands) == 1:
        kern.sweeps(R, L, beta, params.iterations)
        return R
    with ThreadPoolExecutor(max_workers=len(bands)) as pool:
        for _ in range(params.iterations):
            for parity in (0, 1):
                # consume the iterator so each half-sweep finishes before the next
                list(pool.map(lambda b: kern.half_sweep(R, L, beta, parity, b[0], b[1]), bands))
    return R


def solve_frame(tern: TernaryField, theta: ThresholdMatrix, params: ReconstructionParams,
                initial=None, *, workers: int = 1, backend: str | None = None) -> np.ndarray:
    """Dequantize, scale, solve and re-centre on ``params.mean_bias`` (no clamping)."""
    lap = approximate_laplacian(dequantize(tern, theta)).scaled(params.scale)
    R = sor_solve(lap, params, initial, workers=workers, backend=backend)
    R -= R.mean()
    R += params.mean_bias
    return R


def reconstruct_frame(tern: TernaryField, theta: ThresholdMatrix, params: ReconstructionParams,
                      initial=None, *, workers: int = 1, backend: str | None = None) -> GrayImage:
    R = solve_frame(tern, theta, params, initial, workers=workers, backend=backend)
    return GrayImage(np.clip(R, 0.0, 1.0))


def reconstruct_stream(header: StreamHeader, frames: Iterable[EventFrame], theta: ThresholdMatrix,
                       params: ReconstructionParams, *, warm_start: bool = False,
                       mean_bias: Sequence[float] | None = None, workers: int = 1,
                       backend: str | None = None) -> Iterator[GrayImage]:
    """Reconstruct one image per event frame from the decoder's current state.

    ``mean_bias`` optionally gives a per-frame bias overriding
    ``params.mean_bias``. With ``warm_start`` each solve starts from the
    previous frame's zero-mean, unclamped solution.
    """
    if not header.matches(theta):
        raise ValueError(
            f"stream thresholds {header.thresholds} / geometry {header.width}x{header.height} "
            f"do not match the threshold matrix {theta.thresholds} / {theta.width}x{theta.height}")
    state = CodecState.zeros(header.width, header.height, header.compressed)
    previous = None
    for i, ev in enumerate(frames):
        tern = decode_frame(state, ev)
        p = params
        if mean_bias is not None:
            if i >= len(mean_bias):
                raise ValueError(f"no mean bias given for frame {i}")
            p = dataclasses.replace(params, mean_bias=float(mean_bias[i]))
        R = solve_frame(tern, theta, p, previous if warm_start else None,
                        workers=workers, backend=backend)
        if warm_start:
            previous = R - p.mean_bias
        yield GrayImage(np.clip(R, 0.0, 1.0))
