"""Software emulation of a gradient event camera.

Grayscale frames become ternary gradient events (optionally resolution
compressed); frames are recovered by solving Poisson's equation with red-black
successive over-relaxation.
"""
from .core import (GradientField, GrayImage, TernaryField, ThresholdMatrix, build_threshold_matrix,
                   compress_resolution, compute_gradients, dequantize, quantize, ternarize)
from .codec import (GRADIENT_EVENT_RULE, CodecState, EventFrame, StreamHeader, decode_frame,
                    encode_frame, enumerate_lossless_rules, read_stream, write_stream)
from .reconstruct import (LaplacianField, ReconstructionParams, approximate_laplacian,
                          reconstruct_frame, reconstruct_stream, sor_solve)
from .metrics import EventStats, MetricsReport, event_probability, event_stats, mse, ssim

__version__ = "0.1.0"
