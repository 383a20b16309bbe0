"""Average-preserving positivity reconstruction.

In a cell with mean w_bar > delta whose minimum drops below delta, the
polynomial is squeezed toward its mean,

    w~ = w_bar + (w_bar - delta) / (w_bar - min w) * (w - w_bar),

which keeps the mean and lifts the minimum to delta.  The factor is shrunk by
a relative 1e-12 so rounding cannot leave the minimum below the floor, and
cells with subnormal means are flattened to their mean.  Accuracy is not
degraded as long as delta < h^(k+1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._kernels._pykernels import FALLBACK_ERROR, FALLBACK_FLATTEN
from .projector import DGField

FALLBACKS = {"error": FALLBACK_ERROR, "flatten": FALLBACK_FLATTEN}


class LimiterFailure(ArithmeticError):
    """A cell mean is at or below the floor, so no squeeze can restore it."""

    def __init__(self, cell: int, average: float, delta: float):
        self.cell = int(cell)
        self.average = float(average)
        self.delta = float(delta)
        super().__init__(
            f"cell {self.cell}: mean {self.average:.7g} <= floor {self.delta:.7g}, cannot reconstruct"
        )


@dataclass(frozen=True)
class LimiterConfig:
    delta: float = 0.0
    enabled: bool = True
    skip_zero_cells: bool = False
    fallback: str = "error"
    per_stage: bool = True

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"limiter floor must be non-negative, got {self.delta}")
        if self.fallback not in FALLBACKS:
            raise ValueError(f"fallback must be one of {sorted(FALLBACKS)}, got {self.fallback!r}")


def cell_min(poly, degree: Optional[int] = None) -> float:
    """Exact minimum over [-1, 1] of one cell polynomial given by modal coefficients."""
    c = np.asarray(poly, dtype=float).reshape(1, -1)
    if degree is not None and c.shape[1] != degree + 1:
        raise ValueError(f"expected {degree + 1} coefficients, got {c.shape[1]}")
    return float(_kernels.py.cell_min(c)[0])


def cell_minima(coeffs: np.ndarray, backend: Optional[str] = None) -> np.ndarray:
    """Exact minimum of every cell polynomial."""
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    if _use_compiled(coeffs, backend):
        out = np.empty(coeffs.shape[0])
        _kernels.compiled.cell_min(coeffs, out)
        return out
    return _kernels.py.cell_min(coeffs)


def _use_compiled(coeffs, backend):
    backend = backend or _kernels.BACKEND
    return backend == "cython" and _kernels.HAVE_COMPILED and coeffs.shape[1] <= 4


def limit_coefficients(coeffs: np.ndarray, config: LimiterConfig, backend: Optional[str] = None):
    """Array-level limiter.  Returns (new_coeffs, n_squeezed, failed_cells).

    Raises :class:`LimiterFailure` on the first failed cell when the fallback
    is "error".
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    mode = FALLBACKS[config.fallback]
    if _use_compiled(coeffs, backend):
        out = coeffs.copy()
        failed = np.empty(coeffs.shape[0], dtype=np.int_)
        n_lim, n_fail = _kernels.compiled.limit(
            out, config.delta, int(config.skip_zero_cells), mode, failed
        )
        failed = failed[:n_fail]
    else:
        out, n_lim, failed = _kernels.py.limit(coeffs, config.delta, config.skip_zero_cells, mode)
    if failed.size and mode == FALLBACK_ERROR:
        j = int(failed[0])
        raise LimiterFailure(j, coeffs[j, 0], config.delta)
    return out, int(n_lim), failed


def reconstruct_positive(field: DGField, config: LimiterConfig) -> DGField:
    """Apply the positivity reconstruction to every cell of ``field``."""
    if not config.enabled:
        return field
    out, _, _ = limit_coefficients(field.coeffs, config)
    return field.with_coeffs(out)
