"""Moving-average and exponential-smoothing baselines with grid selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import SeriesPanel

DEFAULT_MA_GRID: tuple[int, ...] = tuple(range(1, 25))
DEFAULT_ES_GRID: tuple[float, ...] = tuple(i / 100 for i in range(101))


@dataclass(frozen=True)
class BaselineChoice:
    method: str  # "MA" or "ES"
    param: int | float

    def __post_init__(self) -> None:
        if self.method not in ("MA", "ES"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if self.method == "MA" and (int(self.param) != self.param or self.param < 1):
            raise ValueError(f"MA window must be a positive integer, got {self.param}")
        if self.method == "ES" and not 0.0 <= self.param <= 1.0:
            raise ValueError(f"ES alpha must lie in [0, 1], got {self.param}")

    @property
    def label(self) -> str:
        return f"MA({int(self.param)})" if self.method == "MA" else f"ES({self.param:.2f})"


def ma_forecast(series: np.ndarray, n: int) -> np.ndarray:
    """One-step moving-average forecasts from the previous n actual values.

    Returns a row of length T+1 where index p holds the forecast for
    position p (the last entry looks one step past the series). Positions
    with fewer than n preceding values are NaN.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("series must be 1-D")
    if n < 1:
        raise ValueError("window must be >= 1")
    if n >= y.shape[0]:
        raise ValueError(f"window {n} must be smaller than the series length {y.shape[0]}")
    out = np.full(y.shape[0] + 1, np.nan)
    windows = np.lib.stride_tricks.sliding_window_view(y, n)
    out[n:] = windows.mean(axis=1)
    return out


def es_forecast(series: np.ndarray, alpha: float) -> np.ndarray:
    """Exponential smoothing seeded with the first observation.

    fc[0] is the seed y_1; fc[p] = alpha * y_p + (1 - alpha) * fc[p-1].
    Output length is T+1, same alignment as :func:`ma_forecast`.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("series must be 1-D")
    if y.shape[0] < 2:
        raise ValueError("series must have length >= 2")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    out = np.empty(y.shape[0] + 1)
    out[0] = y[0]
    for p in range(1, out.shape[0]):
        out[p] = alpha * y[p - 1] + (1.0 - alpha) * out[p - 1]
    return out


def _defined_slice(method: str, param: int | float, train_len: int) -> slice:
    # Training positions where the forecast exists: t > n for MA, t >= 2 for ES.
    start = int(param) if method == "MA" else 1
    return slice(start, train_len)


def _training_rmse(panel: SeriesPanel, method: str, param: int | float) -> float:
    sel = _defined_slice(method, param, panel.train_len)
    if sel.start >= sel.stop:
        return np.inf
    per_node = []
    for row in panel.values:
        fc = ma_forecast(row, int(param)) if method == "MA" else es_forecast(row, param)
        err = row[sel] - fc[sel]
        per_node.append(np.sqrt(np.mean(err * err)))
    return float(np.mean(per_node))


def select_param(panel: SeriesPanel, method: str, grid: tuple | list | None = None) -> BaselineChoice:
    """Grid value minimizing average training-period RMSE over all nodes.

    Ties break toward the smaller parameter. The default grids are
    n in 1..24 and alpha in {0.00, 0.01, ..., 1.00}.
    """
    if method not in ("MA", "ES"):
        raise ValueError(f"unknown baseline method {method!r}")
    if grid is None:
        grid = DEFAULT_MA_GRID if method == "MA" else DEFAULT_ES_GRID
    candidates = sorted(grid)
    if not candidates:
        raise ValueError("parameter grid is empty")
    best_param = None
    best_score = np.inf
    for param in candidates:
        score = _training_rmse(panel, method, param)
        if score < best_score:
            best_score = score
            best_param = param
    if best_param is None:
        raise ValueError("no grid value yields a defined training forecast")
    return BaselineChoice(method=method, param=best_param)
