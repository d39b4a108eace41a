"""Structured-regularization training of the two-layer network.

The per-timepoint error is

    E_t = 1/2 ||y_t^B - u3||^2 + 1/2 ||Lambda (y_t^U - H u3)||^2,

where H maps bottom outputs to upper aggregates and Lambda carries one
nonnegative weight per upper node. Training is full-batch gradient descent
with a relative-improvement stopping rule: gradients are accumulated over
every training timepoint, one update is applied per epoch, and the loop
stops when the freshly evaluated objective fails to improve on the previous
epoch by a factor of eps (or at the epoch cap).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .hierarchy import HierarchySpec, aggregate_bottom, structure_matrix
from .neuralnet import (
    ForwardTrace,
    NetworkDims,
    NetworkParams,
    activation,
    activation_prime,
    forward,
    init_params,
)
from .panel import SeriesPanel, lagged_input

DEFAULT_LAMBDA_GRID: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(31))


@dataclass(frozen=True)
class RegWeights:
    """Per-upper-node regularization weights built from (lambda_root, lambda_mid)."""

    lambda_by_node: dict[int, float]
    vec: np.ndarray  # aligned to (root, mids) order

    @classmethod
    def build(cls, h: HierarchySpec, lambda_root: float, lambda_mid: float) -> "RegWeights":
        if lambda_root < 0 or lambda_mid < 0:
            raise ValueError(
                f"regularization weights must be nonnegative, got ({lambda_root}, {lambda_mid})"
            )
        by_node = {h.root: float(lambda_root)}
        by_node.update({m: float(lambda_mid) for m in h.mid_ids})
        vec = np.array([by_node[n] for n in h.upper_ids], dtype=np.float64)
        vec.setflags(write=False)
        return cls(lambda_by_node=by_node, vec=vec)


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 1e-5
    eps: float = 5e-5
    max_epochs: int = 10_000
    activation: str = "sigmoid"
    lag: int = 2
    seed: int = 0
    bias: bool = True
    hidden_dim: int | None = None  # default: twice the input width

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.lag < 1:
            raise ValueError("lag must be >= 1")


@dataclass
class TrainResult:
    params: NetworkParams
    objective: np.ndarray  # E(theta) after each epoch's update
    epochs: int
    reason: str  # "converged" or "max_epochs"
    epoch_eval: list = field(default_factory=list)  # hook outputs, one per epoch


@dataclass(frozen=True)
class Gradients:
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray


class TrainingDiverged(RuntimeError):
    """Objective became non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(f"objective became non-finite at epoch {epoch}")
        self.epoch = epoch

    def __reduce__(self):  # keep the epoch across process boundaries
        return (TrainingDiverged, (self.epoch,))


def training_timepoints(panel: SeriesPanel, lag: int) -> range:
    """1-based timepoints with enough history inside the training period."""
    return range(lag + 1, panel.train_len + 1)


def forecast_timepoints(panel: SeriesPanel) -> range:
    return range(panel.train_len + 1, panel.n_time + 1)


def _split_targets(y_t: np.ndarray, n_upper: int, n_bottom: int) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y_t, dtype=np.float64)
    if y.shape != (n_upper + n_bottom,):
        raise ValueError(f"expected observation vector of length {n_upper + n_bottom}, got {y.shape}")
    return y[:n_upper], y[n_upper:]


def error_from_output(u3: np.ndarray, y_upper: np.ndarray, y_bottom: np.ndarray,
                      lam: np.ndarray, H: np.ndarray) -> float:
    res_b = y_bottom - u3
    res_u = lam * (y_upper - H @ u3)
    return 0.5 * float(res_b @ res_b) + 0.5 * float(res_u @ res_u)


def error_at_t(trace: ForwardTrace, y_t: np.ndarray, reg: RegWeights, H: np.ndarray) -> float:
    """Weighted squared error of one forecast against the full observation vector."""
    y_upper, y_bottom = _split_targets(y_t, H.shape[0], H.shape[1])
    return error_from_output(trace.u3, y_upper, y_bottom, reg.vec, H)


def output_delta(u3: np.ndarray, y_t: np.ndarray, reg: RegWeights, H: np.ndarray) -> np.ndarray:
    """dE_t/du3 = -[H' Lam^2, I] y_t + (I + H' Lam^2 H) u3."""
    y_upper, y_bottom = _split_targets(y_t, H.shape[0], H.shape[1])
    ht_lam2 = H.T * (reg.vec * reg.vec)
    return -(ht_lam2 @ y_upper + y_bottom) + (u3 + ht_lam2 @ (H @ u3))


def hidden_delta(delta3: np.ndarray, params: NetworkParams, trace: ForwardTrace, kind: str) -> np.ndarray:
    """dE_t/du2 = (W3' delta3) * f'(u2)."""
    return (params.w3.T @ delta3) * activation_prime(trace.u2, kind)


def gradients_at_t(params: NetworkParams, x: np.ndarray, y_t: np.ndarray,
                   reg: RegWeights, H: np.ndarray, kind: str = "sigmoid") -> Gradients:
    """Per-parameter gradients of E_t: outer products of the deltas with the layer inputs."""
    trace = forward(params, x, kind)
    d3 = output_delta(trace.u3, y_t, reg, H)
    d2 = hidden_delta(d3, params, trace, kind)
    return Gradients(
        w2=np.outer(d2, trace.z1),
        b2=d2,
        w3=np.outer(d3, trace.z2),
        b3=d3,
    )


def _forward_batch(params: NetworkParams, x: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u2 = x @ params.w2.T + params.b2
    z2 = activation(u2, kind)
    u3 = z2 @ params.w3.T + params.b3
    return u2, z2, u3


def _objective(u3: np.ndarray, yb: np.ndarray, yu: np.ndarray, lam: np.ndarray, H: np.ndarray) -> float:
    res_b = yb - u3
    res_u = (yu - u3 @ H.T) * lam
    return 0.5 * float(np.sum(res_b * res_b)) + 0.5 * float(np.sum(res_u * res_u))


def _fit(x: np.ndarray, yb: np.ndarray, yu: np.ndarray, H: np.ndarray, lam: np.ndarray,
         params: NetworkParams, config: TrainConfig,
         epoch_hook: Callable[[int, NetworkParams], object] | None) -> TrainResult:
    """Full-batch descent on rows of (x, yb, yu); mutates and returns ``params``."""
    lam2 = lam * lam
    eta = config.eta
    objective: list[float] = []
    evals: list = []
    e_prev = np.inf
    reason = "max_epochs"
    epochs = 0

    u2, z2, u3 = _forward_batch(params, x, config.activation)
    for epoch in range(1, config.max_epochs + 1):
        # Gradients at the current parameters (forward values already cached).
        d3 = (u3 - yb) - ((yu - u3 @ H.T) * lam2) @ H
        d2 = (d3 @ params.w3) * activation_prime(u2, config.activation)
        params.w2 -= eta * (d2.T @ x)
        params.w3 -= eta * (d3.T @ z2)
        if config.bias:
            params.b2 -= eta * d2.sum(axis=0)
            params.b3 -= eta * d3.sum(axis=0)

        u2, z2, u3 = _forward_batch(params, x, config.activation)
        e_new = _objective(u3, yb, yu, lam, H)
        if not np.isfinite(e_new):
            raise TrainingDiverged(epoch)
        objective.append(e_new)
        epochs = epoch
        if epoch_hook is not None:
            evals.append(epoch_hook(epoch, params))
        if e_new > (1.0 - config.eps) * e_prev:
            reason = "converged"
            break
        e_prev = e_new

    return TrainResult(
        params=params,
        objective=np.asarray(objective),
        epochs=epochs,
        reason=reason,
        epoch_eval=evals,
    )


def _design_bottom(panel: SeriesPanel, lag: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tps = training_timepoints(panel, lag)
    if len(tps) == 0:
        raise ValueError(f"training period of length {panel.train_len} leaves no usable timepoints at lag {lag}")
    x = np.stack([lagged_input(panel, t, lag) for t in tps])
    n_upper = panel.n_nodes - panel.n_bottom
    cols = [t - 1 for t in tps]
    yu = panel.values[:n_upper][:, cols].T
    yb = panel.values[n_upper:][:, cols].T
    return x, yb, yu


def lagged_input_all(panel: SeriesPanel, t: int, lag: int) -> np.ndarray:
    """All-node lag vector (every node, not just bottoms), oldest lag first."""
    if t <= lag:
        raise ValueError(f"timepoint {t} has fewer than {lag} preceding observations")
    if t > panel.n_time + 1:
        raise ValueError(f"timepoint {t} beyond panel horizon {panel.n_time + 1}")
    return panel.values[:, t - 1 - lag: t - 1].T.reshape(-1).copy()


def train(panel: SeriesPanel, h: HierarchySpec, reg: RegWeights, config: TrainConfig,
          epoch_hook: Callable[[int, NetworkParams], object] | None = None) -> TrainResult:
    """Train the bottom-level network under the structured objective.

    The panel is expected to be standardized. Inputs are actual lagged
    bottom values; targets are the bottom and upper observations at each
    training timepoint. Deterministic for a fixed config seed.
    """
    if panel.node_ids != h.node_ids:
        raise ValueError("panel node order does not match hierarchy")
    H = structure_matrix(h)
    x, yb, yu = _design_bottom(panel, config.lag)
    input_dim = config.lag * h.n_bottom
    hidden = config.hidden_dim if config.hidden_dim is not None else 2 * input_dim
    dims = NetworkDims(input_dim=input_dim, hidden_dim=hidden, output_dim=h.n_bottom)
    params = init_params(dims, config.seed, bias=config.bias)
    return _fit(x, yb, yu, np.asarray(H), reg.vec, params, config, epoch_hook)


def train_all_node_base(panel: SeriesPanel, config: TrainConfig,
                        epoch_hook: Callable[[int, NetworkParams], object] | None = None) -> TrainResult:
    """Train an unregularized network forecasting every node from all-node lags.

    Used to produce base forecasts for trace-minimization reconciliation:
    same descent, same sizing rule, but plain squared error over all nodes.
    """
    tps = training_timepoints(panel, config.lag)
    if len(tps) == 0:
        raise ValueError(f"training period of length {panel.train_len} leaves no usable timepoints at lag {config.lag}")
    x = np.stack([lagged_input_all(panel, t, config.lag) for t in tps])
    y = panel.values[:, [t - 1 for t in tps]].T
    input_dim = config.lag * panel.n_nodes
    hidden = config.hidden_dim if config.hidden_dim is not None else 2 * input_dim
    dims = NetworkDims(input_dim=input_dim, hidden_dim=hidden, output_dim=panel.n_nodes)
    params = init_params(dims, config.seed, bias=config.bias)
    empty_h = np.zeros((0, panel.n_nodes))
    empty_lam = np.zeros(0)
    yu = np.zeros((x.shape[0], 0))
    return _fit(x, y, yu, empty_h, empty_lam, params, config, epoch_hook)


def predict_bottom(params: NetworkParams, panel: SeriesPanel, config: TrainConfig,
                   timepoints: range | list[int]) -> np.ndarray:
    """One-step bottom-level forecasts (|B| x len) from actual lagged inputs."""
    x = np.stack([lagged_input(panel, t, config.lag) for t in timepoints])
    _, _, u3 = _forward_batch(params, x, config.activation)
    return u3.T


def predict_all_nodes(params: NetworkParams, panel: SeriesPanel, config: TrainConfig,
                      timepoints: range | list[int]) -> np.ndarray:
    """One-step all-node forecasts (|N| x len) from the all-node base network."""
    x = np.stack([lagged_input_all(panel, t, config.lag) for t in timepoints])
    _, _, u3 = _forward_batch(params, x, config.activation)
    return u3.T


def _validation_score(panel: SeriesPanel, h: HierarchySpec, fit_len: int,
                      reg: RegWeights, config: TrainConfig) -> float:
    fit_panel = panel.with_train_len(fit_len)
    result = train(fit_panel, h, reg, config)
    val_tps = range(fit_len + 1, panel.train_len + 1)
    coherent = aggregate_bottom(h, predict_bottom(result.params, fit_panel, config, val_tps))
    actual = panel.values[:, [t - 1 for t in val_tps]]
    per_node = np.sqrt(np.mean((actual - coherent) ** 2, axis=1))
    return float(np.mean(per_node))


def tune_lambda(panel: SeriesPanel, h: HierarchySpec,
                grid_root: tuple | list = DEFAULT_LAMBDA_GRID,
                grid_mid: tuple | list = DEFAULT_LAMBDA_GRID,
                config: TrainConfig = TrainConfig()) -> tuple[float, float]:
    """Hold-out selection of (lambda_root, lambda_mid).

    The first 75% of the training period fits the model, the rest scores
    coherent bottom-up forecasts by average all-node RMSE. Ties break
    toward smaller lambda_root + lambda_mid, then smaller lambda_root.
    """
    if not grid_root or not grid_mid:
        raise ValueError("lambda grids must be nonempty")
    fit_len = int(0.75 * panel.train_len)
    if fit_len <= config.lag or fit_len >= panel.train_len:
        raise ValueError(f"training period of {panel.train_len} timepoints cannot be split for hold-out validation")
    best: tuple[float, float, float, float] | None = None
    for l_root, l_mid in product(sorted(grid_root), sorted(grid_mid)):
        reg = RegWeights.build(h, l_root, l_mid)
        score = _validation_score(panel, h, fit_len, reg, config)
        key = (score, l_root + l_mid, l_root, l_mid)
        if best is None or key < best:
            best = key
    return best[2], best[3]
