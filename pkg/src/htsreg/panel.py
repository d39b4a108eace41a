"""Panel data model: CSV I/O, train-period standardization, lagged inputs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hierarchy import HierarchySpec, aggregate_bottom


@dataclass(frozen=True)
class SeriesPanel:
    """Node-by-time observation matrix with a train/test boundary.

    Rows follow the canonical hierarchy order (root, mids, bottoms);
    ``n_bottom`` identifies the trailing bottom-level block. Values are
    float64 and frozen after construction.
    """

    node_ids: tuple[int, ...]
    values: np.ndarray
    train_len: int
    n_bottom: int

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != len(self.node_ids):
            raise ValueError(
                f"values must be a {len(self.node_ids)} x T matrix, got shape {vals.shape}"
            )
        if vals.shape[1] < 2:
            raise ValueError("panel needs at least 2 timepoints")
        if not np.all(np.isfinite(vals)):
            raise ValueError("panel contains missing or non-finite values")
        if not 1 <= self.train_len <= vals.shape[1] - 1:
            raise ValueError(
                f"train_len {self.train_len} outside [1, {vals.shape[1] - 1}]"
            )
        if not 1 <= self.n_bottom <= len(self.node_ids):
            raise ValueError(f"invalid bottom-node count {self.n_bottom}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "node_ids", tuple(int(n) for n in self.node_ids))

    @classmethod
    def from_values(cls, h: HierarchySpec, values: np.ndarray, train_len: int) -> "SeriesPanel":
        return cls(
            node_ids=h.node_ids,
            values=values,
            train_len=train_len,
            n_bottom=h.n_bottom,
        )

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_time(self) -> int:
        return self.values.shape[1]

    @property
    def test_len(self) -> int:
        return self.n_time - self.train_len

    @property
    def bottom_values(self) -> np.ndarray:
        return self.values[self.n_nodes - self.n_bottom:]

    def row(self, node: int) -> np.ndarray:
        return self.values[self.node_ids.index(node)]

    def with_train_len(self, train_len: int) -> "SeriesPanel":
        return SeriesPanel(self.node_ids, self.values, train_len, self.n_bottom)


@dataclass(frozen=True)
class Scaler:
    """Per-node training-period mean and sample standard deviation."""

    node_ids: tuple[int, ...]
    mean: np.ndarray
    sd: np.ndarray

    def transform(self, panel: SeriesPanel) -> SeriesPanel:
        self._check(panel.node_ids)
        vals = (panel.values - self.mean[:, None]) / self.sd[:, None]
        return SeriesPanel(panel.node_ids, vals, panel.train_len, panel.n_bottom)

    def inverse(self, panel: SeriesPanel) -> SeriesPanel:
        self._check(panel.node_ids)
        vals = panel.values * self.sd[:, None] + self.mean[:, None]
        return SeriesPanel(panel.node_ids, vals, panel.train_len, panel.n_bottom)

    def inverse_values(self, values: np.ndarray, node_ids: tuple[int, ...] | None = None) -> np.ndarray:
        """Map a matrix of standardized rows back to the raw scale."""
        ids = self.node_ids if node_ids is None else node_ids
        pos = [self.node_ids.index(n) for n in ids]
        return np.asarray(values) * self.sd[pos, None] + self.mean[pos, None]

    def _check(self, node_ids: tuple[int, ...]) -> None:
        if node_ids != self.node_ids:
            raise ValueError("scaler node order does not match panel")


def standardize(panel: SeriesPanel) -> tuple[SeriesPanel, Scaler]:
    """Standardize every node row by its training-period mean and sd.

    Statistics use only t <= train_len (sample sd, denominator n-1) and are
    applied over the full series, so test-period values are expressed in
    training units. Raises if any node has zero training variance.
    """
    if panel.train_len < 2:
        raise ValueError("train_len must be >= 2 to estimate a standard deviation")
    train = panel.values[:, : panel.train_len]
    mean = train.mean(axis=1)
    sd = train.std(axis=1, ddof=1)
    for node, s in zip(panel.node_ids, sd):
        if s == 0.0:
            raise ValueError(f"node {node} has zero training variance")
    scaler = Scaler(node_ids=panel.node_ids, mean=mean, sd=sd)
    return scaler.transform(panel), scaler


def lagged_input(panel: SeriesPanel, t: int, lag: int) -> np.ndarray:
    """Concatenated bottom-level lags (y_{t-lag}, ..., y_{t-1}).

    ``t`` is a 1-based timepoint; t = n_time + 1 addresses the first point
    past the panel. Oldest lag first, bottom nodes in canonical order
    within each lag block.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if t <= lag:
        raise ValueError(f"timepoint {t} has fewer than {lag} preceding observations")
    if t > panel.n_time + 1:
        raise ValueError(f"timepoint {t} beyond panel horizon {panel.n_time + 1}")
    block = panel.bottom_values[:, t - 1 - lag: t - 1]
    return block.T.reshape(-1).copy()


def load_panel_csv(path: str | Path, h: HierarchySpec, train_len: int | None = None) -> SeriesPanel:
    """Read a wide CSV (column ``t`` plus one column per node id).

    Bottom-level columns are mandatory; missing upper-level columns are
    synthesized by aggregation, present ones are kept verbatim. Timestamps
    must be strictly increasing integers; they are validated and then
    replaced by positions 1..T. ``train_len`` defaults to 70% of T
    (floored, clamped to [1, T-1]).
    """
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise ValueError(f"{path}: first column must be 't'")
    header = rows[0]
    try:
        col_nodes = [int(c) for c in header[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer column name in header: {exc}") from exc
    known = set(h.node_ids)
    for c in col_nodes:
        if c not in known:
            raise ValueError(f"{path}: column {c} is not a node of the hierarchy")
    if len(set(col_nodes)) != len(col_nodes):
        raise ValueError(f"{path}: duplicate node column")
    for b in h.bottom_ids:
        if b not in col_nodes:
            raise ValueError(f"{path}: missing required bottom-level column for node {b}")

    body = [r for r in rows[1:] if r]
    if len(body) < 2:
        raise ValueError(f"{path}: need at least 2 data rows")
    times: list[int] = []
    data = np.empty((len(col_nodes), len(body)), dtype=np.float64)
    for j, row in enumerate(body):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {j + 2} has {len(row)} fields, expected {len(header)}")
        try:
            tval = int(row[0])
        except ValueError as exc:
            raise ValueError(f"{path}: non-integer timestamp {row[0]!r} in row {j + 2}") from exc
        if times:
            if tval == times[-1]:
                raise ValueError(f"{path}: duplicate timestamp {tval}")
            if tval < times[-1]:
                raise ValueError(f"{path}: timestamps must be strictly increasing")
        times.append(tval)
        for i, cell in enumerate(row[1:]):
            try:
                data[i, j] = float(cell)
            except ValueError as exc:
                raise ValueError(
                    f"{path}: non-numeric cell {cell!r} in row {j + 2}, column {header[i + 1]}"
                ) from exc

    col_pos = {c: i for i, c in enumerate(col_nodes)}
    bottom = np.vstack([data[col_pos[b]] for b in h.bottom_ids])
    values = aggregate_bottom(h, bottom)
    for r, node in enumerate(h.upper_ids):
        if node in col_pos:
            values[r] = data[col_pos[node]]

    n_time = values.shape[1]
    if train_len is None:
        train_len = min(max(int(0.7 * n_time), 1), n_time - 1)
    return SeriesPanel.from_values(h, values, train_len)


def write_panel_csv(panel: SeriesPanel, path: str | Path) -> None:
    """Write the panel as a wide CSV; re-loading restores it bitwise."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t"] + [str(n) for n in panel.node_ids])
        for j in range(panel.n_time):
            writer.writerow([str(j + 1)] + [f"{v:.17g}" for v in panel.values[:, j]])
