"""Tests for panel ingestion, standardization, and lagged inputs."""

import numpy as np
import pytest

from htsreg.hierarchy import aggregate_bottom
from htsreg.panel import SeriesPanel, lagged_input, load_panel_csv, standardize, write_panel_csv

SMALL_PARENTS = {2: 1, 3: 1, 4: 2, 5: 2, 6: 3, 7: 3}


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def test_load_bottom_only_synthesizes_uppers(tmp_path, small_tree):
    """A 4-bottom-column file expands to 7 rows with summed uppers."""
    path = tmp_path / "p.csv"
    write_csv(path, ["t", "4", "5", "6", "7"], [[1, 1.0, 2.0, 3.0, 4.0], [2, 2.0, 3.0, 4.0, 5.0]])
    panel = load_panel_csv(path, small_tree, train_len=1)
    assert panel.values.shape == (7, 2)
    assert np.array_equal(panel.values[:, 0], [10, 3, 7, 1, 2, 3, 4])
    assert np.array_equal(panel.values[:, 1], [14, 5, 9, 2, 3, 4, 5])


def test_load_full_file_is_verbatim(tmp_path, wide_tree):
    """All 13 columns present: contents pass through untouched, even if incoherent."""
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((13, 4))
    path = tmp_path / "p.csv"
    rows = [[t + 1] + [f"{v:.17g}" for v in vals[:, t]] for t in range(4)]
    write_csv(path, ["t"] + [str(n) for n in wide_tree.node_ids], rows)
    panel = load_panel_csv(path, wide_tree, train_len=2)
    assert np.array_equal(panel.values, vals)


def test_load_missing_bottom_column_names_node(tmp_path, wide_tree):
    path = tmp_path / "p.csv"
    cols = [str(n) for n in wide_tree.node_ids if n != 5]
    write_csv(path, ["t"] + cols, [[1] + [0.0] * 12, [2] + [1.0] * 12])
    with pytest.raises(ValueError, match="node 5"):
        load_panel_csv(path, wide_tree)


def test_load_rejects_non_numeric_cell(tmp_path, small_tree):
    path = tmp_path / "p.csv"
    write_csv(path, ["t", "4", "5", "6", "7"], [[1, 1, 2, 3, 4], [2, 1, "oops", 3, 4]])
    with pytest.raises(ValueError, match="non-numeric"):
        load_panel_csv(path, small_tree)


def test_load_rejects_duplicate_timestamp(tmp_path, small_tree):
    path = tmp_path / "p.csv"
    write_csv(path, ["t", "4", "5", "6", "7"], [[1, 1, 2, 3, 4], [1, 2, 3, 4, 5]])
    with pytest.raises(ValueError, match="duplicate timestamp"):
        load_panel_csv(path, small_tree)


def test_standardize_round_trip(small_tree):
    """Row (1,2,3 | 4) with train_len 3: mean 2, sd 1, inverse restores."""
    base = np.array([[1.0, 2.0, 3.0, 4.0]] * 4)
    panel = SeriesPanel.from_values(small_tree, aggregate_bottom(small_tree, base), train_len=3)
    std, scaler = standardize(panel)
    row = std.values[small_tree.index(4)]
    assert np.allclose(row, [-1.0, 0.0, 1.0, 2.0])
    restored = scaler.inverse(std)
    assert np.allclose(restored.values, panel.values, rtol=1e-12)


def test_standardize_is_identity_on_normalized_rows(small_tree):
    """Rows already zero-mean unit-sd over training stay put within rounding."""
    rng = np.random.default_rng(9)
    vals = rng.standard_normal((7, 10))
    train = vals[:, :6]
    vals = (vals - train.mean(axis=1, keepdims=True)) / train.std(axis=1, ddof=1, keepdims=True)
    panel = SeriesPanel(tuple(range(1, 8)), vals, train_len=6, n_bottom=4)
    std, _ = standardize(panel)
    assert np.allclose(std.values, panel.values, atol=1e-12)


def test_standardize_rejects_constant_training_row(small_tree):
    vals = np.vstack([np.ones((1, 6)), np.random.default_rng(0).standard_normal((6, 6))])
    panel = SeriesPanel(tuple(range(1, 8)), vals, train_len=4, n_bottom=4)
    with pytest.raises(ValueError, match="node 1"):
        standardize(panel)


def test_standardized_training_moments(small_panel):
    """Training-period mean 0 and sample sd 1 within 1e-12."""
    std, _ = standardize(small_panel)
    train = std.values[:, : std.train_len]
    assert np.all(np.abs(train.mean(axis=1)) < 1e-12)
    assert np.all(np.abs(train.std(axis=1, ddof=1) - 1.0) < 1e-12)


def test_lagged_input_single_lag(small_panel):
    """L=1 returns exactly the previous bottom observations."""
    got = lagged_input(small_panel, t=5, lag=1)
    assert np.array_equal(got, small_panel.bottom_values[:, 3])


def test_lagged_input_two_lags_ordering(small_tree):
    """L=2 concatenates oldest lag first: (a_{t-2}, b_{t-2}, ..., a_{t-1}, b_{t-1})."""
    bottoms = np.arange(12.0).reshape(4, 3)
    panel = SeriesPanel.from_values(small_tree, aggregate_bottom(small_tree, bottoms), train_len=2)
    got = lagged_input(panel, t=3, lag=2)
    assert np.array_equal(got, [0, 3, 6, 9, 1, 4, 7, 10])
    assert got.shape == (2 * 4,)


def test_lagged_input_rejects_early_timepoint(small_panel):
    with pytest.raises(ValueError, match="fewer than 2 preceding"):
        lagged_input(small_panel, t=2, lag=2)


def test_lagged_input_reads_only_the_window(small_tree):
    """Two panels differing outside t-L..t-1 give identical lag vectors."""
    rng = np.random.default_rng(2)
    a = rng.standard_normal((4, 10))
    b = a.copy()
    b[:, :3] += 100.0
    b[:, 6:] -= 50.0
    pa = SeriesPanel.from_values(small_tree, aggregate_bottom(small_tree, a), train_len=6)
    pb = SeriesPanel.from_values(small_tree, aggregate_bottom(small_tree, b), train_len=6)
    assert np.array_equal(lagged_input(pa, t=6, lag=2), lagged_input(pb, t=6, lag=2))


def test_write_then_load_is_bitwise(tmp_path, small_panel, small_tree):
    """Round trip through CSV preserves every float."""
    path = tmp_path / "out.csv"
    write_panel_csv(small_panel, path)
    back = load_panel_csv(path, small_tree, train_len=small_panel.train_len)
    assert np.array_equal(back.values, small_panel.values)
    assert back.node_ids == small_panel.node_ids


def test_written_file_has_node_columns(tmp_path, small_panel):
    """Header is t plus one column per node: 8 columns for 7 nodes."""
    path = tmp_path / "out.csv"
    write_panel_csv(small_panel, path)
    header = path.read_text().splitlines()[0].split(",")
    assert header == ["t", "1", "2", "3", "4", "5", "6", "7"]


def test_panel_rejects_bad_train_len(small_tree):
    vals = np.ones((7, 4)) * np.arange(4)
    with pytest.raises(ValueError, match="train_len"):
        SeriesPanel.from_values(small_tree, vals, train_len=4)


def test_panel_rejects_missing_values(small_tree):
    vals = np.ones((7, 4))
    vals[2, 1] = np.nan
    with pytest.raises(ValueError, match="missing or non-finite"):
        SeriesPanel.from_values(small_tree, vals, train_len=2)


def test_panel_rejects_single_timepoint(small_tree):
    with pytest.raises(ValueError, match="at least 2 timepoints"):
        SeriesPanel.from_values(small_tree, np.ones((7, 1)), train_len=1)


def test_load_default_train_len_is_seventy_percent(tmp_path, small_tree):
    rows = [[t + 1, 1.0 + t, 2.0, 3.0, 4.0] for t in range(10)]
    path = tmp_path / "p.csv"
    write_csv(path, ["t", "4", "5", "6", "7"], rows)
    assert load_panel_csv(path, small_tree).train_len == 7
