"""Tests for the feedforward network building blocks."""

import numpy as np
import pytest

from htsreg.neuralnet import (
    NetworkDims,
    activation,
    activation_prime,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)


def test_init_is_deterministic():
    dims = NetworkDims(4, 8, 4)
    a = init_params(dims, seed=7)
    b = init_params(dims, seed=7)
    assert np.array_equal(a.w2, b.w2) and np.array_equal(a.b2, b.b2)
    assert np.array_equal(a.w3, b.w3) and np.array_equal(a.b3, b.b3)


def test_init_draws_standard_normal_moments():
    """About 1e5 entries: mean within 0.02 of 0, sd within 0.02 of 1."""
    dims = NetworkDims(100, 500, 99)
    p = init_params(dims, seed=1)
    entries = np.concatenate([p.w2.ravel(), p.b2, p.w3.ravel(), p.b3])
    assert entries.size > 90_000
    assert abs(entries.mean()) < 0.02
    assert abs(entries.std() - 1.0) < 0.02


def test_init_without_bias_zeroes_vectors():
    p = init_params(NetworkDims(3, 6, 2), seed=2, bias=False)
    assert np.array_equal(p.b2, np.zeros(6))
    assert np.array_equal(p.b3, np.zeros(2))


def test_dims_reject_zero_hidden():
    with pytest.raises(ValueError, match="positive"):
        NetworkDims(4, 0, 4)


def test_sigmoid_at_zero():
    assert activation(0.0, "sigmoid") == 0.5
    assert activation_prime(0.0, "sigmoid") == 0.25


def test_relu_values():
    assert activation(-3.0, "relu") == 0.0
    assert activation(3.0, "relu") == 3.0
    assert activation_prime(-1.0, "relu") == 0.0
    assert activation_prime(2.0, "relu") == 1.0
    assert activation_prime(0.0, "relu") == 0.0


def test_sigmoid_matches_extended_precision():
    """At +/-40 the guarded form agrees with a long-double evaluation."""
    for u in (-40.0, 40.0):
        expected = float(1.0 / (1.0 + np.exp(np.longdouble(-u))))
        assert activation(u, "sigmoid") == pytest.approx(expected, rel=1e-15)


def test_sigmoid_saturates_without_overflow():
    """Extreme inputs never overflow exp."""
    with np.errstate(over="raise"):
        lo = activation(-800.0, "sigmoid")
        hi = activation(800.0, "sigmoid")
    assert lo == 0.0
    assert hi == 1.0


def test_unknown_activation_rejected():
    with pytest.raises(ValueError, match="unknown activation"):
        activation(1.0, "tanh")


def test_forward_zero_params():
    """All-zero weights: hidden sigmoid outputs 0.5, network output 0."""
    p = init_params(NetworkDims(3, 5, 2), seed=0)
    p.w2[:] = 0; p.b2[:] = 0; p.w3[:] = 0; p.b3[:] = 0
    trace = forward(p, np.ones(3), "sigmoid")
    assert np.array_equal(trace.z2, np.full(5, 0.5))
    assert np.array_equal(trace.u3, np.zeros(2))


def test_forward_bias_only_output():
    """Zero W3: the output equals b3 regardless of the input."""
    p = init_params(NetworkDims(3, 5, 2), seed=3)
    p.w3[:] = 0
    p.b3[:] = [1.5, -2.5]
    for x in (np.zeros(3), np.arange(3.0), np.full(3, -9.0)):
        assert np.array_equal(forward(p, x, "sigmoid").u3, [1.5, -2.5])


def test_forward_matches_triple_loop_oracle():
    """Vectorized forward agrees with naive loops to 1e-12."""
    rng = np.random.default_rng(5)
    p = init_params(NetworkDims(4, 7, 3), seed=5)
    x = rng.standard_normal(4)
    trace = forward(p, x, "sigmoid")

    u2 = np.zeros(7)
    for j in range(7):
        for i in range(4):
            u2[j] += p.w2[j, i] * x[i]
        u2[j] += p.b2[j]
    z2 = 1.0 / (1.0 + np.exp(-u2))
    u3 = np.zeros(3)
    for k in range(3):
        for j in range(7):
            u3[k] += p.w3[k, j] * z2[j]
        u3[k] += p.b3[k]
    assert np.allclose(trace.u3, u3, rtol=1e-12, atol=1e-12)


def test_forward_rejects_shape_mismatch():
    p = init_params(NetworkDims(4, 7, 3), seed=1)
    with pytest.raises(ValueError, match="input shape"):
        forward(p, np.ones(5), "sigmoid")


def test_forward_is_pure():
    p = init_params(NetworkDims(4, 8, 4), seed=9)
    x = np.random.default_rng(9).standard_normal(4)
    a = forward(p, x, "sigmoid")
    b = forward(p, x, "sigmoid")
    assert np.array_equal(a.u3, b.u3) and np.array_equal(a.u2, b.u2)


def test_relu_monotone_smoke():
    """Nonnegative weights, inputs, and biases give nonnegative outputs."""
    rng = np.random.default_rng(10)
    p = init_params(NetworkDims(4, 6, 3), seed=10)
    p.w2[:] = np.abs(p.w2); p.b2[:] = np.abs(p.b2)
    p.w3[:] = np.abs(p.w3); p.b3[:] = np.abs(p.b3)
    trace = forward(p, np.abs(rng.standard_normal(4)), "relu")
    assert np.all(trace.u3 >= 0)


def test_trace_activation_consistency():
    """Recomputing z2 from the stored u2 reproduces the stored z2 exactly."""
    p = init_params(NetworkDims(5, 9, 2), seed=11)
    trace = forward(p, np.random.default_rng(11).standard_normal(5), "sigmoid")
    assert np.array_equal(activation(trace.u2, "sigmoid"), trace.z2)


def test_checkpoint_round_trip(tmp_path):
    p = init_params(NetworkDims(4, 8, 4), seed=12)
    path = tmp_path / "ckpt.json"
    save_checkpoint(p, path, seed=12)
    back = load_checkpoint(path)
    assert np.array_equal(back.w2, p.w2) and np.array_equal(back.b2, p.b2)
    assert np.array_equal(back.w3, p.w3) and np.array_equal(back.b3, p.b3)
