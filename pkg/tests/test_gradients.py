"""Analytic BPTT gradients versus central finite differences."""

import numpy as np
import pytest

from dktgraph.dkt.kernels import numpy_backend

try:
    from dktgraph.dkt.kernels import numba_backend

    BACKENDS = [("numpy", numpy_backend), ("numba", numba_backend)]
except ImportError:
    BACKENDS = [("numpy", numpy_backend)]


def random_problem(rng, num_exercises, hidden, batch, steps):
    k = 1.0 / np.sqrt(hidden)
    params = [
        rng.uniform(-k, k, (2 * num_exercises, 4 * hidden)),
        rng.uniform(-k, k, (hidden, 4 * hidden)),
        rng.uniform(-k, k, (4 * hidden,)),
        rng.uniform(-k, k, (num_exercises, hidden)),
        rng.uniform(-k, k, (num_exercises,)),
    ]
    x_idx = rng.integers(0, 2 * num_exercises, (steps, batch))
    targets = rng.integers(0, num_exercises, (steps, batch))
    labels = rng.integers(0, 2, (steps, batch)).astype(np.float64)
    # ragged lengths: column b is valid for lengths[b] steps
    mask = np.zeros((steps, batch))
    for b in range(batch):
        mask[: rng.integers(1, steps + 1), b] = 1.0
    return params, (x_idx, targets, labels, mask)


def max_gradient_error(backend, params, data, fd_step=1e-5):
    loss, p, hs, cs, gates = backend.lstm_forward_train(*data, *params)
    grads = backend.lstm_backward_train(*data, p, hs, cs, gates, *params)
    worst = 0.0
    for pi, par in enumerate(params):
        flat = par.ravel()
        gflat = grads[pi].ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + fd_step
            up = backend.lstm_forward_train(*data, *params)[0]
            flat[j] = orig - fd_step
            down = backend.lstm_forward_train(*data, *params)[0]
            flat[j] = orig
            numeric = (up - down) / (2 * fd_step)
            denom = max(abs(numeric), abs(gflat[j]), 1e-4)
            worst = max(worst, abs(numeric - gflat[j]) / denom)
    return worst


@pytest.mark.parametrize("name,backend", BACKENDS)
def test_gradients_match_finite_differences(name, backend):
    rng = np.random.default_rng(99)
    for trial in range(8):
        E = int(rng.integers(2, 5))
        H = int(rng.integers(2, 9))
        B = int(rng.integers(1, 4))
        T = int(rng.integers(2, 6))
        params, data = random_problem(rng, E, H, B, T)
        err = max_gradient_error(backend, params, data)
        assert err < 1e-4, f"trial {trial} (E={E} H={H} B={B} T={T}): rel err {err}"


def test_padded_steps_do_not_leak_gradient():
    """Gradients from a padded batch equal gradients from the unpadded
    sequence alone."""
    rng = np.random.default_rng(5)
    E, H = 3, 4
    params, _ = random_problem(rng, E, H, 1, 1)
    x = np.array([[1], [4], [2]])
    tg = np.array([[0], [2], [1]])
    lb = np.array([[1.0], [0.0], [1.0]])

    full_mask = np.ones((3, 1))
    out = numpy_backend.lstm_forward_train(x, tg, lb, full_mask, *params)
    ref = numpy_backend.lstm_backward_train(x, tg, lb, full_mask, out[1], *out[2:], *params)

    xp = np.vstack([x, [[5], [5]]])
    tgp = np.vstack([tg, [[0], [0]]])
    lbp = np.vstack([lb, [[1.0], [1.0]]])
    maskp = np.vstack([full_mask, [[0.0], [0.0]]])
    outp = numpy_backend.lstm_forward_train(xp, tgp, lbp, maskp, *params)
    padded = numpy_backend.lstm_backward_train(
        xp, tgp, lbp, maskp, outp[1], *outp[2:], *params
    )
    assert out[0] == pytest.approx(outp[0], abs=1e-15)
    for a, b in zip(ref, padded):
        assert np.allclose(a, b, atol=1e-15)
