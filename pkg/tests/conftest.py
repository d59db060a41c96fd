"""Shared oracles and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from evipar.autodiff import ComputationRecord, Tensor, backward


def rel_error(approx: np.ndarray, exact: np.ndarray, floor: float = 1e-6) -> float:
    """Elementwise relative error with an absolute floor for tiny values.

    The floor sits above central-difference cancellation noise (~1e-11 for
    unit-scale losses at h=1e-5), so exactly-zero analytic gradients do not
    get flagged against oracle jitter.
    """
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(approx), np.abs(exact)), floor)
    return float(np.max(np.abs(approx - exact) / denom))


def numeric_gradients(f, tensors: list[Tensor], h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of scalar f() w.r.t. each tensor's data.

    f must re-run the full forward (reading the current tensor data) and
    return a plain float. This is the oracle: no autodiff involved.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = f()
            flat[i] = keep - h
            down = f()
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def check_gradients(build, params: list[Tensor], tol: float = 1e-4, h: float = 1e-5):
    """Compare recorded adjoints of scalar build() against central differences.

    build() runs the forward pass with whatever data the parameter tensors
    currently hold and returns the scalar loss Tensor.
    """
    for t in params:
        t.grad = None
    with ComputationRecord() as rec:
        loss = build()
    backward(rec, loss)
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in params]
    numeric = numeric_gradients(lambda: build().item(), params, h=h)
    worst = max(rel_error(a, n) for a, n in zip(analytic, numeric))
    assert worst < tol, f"gradient mismatch: worst relative error {worst:.3e}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(42)
