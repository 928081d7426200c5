"""Shared oracles and data builders for the test suite.

The reference implementations here translate the defining formulas
literally (explicit set comprehensions, finite differences) and never call
into the package code paths they are used to check.
"""

import math

import numpy as np
import pytest

from dplc import SurvivalDataset


def make_dataset(times, status, x=None, z=None):
    times = np.asarray(times, dtype=float)
    n = times.size
    if x is None:
        x = np.zeros((n, 1))
    if z is None:
        z = np.zeros((n, 1))
    return SurvivalDataset(times=times, status=np.asarray(status, float),
                           x=np.asarray(x, float), z=np.asarray(z, float))


def random_instance(seed, n=None, p=2, r=2, eta_scale=1.0):
    """Small random survival instance with ties sprinkled in."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(4, 21))
    times = rng.integers(1, max(3, n // 2) + 1, size=n).astype(float)
    status = (rng.random(n) < 0.7).astype(float)
    if status.sum() == 0:
        status[int(rng.integers(0, n))] = 1.0
    x = rng.standard_normal((n, p))
    z = rng.standard_normal((n, r))
    eta = eta_scale * rng.standard_normal(n)
    return make_dataset(times, status, x, z), eta


def naive_risk_set(times, i):
    return {j for j in range(len(times)) if times[j] >= times[i]}


def naive_history_set(times, m):
    return {i for i in range(len(times)) if times[i] <= times[m]}


def naive_neg_log_pl(times, status, eta):
    """Literal partial-likelihood sum over explicit risk sets."""
    n = len(times)
    total = 0.0
    for i in range(n):
        if status[i] == 1:
            denom = sum(math.exp(eta[j]) for j in naive_risk_set(times, i))
            total += eta[i] - math.log(denom)
    return -total / n


def naive_q_of_eta(dataset):
    def q(eta):
        return naive_neg_log_pl(dataset.times, dataset.status, np.asarray(eta))
    return q


def fd_gradient(f, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in range(x.size):
        up, down = x.copy(), x.copy()
        up[k] += step
        down[k] -= step
        grad[k] = (f(up) - f(down)) / (2.0 * step)
    return grad


def fd_hessian_diag(f, x, step=1e-4):
    x = np.asarray(x, dtype=float)
    diag = np.zeros_like(x)
    f0 = f(x)
    for k in range(x.size):
        up, down = x.copy(), x.copy()
        up[k] += step
        down[k] -= step
        diag[k] = (f(up) - 2.0 * f0 + f(down)) / step ** 2
    return diag


def rel_err(actual, expected, floor=1e-8):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return np.abs(actual - expected) / np.maximum(np.abs(expected), floor)


def fd_close(analytic, fd, rtol=1e-5, atol=1e-8):
    """Agreement with a finite-difference estimate.

    The absolute guard absorbs FD rounding noise (about eps/step) on
    entries whose true gradient is zero, e.g. dead ReLU units.
    """
    analytic = np.asarray(analytic, dtype=float)
    fd = np.asarray(fd, dtype=float)
    diff = np.abs(analytic - fd)
    return np.all((diff <= atol) | (diff <= rtol * np.abs(fd)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
