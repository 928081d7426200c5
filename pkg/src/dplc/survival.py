"""Right-censored survival data, risk-set indexing, and the Cox partial likelihood.

The negative log partial likelihood of a linear predictor eta is

    q(eta) = -(1/n) sum_i status_i * [eta_i - log sum_{j in R_i} exp(eta_j)]

where R_i = {j : T_j >= T_i} is the at-risk set at subject i's follow-up
time.  All risk-set sums are evaluated with max-subtraction so that
predictors with |eta| up to a few tens stay overflow-safe.  Because times
are sorted once, R_i is a suffix and the history set C_m = {i : T_i <= T_m}
is a prefix of the sorted order (ties grouped), so every quantity here is
O(n) given the index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

# Curvature floor applied inside working_response; entries this small carry
# essentially no weight in the downstream least-squares aggregates.
EPS_W = 1e-8


@dataclass(frozen=True)
class SurvivalDataset:
    """Observed survival data.

    times : (n,) positive follow-up times.
    status : (n,) event indicators, 1 = event, 0 = censored.
    x : (n, p) covariates entering the model linearly (p may exceed n).
    z : (n, r) covariates handled by the nonparametric risk term (r <= n).
    """

    times: np.ndarray
    status: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        status = np.asarray(self.status, dtype=float)
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("empty dataset")
        n = times.size
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            raise ValueError("times must be finite and > 0")
        if status.shape != (n,) or not np.all(np.isin(status, (0.0, 1.0))):
            raise ValueError("status must be 0/1 with one entry per subject")
        if x.ndim != 2 or x.shape[0] != n:
            raise ValueError("x must be a 2-d array with n rows")
        if z.ndim != 2 or z.shape[0] != n:
            raise ValueError("z must be a 2-d array with n rows")
        if z.shape[1] > n:
            raise ValueError("z has more columns than subjects")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def r(self) -> int:
        return self.z.shape[1]


def subset(dataset: SurvivalDataset, idx: np.ndarray) -> SurvivalDataset:
    """Row-subset of a dataset (used by train/test splitting)."""
    idx = np.asarray(idx, dtype=int)
    return SurvivalDataset(
        times=dataset.times[idx],
        status=dataset.status[idx],
        x=dataset.x[idx],
        z=dataset.z[idx],
    )


def stratified_split(status, test_fraction, rng):
    """Split subject indices into (train, test), stratified by event status.

    Each stratum contributes round(test_fraction * stratum size) subjects to
    the test side, which keeps the event fraction within one subject of the
    full-sample rate.
    """
    status = np.asarray(status)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    train_parts, test_parts = [], []
    for value in (0.0, 1.0):
        members = np.flatnonzero(status == value)
        if members.size == 0:
            continue
        perm = rng.permutation(members)
        n_test = int(round(test_fraction * members.size))
        n_test = min(max(n_test, 0), members.size)
        test_parts.append(perm[:n_test])
        train_parts.append(perm[n_test:])
    train = np.sort(np.concatenate(train_parts)) if train_parts else np.empty(0, int)
    test = np.sort(np.concatenate(test_parts)) if test_parts else np.empty(0, int)
    if train.size == 0 or test.size == 0:
        raise ValueError("split produced an empty side; adjust test_fraction")
    return train, test


@dataclass(frozen=True)
class RiskIndex:
    """Precomputed time ordering with tie groups.

    order : subject ids sorted by time ascending (stable).
    rank : rank[i] = position of subject i within `order`.
    first_tie : by sorted position, first position sharing that time.
    last_tie : by sorted position, last position sharing that time.
    status_sorted : event indicators in sorted order.

    The at-risk set of the subject at sorted position k is the suffix
    order[first_tie[k]:], and its history set is the prefix
    order[:last_tie[k] + 1]; ties are mutually included on both sides.
    """

    order: np.ndarray
    rank: np.ndarray
    first_tie: np.ndarray
    last_tie: np.ndarray
    status_sorted: np.ndarray

    @property
    def n(self) -> int:
        return self.order.size

    def risk_set(self, i: int) -> np.ndarray:
        """Subject ids j with T_j >= T_i (includes i)."""
        return self.order[self.first_tie[self.rank[i]]:]

    def history_set(self, m: int) -> np.ndarray:
        """Subject ids i with T_i <= T_m (includes m)."""
        return self.order[: self.last_tie[self.rank[m]] + 1]


def build_risk_index(dataset: SurvivalDataset) -> RiskIndex:
    """Sort times once and record tie-group boundaries."""
    n = dataset.n
    if n == 0:
        raise ValueError("empty dataset")
    order = np.argsort(dataset.times, kind="stable")
    ts = dataset.times[order]
    pos = np.arange(n)

    starts = np.empty(n, dtype=bool)
    starts[0] = True
    starts[1:] = ts[1:] != ts[:-1]
    first_tie = np.maximum.accumulate(np.where(starts, pos, -1))

    ends = np.empty(n, dtype=bool)
    ends[-1] = True
    ends[:-1] = ts[1:] != ts[:-1]
    last_tie = np.minimum.accumulate(np.where(ends, pos, n)[::-1])[::-1]

    rank = np.empty(n, dtype=int)
    rank[order] = pos
    return RiskIndex(
        order=order,
        rank=rank,
        first_tie=first_tie,
        last_tie=last_tie,
        status_sorted=dataset.status[order],
    )


@dataclass(frozen=True)
class Predictor:
    """Per-subject linear predictor eta = xi + g_vals with both parts kept."""

    eta: np.ndarray
    xi: np.ndarray
    g_vals: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        g = np.asarray(self.g_vals, dtype=float)
        if eta.shape != xi.shape or eta.shape != g.shape:
            raise ValueError("predictor parts must share one shape")
        if not np.allclose(eta, xi + g, rtol=0.0, atol=1e-9, equal_nan=True):
            raise ValueError("eta must equal xi + g_vals")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "g_vals", g)

    @classmethod
    def from_parts(cls, xi, g_vals) -> "Predictor":
        xi = np.asarray(xi, dtype=float)
        g_vals = np.asarray(g_vals, dtype=float)
        return cls(eta=xi + g_vals, xi=xi, g_vals=g_vals)


def _sorted_terms(eta: np.ndarray, dataset: SurvivalDataset, index: RiskIndex):
    """Shared risk-set aggregates in time-sorted order.

    Returns (eta_s, log_s, pi1, pi2) where log_s is the log risk-set sum
    for each sorted position and, with pi(m, i) = exp(eta_m) / S_i,

        pi1_m = sum over the history prefix of status_i * pi(m, i),
        pi2_m = sum over the history prefix of status_i * pi(m, i)**2.

    The fast path subtracts the max before exponentiating; if the predictor
    spread is so extreme that suffix sums underflow anyway, everything is
    redone with log-space accumulation, which stays finite for any finite
    eta.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (dataset.n,):
        raise ValueError("predictor length does not match dataset")
    if not np.all(np.isfinite(eta)):
        raise ValueError("non-finite predictor")
    eta_s = eta[index.order]
    shift = float(eta_s.max())
    e = np.exp(eta_s - shift)
    a = np.cumsum(e[::-1])[::-1][index.first_tie]
    if float(a.min()) > 1e-280:
        d = index.status_sorted / a
        log_s = np.log(a) + shift
        pi1 = e * np.cumsum(d)[index.last_tie]
        pi2 = (e * e) * np.cumsum(d / a)[index.last_tie]
        return eta_s, log_s, pi1, pi2
    log_s = np.logaddexp.accumulate(eta_s[::-1])[::-1][index.first_tie]
    with np.errstate(divide="ignore"):
        log_d = np.where(index.status_sorted > 0, -log_s, -np.inf)
    log_p1 = np.logaddexp.accumulate(log_d)[index.last_tie]
    log_p2 = np.logaddexp.accumulate(2.0 * log_d)[index.last_tie]
    pi1 = np.exp(eta_s + log_p1)
    pi2 = np.exp(2.0 * eta_s + log_p2)
    return eta_s, log_s, pi1, pi2


def neg_log_partial_likelihood(pred: Predictor, dataset: SurvivalDataset,
                               index: RiskIndex) -> float:
    """Averaged negative log partial likelihood q at the given predictor."""
    eta_s, log_s, _, _ = _sorted_terms(pred.eta, dataset, index)
    terms = index.status_sorted * (eta_s - log_s)
    return float(-terms.sum() / dataset.n)


def grad_eta(pred: Predictor, dataset: SurvivalDataset,
             index: RiskIndex) -> np.ndarray:
    """Gradient of q with respect to eta; components sum to zero."""
    _, _, pi1, _ = _sorted_terms(pred.eta, dataset, index)
    grad_sorted = -(index.status_sorted - pi1) / dataset.n
    out = np.empty(dataset.n)
    out[index.order] = grad_sorted
    return out


def hessian_diag(pred: Predictor, dataset: SurvivalDataset,
                 index: RiskIndex) -> np.ndarray:
    """Diagonal of the Hessian of q with respect to eta (nonnegative)."""
    _, _, pi1, pi2 = _sorted_terms(pred.eta, dataset, index)
    w_sorted = (pi1 - pi2) / dataset.n
    # Each contribution is of the form pi * (1 - pi); stray sign from
    # cancellation is rounding noise only.
    np.maximum(w_sorted, 0.0, out=w_sorted)
    out = np.empty(dataset.n)
    out[index.order] = w_sorted
    return out


def working_response(pred: Predictor, W: np.ndarray, dataset: SurvivalDataset,
                     index: RiskIndex) -> np.ndarray:
    """IRLS pseudo-outcome y = xi + (status - event pressure) / (n * W).

    W is floored at EPS_W so subjects with a nearly empty history
    contribution cannot blow up the division; floored entries get a log
    note because they carry negligible weight downstream anyway.
    """
    _, _, pi1, _ = _sorted_terms(pred.eta, dataset, index)
    bracket = index.status_sorted - pi1
    w_sorted = np.asarray(W, dtype=float)[index.order]
    floored = w_sorted < EPS_W
    if np.any(floored):
        logger.debug("working_response floored %d curvature entries",
                     int(floored.sum()))
    y_sorted = pred.xi[index.order] + bracket / (
        dataset.n * np.maximum(w_sorted, EPS_W))
    out = np.empty(dataset.n)
    out[index.order] = y_sorted
    return out
