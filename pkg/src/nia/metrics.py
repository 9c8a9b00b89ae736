"""Bernoulli KL machinery and loss-gap bound calculators.

The loss of any logistic predictor decomposes against the optimum of its
feature subspace as L(q) = L(p*) + D(p*||q); the KL term dominates twice the
mean squared probability gap. These identities, together with window
coverage, yield the residual and convergence bounds computed here.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import rel_entr

from .data import Dataset
from .errors import DomainError, InvalidDimension, LengthMismatch
from .logistic import bce_loss, sigmoid, stable_softplus


def _check_probability(name: str, value: np.ndarray) -> None:
    if np.any(value < 0.0) or np.any(value > 1.0) or not np.all(np.isfinite(value)):
        raise DomainError(f"{name} must lie in [0, 1]")


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q).

    Uses the 0 log 0 = 0 convention; returns +inf only when q is degenerate
    and p places mass where q does not.
    """
    pa = np.float64(p)
    qa = np.float64(q)
    _check_probability("p", pa)
    _check_probability("q", qa)
    return float(rel_entr(pa, qa) + rel_entr(1.0 - pa, 1.0 - qa))


def bernoulli_kl_pointwise(p_col, q_col) -> np.ndarray:
    """Elementwise Bernoulli KL between two probability columns."""
    p = np.asarray(p_col, dtype=np.float64).ravel()
    q = np.asarray(q_col, dtype=np.float64).ravel()
    if p.shape[0] != q.shape[0]:
        raise LengthMismatch(f"{p.shape[0]} vs {q.shape[0]} probabilities")
    if p.shape[0] == 0:
        raise LengthMismatch("empty inputs")
    _check_probability("p_col", p)
    _check_probability("q_col", q)
    return rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q)


def expected_kl(p_col, q_col) -> float:
    """Mean pointwise Bernoulli KL between two probability columns."""
    return float(np.mean(bernoulli_kl_pointwise(p_col, q_col)))


def expected_kl_from_logits(z_p, z_q) -> float:
    """Expected Bernoulli KL with both columns given as logits.

    Pointwise KL(sigma(a) || sigma(b)) = sigma(a)(a - b) - softplus(a)
    + softplus(b), which avoids forming probabilities near 0 or 1.
    """
    a = np.asarray(z_p, dtype=np.float64).ravel()
    b = np.asarray(z_q, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise LengthMismatch(f"{a.shape[0]} vs {b.shape[0]} logits")
    return float(np.mean(sigmoid(a) * (a - b) - stable_softplus(a) + stable_softplus(b)))


def pinsker_gap(p_col, q_col) -> float:
    """expected_kl minus twice the mean squared probability difference.

    Nonnegative up to rounding for all probability columns.
    """
    p = np.asarray(p_col, dtype=np.float64).ravel()
    q = np.asarray(q_col, dtype=np.float64).ravel()
    if p.shape[0] != q.shape[0]:
        raise LengthMismatch(f"{p.shape[0]} vs {q.shape[0]} probabilities")
    return expected_kl(p, q) - 2.0 * float(np.mean((p - q) ** 2))


def verify_decomposition(
    dataset: Dataset,
    star_logits,
    q_logits,
    feature_set: Sequence[int],
) -> float:
    """Empirical residual |L(q) - L(p*) - D(p*||q)|.

    ``star_logits`` must come from a converged unregularized fit over
    ``feature_set`` and ``q_logits`` from any linear predictor on the same
    columns; the residual then scales with the solver's gradient tolerance
    (exactly 0 at exact stationarity).
    """
    for l in feature_set:
        if not 1 <= int(l) <= dataset.d:
            raise InvalidDimension(f"feature index {l} outside 1..{dataset.d}")
    zs = np.asarray(star_logits, dtype=np.float64).ravel()
    zq = np.asarray(q_logits, dtype=np.float64).ravel()
    if zs.shape[0] != dataset.n or zq.shape[0] != dataset.n:
        raise LengthMismatch("logit columns must match the dataset row count")
    lq = bce_loss(zq, dataset.labels)
    ls = bce_loss(zs, dataset.labels)
    return abs(lq - ls - expected_kl_from_logits(zs, zq))


def residual_bound_rhs(b_g: float, b_x: float, k: int, epsilon: float) -> float:
    """B_g * B_X * sqrt(k * epsilon / 2) for a covered path of length k."""
    if b_g < 0 or b_x < 0 or k < 0 or epsilon < 0:
        raise InvalidDimension("residual bound arguments must be nonnegative")
    return float(b_g * b_x * np.sqrt(k * epsilon / 2.0))


def convergence_bound_rhs(b_pstar: float, b_x: float, m: int, depth: int) -> float:
    """B_pstar * B_X * M / sqrt(D) for a depth-D path with window M."""
    if m < 1:
        raise InvalidDimension(f"window must be >= 1, got {m}")
    if depth < m:
        raise InvalidDimension(f"depth {depth} smaller than window {m}")
    if b_pstar < 0 or b_x < 0:
        raise InvalidDimension("bound factors must be nonnegative")
    return float(b_pstar * b_x * m / np.sqrt(depth))


class StableBlock(NamedTuple):
    index: int
    drop: float


def stable_block(losses, m: int) -> StableBlock:
    """Find the disjoint length-m block with the smallest total loss drop.

    The path is split into K = floor(D / m) leading blocks; block b covers
    path positions (b-1)*m+1 .. b*m (1-based) and its drop is the loss at
    its first agent minus the loss at its last. Returns the 1-based index of
    the minimal block and its drop; ties go to the earliest block. By
    pigeonhole the returned drop is at most losses[0] / K plus solver slack.
    """
    arr = np.asarray(losses, dtype=np.float64).ravel()
    if m < 1 or arr.shape[0] < m:
        raise InvalidDimension(f"window {m} invalid for {arr.shape[0]} losses")
    k_blocks = arr.shape[0] // m
    best_idx, best_drop = 1, np.inf
    for b in range(k_blocks):
        drop = float(arr[b * m] - arr[b * m + m - 1])
        if drop < best_drop:
            best_idx, best_drop = b + 1, drop
    return StableBlock(best_idx, best_drop)


def feature_second_moment_bound(features) -> float:
    """Empirical B_X: max over columns of sqrt(mean(x_l^2))."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise InvalidDimension("need a nonempty 2-d feature matrix")
    return float(np.sqrt(np.max(np.mean(x * x, axis=0))))


@dataclass(frozen=True)
class TheoryReport:
    """Measured bound ingredients and the resulting right-hand sides.

    ``b_x`` is the empirical feature second-moment bound, ``b_g`` the l1
    norm of the comparator's coefficients (the global fit when comparing to
    the full-feature optimum), ``epsilon`` a block loss drop.
    """

    b_x: float
    b_g: float
    m: int
    depth: int
    epsilon: float
    rhs_residual_bound: float
    rhs_convergence_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def build_theory_report(
    b_x: float, b_g: float, m: int, depth: int, epsilon: float
) -> TheoryReport:
    """Assemble a TheoryReport, computing both bound right-hand sides."""
    epsilon = max(epsilon, 0.0)
    return TheoryReport(
        b_x=b_x,
        b_g=b_g,
        m=m,
        depth=depth,
        epsilon=epsilon,
        rhs_residual_bound=residual_bound_rhs(b_g, b_x, m, epsilon),
        rhs_convergence_bound=convergence_bound_rhs(b_g, b_x, m, depth),
    )
