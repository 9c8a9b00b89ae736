"""Hard-instance generator and closed-form lower-bound analytics.

The generated distribution chains k standard-normal latents through a
differencing map (x_1 = Z_1, x_i = Z_i - Z_{i-1}), labels are Bernoulli of
sigmoid(Z_k), and the optimal logit is the feature prefix sum Z_k. Analytics
cover the per-pass relevance sets, the variance-minimizing pass-predictor
coefficients, the optimal logit scaling factor, and the 1/(p+1) excess-loss
shape these imply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import Dataset
from .errors import InvalidDimension, QuadratureFailure
from .logistic import sigmoid, stable_softplus

DEFAULT_QUADRATURE_NODES = 200
_BISECTION_WIDTH = 1e-12


@dataclass(frozen=True)
class HardInstanceSpec:
    """Latent dimension, sample count, and RNG seed for the generator."""

    k: int
    n: int
    seed: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise InvalidDimension(f"latent dimension must be >= 2, got {self.k}")
        if self.n < 1:
            raise InvalidDimension(f"sample count must be >= 1, got {self.n}")
        if self.seed < 0:
            raise InvalidDimension("seed must be a non-negative integer")


def _uniform_open(rng: np.random.Generator, shape) -> np.ndarray:
    # Shift the 53-bit uniform off 0 so the inverse CDF stays finite.
    return rng.random(shape) + 2.0 ** -54


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normals via the inverse-CDF map (scipy's ndtri rational
    approximation) applied to counter-based uniforms; bit-reproducible for a
    fixed generator stream."""
    return ndtri(_uniform_open(rng, shape))


def generate_hard_instance(spec: HardInstanceSpec) -> Dataset:
    """Sample the chained-latent dataset for ``spec``.

    Draw order is fixed (first the n x k latent block, then n label
    uniforms) on a Philox stream keyed by the seed, so bytes are reproducible
    from (seed, k, n) across platforms.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    latents = standard_normals(rng, (spec.n, spec.k))
    features = np.empty_like(latents)
    features[:, 0] = latents[:, 0]
    features[:, 1:] = latents[:, 1:] - latents[:, :-1]
    optimal = latents[:, -1]
    labels = (_uniform_open(rng, spec.n) < sigmoid(optimal)).astype(np.float64)
    return Dataset(
        features=features,
        labels=labels,
        latents=latents,
        optimal_logits=optimal,
    )


def relevance_set(k: int, p: int) -> frozenset[int]:
    """Feature indices the end-of-pass-p optimal predictor can depend on:
    the last p features {k-p+1, ..., k}."""
    if k < 2:
        raise InvalidDimension(f"need k >= 2, got {k}")
    if not 1 <= p <= k:
        raise InvalidDimension(f"pass index {p} outside 1..{k}")
    return frozenset(range(k - p + 1, k + 1))


@dataclass(frozen=True)
class PassPredictor:
    """Linear predictor over the pass-p relevance set in the scaled form
    z = c * (Z_k + xi / sqrt(p)).

    ``coefficients`` are c_0..c_{p-1} on features x_k down to x_{k-p+1};
    ``residual_variance`` is Var(z - c Z_k) and ``noise_variance_scaled`` is
    its p / c^2 multiple (the variance of xi), which equals 1 at the
    variance-minimizing coefficients.
    """

    p: int
    c: float
    coefficients: np.ndarray
    residual_variance: float
    noise_variance_scaled: float


def optimal_pass_coefficients(p: int, c: float) -> PassPredictor:
    """Variance-minimizing coefficients for a fixed leading scale c.

    With alpha_j the consecutive coefficient differences, the residual
    variance sum(alpha_j^2) + (sum(alpha_j) + c)^2 is minimized by equal
    alpha_j summing to -c (p-1) / p, i.e. c_j = c (1 - j/p), giving residual
    variance c^2 / p.
    """
    if p < 1:
        raise InvalidDimension(f"pass index must be >= 1, got {p}")
    if not np.isfinite(c):
        raise InvalidDimension("scale c must be finite")
    j = np.arange(p, dtype=np.float64)
    coeffs = c * (1.0 - j / p)
    residual_variance = c * c / p
    scaled = p * residual_variance / (c * c) if c != 0.0 else float("nan")
    return PassPredictor(
        p=p,
        c=float(c),
        coefficients=coeffs,
        residual_variance=residual_variance,
        noise_variance_scaled=scaled,
    )


def numeric_pass_coefficients(p: int, c: float) -> tuple[float, float]:
    """Brute-force check of the closed form: minimize the residual variance
    over the p-1 coefficient differences numerically (coarse grid on the
    common value followed by local descent on the full vector). Returns
    (sum of differences, minimal residual variance)."""
    from scipy.optimize import minimize

    if p < 1:
        raise InvalidDimension(f"pass index must be >= 1, got {p}")
    if p == 1:
        return 0.0, c * c

    def variance(alpha: np.ndarray) -> float:
        s = float(np.sum(alpha))
        return float(np.sum(alpha * alpha) + (s + c) ** 2)

    def variance_grad(alpha: np.ndarray) -> np.ndarray:
        s = float(np.sum(alpha))
        return 2.0 * alpha + 2.0 * (s + c)

    # Coarse grid over equal-value starts, then unconstrained descent.
    best = None
    for a0 in np.linspace(-2.0 * abs(c) - 1.0, 2.0 * abs(c) + 1.0, 41):
        start = np.full(p - 1, a0)
        res = minimize(
            variance, start, jac=variance_grad, method="BFGS",
            options={"gtol": 1e-13, "maxiter": 500},
        )
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None
    return float(np.sum(best.x)), float(best.fun)


def gauss_hermite_expectation(f, sd: float = 1.0, nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """E[f(X)] for X ~ N(0, sd^2) by Gauss-Hermite quadrature."""
    t, w = np.polynomial.hermite.hermgauss(nodes)
    return float(np.sum(w * f(np.sqrt(2.0) * sd * t)) / np.sqrt(np.pi))


def sigmoid_moment(u: float, nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """h(u) = E[X sigmoid(X)] for X ~ N(0, u^2); strictly increasing in u."""
    return gauss_hermite_expectation(lambda x: x * sigmoid(x), sd=u, nodes=nodes)


def scaling_gradient(c: float, p: int, nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """Derivative in c of the loss of z = c(Z + xi/sqrt(p)) with unit-variance
    xi: -E[Z sigmoid(Z)] + E[S sigmoid(c S)] where S ~ N(0, 1 + 1/p)."""
    if p < 1:
        raise InvalidDimension(f"pass index must be >= 1, got {p}")
    s_sd = float(np.sqrt(1.0 + 1.0 / p))
    first = gauss_hermite_expectation(lambda x: x * sigmoid(x), sd=1.0, nodes=nodes)
    second = gauss_hermite_expectation(lambda x: x * sigmoid(c * x), sd=s_sd, nodes=nodes)
    return -first + second


def optimal_scaling_factor(p: int, nodes: int = DEFAULT_QUADRATURE_NODES) -> float:
    """Loss-minimizing scale c for the pass-p predictor form, found by
    bisection of the loss derivative on (0, 1).

    The derivative must be negative at 0 and positive at 1; a bracket that
    fails to change sign raises QuadratureFailure instead of being patched,
    since it would falsify the scaling analysis.
    """
    lo, hi = 0.0, 1.0
    g_lo = scaling_gradient(lo, p, nodes)
    g_hi = scaling_gradient(hi, p, nodes)
    if not (g_lo < 0.0 < g_hi):
        raise QuadratureFailure(
            f"loss derivative does not bracket a root on [0, 1]: g(0)={g_lo:.3e}, g(1)={g_hi:.3e}"
        )
    while hi - lo > _BISECTION_WIDTH:
        mid = 0.5 * (lo + hi)
        if scaling_gradient(mid, p, nodes) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NoiseComparison:
    """Common-random-number Monte Carlo losses at two noise variances, with
    the standard error of their paired difference."""

    loss_small: float
    loss_large: float
    std_error: float

    @property
    def margin_se(self) -> float:
        """Loss increase in units of its standard error."""
        if self.std_error == 0.0:
            return 0.0
        return (self.loss_large - self.loss_small) / self.std_error


def noise_monotonicity_check(
    c: float,
    v_small: float,
    v_large: float,
    n_mc: int,
    seed: int,
) -> NoiseComparison:
    """Estimate the loss of z = c Z + xi at noise variances v_small and
    v_large with a shared (Z, xi) stream.

    The per-sample loss is the label-conditional mean -sigmoid(Z) z
    + softplus(z), so the only Monte Carlo noise comes from (Z, xi). Equal
    variances give exactly equal losses; a larger variance gives a strictly
    larger loss in expectation.
    """
    if not 0.0 <= v_small <= v_large:
        raise InvalidDimension(f"need 0 <= v_small <= v_large, got {v_small}, {v_large}")
    if n_mc < 2:
        raise InvalidDimension("need at least two Monte Carlo samples")
    rng = np.random.Generator(np.random.Philox(key=seed))
    z_lat = standard_normals(rng, n_mc)
    xi = standard_normals(rng, n_mc)
    sig = sigmoid(z_lat)

    def conditional_loss(z: np.ndarray) -> np.ndarray:
        return -sig * z + stable_softplus(z)

    small = conditional_loss(c * z_lat + np.sqrt(v_small) * xi)
    large = conditional_loss(c * z_lat + np.sqrt(v_large) * xi)
    diff = large - small
    return NoiseComparison(
        loss_small=float(np.mean(small)),
        loss_large=float(np.mean(large)),
        std_error=float(np.std(diff, ddof=1) / np.sqrt(n_mc)),
    )


def predicted_excess_curve(k: int, passes) -> np.ndarray:
    """Unnormalized excess-loss shape 1/(p+1) per pass; experiments fit a
    single multiplicative constant against measured values."""
    if k < 2:
        raise InvalidDimension(f"need k >= 2, got {k}")
    ps = np.asarray(list(passes), dtype=np.float64)
    if ps.size == 0 or np.any(ps < 1):
        raise InvalidDimension("pass indices must all be >= 1")
    return 1.0 / (ps + 1.0)
