"""Binary cross-entropy evaluation and damped-Newton logistic regression.

All losses and gradients are empirical means over the supplied rows. The
solver is a plain Newton iteration with backtracking line search; per-agent
problems in this package are low-dimensional, so Newton reaches gradient
sup-norms near machine precision, which the identity-verification suites
require.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, NonFinite

# Fits whose weight norm passes this cap are reported unconverged; empirical
# BCE has no finite minimizer on separable data.
WEIGHT_NORM_CAP = 1e4

_ARMIJO_C1 = 1e-4
_MIN_STEP = 1e-12


def stable_softplus(z):
    """log(1 + exp(z)) without overflow for any finite z.

    Computed as max(z, 0) + log1p(exp(-|z|)), so the identity
    softplus(z) - softplus(-z) = z holds exactly by branch structure.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return out if out.ndim else float(out)


def sigmoid(z):
    """1 / (1 + exp(-z)) evaluated on the non-overflowing branch."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def bce_loss(logits, labels) -> float:
    """Mean binary cross-entropy: (1/n) sum softplus(z_i) - y_i z_i."""
    z = np.asarray(logits, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if z.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{z.shape[0]} logits vs {y.shape[0]} labels")
    if z.shape[0] == 0:
        raise LengthMismatch("empty inputs")
    return float(np.mean(stable_softplus(z) - y * z))


@dataclass(frozen=True)
class FitOptions:
    """Termination and damping parameters for fit_logistic.

    ``ridge`` adds 0.5 * ridge * ||theta||^2 to the objective; identity
    suites must keep it at 0 because exact residual orthogonality needs the
    unregularized stationarity condition. ``intercept`` appends an implicit
    all-ones column; the bias is then the last entry of the fitted weights.
    """

    grad_tol: float = 1e-10
    max_iters: int = 100
    ridge: float = 0.0
    backtrack: float = 0.5
    init_step: float = 1.0
    intercept: bool = False

    def __post_init__(self) -> None:
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must be in (0, 1)")
        if not self.init_step > 0:
            raise ValueError("init_step must be positive")


@dataclass(frozen=True)
class FitResult:
    weights: np.ndarray
    loss: float
    grad_norm: float
    iterations: int
    converged: bool
    message: str = ""
    l1_norm: float = field(init=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "l1_norm", float(np.abs(w).sum()))


def predict_logits(weights, design) -> np.ndarray:
    """Row-wise inner products design @ weights."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    x = np.asarray(design, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"design {x.shape} incompatible with {w.shape[0]} weights")
    return x @ w


def residual_moments(design, logits, labels) -> np.ndarray:
    """Per-column empirical mean of x_l * (sigmoid(z) - y).

    At an exact unregularized BCE optimum these moments vanish; they are the
    gradient components of the empirical loss.
    """
    x = np.asarray(design, dtype=np.float64)
    z = np.asarray(logits, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if x.ndim != 2 or x.shape[0] != z.shape[0] or z.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"design {x.shape}, logits {z.shape[0]}, labels {y.shape[0]} do not align"
        )
    return x.T @ (sigmoid(z) - y) / x.shape[0]


def _objective(z: np.ndarray, y: np.ndarray, theta: np.ndarray, ridge: float) -> float:
    val = float(np.mean(stable_softplus(z) - y * z))
    if ridge > 0:
        val += 0.5 * ridge * float(theta @ theta)
    return val


def fit_logistic(design, labels, opts: FitOptions | None = None) -> FitResult:
    """Minimize empirical BCE over linear logits on the design columns.

    Damped Newton from the zero vector: solve H step = -grad, backtrack until
    the Armijo condition holds (with a rounding-slack term so steps near
    machine precision are not rejected), stop when the gradient sup-norm
    reaches ``grad_tol``. A zero-column design converges immediately at the
    log(2) baseline. Singular Hessians fall back to a least-squares step; if
    no progress is possible the result is returned with converged=False and
    a diagnostic message rather than raising.
    """
    opts = opts or FitOptions()
    x = np.asarray(design, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} rows vs {y.shape[0]} labels")
    if x.shape[0] < 1:
        raise DimensionMismatch("need at least one row")
    if not np.isfinite(x).all() or not np.isfinite(y).all():
        raise NonFinite("design or labels contain non-finite values")

    if opts.intercept:
        x = np.column_stack([x, np.ones(x.shape[0])])
    n, m = x.shape
    if m == 0:
        # No information: predict the prior (zero logits, log 2 loss).
        return FitResult(
            weights=np.zeros(0),
            loss=bce_loss(np.zeros(n), y),
            grad_norm=0.0,
            iterations=0,
            converged=True,
        )

    theta = np.zeros(m)
    z = np.zeros(n)
    eye = np.eye(m)
    for it in range(opts.max_iters + 1):
        p = sigmoid(z)
        grad = x.T @ (p - y) / n + opts.ridge * theta
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= opts.grad_tol:
            return FitResult(theta, bce_loss(z, y), grad_norm, it, True)
        if float(np.linalg.norm(theta)) > WEIGHT_NORM_CAP:
            return FitResult(
                theta, bce_loss(z, y), grad_norm, it, False,
                message=f"weight norm exceeded {WEIGHT_NORM_CAP:g}; data may be separable",
            )
        if it == opts.max_iters:
            break

        w = p * (1.0 - p)
        hess = (x * w[:, None]).T @ x / n + opts.ridge * eye
        try:
            step = np.linalg.solve(hess, -grad)
            if not np.isfinite(step).all():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        slope = float(grad @ step)
        if slope >= 0:
            # Fall back to steepest descent when the solve direction fails.
            step = -grad
            slope = -float(grad @ grad)

        f0 = _objective(z, y, theta, opts.ridge)
        dz = x @ step
        t = opts.init_step
        slack = 4.0 * np.finfo(np.float64).eps * (1.0 + abs(f0))
        accepted = False
        while t >= _MIN_STEP:
            cand = theta + t * step
            zc = z + t * dz
            if _objective(zc, y, cand, opts.ridge) <= f0 + _ARMIJO_C1 * t * slope + slack:
                theta, z = cand, zc
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            return FitResult(
                theta, bce_loss(z, y), grad_norm, it, False,
                message="line search stalled; Hessian may be singular",
            )

    p = sigmoid(z)
    grad = x.T @ (p - y) / n + opts.ridge * theta
    return FitResult(
        theta, bce_loss(z, y), float(np.max(np.abs(grad))), opts.max_iters, False,
        message="max_iters reached",
    )
