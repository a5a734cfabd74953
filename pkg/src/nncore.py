"""Dense-network kernels: forward, reverse-mode gradients, Jacobians, spectra.

Everything here is pure and batched over rows. Callers pass networks and data
in; nothing is read from or written to disk.
"""

import logging
from collections.abc import Callable, Sequence

import numpy as np

from src.enums import Activation
from src.errors import (
    ConvergenceError,
    DimensionMismatchError,
    InsufficientDataError,
    NonFiniteError,
    PreconditionError,
)
from src.models import Layer, Network, Trajectory

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
POWER_TOL = 1e-9
POWER_MAX_ITER = 10_000
CURVATURE_DAMPING = 1e-8


def activate(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind == Activation.TANH:
        return np.tanh(z)
    if kind == Activation.RELU:
        return np.maximum(z, 0.0)
    if kind == Activation.IDENTITY:
        return z.copy()
    if kind == Activation.SOFTMAX:
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    raise ValueError(f"unknown activation {kind!r}")


def log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def activation_vjp(
    kind: Activation, z: np.ndarray, h: np.ndarray, g: np.ndarray
) -> np.ndarray:
    """Pull ``g = dL/dh`` back to ``dL/dz`` row-wise. relu'(0) is taken as 0."""
    if kind == Activation.TANH:
        return g * (1.0 - h * h)
    if kind == Activation.RELU:
        return g * (z > 0.0)
    if kind == Activation.IDENTITY:
        return g
    if kind == Activation.SOFTMAX:
        return h * (g - np.sum(h * g, axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {kind!r}")


def layer_jacobian(layer: Layer, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    """d activation(W x + b) / dx at one sample, shape [out x in]."""
    W = layer.weight
    if layer.activation == Activation.TANH:
        return (1.0 - h * h)[:, None] * W
    if layer.activation == Activation.RELU:
        return (z > 0.0).astype(float)[:, None] * W
    if layer.activation == Activation.IDENTITY:
        return W.copy()
    return (np.diag(h) - np.outer(h, h)) @ W


def _check_inputs(net: Network, X: np.ndarray) -> None:
    if X.shape[-1] != net.input_dim:
        raise DimensionMismatchError(
            f"input has dimension {X.shape[-1]}, network expects {net.input_dim}"
        )
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("input contains non-finite entries")


def propagate(
    net: Network, X: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Batched forward pass over the rows of ``X``.

    Returns ``(states, pre_activations)``; ``states[0]`` is ``X`` itself.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-D batch, got shape {X.shape}")
    _check_inputs(net, X)
    states = [X]
    pres = []
    h = X
    for layer in net.layers:
        z = h @ layer.weight.T + layer.bias
        h = activate(layer.activation, z)
        pres.append(z)
        states.append(h)
    return states, pres


def forward(net: Network, x) -> Trajectory:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError(f"expected a vector, got shape {x.shape}")
    states, pres = propagate(net, x[None, :])
    return Trajectory(
        states=[s[0] for s in states], pre_activations=[z[0] for z in pres]
    )


def apply(net: Network, X: np.ndarray) -> np.ndarray:
    """Network output for a vector or a batch of row vectors."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return propagate(net, X[None, :])[0][-1][0]
    return propagate(net, X)[0][-1]


def head_vjp(
    net: Network, states: list[np.ndarray], pres: list[np.ndarray], g_out: np.ndarray
) -> np.ndarray:
    """Turn a gradient w.r.t. the network output into one w.r.t. the final logits."""
    return activation_vjp(net.layers[-1].activation, pres[-1], states[-1], g_out)


def backprop(
    net: Network,
    states: list[np.ndarray],
    pres: list[np.ndarray],
    dz_last: np.ndarray,
    *,
    per_sample: bool = False,
) -> np.ndarray:
    """Reverse pass from ``dL/dz`` at the final layer.

    With ``per_sample`` the result is ``[n x n_params]`` (one gradient per row);
    otherwise the rows are summed into one flat gradient. Losses fold the
    ``1/n`` of a mean into ``dz_last`` themselves.
    """
    n = dz_last.shape[0]
    dz = dz_last
    blocks: list[np.ndarray] = []
    for k in range(net.depth - 1, -1, -1):
        layer = net.layers[k]
        h_in = states[k]
        if per_sample:
            gW = np.einsum("ni,nj->nij", dz, h_in).reshape(n, -1)
            blocks.append(np.concatenate([gW, dz], axis=1))
        else:
            blocks.append(np.concatenate([(dz.T @ h_in).ravel(), dz.sum(axis=0)]))
        if k > 0:
            dh = dz @ layer.weight
            prev = net.layers[k - 1]
            dz = activation_vjp(prev.activation, pres[k - 1], states[k], dh)
    blocks.reverse()
    return np.concatenate(blocks, axis=1 if per_sample else 0)


def loss_grad(net: Network, loss, batch) -> np.ndarray:
    """Exact gradient of ``loss`` (a ``LossSpec``) over ``batch``."""
    if len(batch) == 0:
        raise InsufficientDataError("cannot take a gradient over an empty batch")
    value, grad = loss.value_and_grad(net, batch)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteError(f"{type(loss).__name__} produced a non-finite value")
    return grad


def finite_difference_grad(
    fn: Callable[[np.ndarray], float], theta: np.ndarray, step: float = FD_STEP
) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        bump = np.zeros_like(theta)
        bump[i] = step
        grad[i] = (fn(theta + bump) - fn(theta - bump)) / (2.0 * step)
    return grad


def finite_difference_jacobian(
    fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = FD_STEP
) -> np.ndarray:
    """Central-difference Jacobian ``[dim f x dim x]`` of a vector function."""
    x = np.asarray(x, dtype=float)
    columns = []
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = step
        diff = np.asarray(fn(x + bump)) - np.asarray(fn(x - bump))
        columns.append(diff / (2 * step))
    return np.stack(columns, axis=-1)


def numerical_loss_grad(net: Network, loss, batch, step: float = FD_STEP) -> np.ndarray:
    def value(theta: np.ndarray) -> float:
        return loss.value(net.with_parameters(theta), batch)

    return finite_difference_grad(value, net.parameters(), step)


def layer_jacobians(net: Network, x) -> list[np.ndarray]:
    traj = forward(net, x)
    jacs = []
    for k, layer in enumerate(net.layers):
        J = layer_jacobian(layer, traj.pre_activations[k], traj.states[k + 1])
        if not np.all(np.isfinite(J)):
            raise NonFiniteError(f"non-finite Jacobian at layer {k}")
        jacs.append(J)
    return jacs


def jacobian(net: Network, x) -> np.ndarray:
    """End-to-end input Jacobian ``d h_L / d x`` by the chain rule."""
    J = np.eye(net.input_dim)
    for layer_J in layer_jacobians(net, x):
        J = layer_J @ J
    return J


def spectral_radius(
    M: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER
) -> float:
    """Largest eigenvalue modulus by orthogonal (subspace) iteration.

    A block of ``min(n, 8)`` vectors is iterated so complex-conjugate and
    ``+/-`` dominant pairs are both captured; the estimate is the largest Ritz
    value modulus. Up to eight dimensions the block spans the space and the
    first Ritz values are exact. Otherwise converged when the dominant Ritz
    pair ``(theta, x)`` has ``||M x - theta x|| <= tol * max(1, |theta|)``
    with ``||x|| = 1``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(
            f"spectral radius needs a square matrix, got {M.shape}"
        )
    if not np.all(np.isfinite(M)):
        raise NonFiniteError("matrix contains non-finite entries")
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    if max_iter < 1:
        raise PreconditionError("max_iter must be at least 1")
    n = M.shape[0]
    block = min(n, 8)
    start = np.random.default_rng(0).standard_normal((n, block))
    Q, _ = np.linalg.qr(start)
    for _ in range(max_iter):
        Z = M @ Q
        values, vectors = np.linalg.eig(Q.T @ Z)
        k = int(np.argmax(np.abs(values)))
        theta = values[k]
        x = Q @ vectors[:, k]
        x = x / np.linalg.norm(x)
        rho = float(abs(theta))
        if block == n:
            return rho  # Q spans the space: Ritz values are eigenvalues
        if np.linalg.norm(M @ x - theta * x) <= tol * max(1.0, rho):
            return rho
        Q, _ = np.linalg.qr(Z)
    raise ConvergenceError(
        f"spectral radius did not settle within {max_iter} iterations"
    )


def curvature_proxy(
    grad_history: Sequence[np.ndarray],
    decay: float,
    damping: float = CURVATURE_DAMPING,
) -> np.ndarray:
    """Diagonal preconditioner: EMA of squared gradients plus ``damping``.

    The average is seeded with the first squared gradient, so a constant
    history yields exactly ``g**2 + damping``.
    """
    if not 0.0 < decay < 1.0:
        raise PreconditionError(f"decay must lie in (0, 1), got {decay}")
    if len(grad_history) == 0:
        raise InsufficientDataError("curvature proxy needs at least one gradient")
    first = np.asarray(grad_history[0], dtype=float)
    G = first * first
    for g in grad_history[1:]:
        g = np.asarray(g, dtype=float)
        G = decay * G + (1.0 - decay) * (g * g)
    return G + damping


def descend(
    net: Network,
    loss,
    batch,
    steps: int,
    lr: float,
    callback: Callable[[int, Network], None] | None = None,
) -> tuple[Network, list[float]]:
    """Plain full-batch gradient descent.

    Returns the trained network and the loss curve, one value before each step
    plus the final value (``steps + 1`` entries). ``callback(step, net)`` sees
    the network before step ``step`` and once more after the last step.
    """
    theta = net.parameters()
    curve: list[float] = []
    for step in range(steps):
        current = net.with_parameters(theta)
        if callback is not None:
            callback(step, current)
        value, grad = loss.value_and_grad(current, batch)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NonFiniteError(
                f"{type(loss).__name__} became non-finite at step {step} "
                f"(lr={lr}, last loss={curve[-1] if curve else 'n/a'})"
            )
        curve.append(float(value))
        theta = theta - lr * grad
    trained = net.with_parameters(theta)
    final = loss.value(trained, batch)
    if not np.isfinite(final):
        raise NonFiniteError(f"{type(loss).__name__} became non-finite after training")
    curve.append(float(final))
    if callback is not None:
        callback(steps, trained)
    return trained, curve
