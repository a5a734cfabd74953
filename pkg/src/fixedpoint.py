"""Fixed-point residual dynamics of square networks.

Residual training, forward iteration with optional noise, fixed-point
enumeration, contraction and perturbation analysis, curvature-preconditioned
steps and weight-budget Lagrangian training.
"""

import logging
from collections.abc import Sequence

import numpy as np

from src.enums import Activation
from src.errors import DimensionMismatchError, NonFiniteError, PreconditionError
from src.losses import ResidualLoss
from src.models import (
    Batch,
    ContractionReport,
    FixedPointEnumeration,
    FixedPointReport,
    IterationResult,
    LagrangianResult,
    LagrangianState,
    Network,
    NoiseSpec,
    PerturbationReport,
    PreconditionedStep,
    TrainingResult,
)
from src.nncore import (
    POWER_MAX_ITER,
    POWER_TOL,
    apply,
    descend,
    jacobian,
    layer_jacobians,
    spectral_radius,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DIVERGENCE_BOUND = 1e12
MERGE_FACTOR = 10.0


def _require_square(net: Network) -> None:
    if not net.is_square:
        raise DimensionMismatchError(
            f"fixed-point use needs a square network, got "
            f"{net.input_dim}->{net.output_dim}"
        )


def _as_batch(data) -> Batch:
    if isinstance(data, Batch):
        return data
    return Batch.of(data)


def residual(net: Network, x) -> tuple[np.ndarray, float]:
    """``e = f(x) - x`` and its Euclidean norm."""
    _require_square(net)
    x = np.asarray(x, dtype=float)
    e = apply(net, x) - x
    return e, float(np.linalg.norm(e))


def mean_residual_norm(net: Network, inputs) -> float:
    _require_square(net)
    X = _as_batch(inputs).inputs
    return float(np.mean(np.linalg.norm(apply(net, X) - X, axis=1)))


def affine_fixed_point(net: Network) -> np.ndarray:
    """Exact fixed point of a single identity layer, ``(I - A)^-1 b``."""
    _require_square(net)
    if net.depth != 1 or net.layers[0].activation != Activation.IDENTITY:
        raise PreconditionError("closed-form fixed point needs one affine layer")
    A, b = net.layers[0].weight, net.layers[0].bias
    return np.linalg.solve(np.eye(net.input_dim) - A, b)


def error_ratios(path: Sequence[np.ndarray], x_star) -> list[float]:
    """Successive ``||e_{t+1}|| / ||e_t||`` along a path; zero errors end the list."""
    x_star = np.asarray(x_star, dtype=float)
    errors = [float(np.linalg.norm(np.asarray(h) - x_star)) for h in path]
    ratios = []
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev == 0.0:
            break
        ratios.append(cur / prev)
    return ratios


def _report(
    net: Network, point: np.ndarray, iterations: int, seeds: list[np.ndarray]
) -> FixedPointReport:
    _, norm = residual(net, point)
    radius = spectral_radius(jacobian(net, point))
    return FixedPointReport(
        point=point,
        residual_norm=norm,
        jacobian_radius=radius,
        stable=radius < 1.0,
        iterations_used=iterations,
        basin_seeds=seeds,
    )


def iterate(
    net: Network,
    h0,
    max_t: int,
    tol: float = DEFAULT_TOL,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    divergence_bound: float = DIVERGENCE_BOUND,
) -> IterationResult:
    """Run ``h_{t+1} = f(h_t) + delta_t`` until the step is below ``tol``.

    Divergence (a non-finite state or a norm above ``divergence_bound``) is a
    verdict on the result, not an exception.
    """
    _require_square(net)
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    h = np.asarray(h0, dtype=float)
    if h.shape != (net.input_dim,):
        raise DimensionMismatchError(
            f"start has shape {h.shape}, expected ({net.input_dim},)"
        )
    seed_point = h.copy()
    shift = None
    sigma = 0.0
    if noise is not None:
        sigma = noise.sigma
        if noise.shift is not None:
            shift = np.asarray(noise.shift, dtype=float)
            if shift.shape != h.shape:
                raise DimensionMismatchError("noise shift must match the state width")
        if sigma > 0 and rng is None:
            raise PreconditionError("noisy iteration needs an rng")

    path = [h]
    for t in range(max_t):
        nxt = apply(net, h)
        if shift is not None:
            nxt = nxt + shift
        if sigma > 0:
            nxt = nxt + sigma * rng.standard_normal(h.shape[0])
        path.append(nxt)
        if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt) > divergence_bound:
            return IterationResult(
                path=path, converged=False, diverged=True, steps=t + 1
            )
        if np.linalg.norm(nxt - h) < tol:
            report = _report(net, nxt, t + 1, [seed_point])
            return IterationResult(
                path=path, converged=True, diverged=False, steps=t + 1, report=report
            )
        h = nxt
    return IterationResult(path=path, converged=False, diverged=False, steps=max_t)


def enumerate_fixed_points(
    net: Network,
    init_grid: Sequence,
    tol: float = DEFAULT_TOL,
    max_t: int = 10_000,
    merge_radius: float | None = None,
    divergence_bound: float = DIVERGENCE_BOUND,
) -> FixedPointEnumeration:
    """Iterate from every start and merge limits closer than ``merge_radius``.

    Limits are merged in lexicographic order so the result does not depend on
    the order of ``init_grid``.
    """
    _require_square(net)
    radius = MERGE_FACTOR * tol if merge_radius is None else merge_radius
    limits: list[tuple[np.ndarray, np.ndarray, int]] = []
    divergent: list[np.ndarray] = []
    unconverged: list[np.ndarray] = []
    for start in init_grid:
        start = np.atleast_1d(np.asarray(start, dtype=float))
        result = iterate(net, start, max_t, tol, divergence_bound=divergence_bound)
        if result.converged:
            limits.append((result.report.point, start, result.report.iterations_used))
        elif result.diverged:
            divergent.append(start)
        else:
            unconverged.append(start)

    limits.sort(key=lambda item: (tuple(item[0]), tuple(item[1])))
    clusters: list[list[tuple[np.ndarray, np.ndarray, int]]] = []
    for item in limits:
        for cluster in clusters:
            if np.linalg.norm(item[0] - cluster[0][0]) <= radius:
                cluster.append(item)
                break
        else:
            clusters.append([item])

    reports = []
    for cluster in clusters:
        point, _, iterations = cluster[0]
        seeds = sorted((item[1] for item in cluster), key=tuple)
        reports.append(_report(net, point, iterations, seeds))
    divergent.sort(key=tuple)
    unconverged.sort(key=tuple)
    return FixedPointEnumeration(
        fixed_points=reports,
        divergent_seeds=divergent,
        unconverged_seeds=unconverged,
        merge_radius=radius,
    )


def train_residual(net: Network, data, steps: int, lr: float) -> TrainingResult:
    """Gradient descent on the mean squared residual ``E ||f(x) - x||^2``."""
    _require_square(net)
    batch = _as_batch(data)
    trained, curve = descend(net, ResidualLoss(), batch, steps, lr)
    if curve[-1] > curve[0]:
        logger.warning(
            "residual training ended above its start (%.3e > %.3e); lower lr=%s",
            curve[-1],
            curve[0],
            lr,
        )
    return TrainingResult(network=trained, loss_curve=curve)


def lagrangian_gradient(
    net: Network, data, multiplier: float, budget: float, penalty: float = 0.0
) -> tuple[np.ndarray, float]:
    """``(dL/dtheta, g)`` for ``L = E + lambda*g + penalty/2 * g^2``.

    ``g = ||theta||^2 - budget`` is also ``dL/dlambda``.
    """
    theta = net.parameters()
    _, grad = ResidualLoss().value_and_grad(net, _as_batch(data))
    g = float(theta @ theta) - budget
    coeff = multiplier + penalty * g
    if coeff != 0.0:
        grad = grad + 2.0 * coeff * theta
    return grad, g


def lagrangian_train(
    net: Network,
    data,
    budget: float,
    steps: int,
    lr_theta: float,
    lr_lambda: float,
    *,
    penalty: float = 0.0,
    step_tol: float = 1e-5,
    freeze_multiplier: bool = False,
    divergence_bound: float = DIVERGENCE_BOUND,
) -> LagrangianResult:
    """Alternate theta-descent on ``L`` with lambda-ascent on ``g``.

    Stops once ``||(dL/dtheta, g)||`` drops below ``step_tol``. With
    ``freeze_multiplier`` lambda stays at 0 and the run takes every step, which
    reproduces ``train_residual`` exactly when ``penalty`` is 0.
    """
    _require_square(net)
    if budget <= 0:
        raise PreconditionError(f"weight budget must be positive, got {budget}")
    batch = _as_batch(data)
    loss = ResidualLoss()
    theta = net.parameters()
    multiplier = 0.0
    history: list[LagrangianState] = []
    converged = False
    stationarity = float("inf")

    for step in range(steps + 1):
        energy, grad = loss.value_and_grad(net.with_parameters(theta), batch)
        if not np.isfinite(energy):
            raise NonFiniteError(f"energy became non-finite at step {step}")
        g = float(theta @ theta) - budget
        history.append(
            LagrangianState(
                energy=energy, constraint_value=g, multiplier=multiplier, step=step
            )
        )
        coeff = multiplier + penalty * g
        if coeff != 0.0:
            grad = grad + 2.0 * coeff * theta
        stationarity = float(np.sqrt(grad @ grad + g * g))
        if not freeze_multiplier and stationarity < step_tol:
            converged = True
            break
        if step == steps:
            break
        theta = theta - lr_theta * grad
        if not freeze_multiplier:
            multiplier = multiplier + lr_lambda * (float(theta @ theta) - budget)
            if not np.isfinite(multiplier) or abs(multiplier) > divergence_bound:
                raise NonFiniteError(
                    f"multiplier overflowed at step {step} (lambda={multiplier})"
                )

    if not converged and not freeze_multiplier:
        logger.warning(
            "Lagrangian run stopped after %d steps with stationarity %.3e",
            steps,
            stationarity,
        )
    return LagrangianResult(
        network=net.with_parameters(theta),
        history=history,
        budget=budget,
        converged=converged,
        stationarity_norm=stationarity,
    )


def contraction_report(
    net: Network,
    x_star,
    tol: float = DEFAULT_TOL,
    power_tol: float = POWER_TOL,
    power_max_iter: int = POWER_MAX_ITER,
    merge_factor: float = MERGE_FACTOR,
) -> ContractionReport:
    """Spectral radius of ``J_f(x*)`` plus per-layer radii and operator norms.

    ``x_star`` must have a residual within ``merge_factor * tol``.
    """
    _require_square(net)
    x_star = np.asarray(x_star, dtype=float)
    _, norm = residual(net, x_star)
    if norm > merge_factor * tol:
        raise PreconditionError(
            f"residual {norm:.3e} at x_star exceeds {merge_factor * tol:.1e}; "
            "not a fixed point"
        )
    layer_J = layer_jacobians(net, x_star)
    J = np.eye(net.input_dim)
    for Jk in layer_J:
        J = Jk @ J
    radius = spectral_radius(J, power_tol, power_max_iter)
    return ContractionReport(
        point=x_star,
        residual_norm=norm,
        radius=radius,
        stable=radius < 1.0,
        layer_radii=[
            spectral_radius(Jk, power_tol, power_max_iter)
            if Jk.shape[0] == Jk.shape[1]
            else None
            for Jk in layer_J
        ],
        layer_norms=[float(np.linalg.norm(Jk, 2)) for Jk in layer_J],
    )


def perturbation_accel(
    net: Network,
    perturbation: Network,
    eps: float,
    x_star,
    power_tol: float = POWER_TOL,
    power_max_iter: int = POWER_MAX_ITER,
) -> PerturbationReport:
    """Compare ``rho(J_f)`` with ``rho(J_f + eps * J_g)`` at ``x_star``."""
    _require_square(net)
    _require_square(perturbation)
    if eps < 0:
        raise PreconditionError(f"eps must be non-negative, got {eps}")
    if perturbation.input_dim != net.input_dim:
        raise DimensionMismatchError("perturbation map must match the network width")
    J_f = jacobian(net, x_star)
    J_g = jacobian(perturbation, x_star)
    rho_base = spectral_radius(J_f, power_tol, power_max_iter)
    rho_perturbed = spectral_radius(J_f + eps * J_g, power_tol, power_max_iter)
    return PerturbationReport(
        rho_base=rho_base,
        rho_perturbed=rho_perturbed,
        eps=eps,
        accelerated=rho_perturbed < rho_base,
    )


def preconditioned_step(
    theta,
    grad,
    G,
    lr: float,
    hessian: np.ndarray | None = None,
    power_tol: float = POWER_TOL,
    power_max_iter: int = POWER_MAX_ITER,
) -> PreconditionedStep:
    """``theta - lr * G^-1 grad`` with a diagonal ``G``.

    Given the Hessian of a quadratic loss, also reports the effective
    iteration matrix ``I - lr * G^-1 H`` and its spectral radius.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    G = np.asarray(G, dtype=float)
    if G.shape != theta.shape or grad.shape != theta.shape:
        raise DimensionMismatchError("theta, grad and G must share one shape")
    if np.any(~(G > 0.0)):
        raise PreconditionError("preconditioner entries must be strictly positive")
    new_theta = theta - lr * grad / G
    if hessian is None:
        return PreconditionedStep(theta=new_theta)
    H = np.asarray(hessian, dtype=float)
    J_eff = np.eye(theta.size) - lr * (H / G[:, None])
    return PreconditionedStep(
        theta=new_theta,
        effective_jacobian=J_eff,
        effective_radius=spectral_radius(J_eff, power_tol, power_max_iter),
    )


def newton_step(theta, grad, hessian) -> np.ndarray:
    """Curvature-exact step ``theta - H^-1 grad``."""
    theta = np.asarray(theta, dtype=float)
    return theta - np.linalg.solve(np.asarray(hessian, dtype=float), grad)
