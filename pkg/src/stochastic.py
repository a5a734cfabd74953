"""Monte Carlo checks of sum statistics, union bounds and noisy fixed points."""

import logging
import math
from collections.abc import Sequence

import numpy as np

from src.enums import Activation
from src.errors import (
    BoundViolationError,
    ConvergenceError,
    DimensionMismatchError,
    InsufficientDataError,
    NonContractiveError,
    PreconditionError,
    SamplerError,
)
from src.fixedpoint import DEFAULT_TOL, MERGE_FACTOR, contraction_report, iterate
from src.models import (
    ActivationStats,
    ContractionFit,
    DeviationEvent,
    DeviationSpec,
    ExpVsUnionReport,
    ExpVsUnionRow,
    InputSampler,
    Network,
    NoiseSpec,
    StochasticFixedPointSummary,
    Trajectory,
    UnionBoundResult,
)
from src.nncore import apply, propagate

logger = logging.getLogger(__name__)

MIN_STAT_SAMPLES = 100
MIN_TRAJECTORIES = 10
PLATEAU_TOLERANCE = 0.2
SE_BATCHES = 20
UNIQUENESS_STARTS = 4
START_SCALE = 3.0


def _linear_prefix(net: Network, layer: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Affine map onto the pre-activation of ``layer`` if earlier layers are linear."""
    if any(la.activation != Activation.IDENTITY for la in net.layers[:layer]):
        return None
    W = np.eye(net.input_dim)
    b = np.zeros(net.input_dim)
    for la in net.layers[: layer + 1]:
        W, b = la.weight @ W, la.weight @ b + la.bias
    return W, b


def activation_stats(
    net: Network, layer: int, sampler: InputSampler, n_samples: int, seed: int
) -> ActivationStats:
    """Monte Carlo moments of the pre-activations ``a = W h + b`` at ``layer``.

    When the input-to-``layer`` map is affine, the sum-form moments
    ``E[a] = W mu + b`` and ``Var(a) = (W*W) sigma^2`` come along for comparison.
    """
    if n_samples < MIN_STAT_SAMPLES:
        raise InsufficientDataError(
            f"need at least {MIN_STAT_SAMPLES} samples, got {n_samples}"
        )
    if not 0 <= layer < net.depth:
        raise PreconditionError(f"layer {layer} out of range")
    if sampler.dim != net.input_dim:
        raise DimensionMismatchError("sampler width must match the network input")
    if all(s == 0.0 for s in sampler.std):
        raise SamplerError("sampler is degenerate: every coordinate has zero spread")

    rng = np.random.default_rng(seed)
    X = sampler.draw(rng, n_samples)
    _, pres = propagate(net, X)
    A = pres[layer]
    mean = A.mean(axis=0)
    centred = A - mean
    variance = A.var(axis=0, ddof=1)
    m4 = np.mean(centred**4, axis=0)

    analytic_mean = analytic_variance = None
    prefix = _linear_prefix(net, layer)
    if prefix is not None:
        W, b = prefix
        analytic_mean = W @ np.asarray(sampler.mean) + b
        analytic_variance = (W * W) @ np.asarray(sampler.std) ** 2

    return ActivationStats(
        layer=layer,
        n_samples=n_samples,
        mean=mean,
        variance=variance,
        mean_se=np.sqrt(variance / n_samples),
        variance_se=np.sqrt(np.maximum(m4 - variance**2, 0.0) / n_samples),
        analytic_mean=analytic_mean,
        analytic_variance=analytic_variance,
    )


def require_union_bound(union_count: int, total: int) -> bool:
    if union_count > total:
        raise BoundViolationError(
            f"union count {union_count} exceeds the summed event count {total}"
        )
    return True


def union_bound_check(samples, spec: DeviationSpec) -> UnionBoundResult:
    """Empirical ``P(union A_i) <= sum P(A_i)`` by counting on one sample set.

    Frequencies are formed from integer counts, so disjoint events give exact
    equality. The second-order Bonferroni bound is reported alongside.
    """
    features = np.asarray(samples, dtype=float)
    if features.ndim == 1:
        features = features[:, None]
    n = features.shape[0]
    if n == 0:
        raise PreconditionError("union bound needs at least one sample")
    if max(e.feature for e in spec.events) >= features.shape[1]:
        raise DimensionMismatchError("event references a missing feature column")

    masks = np.stack([e.indicator(features) for e in spec.events])
    counts = masks.sum(axis=1)
    union_count = int(np.any(masks, axis=0).sum())
    total = int(counts.sum())
    pairwise = 0
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            pairwise += int(np.sum(masks[i] & masks[j]))
    holds = require_union_bound(union_count, total)
    return UnionBoundResult(
        n_samples=n,
        p_events=[int(c) / n for c in counts],
        p_union=union_count / n,
        sum_p_i=total / n,
        slack=(total - union_count) / n,
        bonferroni_lower=(total - pairwise) / n,
        holds=holds,
    )


def random_deviation_spec(
    rng: np.random.Generator, features: np.ndarray, n_events: int
) -> DeviationSpec:
    """Upper-tail events at random quantile thresholds of random feature columns."""
    events = []
    for _ in range(n_events):
        col = int(rng.integers(features.shape[1]))
        q = float(rng.uniform(0.5, 0.95))
        threshold = float(np.quantile(features[:, col], q))
        events.append(DeviationEvent(feature=col, lower=threshold))
    return DeviationSpec(events=events)


def fit_contraction(pairs: Sequence[tuple[float, float]]) -> ContractionFit:
    """Least squares ``e_{j+1} = rho e_j + xi``; constant ``e_j`` is degenerate."""
    pairs = [(float(a), float(b)) for a, b in pairs]
    x = np.array([a for a, _ in pairs])
    y = np.array([b for _, b in pairs])
    if x.size < 2 or np.ptp(x) <= 1e-12 * max(1.0, float(np.max(np.abs(x)))):
        return ContractionFit(
            depth_errors=pairs,
            rho=None,
            xi=None,
            r_squared=None,
            residuals=[],
            degenerate=True,
            contractive=False,
        )
    design = np.column_stack([x, np.ones_like(x)])
    (rho, xi), *_ = np.linalg.lstsq(design, y, rcond=None)
    rho, xi = float(rho), float(xi)
    residuals = [b - (rho * a + xi) for a, b in pairs]
    ss_res = float(np.sum(np.square(residuals)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ContractionFit(
        depth_errors=pairs,
        rho=rho,
        xi=xi,
        r_squared=r_squared,
        residuals=residuals,
        degenerate=False,
        contractive=rho < 1.0,
    )


def depth_contraction_fit(
    trajectories: Sequence[Trajectory], region_centers: Sequence | None = None
) -> ContractionFit:
    """Fit ``E[e_{j+1}] <= rho E[e_j] + xi`` with ``e_j = ||h_j - c_j||``.

    Centres default to the per-depth mean over the trajectories.
    """
    if len(trajectories) < MIN_TRAJECTORIES:
        raise InsufficientDataError(
            f"need at least {MIN_TRAJECTORIES} trajectories, got {len(trajectories)}"
        )
    depths = {len(t.states) for t in trajectories}
    if len(depths) != 1:
        raise DimensionMismatchError("trajectories must share one depth")
    n_states = depths.pop()
    if n_states < 2:
        raise InsufficientDataError("need at least two depths")
    if region_centers is None:
        region_centers = [
            np.mean([t.states[j] for t in trajectories], axis=0)
            for j in range(n_states)
        ]
    if len(region_centers) != n_states:
        raise DimensionMismatchError("need one region centre per depth")
    pairs = []
    for t in trajectories:
        errors = [
            float(np.linalg.norm(h - np.asarray(c, dtype=float)))
            for h, c in zip(t.states, region_centers)
        ]
        pairs.extend(zip(errors[:-1], errors[1:]))
    return fit_contraction(pairs)


def chain_error_model(eps: float, n: int) -> float:
    """Probability that ``n`` chained steps all succeed, ``(1 - eps)^n``."""
    if not 0.0 <= eps <= 1.0:
        raise PreconditionError(f"eps must lie in [0, 1], got {eps}")
    if n < 0:
        raise PreconditionError(f"n must be non-negative, got {n}")
    return (1.0 - eps) ** n


def _contractive_fixed_point(
    net: Network, tol: float, max_t: int, seed: int
) -> tuple[np.ndarray, float]:
    """Noiseless fixed point reached from the origin, checked from other starts.

    Every seeded start must land within ``MERGE_FACTOR * tol / (1 - rho)`` of
    the origin's fixed point.
    """
    result = iterate(net, np.zeros(net.input_dim), max_t, tol)
    if not result.converged:
        raise NonContractiveError("noiseless iteration found no fixed point")
    report = contraction_report(net, result.report.point, tol)
    if not report.stable:
        raise NonContractiveError(
            f"spectral radius {report.radius:.4f} at the fixed point is not below 1"
        )
    reach = MERGE_FACTOR * tol / (1.0 - report.radius)
    rng = np.random.default_rng([seed, 1])
    starts = START_SCALE * rng.standard_normal((UNIQUENESS_STARTS, net.input_dim))
    for start in starts:
        other = iterate(net, start, max_t, tol)
        gap = (
            float(np.linalg.norm(other.report.point - report.point))
            if other.converged
            else math.inf
        )
        if gap > reach:
            raise NonContractiveError(
                f"iteration from {start.tolist()} did not return to the fixed point"
            )
    return report.point, report.radius


def _quarter_plateau(freq: np.ndarray) -> tuple[bool, float | None]:
    q = len(freq) // 4
    second = float(np.mean(freq[q : 2 * q]))
    last = float(np.mean(freq[len(freq) - q :]))
    if second == 0.0:
        return last == 0.0, None
    ratio = last / second
    return abs(ratio - 1.0) <= PLATEAU_TOLERANCE, ratio


def exp_vs_union_experiment(
    net: Network,
    sigma: float,
    depth: int,
    n_runs: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    pilot_steps: int = 4000,
    max_t: int = 10_000,
) -> ExpVsUnionReport:
    """Measured deviation frequency per depth vs the chained ``(1-eps)^n`` model.

    Each run starts at the noiseless fixed point and takes ``depth`` noisy steps
    with its own derived seed. A deviation is a distance from the fixed point
    above twice the stationary scale estimated by a pilot chain.
    """
    if depth < 4:
        raise PreconditionError("depth must be at least 4 to compare quarters")
    x_star, radius = _contractive_fixed_point(net, tol, max_t, seed)
    d = x_star.shape[0]
    children = np.random.SeedSequence(seed).spawn(n_runs + 1)

    pilot_noise = sigma * np.random.default_rng(children[0]).standard_normal(
        (pilot_steps, d)
    )
    h = x_star
    sq_dev = []
    for t in range(pilot_steps):
        h = apply(net, h) + pilot_noise[t]
        if t >= pilot_steps // 2:
            sq_dev.append(float(np.sum((h - x_star) ** 2)))
    norm_scale = float(np.sqrt(np.mean(sq_dev)))
    threshold = max(2.0 * norm_scale, 10.0 * tol)

    noise = sigma * np.stack(
        [np.random.default_rng(c).standard_normal((depth, d)) for c in children[1:]]
    )
    H = np.tile(x_star, (n_runs, 1))
    freq = np.empty(depth)
    for k in range(depth):
        H = apply(net, H) + noise[:, k, :]
        freq[k] = np.mean(np.linalg.norm(H - x_star, axis=1) > threshold)

    eps = float(freq[0])
    union = np.cumsum(freq)
    rows = [
        ExpVsUnionRow(
            depth=k + 1,
            measured_freq=float(freq[k]),
            chain_pred=1.0 - chain_error_model(eps, k + 1),
            union_sum=float(union[k]),
        )
        for k in range(depth)
    ]
    plateau, ratio = _quarter_plateau(freq)
    logger.info(
        "exp-vs-union: rho=%.3f threshold=%.4g eps=%.4f plateau=%s",
        radius,
        threshold,
        eps,
        plateau,
    )
    return ExpVsUnionReport(
        rows=rows,
        fixed_point=x_star,
        radius=radius,
        threshold=threshold,
        deviation_scale=norm_scale / np.sqrt(d),
        predicted_scale=sigma / np.sqrt(1.0 - radius**2),
        epsilon=eps,
        plateau=plateau,
        plateau_ratio=ratio,
    )


def batch_means_se(draws: np.ndarray, n_batches: int = SE_BATCHES) -> np.ndarray:
    """Standard error of a correlated chain's mean from non-overlapping batch means."""
    size = draws.shape[0] // n_batches
    if size < 1:
        raise InsufficientDataError("too few draws for batch means")
    means = draws[: n_batches * size].reshape(n_batches, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def stochastic_fixed_point(
    net: Network,
    sigma: float,
    burn_in: int,
    n_draws: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    max_t: int = 10_000,
) -> StochasticFixedPointSummary:
    """Stationary law of ``h_{t+1} = f(h_t) + delta_t`` against the noiseless ``x*``.

    The average fixed point solves ``h = f(h) + mean(delta)`` for the realised
    noise mean.
    """
    if n_draws < 2 * SE_BATCHES:
        raise InsufficientDataError(f"need at least {2 * SE_BATCHES} draws")
    x_star, radius = _contractive_fixed_point(net, tol, max_t, seed)
    d = x_star.shape[0]
    rng = np.random.default_rng(seed)
    noise = sigma * rng.standard_normal((burn_in + n_draws, d))

    h = x_star
    draws = np.empty((n_draws, d))
    for t in range(burn_in + n_draws):
        h = apply(net, h) + noise[t]
        if t >= burn_in:
            draws[t - burn_in] = h

    noise_mean = noise.mean(axis=0)
    shifted = iterate(
        net, x_star, max_t, tol, noise=NoiseSpec(sigma=0.0, shift=noise_mean.tolist())
    )
    if not shifted.converged:
        raise ConvergenceError("average fixed point iteration did not converge")

    covariance = np.atleast_2d(np.cov(draws, rowvar=False, ddof=1))
    return StochasticFixedPointSummary(
        n_draws=n_draws,
        mean=draws.mean(axis=0),
        covariance=covariance,
        std=np.sqrt(np.clip(np.diag(covariance), 0.0, None)),
        mean_se=batch_means_se(draws),
        quantiles={
            f"q{int(q * 100):02d}": np.quantile(draws, q, axis=0)
            for q in (0.05, 0.5, 0.95)
        },
        noiseless_fixed_point=x_star,
        noise_mean=noise_mean,
        average_fixed_point=shifted.report.point,
        radius=radius,
    )
