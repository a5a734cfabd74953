"""Gaussian-field curvature, effective capacity and rigidity over training."""

import logging
from collections.abc import Sequence

import numpy as np

from src.errors import (
    DimensionMismatchError,
    InsufficientDataError,
    PreconditionError,
    SamplerError,
)
from src.models import (
    Checkpoint,
    GaussianComponent,
    LevelSetSample,
    RigidityCurve,
    RigidityPoint,
)
from src.nncore import FD_STEP, finite_difference_jacobian, propagate

logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-4
ACCEPTANCE_CHECK_DRAWS = 50_000
SAMPLER_CHUNK = 4096
DEFAULT_BAND_FRACTION = 0.1
DEFAULT_LEVEL = 0.5
RIDGE_FRACTION = 1e-3


def _offsets(comp: GaussianComponent, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != comp.dim:
        raise DimensionMismatchError(
            f"point width {x.shape[-1]} does not match component width {comp.dim}"
        )
    return x - comp.mu


def gaussian_value(comp: GaussianComponent, x) -> float | np.ndarray:
    """``exp(-(x-mu)^T Sigma^-1 (x-mu) / 2)``; accepts one point or a batch."""
    u = _offsets(comp, x)
    q = np.einsum("...i,ij,...j->...", u, comp.precision(), u)
    value = np.exp(-0.5 * q)
    return float(value) if np.ndim(value) == 0 else value


def gaussian_gradient(comp: GaussianComponent, x) -> np.ndarray:
    u = _offsets(comp, x)
    return -gaussian_value(comp, x) * (comp.precision() @ u)


def gaussian_hessian(comp: GaussianComponent, x) -> np.ndarray:
    """Closed form ``phi (P u u^T P - P)`` with ``P = Sigma^-1``."""
    u = _offsets(comp, x)
    P = comp.precision()
    v = P @ u
    return gaussian_value(comp, x) * (np.outer(v, v) - P)


def _hessian_sq_norms(comp: GaussianComponent, X: np.ndarray) -> np.ndarray:
    P = comp.precision()
    U = X - comp.mu
    V = U @ P
    phi = np.exp(-0.5 * np.einsum("ni,ni->n", U, V))
    H = phi[:, None, None] * (V[:, :, None] * V[:, None, :] - P)
    return np.einsum("nij,nij->n", H, H)


def hessian_fd_check(comp: GaussianComponent, points, step: float = FD_STEP) -> float:
    """Largest relative Frobenius gap between the analytic Hessian and central
    differences of the analytic gradient over ``points``."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        analytic = gaussian_hessian(comp, x)
        numeric = finite_difference_jacobian(
            lambda y: gaussian_gradient(comp, y), x, step
        )
        scale = max(float(np.linalg.norm(analytic)), 1e-300)
        worst = max(worst, float(np.linalg.norm(numeric - analytic)) / scale)
    return worst


def level_set_sample(
    comp: GaussianComponent,
    n: int,
    band: float,
    seed: int | Sequence[int],
    max_draws: int = 10_000_000,
) -> LevelSetSample:
    """Rejection-sample points with ``|phi(x) - c| < band``.

    Proposals are uniform on the box ``mu +/- r_out * sqrt(diag Sigma)`` that
    encloses the outer ellipsoid of the band. Returns the first ``n`` accepted
    points, or fewer with a shortfall if ``max_draws`` runs out.
    """
    c = comp.level
    if band <= 0.0:
        raise PreconditionError(f"band must be positive, got {band}")
    if c - band <= 0.0:
        raise PreconditionError(
            f"band {band} reaches phi = 0 at level {c}; the band region is unbounded"
        )
    if n < 1:
        raise PreconditionError("need at least one sample")

    q_outer = -2.0 * np.log(c - band)
    half_width = np.sqrt(q_outer) * np.sqrt(np.diag(comp.sigma))
    rng = np.random.default_rng(seed)

    accepted: list[np.ndarray] = []
    count = 0
    draws = 0
    while count < n and draws < max_draws:
        size = min(SAMPLER_CHUNK, max_draws - draws)
        X = comp.mu + half_width * rng.uniform(-1.0, 1.0, size=(size, comp.dim))
        draws += size
        keep = X[np.abs(gaussian_value(comp, X) - c) < band]
        accepted.append(keep)
        count += keep.shape[0]
        if draws >= ACCEPTANCE_CHECK_DRAWS and count / draws < MIN_ACCEPTANCE:
            raise SamplerError(
                f"acceptance rate {count / draws:.2e} below {MIN_ACCEPTANCE:g} "
                f"after {draws} draws (level={c}, band={band})"
            )

    points = np.concatenate(accepted)[:n] if accepted else np.empty((0, comp.dim))
    sample = LevelSetSample(points=points, requested=n, draws=draws, band=band)
    if sample.shortfall:
        logger.warning(
            "level-band sampler short by %d of %d points after %d draws",
            sample.shortfall,
            n,
            draws,
        )
    return sample


def curvature_functional(
    components: Sequence[GaussianComponent],
    samples_per_component: int,
    seed: int,
    band_fraction: float = DEFAULT_BAND_FRACTION,
) -> float:
    """``R = sum_i mean_{x in band_i} ||Hess phi_i(x)||_F^2``.

    Component ``i`` samples with seed ``[seed, i]`` in the band of half-width
    ``band_fraction * min(c_i, 1 - c_i)``.
    """
    if not components:
        raise PreconditionError("curvature functional needs at least one component")
    if not 0.0 < band_fraction < 1.0:
        raise PreconditionError("band_fraction must lie in (0, 1)")
    total = 0.0
    for i, comp in enumerate(components):
        band = band_fraction * min(comp.level, 1.0 - comp.level)
        sample = level_set_sample(comp, samples_per_component, band, [seed, i])
        if sample.accepted == 0:
            raise SamplerError(f"component {i} produced no level-band samples")
        total += float(np.mean(_hessian_sq_norms(comp, sample.points)))
    return total


def effective_capacity(C0: float, R: float) -> float:
    """``C_eff = C0 / (1 + R)``."""
    if not C0 > 0.0 or not np.isfinite(C0):
        raise PreconditionError(f"C0 must be positive and finite, got {C0}")
    if not R >= 0.0 or not np.isfinite(R):
        raise PreconditionError(f"R must be non-negative and finite, got {R}")
    return C0 / (1.0 + R)


def _k_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(X.shape[0]))]
    nearest = np.linalg.norm(X - X[chosen[0]], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, np.linalg.norm(X - X[nxt], axis=1))
    return X[chosen]


def fit_components(
    activations, k: int, seed: int, level: float = DEFAULT_LEVEL
) -> list[GaussianComponent]:
    """Seeded farthest-point k-centres, then per-cluster mean and covariance.

    Covariances get a ridge proportional to the cloud's mean variance so a
    collapsed cluster still yields a proper Gaussian.
    """
    X = np.asarray(activations, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatchError("activations must be a [samples x dim] matrix")
    n, d = X.shape
    if k < 1:
        raise PreconditionError("need at least one component")
    if n < k * (d + 1):
        raise InsufficientDataError(
            f"{n} samples cannot fit {k} components in {d} dimensions"
        )
    centers = _k_centers(X, k, np.random.default_rng(seed))
    labels = np.argmin(
        np.linalg.norm(X[:, None, :] - centers[None, :, :], axis=2), axis=1
    )
    ridge = RIDGE_FRACTION * float(np.trace(np.atleast_2d(np.cov(X.T, ddof=0)))) / d
    ridge += 1e-9

    components = []
    for j in range(k):
        members = X[labels == j]
        if members.shape[0] == 0:
            logger.warning("component %d attracted no samples; dropped", j)
            continue
        centred = members - members.mean(axis=0)
        cov = centred.T @ centred / members.shape[0] + ridge * np.eye(d)
        components.append(
            GaussianComponent(
                mu=members.mean(axis=0), sigma=(cov + cov.T) / 2, level=level
            )
        )
    return components


def checkpoint_components(
    checkpoint: Checkpoint,
    inputs,
    k: int,
    seed: int,
    layer: int = 0,
    level: float = DEFAULT_LEVEL,
) -> list[GaussianComponent]:
    """Fit components to the post-activation cloud of ``layer`` at a checkpoint."""
    net = checkpoint.network
    if not 0 <= layer < net.depth:
        raise PreconditionError(f"layer {layer} out of range")
    states, _ = propagate(net, np.asarray(inputs, dtype=float))
    return fit_components(states[layer + 1], k, seed, level)


def rigidity_track(
    checkpoints: Sequence[Checkpoint],
    inputs,
    k: int,
    seed: int,
    C0: float = 1.0,
    samples_per_component: int = 2000,
    layer: int = 0,
    band_fraction: float = DEFAULT_BAND_FRACTION,
    level: float = DEFAULT_LEVEL,
) -> RigidityCurve:
    """``(R, C_eff)`` at each checkpoint; every checkpoint reuses ``seed``."""
    if len(checkpoints) < 2:
        raise PreconditionError("rigidity tracking needs at least two checkpoints")
    points = []
    for ckpt in checkpoints:
        components = checkpoint_components(ckpt, inputs, k, seed, layer, level)
        R = curvature_functional(components, samples_per_component, seed, band_fraction)
        points.append(
            RigidityPoint(
                step=ckpt.step,
                R=R,
                C_eff=effective_capacity(C0, R),
                n_components=len(components),
            )
        )
        logger.info("checkpoint %d: R=%.6g", ckpt.step, R)
    return RigidityCurve(C0=C0, points=points)
