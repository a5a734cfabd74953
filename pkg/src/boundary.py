"""Boundary-conditioned training stages.

Stage 0 fits the data distribution (cross-entropy), stage 1 shapes outputs
with supervised targets, stage 2 adds a weak reward functional
``B = sum_j eps_j r_j(f(x_j))``. The unified objective mixes the three with
``BoundaryWeights``; the contrastive loss is the symmetric two-sided boundary.
"""

import logging
from collections import defaultdict

import numpy as np

from src.enums import Distance
from src.errors import DimensionMismatchError, NonFiniteError, PreconditionError
from src.losses import CrossEntropyLoss, LossSpec, SquaredErrorLoss, check_labels
from src.models import (
    Batch,
    BoundaryWeights,
    ContrastiveBatch,
    IntentionCost,
    Network,
    Stage2Result,
    TrainingResult,
    WeakBoundarySet,
)
from src.nncore import backprop, descend, head_vjp, log_softmax, propagate

logger = logging.getLogger(__name__)

WEAKNESS_RATIO = 0.1


def _conditional_counts(batch: Batch) -> dict[bytes, dict[int, int]]:
    counts: dict[bytes, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for x, y in zip(batch.inputs, batch.labels):
        counts[x.tobytes()][int(y)] += 1
    return counts


def data_entropy(batch: Batch) -> float:
    """Mean ``-log p_data(y|x)`` under the empirical conditional of the batch."""
    counts = _conditional_counts(batch)
    total = 0.0
    for x, y in zip(batch.inputs, batch.labels):
        row = counts[x.tobytes()]
        total -= np.log(row[int(y)] / sum(row.values()))
    return float(total / len(batch))


def kl_to_data(net: Network, batch: Batch) -> float:
    """``KL(p_data || q_theta)`` summed directly over distinct inputs and classes."""
    check_labels(net, batch.labels)
    counts = _conditional_counts(batch)
    n = len(batch)
    firsts: dict[bytes, np.ndarray] = {}
    for x in batch.inputs:
        firsts.setdefault(x.tobytes(), x)
    keys = list(firsts)
    _, pres = propagate(net, np.stack([firsts[k] for k in keys]))
    logq = log_softmax(pres[-1])
    total = 0.0
    for row, key in enumerate(keys):
        labels = counts[key]
        n_x = sum(labels.values())
        for y, c in labels.items():
            p = c / n_x
            total += (n_x / n) * p * (np.log(p) - logq[row, y])
    return float(total)


def stage0_pretrain(
    net: Network, batch: Batch, steps: int, lr: float
) -> TrainingResult:
    """Cross-entropy descent; the recorded curve is ``KL = CE - H(data)``."""
    check_labels(net, batch.labels)
    trained, curve = descend(net, CrossEntropyLoss(), batch, steps, lr)
    entropy = data_entropy(batch)
    return TrainingResult(network=trained, loss_curve=[ce - entropy for ce in curve])


def sft_loss(batch: Batch) -> LossSpec:
    if batch.targets is not None:
        return SquaredErrorLoss()
    if batch.labels is not None:
        return CrossEntropyLoss()
    raise PreconditionError("supervised pairs need targets or labels")


def stage1_sft(net: Network, batch: Batch, steps: int, lr: float) -> TrainingResult:
    if len(batch) == 0:
        raise PreconditionError("stage 1 needs at least one pair")
    if batch.targets is not None and batch.targets.shape[1] != net.output_dim:
        raise DimensionMismatchError(
            f"targets have width {batch.targets.shape[1]}, "
            f"network outputs {net.output_dim}"
        )
    trained, curve = descend(net, sft_loss(batch), batch, steps, lr)
    return TrainingResult(network=trained, loss_curve=curve)


def _probe_outputs(net: Network, wb: WeakBoundarySet):
    states, pres = propagate(net, wb.inputs())
    return states, pres


def weak_boundary_value(net: Network, wb: WeakBoundarySet) -> float:
    if not wb.points:
        return 0.0
    states, _ = _probe_outputs(net, wb)
    total = 0.0
    for point, out in zip(wb.points, states[-1]):
        r = point.reward(out)
        if not np.isfinite(r):
            raise NonFiniteError(f"reward is non-finite at boundary point {point.x}")
        total += point.eps * r
    return float(total)


def weak_boundary_grad(net: Network, wb: WeakBoundarySet) -> np.ndarray:
    """``dB/dtheta``; reward gradients are analytic for built-ins, else numeric."""
    if not wb.points:
        return np.zeros(net.n_params)
    states, pres = _probe_outputs(net, wb)
    g_out = np.stack(
        [p.eps * p.reward.gradient(out) for p, out in zip(wb.points, states[-1])]
    )
    return backprop(net, states, pres, head_vjp(net, states, pres, g_out))


class PerturbedLoss(LossSpec):
    """``L_base - lam * B``; with ``lam == 0`` it is the base loss, bit for bit."""

    base: LossSpec
    boundary: WeakBoundarySet
    lam: float

    def value_and_grad(self, net: Network, batch) -> tuple[float, np.ndarray]:
        value, grad = self.base.value_and_grad(net, batch)
        if self.lam == 0.0:
            return value, grad
        B = weak_boundary_value(net, self.boundary)
        boundary_grad = weak_boundary_grad(net, self.boundary)
        return value - self.lam * B, grad - self.lam * boundary_grad


def _warn_if_strong(
    net: Network, base: LossSpec, batch, wb: WeakBoundarySet, lam: float
) -> None:
    if lam == 0.0 or not wb.points:
        return
    states, _ = _probe_outputs(net, wb)
    magnitude = lam * sum(
        abs(p.eps * p.reward(out)) for p, out in zip(wb.points, states[-1])
    )
    scale = abs(base.value(net, batch))
    if magnitude > WEAKNESS_RATIO * scale:
        logger.warning(
            "weak boundary is not weak: lam*sum|eps*r| = %.3e exceeds %.0f%% of the "
            "base loss %.3e",
            magnitude,
            100 * WEAKNESS_RATIO,
            scale,
        )


def stage2_perturbed(
    net: Network,
    base_loss: LossSpec,
    batch,
    wb: WeakBoundarySet,
    lam: float,
    steps: int,
    lr: float,
) -> Stage2Result:
    """Descend on ``L_base - lam * B``, recording both terms at every step."""
    if lam < 0:
        raise PreconditionError(f"lambda must be non-negative, got {lam}")
    _warn_if_strong(net, base_loss, batch, wb, lam)
    base_curve: list[float] = []
    boundary_curve: list[float] = []

    def record(_: int, current: Network) -> None:
        base_curve.append(base_loss.value(current, batch))
        boundary_curve.append(weak_boundary_value(current, wb))

    loss = PerturbedLoss(base=base_loss, boundary=wb, lam=lam)
    trained, _ = descend(net, loss, batch, steps, lr, callback=record)
    return Stage2Result(
        network=trained, base_curve=base_curve, boundary_curve=boundary_curve
    )


class IntentionLoss(LossSpec):
    """``||f(probe) - target||^2``; ignores the batch."""

    cost: IntentionCost

    def value_and_grad(self, net: Network, batch=None) -> tuple[float, np.ndarray]:
        if self.cost.target.shape != (net.output_dim,):
            raise DimensionMismatchError("intention target must match the output width")
        states, pres = propagate(net, self.cost.probe[None, :])
        diff = states[-1][0] - self.cost.target
        dz = head_vjp(net, states, pres, 2.0 * diff[None, :])
        return float(diff @ diff), backprop(net, states, pres, dz)


class UnifiedLoss(LossSpec):
    """``alpha*CE + beta*C(f(p)) + (1-alpha-beta)*||q_theta - y||^2``.

    The batch carries class labels for the CE term and ``targets`` for the
    supervised term. Zero-weight terms are skipped entirely.
    """

    weights: BoundaryWeights
    intention: IntentionCost

    def value_and_grad(self, net: Network, batch: Batch) -> tuple[float, np.ndarray]:
        value = 0.0
        grad = np.zeros(net.n_params)
        parts: list[tuple[float, LossSpec]] = [
            (self.weights.alpha, CrossEntropyLoss()),
            (self.weights.beta, IntentionLoss(cost=self.intention)),
            (self.weights.supervised, SquaredErrorLoss()),
        ]
        for weight, term in parts:
            if weight == 0.0:
                continue
            v, g = term.value_and_grad(net, batch)
            value += weight * v
            grad = grad + weight * g
        return value, grad


def unified_loss(
    net: Network,
    batch: Batch,
    weights: BoundaryWeights,
    intention: IntentionCost,
    sup_targets,
) -> float:
    combined = Batch.of(batch.inputs, labels=batch.labels, targets=sup_targets)
    return UnifiedLoss(weights=weights, intention=intention).value(net, combined)


def distance(kind: Distance, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a - b
    if kind == Distance.SQUARED_EUCLIDEAN:
        return np.sum(diff * diff, axis=-1)
    if kind == Distance.EUCLIDEAN:
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if kind == Distance.COSINE:
        norms = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
        return 1.0 - np.sum(a * b, axis=-1) / norms
    raise ValueError(f"unknown distance {kind!r}")


def _logsumexp(v: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(v, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(v - m), axis=axis))


def contrastive_loss(
    anchor,
    positive,
    negatives,
    d: Distance = Distance.SQUARED_EUCLIDEAN,
) -> float:
    """``-log(exp(-d+) / (exp(-d+) + sum_j exp(-d_j)))``, computed stably."""
    anchor = np.asarray(anchor, dtype=float)
    negatives = np.asarray(negatives, dtype=float)
    if negatives.size == 0:
        raise PreconditionError("contrastive loss needs at least one negative")
    negatives = negatives.reshape(-1, anchor.shape[-1])
    d_pos = distance(d, anchor, np.asarray(positive, dtype=float))
    d_neg = distance(d, anchor[None, :], negatives)
    logits = -np.concatenate([[d_pos], d_neg])
    return float(-logits[0] + _logsumexp(logits))


class ContrastiveLoss(LossSpec):
    """Mean contrastive loss of network embeddings (squared Euclidean)."""

    def value_and_grad(
        self, net: Network, batch: ContrastiveBatch
    ) -> tuple[float, np.ndarray]:
        n, m, dim = batch.negatives.shape
        X = np.concatenate(
            [batch.anchors, batch.positives, batch.negatives.reshape(n * m, dim)]
        )
        states, pres = propagate(net, X)
        out = states[-1]
        ha, hp = out[:n], out[n : 2 * n]
        hn = out[2 * n :].reshape(n, m, -1)
        others = np.concatenate([hp[:, None, :], hn], axis=1)  # [n, 1+m, e]
        diffs = ha[:, None, :] - others
        logits = -np.sum(diffs * diffs, axis=-1)
        lse = _logsumexp(logits, axis=1)
        value = float(np.mean(-logits[:, 0] + lse))

        p = np.exp(logits - lse[:, None])
        coef = p.copy()
        coef[:, 0] -= 1.0  # dloss/dlogit
        # d logit_k / d ha = -2 (ha - h_k);  d logit_k / d h_k = +2 (ha - h_k)
        g_a = np.sum(coef[:, :, None] * (-2.0) * diffs, axis=1)
        g_others = coef[:, :, None] * 2.0 * diffs
        g_out = np.concatenate(
            [g_a, g_others[:, 0, :], g_others[:, 1:, :].reshape(n * m, -1)]
        ) / n
        return value, backprop(net, states, pres, head_vjp(net, states, pres, g_out))
