"""Single-process federation: KL-coupled clients around a frozen foundation.

Each client minimises its local cross-entropy plus ``beta * KL(p || p0)``
toward the foundation and ``lambda * KL(p || q_-i)`` toward the mixture of
its peers, both on a shared probe set. Rounds are synchronous: every client
steps against the round-start snapshot of the others, then all commit.
"""

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence

import numpy as np
from pydantic import Field

from src.errors import (
    AnchorIntegrityError,
    AnchorUpdateError,
    DimensionMismatchError,
    InsufficientDataError,
    PreconditionError,
)
from src.losses import CrossEntropyLoss, LossSpec, check_labels
from src.models import (
    Batch,
    ClientMetrics,
    FederationHyper,
    FederationState,
    FixedPointCheck,
    FloatArray,
    Network,
    RoundMetrics,
)
from src.nncore import backprop, log_softmax, propagate

logger = logging.getLogger(__name__)

DEFAULT_PROBE_SIZE = 64
LOG_FLOOR = 1e-300


class Transport(ABC):
    """Carries each client's probe distribution to its peers for one round."""

    @abstractmethod
    def publish(self, round_: int, sender: int, payload: np.ndarray) -> None: ...

    @abstractmethod
    def gather(self, round_: int) -> dict[int, np.ndarray]: ...


class InProcessTransport(Transport):
    def __init__(self) -> None:
        self._rounds: dict[int, dict[int, np.ndarray]] = {}

    def publish(self, round_: int, sender: int, payload: np.ndarray) -> None:
        box = self._rounds.setdefault(round_, {})
        if sender in box:
            raise PreconditionError(
                f"client {sender} already published in round {round_}"
            )
        frozen = np.array(payload, dtype=float)
        frozen.setflags(write=False)
        box[sender] = frozen

    def gather(self, round_: int) -> dict[int, np.ndarray]:
        return dict(self._rounds.get(round_, {}))


def log_probs(net: Network, X) -> np.ndarray:
    _, pres = propagate(net, np.asarray(X, dtype=float))
    return log_softmax(pres[-1])


def kl_rows(logp: np.ndarray, logq: np.ndarray) -> np.ndarray:
    """Row-wise ``KL(p || q)`` from log-probabilities, exact sum over classes."""
    return np.sum(np.exp(logp) * (logp - logq), axis=-1)


def symmetric_kl(logp: np.ndarray, logq: np.ndarray) -> np.ndarray:
    return 0.5 * (kl_rows(logp, logq) + kl_rows(logq, logp))


def _probe_probs(state: FederationState) -> dict[int, np.ndarray]:
    return {
        j: np.exp(log_probs(c, state.probe_set)) for j, c in enumerate(state.clients)
    }


def _mixture(alpha_row: np.ndarray, probs: dict[int, np.ndarray], i: int) -> np.ndarray:
    return sum(alpha_row[j] * p for j, p in sorted(probs.items()) if j != i)


def mixture_reference(state: FederationState, i: int, x=None) -> np.ndarray:
    """``q_-i(.|x) = sum_{j != i} alpha_ij p_j(.|x)``; defaults to the probe set."""
    X = state.probe_set if x is None else np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    probs = {
        j: np.exp(log_probs(client, X))
        for j, client in enumerate(state.clients)
        if j != i
    }
    q = _mixture(state.alpha[i], probs, i)
    return q[0] if single else q


class ClientObjective(LossSpec):
    """Local cross-entropy plus the foundation and peer KL terms on the probe set.

    A term whose weight is exactly zero is skipped entirely.
    """

    probe: FloatArray
    prior_logp: FloatArray
    mixture_logp: FloatArray
    beta: float = Field(ge=0.0)
    lam: float = Field(ge=0.0)

    def value_and_grad(self, net: Network, batch: Batch) -> tuple[float, np.ndarray]:
        value, grad = CrossEntropyLoss().value_and_grad(net, batch)
        if self.beta == 0.0 and self.lam == 0.0:
            return value, grad

        states, pres = propagate(net, self.probe)
        logp = log_softmax(pres[-1])
        p = np.exp(logp)
        m = self.probe.shape[0]
        dz = np.zeros_like(p)
        terms = ((self.beta, self.prior_logp), (self.lam, self.mixture_logp))
        for weight, logr in terms:
            if weight == 0.0:
                continue
            a = logp - logr
            kl = np.sum(p * a, axis=1)
            value += weight * float(np.mean(kl))
            dz += weight * p * (a - kl[:, None]) / m
        return value, grad + backprop(net, states, pres, dz)


def _objective(
    state: FederationState, i: int, peer_probs: dict[int, np.ndarray] | None = None
) -> ClientObjective:
    if peer_probs is None:
        peer_probs = _probe_probs(state)
    q = _mixture(state.alpha[i], peer_probs, i)
    return ClientObjective(
        probe=state.probe_set,
        prior_logp=log_probs(state.foundation, state.probe_set),
        mixture_logp=np.log(np.maximum(q, LOG_FLOOR)),
        beta=state.hyper.beta,
        lam=state.hyper.lam,
    )


def _client_batch(state: FederationState, i: int, batch: Batch | None) -> Batch:
    if not 0 <= i < state.K:
        raise PreconditionError(f"client index {i} out of range for {state.K} clients")
    return state.partitions[i] if batch is None else batch


def client_objective(
    state: FederationState, i: int, batch: Batch | None = None
) -> float:
    return _objective(state, i).value(state.clients[i], _client_batch(state, i, batch))


def _scores(net: Network, batch: Batch) -> np.ndarray:
    """Per-sample cross-entropy gradients, ``[n x n_params]``."""
    if len(batch) == 0:
        raise InsufficientDataError("Fisher estimate needs at least one sample")
    labels = check_labels(net, batch.labels)
    states, pres = propagate(net, batch.inputs)
    dz = states[-1].copy()
    dz[np.arange(len(batch)), labels] -= 1.0
    return backprop(net, states, pres, dz, per_sample=True)


def empirical_fisher_diag(net: Network, batch: Batch, damping: float) -> np.ndarray:
    """Mean squared per-parameter score plus ``damping``."""
    S = _scores(net, batch)
    return np.mean(S * S, axis=0) + damping


def model_fisher_diag(net: Network, X) -> np.ndarray:
    """Diagonal Fisher of the net's own predictive distribution over rows of ``X``.

    Exact expectation over classes: ``mean_x sum_c p_c(x) * score_c(x)**2``.
    This is the curvature of ``KL(p || r)`` at ``p = r``.
    """
    states, pres = propagate(net, np.atleast_2d(np.asarray(X, dtype=float)))
    p = states[-1]
    diag = np.zeros(net.n_params)
    for c in range(p.shape[1]):
        dz = p.copy()
        dz[:, c] -= 1.0
        S = backprop(net, states, pres, dz, per_sample=True)
        diag += np.mean(p[:, c, None] * S * S, axis=0)
    return diag


def objective_fisher_diag(
    net: Network, objective: ClientObjective, batch: Batch, damping: float
) -> np.ndarray:
    """Damped diagonal Fisher of the whole client objective.

    The empirical Fisher of the local cross-entropy on ``batch``, plus each KL
    term's weight times the model Fisher on the probe set.
    """
    G = empirical_fisher_diag(net, batch, damping)
    kl_weight = objective.beta + objective.lam
    if kl_weight > 0.0:
        G = G + kl_weight * model_fisher_diag(net, objective.probe)
    return G


def full_fisher(net: Network, batch: Batch, damping: float) -> np.ndarray:
    S = _scores(net, batch)
    return S.T @ S / S.shape[0] + damping * np.eye(S.shape[1])


def trust_region(step: np.ndarray, radius: float) -> np.ndarray:
    """Scale ``step`` back onto the ball of ``radius`` if it leaves it."""
    norm = float(np.linalg.norm(step))
    if norm <= radius:
        return step
    return step * (radius / norm)


def _local_update(
    net: Network, objective: ClientObjective, batch: Batch, hyper: FederationHyper
) -> Network:
    theta = net.parameters()
    for _ in range(hyper.local_steps):
        current = net.with_parameters(theta)
        _, grad = objective.value_and_grad(current, batch)
        if hyper.preconditioner == "fisher":
            G = objective_fisher_diag(current, objective, batch, hyper.damping)
        else:
            G = np.ones_like(theta)
        theta = theta - trust_region(hyper.eta * (grad / G), hyper.max_step)
    return net.with_parameters(theta)


def natural_gradient_step(
    state: FederationState, i: int, batch: Batch | None = None
) -> Network:
    """``theta_i - eta * G_i^-1 grad L_i``, held inside the trust region.

    ``G_i`` is the damped diagonal Fisher of client ``i``'s objective.
    """
    if i in state.anchors:
        raise AnchorUpdateError(f"client {i} is a frozen anchor")
    batch = _client_batch(state, i, batch)
    return _local_update(state.clients[i], _objective(state, i), batch, state.hyper)


def _replace(state: FederationState, **changes) -> FederationState:
    fields = {name: getattr(state, name) for name in FederationState.model_fields}
    return FederationState(**{**fields, **changes})


def init_federation(
    foundation: Network,
    K: int,
    partitions: Sequence[Batch],
    hyper: FederationHyper,
    seed: int,
    probe_size: int = DEFAULT_PROBE_SIZE,
) -> FederationState:
    """Clients copy the foundation, jittered with seed ``[seed, i]`` if requested."""
    if K < 2:
        raise PreconditionError(f"federation needs at least two clients, got {K}")
    if len(partitions) != K:
        raise PreconditionError(f"expected {K} partitions, got {len(partitions)}")
    if not foundation.has_softmax_head:
        raise PreconditionError("the foundation needs a softmax head")
    for i, part in enumerate(partitions):
        if len(part) == 0:
            raise InsufficientDataError(f"partition {i} is empty")
        if part.inputs.shape[1] != foundation.input_dim:
            raise DimensionMismatchError(f"partition {i} has the wrong input width")

    theta0 = foundation.parameters()
    clients = []
    for i in range(K):
        if hyper.init_jitter > 0.0:
            noise = np.random.default_rng([seed, i]).standard_normal(theta0.shape)
            theta = theta0 + hyper.init_jitter * noise
            clients.append(foundation.with_parameters(theta))
        else:
            clients.append(foundation)

    pool = np.vstack([p.inputs for p in partitions])
    pick = np.random.default_rng([seed, K]).integers(0, pool.shape[0], size=probe_size)
    alpha = (np.ones((K, K)) - np.eye(K)) / (K - 1)
    logger.info(
        "federation: K=%d beta=%g lambda=%g eta=%g probe=%d",
        K,
        hyper.beta,
        hyper.lam,
        hyper.eta,
        probe_size,
    )
    return FederationState(
        foundation=foundation,
        clients=clients,
        alpha=alpha,
        hyper=hyper,
        probe_set=pool[pick],
        partitions=list(partitions),
    )


def freeze_anchors(state: FederationState, anchors) -> FederationState:
    """Freeze clients ``anchors`` and record their parameter digests."""
    anchors = frozenset(int(a) for a in anchors)
    bad = sorted(a for a in anchors if not 0 <= a < state.K)
    if bad:
        raise PreconditionError(f"anchor indices out of range: {bad}")
    digests = {a: state.clients[a].digest() for a in sorted(anchors)}
    return _replace(state, anchors=anchors, anchor_digests=digests)


def _verify_anchors(state: FederationState) -> None:
    for a in sorted(state.anchors):
        if state.clients[a].digest() != state.anchor_digests[a]:
            raise AnchorIntegrityError(
                f"anchor client {a} no longer matches its digest"
            )


def equilibrium_metric(state: FederationState) -> tuple[list[list[float]], float]:
    """Pairwise mean symmetric KL on the probe set and its off-diagonal mean."""
    logps = [log_probs(c, state.probe_set) for c in state.clients]
    K = state.K
    M = np.zeros((K, K))
    for i in range(K):
        for j in range(i + 1, K):
            kl = float(np.mean(symmetric_kl(logps[i], logps[j])))
            M[i, j] = M[j, i] = max(0.0, kl)
    score = float(M.sum() / (K * (K - 1)))
    return M.tolist(), score


def _round_metrics(state: FederationState) -> RoundMetrics:
    probs = _probe_probs(state)
    clients = []
    for i, net in enumerate(state.clients):
        batch = state.partitions[i]
        objective = _objective(state, i, probs)
        _, grad = objective.value_and_grad(net, batch)
        logp = log_probs(net, state.probe_set)
        kl_mix = float(np.mean(kl_rows(logp, objective.mixture_logp)))
        clients.append(
            ClientMetrics(
                client=i,
                local_loss=CrossEntropyLoss().value(net, batch),
                kl_mixture=max(0.0, kl_mix),
                grad_norm=float(np.linalg.norm(grad)),
                anchor=i in state.anchors,
            )
        )
    matrix, score = equilibrium_metric(state)
    return RoundMetrics(
        round=state.round, clients=clients, symmetric_kl=matrix, equilibrium_score=score
    )


def run_round(
    state: FederationState,
    order: Sequence[int] | None = None,
    transport: Transport | None = None,
) -> tuple[FederationState, RoundMetrics]:
    """One synchronous round; ``order`` only permutes the update schedule."""
    _verify_anchors(state)
    order = list(range(state.K)) if order is None else list(order)
    if sorted(order) != list(range(state.K)):
        raise PreconditionError("update order must be a permutation of the clients")
    transport = InProcessTransport() if transport is None else transport

    for j, client in enumerate(state.clients):
        transport.publish(state.round, j, np.exp(log_probs(client, state.probe_set)))
    snapshot = transport.gather(state.round)

    updated = list(state.clients)
    for i in order:
        if i in state.anchors:
            continue
        objective = _objective(state, i, snapshot)
        updated[i] = _local_update(
            state.clients[i], objective, state.partitions[i], state.hyper
        )

    committed = _replace(state, clients=updated, round=state.round + 1)
    _verify_anchors(committed)
    metrics = _round_metrics(committed)
    logger.info(
        "round %d: equilibrium score %.6g", committed.round, metrics.equilibrium_score
    )
    return committed, metrics


def fixed_point_check(state: FederationState, tol: float) -> FixedPointCheck:
    """Objective gradient norm of every non-anchor client; converged if all < tol."""
    norms = {}
    for i, net in enumerate(state.clients):
        if i in state.anchors:
            continue
        _, grad = _objective(state, i).value_and_grad(net, state.partitions[i])
        norms[i] = float(np.linalg.norm(grad))
    return FixedPointCheck(
        grad_norms=norms, tol=tol, converged=all(v < tol for v in norms.values())
    )


def train_independent(
    net: Network,
    batch: Batch,
    foundation: Network,
    probe: np.ndarray,
    hyper: FederationHyper,
    rounds: int,
) -> Network:
    """A lone client with the peer term switched off, round for round."""
    objective = ClientObjective(
        probe=probe,
        prior_logp=log_probs(foundation, probe),
        mixture_logp=np.zeros((np.asarray(probe).shape[0], foundation.output_dim)),
        beta=hyper.beta,
        lam=0.0,
    )
    for _ in range(rounds):
        net = _local_update(net, objective, batch, hyper)
    return net
