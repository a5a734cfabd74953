"""One experiment per subcommand.

Each experiment builds its toy scenario from the run config, writes its
artifacts through an ``ArtifactWriter`` and returns the embedded checks.
"""

import logging
import math
from collections.abc import Callable

import numpy as np

from src.boundary import (
    contrastive_loss,
    sft_loss,
    stage0_pretrain,
    stage1_sft,
    stage2_perturbed,
    unified_loss,
)
from src.covers import count_pieces, cover_drift, track_covers
from src.datagen import (
    complexity_index,
    data_complexity_batch,
    data_complexity_full,
    dataset_table,
    generate,
    minibatch_indices,
    nonlinear_complexity,
    tag_dataset,
)
from src.enums import Activation, Subcommand
from src.federation import (
    fixed_point_check,
    freeze_anchors,
    init_federation,
    run_round,
    train_independent,
)
from src.fixedpoint import (
    affine_fixed_point,
    contraction_report,
    enumerate_fixed_points,
    error_ratios,
    iterate,
    lagrangian_train,
    mean_residual_norm,
    perturbation_accel,
    preconditioned_step,
    train_residual,
)
from src.losses import SquaredErrorLoss
from src.models import (
    AxisScorer,
    Batch,
    BoundaryWeights,
    Checkpoint,
    CheckResult,
    CompositionParams,
    DeviationEvent,
    DeviationSpec,
    FederationHyper,
    FederationState,
    FunctionSpec,
    GaussianComponent,
    InputSampler,
    IntentionCost,
    Layer,
    LinearParams,
    NegativeSquaredDistance,
    Network,
    PiecewiseParams,
    PolynomialParams,
    RoundMetrics,
    RunConfig,
    Trajectory,
    WeakBoundaryPoint,
    WeakBoundarySet,
)
from src.nncore import curvature_proxy, descend
from src.persistence import ArtifactWriter
from src.plasticity import (
    checkpoint_components,
    curvature_functional,
    hessian_fd_check,
    level_set_sample,
    rigidity_track,
)
from src.stochastic import (
    activation_stats,
    depth_contraction_fit,
    exp_vs_union_experiment,
    random_deviation_spec,
    stochastic_fixed_point,
    union_bound_check,
)

logger = logging.getLogger(__name__)

Experiment = Callable[[RunConfig, ArtifactWriter], list[CheckResult]]


def _check(name: str, passed, detail: str = "") -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def _one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    return np.eye(classes)[labels]


def bisect_tanh_root(gain: float, iterations: int = 200) -> float:
    """Positive root of ``tanh(gain * a) = a`` for ``gain > 1``."""
    lo, hi = 1e-9, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if math.tanh(gain * mid) > mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _lagrangian_start(dim: int) -> Network:
    W = 1.05 * np.eye(dim) + 0.3 * np.eye(dim, k=1) - 0.4 * np.eye(dim, k=-1)
    b = 0.2 * (-0.5) ** np.arange(dim)
    return Network.linear(W, b)


def run_fixedpoint(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p, tol = config.fixedpoint, config.tolerances
    checks: list[CheckResult] = []

    # residual training
    rng = np.random.default_rng([config.seed, 0])
    data = p.data_scale * rng.standard_normal((p.n_points, p.dim))
    net = Network.initialize(
        [p.dim, p.hidden, p.dim], [Activation.TANH, Activation.IDENTITY], rng
    )
    before = mean_residual_norm(net, data)
    trained = train_residual(net, data, p.train_steps, p.lr)
    after = mean_residual_norm(trained.network, data)
    writer.csv(
        "residual_curve.csv",
        ["step", "loss"],
        [[t, v] for t, v in enumerate(trained.loss_curve)],
    )
    checks.append(
        _check(
            "residual_reduced_90pct",
            after <= 0.1 * before,
            f"mean residual {before:.6g} -> {after:.6g}",
        )
    )
    landing = iterate(
        trained.network,
        data[0],
        p.max_t,
        tol.fixed_point_tol,
        divergence_bound=tol.divergence_bound,
    )
    writer.json(
        "residual_fixed_point.json",
        {
            "converged": landing.converged,
            "diverged": landing.diverged,
            "steps": landing.steps,
            "report": landing.report,
        },
    )

    # contraction rates of linear maps
    rows = []
    reports = {}
    for rho in p.contraction_rhos:
        lin = Network.linear(np.diag(rho * 0.5 ** np.arange(p.dim)), np.ones(p.dim))
        x_star = affine_fixed_point(lin)
        result = iterate(lin, np.zeros(p.dim), p.max_t, min(tol.fixed_point_tol, 1e-12))
        ratios = error_ratios(result.path, x_star)
        rows.extend([rho, t, r] for t, r in enumerate(ratios))
        tail = ratios[-20:]
        worst = max((abs(r - rho) for r in tail), default=math.inf)
        checks.append(
            _check(
                f"contraction_ratio_{rho:g}",
                result.converged and len(tail) == 20 and worst < 0.05,
                f"worst tail deviation {worst:.3g}",
            )
        )
        reports[f"{rho:g}"] = contraction_report(
            lin,
            x_star,
            tol.fixed_point_tol,
            tol.power_tol,
            tol.power_max_iter,
            tol.merge_factor,
        )
    writer.csv("contraction_ratios.csv", ["rho", "step", "ratio"], rows)
    writer.json("contraction_reports.json", reports)

    # fixed points of tanh(gain * x)
    scalar = Network(
        layers=[
            Layer(
                weight=[[p.enumeration_gain]], bias=[0.0], activation=Activation.TANH
            )
        ]
    )
    enumeration = enumerate_fixed_points(
        scalar,
        [[g] for g in p.enumeration_grid],
        tol.fixed_point_tol,
        p.max_t,
        tol.merge_radius,
        tol.divergence_bound,
    )
    writer.json("enumeration.json", enumeration)
    found = sorted(float(r.point[0]) for r in enumeration.fixed_points)
    if p.enumeration_gain > 1.0:
        a = bisect_tanh_root(p.enumeration_gain)
        expected = [-a, 0.0, a]
    else:
        expected = [0.0]
    checks.append(
        _check(
            "enumeration_matches_oracle",
            len(found) == len(expected)
            and all(abs(f - e) < 1e-6 for f, e in zip(found, expected)),
            f"found {found}, expected {expected}",
        )
    )
    checks.append(
        _check(
            "enumeration_stability",
            all(
                r.stable == (abs(float(r.point[0])) > 0.0 or p.enumeration_gain < 1.0)
                for r in enumeration.fixed_points
            ),
            "nonzero roots stable, origin unstable when the gain exceeds 1",
        )
    )

    # weight-budget Lagrangian
    start = _lagrangian_start(p.dim)
    theta0 = start.parameters()
    budget = p.budget_fraction * float(theta0 @ theta0)
    lag_rng = np.random.default_rng([config.seed, 2])
    lag_data = lag_rng.standard_normal((p.n_points, p.dim))
    lag = lagrangian_train(
        start,
        lag_data,
        budget,
        p.lagrangian_steps,
        p.lr_theta,
        p.lr_lambda,
        penalty=p.penalty,
        step_tol=p.step_tol,
        divergence_bound=tol.divergence_bound,
    )
    writer.csv(
        "lagrangian_history.csv",
        ["step", "energy", "constraint", "multiplier"],
        [[s.step, s.energy, s.constraint_value, s.multiplier] for s in lag.history],
    )
    final_g = lag.history[-1].constraint_value
    checks.append(
        _check(
            "lagrangian_constraint",
            abs(final_g) / budget < 0.05 and lag.stationarity_norm < 10 * p.step_tol,
            f"|g|/c={abs(final_g) / budget:.3g} "
            f"stationarity={lag.stationarity_norm:.3g}",
        )
    )

    # perturbation and preconditioning
    rho = p.perturbation_rho
    base = Network.linear(rho * np.eye(p.dim))
    pert = perturbation_accel(
        base,
        Network.linear(-rho * np.eye(p.dim)),
        p.perturbation_eps,
        np.zeros(p.dim),
        tol.power_tol,
        tol.power_max_iter,
    )
    expected_rho = rho * (1.0 - p.perturbation_eps)
    H = np.diag(np.logspace(0, 2, p.dim))
    grad = H @ np.ones(p.dim)
    step = preconditioned_step(
        np.ones(p.dim), grad, np.diag(H), 0.9, H, tol.power_tol, tol.power_max_iter
    )
    # squared-gradient moments overshoot the curvature: G ~ h^2 instead of h
    G = curvature_proxy([grad] * 10, 0.9, tol.curvature_damping)
    moment_step = preconditioned_step(
        np.ones(p.dim), grad, G, 0.9, H, tol.power_tol, tol.power_max_iter
    )
    h_max = float(H[-1, -1])
    moment_rho = 1.0 - 0.9 * h_max / (h_max**2 + tol.curvature_damping)
    writer.json(
        "perturbation.json",
        {
            "perturbation": pert,
            "preconditioned": step,
            "moment_preconditioned": moment_step,
        },
    )
    checks.append(
        _check(
            "perturbation_acceleration",
            abs(pert.rho_perturbed - expected_rho) < 1e-9 and pert.accelerated,
            f"rho {pert.rho_base:.6g} -> {pert.rho_perturbed:.12g}",
        )
    )
    checks.append(
        _check(
            "preconditioned_radius",
            abs(step.effective_radius - 0.1) < 1e-12,
            f"effective radius {step.effective_radius!r}",
        )
    )
    checks.append(
        _check(
            "moment_preconditioner_contracts",
            abs(moment_step.effective_radius - moment_rho) < 1e-9,
            f"effective radius {moment_step.effective_radius!r}",
        )
    )
    return checks


def run_covers(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p = config.covers
    rng = np.random.default_rng([config.seed, 0])
    sizes = p.layer_sizes
    X = rng.uniform(-1.0, 1.0, size=(p.n_samples, sizes[0]))
    targets = np.sin(np.pi * X.sum(axis=1, keepdims=True)) * np.ones((1, sizes[-1]))
    batch = Batch.of(X, targets=targets)
    activations = [p.hidden_activation] * (len(sizes) - 2) + [Activation.IDENTITY]
    net = Network.initialize(sizes, activations, rng)

    trained, snapshots, rows = track_covers(
        net, SquaredErrorLoss(), batch, p.steps, p.lr, p.tau, p.snapshot_every
    )
    writer.csv(
        "covers.csv",
        ["iteration", "layer", "node", "cover_size", "jaccard_vs_prev"],
        [[r.iteration, r.layer, r.node, r.cover_size, r.jaccard_vs_prev] for r in rows],
    )
    drift = cover_drift(snapshots[0], snapshots[-1])
    pieces = {
        "before": [count_pieces(net, X, k) for k in range(net.depth)],
        "after": [count_pieces(trained, X, k) for k in range(net.depth)],
    }
    writer.json("cover_drift.json", {"drift": drift, "pieces": pieces})

    expected = p.steps // p.snapshot_every + 1 + (p.steps % p.snapshot_every != 0)
    distances = [d for layer in drift.distances for d in layer]
    return [
        _check(
            "snapshot_count",
            len(snapshots) == expected,
            f"{len(snapshots)} snapshots, expected {expected}",
        ),
        _check(
            "drift_in_unit_interval",
            all(0.0 <= d <= 1.0 for d in distances),
            f"max drift {max(distances, default=0.0):.3g}",
        ),
    ]


def run_boundary(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p = config.boundary
    rng = np.random.default_rng([config.seed, 0])
    X = rng.standard_normal((p.n_samples, p.dim))
    labels = np.clip(
        np.floor((np.tanh(X[:, 0]) + 1.0) / 2.0 * p.classes), 0, p.classes - 1
    ).astype(np.int64)
    onehot = _one_hot(labels, p.classes)
    net = Network.initialize(
        [p.dim, p.hidden, p.classes], [Activation.TANH, Activation.SOFTMAX], rng
    )
    batch = Batch.of(X, labels=labels)
    sft_batch = Batch.of(X, targets=onehot)

    s0 = stage0_pretrain(net, batch, p.stage0_steps, p.lr)
    s1 = stage1_sft(s0.network, sft_batch, p.stage1_steps, p.lr)

    # held-out point in the top class region; the reward agrees with the labels
    point = np.zeros(p.dim)
    point[0] = p.boundary_x0
    top = _one_hot(np.array([p.classes - 1]), p.classes)[0]
    wb = WeakBoundarySet(
        points=[
            WeakBoundaryPoint(
                x=point, eps=p.eps, reward=NegativeSquaredDistance(target=top)
            )
        ]
    )
    base = sft_loss(sft_batch)
    s2 = stage2_perturbed(
        s1.network, base, sft_batch, wb, p.lam, p.stage2_steps, p.lr
    )
    replay = stage2_perturbed(
        s1.network, base, sft_batch, wb, 0.0, p.stage2_steps, p.lr
    )
    plain = stage1_sft(s1.network, sft_batch, p.stage2_steps, p.lr)

    rows = [["stage0_kl", t, v] for t, v in enumerate(s0.loss_curve)]
    rows += [["stage1_sft", t, v] for t, v in enumerate(s1.loss_curve)]
    rows += [["stage2_base", t, v] for t, v in enumerate(s2.base_curve)]
    rows += [["stage2_boundary", t, v] for t, v in enumerate(s2.boundary_curve)]
    writer.csv("stage_curves.csv", ["stage", "step", "value"], rows)

    weights = BoundaryWeights(alpha=p.alpha, beta=p.beta)
    intention = IntentionCost(probe=X[0], target=onehot[0])
    unified = {
        name: unified_loss(model, batch, weights, intention, onehot)
        for name, model in (
            ("initial", net),
            ("stage0", s0.network),
            ("stage1", s1.network),
            ("stage2", s2.network),
        )
    }

    crng = np.random.default_rng([config.seed, 1])
    anchors = crng.standard_normal((8, p.dim))
    negatives = crng.standard_normal((8, p.negatives, p.dim)) * 3.0
    far = anchors + 1.0
    near = anchors + 0.1
    far_losses = [
        contrastive_loss(a, f, n) for a, f, n in zip(anchors, far, negatives)
    ]
    near_losses = [
        contrastive_loss(a, c, n) for a, c, n in zip(anchors, near, negatives)
    ]
    writer.json(
        "boundary.json",
        {
            "unified_loss": unified,
            "weak_boundary": {
                "point": point,
                "start": s2.boundary_curve[0],
                "end": s2.boundary_curve[-1],
                "end_without_pull": replay.boundary_curve[-1],
            },
            "contrastive": {"far": far_losses, "near": near_losses},
        },
    )
    return [
        _check(
            "stage0_kl_decreases",
            s0.loss_curve[-1] < s0.loss_curve[0] and s0.loss_curve[-1] > -1e-9,
            f"KL {s0.loss_curve[0]:.6g} -> {s0.loss_curve[-1]:.6g}",
        ),
        _check(
            "stage1_fits_targets",
            s1.loss_curve[-1] < s1.loss_curve[0],
            f"SFT {s1.loss_curve[0]:.6g} -> {s1.loss_curve[-1]:.6g}",
        ),
        _check(
            "stage2_reward_improves",
            s2.boundary_curve[-1] > s2.boundary_curve[0],
            f"B {s2.boundary_curve[0]:.6g} -> {s2.boundary_curve[-1]:.6g}",
        ),
        _check(
            "lambda_zero_matches_stage1",
            replay.network.digest() == plain.network.digest(),
        ),
        _check(
            "contrastive_monotone",
            all(c < f for c, f in zip(near_losses, far_losses)),
        ),
    ]


def _synthetic_trajectories(
    rng: np.random.Generator, n: int, depth: int, rho: float, xi: float, sigma: float
) -> list[Trajectory]:
    trajectories = []
    for _ in range(n):
        e = [float(rng.uniform(0.5, 2.0))]
        for _ in range(depth):
            e.append(rho * e[-1] + xi + sigma * float(rng.standard_normal()))
        states = [np.array([v]) for v in e]
        trajectories.append(Trajectory(states=states, pre_activations=states[1:]))
    return trajectories


def run_stochastic(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p, tol = config.stochastic, config.tolerances
    checks: list[CheckResult] = []
    rng = np.random.default_rng([config.seed, 0])

    wide = Network.linear(rng.standard_normal((3, 2)), rng.standard_normal(3))
    stats = activation_stats(
        wide, 0, InputSampler(mean=[0.0, 0.0], std=[1.0, 1.0]), 10_000, config.seed
    )
    writer.json("activation_stats.json", stats)
    checks.append(
        _check(
            "activation_moments_match",
            np.all(np.abs(stats.mean - stats.analytic_mean) <= 4 * stats.mean_se)
            and np.all(
                np.abs(stats.variance - stats.analytic_variance)
                <= 4 * stats.variance_se
            ),
        )
    )

    features = np.random.default_rng([config.seed, 1]).standard_normal(
        (p.union_samples, 4)
    )
    spec_rng = np.random.default_rng([config.seed, 2])
    union = [
        union_bound_check(features, random_deviation_spec(spec_rng, features, 5))
        for _ in range(p.union_specs)
    ]
    disjoint = union_bound_check(
        features,
        DeviationSpec(
            events=[
                DeviationEvent(feature=0, upper=-1.0),
                DeviationEvent(feature=0, lower=-1.0, upper=0.0),
                DeviationEvent(feature=0, lower=0.0, upper=1.0),
            ]
        ),
    )
    writer.json("union_bound.json", {"random": union, "disjoint": disjoint})
    holds = all(u.p_union <= u.sum_p_i for u in union)
    checks.append(_check("union_bound_holds", holds))
    checks.append(
        _check("union_bound_disjoint_equality", disjoint.p_union == disjoint.sum_p_i)
    )

    traj_rng = np.random.default_rng([config.seed, 3])
    centres = [np.zeros(1)] * 21
    clean = depth_contraction_fit(
        _synthetic_trajectories(traj_rng, p.trajectories, 20, 0.7, 0.01, 0.0), centres
    )
    noisy = depth_contraction_fit(
        _synthetic_trajectories(traj_rng, p.trajectories, 20, 0.7, 0.01, 0.005), centres
    )
    writer.json(
        "contraction_fit.json",
        {
            "noiseless": clean.model_dump(exclude={"depth_errors", "residuals"}),
            "noisy": noisy.model_dump(exclude={"depth_errors", "residuals"}),
        },
    )
    checks.append(
        _check(
            "contraction_fit_noiseless",
            not clean.degenerate
            and abs(clean.rho - 0.7) < 1e-10
            and abs(clean.xi - 0.01) < 1e-10,
        )
    )
    checks.append(
        _check(
            "contraction_fit_noisy",
            not noisy.degenerate and abs(noisy.rho - 0.7) < 0.05,
            f"rho={noisy.rho}",
        )
    )

    ar = Network.linear([[p.gain]])
    report = exp_vs_union_experiment(
        ar,
        p.sigma,
        p.depth,
        p.n_runs,
        config.seed,
        tol.fixed_point_tol,
        p.pilot_steps,
    )
    writer.csv(
        "exp_vs_union.csv",
        ["depth", "measured_freq", "chain_pred", "union_sum"],
        [[r.depth, r.measured_freq, r.chain_pred, r.union_sum] for r in report.rows],
    )
    writer.json("exp_vs_union.json", report.model_dump(exclude={"rows"}))
    last = report.rows[-1]
    checks.append(
        _check("deviation_plateau", report.plateau, f"ratio {report.plateau_ratio}")
    )
    checks.append(
        _check(
            "chain_model_overpredicts",
            last.chain_pred >= 2.0 * last.measured_freq,
            f"chain {last.chain_pred:.4g} vs measured {last.measured_freq:.4g}",
        )
    )

    summary = stochastic_fixed_point(
        ar, p.sigma, p.burn_in, p.n_draws, config.seed, tol.fixed_point_tol
    )
    writer.json("stochastic_fixed_point.json", summary)
    stationary = p.sigma / math.sqrt(1.0 - p.gain**2)
    checks.append(
        _check(
            "stationary_std",
            abs(float(summary.std[0]) - stationary) <= 0.1 * stationary,
            f"std {float(summary.std[0]):.6g} vs {stationary:.6g}",
        )
    )
    return checks


def run_plasticity(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p, tol = config.plasticity, config.tolerances
    rng = np.random.default_rng([config.seed, 0])
    X = rng.standard_normal((p.n_samples, p.dim))
    batch = Batch.of(X, targets=np.sin(X.sum(axis=1)))
    net = Network.initialize(
        [p.dim, p.hidden, 1], [Activation.TANH, Activation.IDENTITY], rng
    )
    checkpoints: list[Checkpoint] = []

    def keep(step: int, current: Network) -> None:
        if step % p.checkpoint_every == 0 or step == p.train_steps:
            if not checkpoints or checkpoints[-1].step != step:
                checkpoints.append(Checkpoint(step=step, network=current))

    descend(net, SquaredErrorLoss(), batch, p.train_steps, p.lr, callback=keep)
    curve = rigidity_track(
        checkpoints,
        X,
        p.components,
        config.seed,
        p.C0,
        p.samples_per_component,
        band_fraction=p.band_fraction,
        level=p.level,
    )
    writer.csv(
        "rigidity.csv",
        ["step", "R", "C_eff"],
        [[q.step, q.R, q.C_eff] for q in curve.points],
    )
    dumps = [
        {
            "step": ckpt.step,
            "components": checkpoint_components(
                ckpt, X, p.components, config.seed, level=p.level
            ),
        }
        for ckpt in checkpoints
    ]
    writer.json("components.json", dumps)

    first = dumps[0]["components"][0]
    band = p.band_fraction * min(p.level, 1.0 - p.level)
    probe = level_set_sample(first, 10, band, [config.seed, 10_000]).points
    fd_gap = hessian_fd_check(first, probe, tol.fd_step)
    base_R = curvature_functional(
        dumps[0]["components"], p.samples_per_component, config.seed, p.band_fraction
    )
    tight = [
        GaussianComponent(mu=c.mu, sigma=c.sigma / 4.0, level=c.level)
        for c in dumps[0]["components"]
    ]
    tight_R = curvature_functional(
        tight, p.samples_per_component, config.seed, p.band_fraction
    )
    return [
        _check(
            "capacity_formula",
            all(q.C_eff == p.C0 / (1.0 + q.R) for q in curve.points),
        ),
        _check("hessian_matches_fd", fd_gap < 1e-4, f"max relative gap {fd_gap:.3g}"),
        _check(
            "tighter_covariance_increases_R",
            tight_R > base_R,
            f"R {base_R:.6g} -> {tight_R:.6g}",
        ),
    ]


def run_datagen(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p = config.datagen
    specs = {
        "L": LinearParams(),
        "P": PolynomialParams(degree=p.degree),
        "H": CompositionParams(depth=p.depth, frequency=p.frequency),
        "D": PiecewiseParams(jumps=[p.jump]),
    }
    scorer = AxisScorer()
    reports = {}
    additive = True
    for name, params in specs.items():
        spec = FunctionSpec(params=params, dim=p.dim, seed=config.seed)
        dataset, fn = generate(spec, p.n_samples)
        header, rows = dataset_table(dataset)
        writer.csv(f"dataset_{name}.csv", header, rows)
        writer.json(
            f"dataset_{name}.json",
            {"spec": spec, "complexity_index": complexity_index(spec)},
        )
        tags = tag_dataset(dataset, fn, p.fd_step)
        batches = minibatch_indices(len(dataset), p.batch_size, config.seed)
        per_batch = [
            data_complexity_batch([tags[i] for i in idx], scorer) for idx in batches
        ]
        full = data_complexity_full(dataset, fn, scorer, p.fd_step)
        additive &= math.isclose(math.fsum(per_batch), full, rel_tol=1e-9, abs_tol=1e-9)
        report = nonlinear_complexity(
            fn, None, p.fd_step, p.points_per_piece, config.seed
        ).model_copy(update={"c_data_batch": per_batch[0]})
        reports[name] = {
            "report": report,
            "complexity_index": complexity_index(spec),
            "c_data_full": full,
        }
    writer.json("complexity.json", reports)

    total = {name: r["report"].c_nonlinear for name, r in reports.items()}
    jump_term = sum(reports["D"]["report"].boundary_terms)
    return [
        _check(
            "complexity_ordering",
            total["L"] < total["P"] < total["H"],
            f"L={total['L']:.4g} P={total['P']:.4g} H={total['H']:.4g}",
        ),
        _check(
            "jump_readback",
            abs(jump_term - abs(p.jump)) <= 0.05 * abs(p.jump),
            f"boundary term {jump_term:.6g}",
        ),
        _check(
            "smooth_classes_have_no_boundary",
            all(sum(reports[c]["report"].boundary_terms) == 0.0 for c in "LPH"),
        ),
        _check("data_complexity_additive", additive),
    ]


def _client_partitions(config: RunConfig) -> list[Batch]:
    p = config.federation
    label_rng = np.random.default_rng([config.seed, 1])
    direction = label_rng.standard_normal((p.dim, p.classes))

    def draw(key: int) -> Batch:
        X = np.random.default_rng([config.seed, 2, key]).standard_normal(
            (p.samples_per_client, p.dim)
        )
        return Batch.of(X, labels=np.argmax(X @ direction, axis=1))

    if p.shared_data:
        shared = draw(0)
        return [shared] * p.clients
    return [draw(i) for i in range(p.clients)]


def _federate(
    state: FederationState, rounds: int
) -> tuple[FederationState, list[RoundMetrics]]:
    history = []
    for _ in range(rounds):
        state, metrics = run_round(state)
        history.append(metrics)
    return state, history


def run_federation(config: RunConfig, writer: ArtifactWriter) -> list[CheckResult]:
    p = config.federation
    rng = np.random.default_rng([config.seed, 0])
    foundation = Network.initialize(
        [p.dim, p.hidden, p.classes], [Activation.TANH, Activation.SOFTMAX], rng
    )
    partitions = _client_partitions(config)
    hyper = FederationHyper(
        beta=p.beta,
        lam=p.lam,
        eta=p.eta,
        damping=config.tolerances.fisher_damping,
        max_step=p.max_step,
        init_jitter=p.init_jitter,
        local_steps=p.local_steps,
    )
    start = init_federation(
        foundation, p.clients, partitions, hyper, config.seed, p.probe_size
    )

    state, history = _federate(start, p.rounds)
    scores = [m.equilibrium_score for m in history]
    rows = [
        [
            m.round,
            c.client,
            c.local_loss,
            c.kl_mixture,
            c.grad_norm,
            m.equilibrium_score,
        ]
        for m in history
        for c in m.clients
    ]
    writer.csv(
        "federation_rounds.csv",
        [
            "round",
            "client",
            "local_loss",
            "kl_mixture",
            "grad_norm",
            "equilibrium_score",
        ],
        rows,
    )

    decoupled = init_federation(
        foundation,
        p.clients,
        partitions,
        hyper.model_copy(update={"lam": 0.0}),
        config.seed,
        p.probe_size,
    )
    solo = [
        train_independent(
            decoupled.clients[i],
            partitions[i],
            foundation,
            decoupled.probe_set,
            decoupled.hyper,
            rounds=3,
        )
        for i in range(p.clients)
    ]
    decoupled, _ = _federate(decoupled, 3)

    summary = {
        "equilibrium_scores": scores,
        "fixed_point_check": fixed_point_check(state, tol=1e-3),
    }
    checks = [
        _check(
            "lambda_zero_decoupling",
            all(
                decoupled.clients[i].digest() == solo[i].digest()
                for i in range(p.clients)
            ),
        ),
    ]
    if p.lam > 0 and p.shared_data:
        checks.append(
            _check(
                "equilibrium_decreases",
                scores[-1] < scores[0],
                f"score {scores[0]:.6g} -> {scores[-1]:.6g}",
            )
        )

    # anchored companion run over the same rounds
    if p.anchors:
        anchored = freeze_anchors(start, p.anchors)
        digests = dict(anchored.anchor_digests)
        anchored, _ = _federate(anchored, p.rounds)
        moved = [
            i
            for i in range(p.clients)
            if i not in anchored.anchors
            and anchored.clients[i].digest() != start.clients[i].digest()
        ]
        summary["anchor_digests"] = {str(k): v for k, v in digests.items()}
        checks.extend(
            [
                _check(
                    "anchors_bit_identical",
                    {a: anchored.clients[a].digest() for a in anchored.anchors}
                    == digests,
                    f"{len(digests)} anchors over {p.rounds} rounds",
                ),
                _check(
                    "free_clients_move",
                    len(moved) == p.clients - len(anchored.anchors),
                    f"moved {moved}",
                ),
            ]
        )

    writer.json("federation_summary.json", summary)
    return checks


EXPERIMENTS: dict[Subcommand, Experiment] = {
    Subcommand.FIXEDPOINT: run_fixedpoint,
    Subcommand.COVERS: run_covers,
    Subcommand.BOUNDARY: run_boundary,
    Subcommand.STOCHASTIC: run_stochastic,
    Subcommand.PLASTICITY: run_plasticity,
    Subcommand.DATAGEN: run_datagen,
    Subcommand.FEDERATION: run_federation,
}
