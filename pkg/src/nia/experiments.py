"""Drivers behind the CLI: protocol runs, depth scans, verification suites."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, VerifyConfig
from .data import Dataset
from .errors import InvalidConfig
from .graph import AgentGraph, check_m_coverage, cyclic_path_assignment
from .instances import (
    HardInstanceSpec,
    generate_hard_instance,
    noise_monotonicity_check,
    numeric_pass_coefficients,
    optimal_pass_coefficients,
    optimal_scaling_factor,
    scaling_gradient,
)
from .io import read_dataset_file, read_graph_file
from .logistic import FitOptions, FitResult, fit_logistic, residual_moments
from .metrics import (
    bernoulli_kl_pointwise,
    build_theory_report,
    feature_second_moment_bound,
    stable_block,
    verify_decomposition,
)
from .protocol import ProtocolTrace, agent_design, run_protocol, sink_excess_loss

C_RANGE_PASSES = (1, 2, 4, 8, 16, 64)
COEFFICIENT_PASSES = (2, 3, 4, 5, 6)
COEFFICIENT_SCALES = (0.3, 0.7, 1.0)
NOISE_VARIANCE_PAIRS = ((0.0, 0.5), (0.5, 1.0), (1.0, 2.0))


def hard_dataset(k: int, n: int, seed: int) -> Dataset:
    return generate_hard_instance(HardInstanceSpec(k=k, n=n, seed=seed))


def global_logistic_fit(dataset: Dataset, opts: FitOptions) -> FitResult:
    """Fit on all d feature columns; the comparator for excess losses."""
    return fit_logistic(dataset.features, dataset.labels, opts)


def resolve_graph(config: ExperimentConfig) -> tuple[AgentGraph, int, int | None]:
    """Build or load the graph; returns (graph, d, window M or None)."""
    gc = config.graph
    if gc is None:
        raise InvalidConfig("this command requires a 'graph' section")
    if gc.cyclic_depth is not None:
        k = config.instance.k
        graph = cyclic_path_assignment(k, gc.cyclic_depth)
        return graph, k, (gc.m if gc.m is not None else k)
    graph, d = read_graph_file(gc.file)
    return graph, d, gc.m


def resolve_dataset(config: ExperimentConfig, seed: int | None = None) -> tuple[Dataset, int | None]:
    inst = config.instance
    if inst.kind == "file":
        return read_dataset_file(inst.dataset), None
    use_seed = seed if seed is not None else inst.seeds[0]
    return hard_dataset(inst.k, inst.n, use_seed), use_seed


@dataclass(frozen=True)
class RunArtifacts:
    dataset: Dataset
    graph: AgentGraph
    trace: ProtocolTrace
    global_fit: FitResult
    report: dict


def run_experiment(config: ExperimentConfig) -> RunArtifacts:
    """One protocol run plus the global fit, bound values, and diagnostics.

    Coverage is evaluated only for path graphs with a known window M; when
    it fails (or is not applicable) the depth-bound comparison is omitted
    from the report rather than computed on an inapplicable graph.
    """
    dataset, seed = resolve_dataset(config)
    graph, d, window = resolve_graph(config)
    opts = config.solver.to_fit_options()
    trace = run_protocol(dataset, graph, opts)
    gfit = global_logistic_fit(dataset, opts)
    excess = sink_excess_loss(trace, dataset, gfit)
    sink = trace.sink_id

    is_path = graph.is_path()
    coverage = None
    first_violation = None
    if is_path and window is not None:
        cov = check_m_coverage(graph, window, d)
        coverage = cov.ok
        first_violation = cov.first_violation

    b_x = feature_second_moment_bound(dataset.features)
    b_g = gfit.l1_norm
    block = None
    theory: dict | None = None
    if is_path:
        losses = trace.loss_path()
        if window is not None and window <= losses.shape[0]:
            block = stable_block(losses, window)
            theory = build_theory_report(
                b_x=b_x, b_g=b_g, m=window, depth=graph.num_agents, epsilon=block.drop
            ).to_dict()
            if not coverage:
                theory["rhs_convergence_bound"] = None

    report = {
        "config_hash": config.config_hash(),
        "n": dataset.n,
        "d": d,
        "seed": seed,
        "depth": graph.num_agents,
        "m": window,
        "is_path": is_path,
        "coverage": coverage,
        "coverage_first_violation": first_violation,
        "sink_agent": sink,
        "sinks": list(graph.sinks()),
        "sink_loss": trace.losses[sink],
        "global_loss": gfit.loss,
        "excess": excess,
        "all_converged": trace.all_converged and gfit.converged,
        "stable_block": ({"index": block.index, "drop": block.drop} if block else None),
        "theory": theory,
    }
    return RunArtifacts(dataset=dataset, graph=graph, trace=trace, global_fit=gfit, report=report)


def _scan_grid(config: ExperimentConfig) -> list[tuple[int, int]]:
    sc = config.scan
    if sc is None:
        raise InvalidConfig("scan requires a 'scan' section")
    k = config.instance.k
    depths = sorted(set(sc.depths) | {k * p for p in sc.passes})
    windows = sc.windows if sc.windows else (k,)
    grid = [(depth, m) for depth in depths for m in windows]
    for depth, m in grid:
        if m > depth:
            raise InvalidConfig(f"scan window {m} exceeds depth {depth}")
    return grid


def _scan_seed_rows(
    k: int, n: int, seed: int, grid: list[tuple[int, int]], solver: tuple, chash: str
) -> list[dict]:
    """All scan rows for one seed.

    The protocol trace of a cyclic path is prefix-stable (agent i's fit only
    sees its ancestors), so one run at the maximum depth yields the sink
    losses of every shallower depth.
    """
    opts = FitOptions(*solver)
    base = {
        "config_hash": chash,
        "k": k,
        "seed": seed,
        "n": n,
        "error": None,
    }
    try:
        dataset = hard_dataset(k, n, seed)
        gfit = global_logistic_fit(dataset, opts)
        max_depth = max(depth for depth, _ in grid)
        trace = run_protocol(dataset, cyclic_path_assignment(k, max_depth), opts)
        losses = trace.loss_path()
        b_x = feature_second_moment_bound(dataset.features)
        rows = []
        for depth, m in grid:
            sink_loss = float(losses[depth - 1])
            p = depth / k
            rows.append(
                base
                | {
                    "D": depth,
                    "M": m,
                    "p": int(p) if p.is_integer() else p,
                    "sink_loss": sink_loss,
                    "global_loss": gfit.loss,
                    "excess": sink_loss - gfit.loss,
                    "upper_bound": float(gfit.l1_norm * b_x * m / np.sqrt(depth)),
                    "lower_shape": 1.0 / (p + 1.0),
                }
            )
        return rows
    except Exception as exc:  # recorded per point, the scan itself continues
        return [
            base | {
                "D": depth,
                "M": m,
                "p": depth / k,
                "sink_loss": None,
                "global_loss": None,
                "excess": None,
                "upper_bound": None,
                "lower_shape": None,
                "error": f"{type(exc).__name__}: {exc}",
            }
            for depth, m in grid
        ]


def scan_experiment(config: ExperimentConfig, threads: int | None = None) -> list[dict]:
    """Depth/pass scan: one row per (grid point, seed), ordered by
    (depth, window, seed). Seeds run in parallel when threads > 1."""
    if config.instance.kind != "hard":
        raise InvalidConfig("scan currently supports the generated instance only")
    grid = _scan_grid(config)
    k, n = config.instance.k, config.instance.n
    sc = config.solver
    solver = (sc.grad_tol, sc.max_iters, sc.ridge, sc.backtrack, sc.init_step)
    chash = config.config_hash()
    workers = threads if threads is not None else config.threads
    seeds = config.instance.seeds

    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(
                pool.map(
                    _scan_seed_worker,
                    [(k, n, seed, grid, solver, chash) for seed in seeds],
                )
            )
    else:
        per_seed = [_scan_seed_rows(k, n, seed, grid, solver, chash) for seed in seeds]

    rows = [row for rows_ in per_seed for row in rows_]
    rows.sort(key=lambda r: (r["D"], r["M"], r["seed"]))
    return rows


def _scan_seed_worker(args: tuple) -> list[dict]:
    return _scan_seed_rows(*args)


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


def _suite(passed: bool, margin: float, threshold: float, **details) -> dict:
    return {
        "passed": bool(passed),
        "margin": float(margin),
        "threshold": float(threshold),
        "details": details,
    }


def _protocol_run_for_verify(config: ExperimentConfig) -> tuple[Dataset, AgentGraph, ProtocolTrace]:
    vc = config.verify
    dataset = hard_dataset(vc.k, vc.n_protocol, vc.seed)
    graph = cyclic_path_assignment(vc.k, vc.depth)
    trace = run_protocol(dataset, graph, config.solver.to_fit_options())
    return dataset, graph, trace


def orthogonality_suite(
    dataset: Dataset, graph: AgentGraph, trace: ProtocolTrace, threshold: float = 1e-9
) -> dict:
    """Residual moments of every converged agent's own design at its fitted
    logits; all must vanish to within the threshold."""
    worst = 0.0
    unconverged = 0
    for agent_id in graph.topo_order:
        if not trace.models[agent_id].converged:
            unconverged += 1
            continue
        design = agent_design(dataset, graph, agent_id, trace)
        if design.shape[1] == 0:
            continue
        moments = residual_moments(design, trace.logits[agent_id], dataset.labels)
        worst = max(worst, float(np.max(np.abs(moments))))
    return _suite(
        worst <= threshold and unconverged == 0,
        threshold - worst,
        threshold,
        max_moment=worst,
        unconverged_agents=unconverged,
    )


def monotone_loss_suite(trace: ProtocolTrace, threshold: float = 1e-9) -> dict:
    """Consecutive losses along the path may rise only by solver slack,
    because forwarding the parent logit unchanged is always feasible."""
    losses = trace.loss_path()
    increases = np.diff(losses)
    worst = float(np.max(increases)) if increases.size else 0.0
    return _suite(worst <= threshold, threshold - worst, threshold, max_increase=worst)


def decomposition_suite(config: ExperimentConfig, threshold: float = 1e-8) -> dict:
    """Loss-decomposition identity around the global fit for perturbed
    comparators; the residual scales with the achieved gradient norm."""
    vc = config.verify
    dataset = hard_dataset(vc.k, vc.n_decomposition, vc.seed)
    sc = config.solver
    opts = FitOptions(
        grad_tol=vc.decomposition_grad_tol,
        max_iters=sc.max_iters,
        ridge=sc.ridge,
        backtrack=sc.backtrack,
        init_step=sc.init_step,
    )
    gfit = global_logistic_fit(dataset, opts)
    star_logits = dataset.features @ gfit.weights
    rng = np.random.Generator(np.random.Philox(key=vc.seed))
    worst = 0.0
    features = tuple(range(1, dataset.d + 1))
    for _ in range(vc.decomposition_perturbations):
        delta = rng.uniform(-0.1, 0.1, size=dataset.d)
        q_logits = dataset.features @ (gfit.weights + delta)
        worst = max(worst, verify_decomposition(dataset, star_logits, q_logits, features))
    return _suite(
        worst <= threshold and gfit.converged,
        threshold - worst,
        threshold,
        max_residual=worst,
        global_grad_norm=gfit.grad_norm,
        global_converged=gfit.converged,
    )


def pinsker_suite(trials: int, seed: int, threshold: float = -1e-12) -> dict:
    """Expected KL dominates twice the mean squared probability gap; checked
    pointwise on random probability pairs from the open unit interval."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    p = rng.random(trials) + 2.0 ** -54
    q = rng.random(trials) + 2.0 ** -54
    gaps = bernoulli_kl_pointwise(p, q) - 2.0 * (p - q) ** 2
    worst = float(np.min(gaps))
    return _suite(worst >= threshold, worst - threshold, threshold, min_gap=worst)


def coefficient_suite(threshold: float = 1e-9) -> dict:
    """Numeric minimization of the pass-predictor residual variance must
    match the closed form (coefficient-difference sum and minimal value)."""
    worst = 0.0
    for p in COEFFICIENT_PASSES:
        for c in COEFFICIENT_SCALES:
            closed = optimal_pass_coefficients(p, c)
            s_closed = -c * (p - 1) / p
            s_num, var_num = numeric_pass_coefficients(p, c)
            worst = max(
                worst,
                abs(s_num - s_closed),
                abs(var_num - closed.residual_variance),
                abs(closed.noise_variance_scaled - 1.0),
            )
    return _suite(worst <= threshold, threshold - worst, threshold, max_deviation=worst)


def scaling_factor_suite(threshold: float = 1e-10) -> dict:
    """Optimal scales lie strictly inside (0, 1), increase with the pass
    index, and zero the quadrature loss derivative."""
    values = []
    worst_grad = 0.0
    for p in C_RANGE_PASSES:
        c = optimal_scaling_factor(p)
        values.append(c)
        worst_grad = max(worst_grad, abs(scaling_gradient(c, p)))
    in_range = all(0.0 < c < 1.0 for c in values)
    increasing = all(b > a for a, b in zip(values, values[1:]))
    return _suite(
        in_range and increasing and worst_grad <= threshold,
        threshold - worst_grad,
        threshold,
        c_values=values,
        in_range=in_range,
        increasing=increasing,
        max_gradient=worst_grad,
    )


def noise_monotonicity_suite(
    c: float, n_mc: int, seed: int, min_margin_se: float = 3.0
) -> dict:
    """Loss strictly increases with the logit noise variance, with the
    paired Monte Carlo margin measured in standard errors."""
    worst = np.inf
    pairs = []
    for v_small, v_large in NOISE_VARIANCE_PAIRS:
        cmp = noise_monotonicity_check(c, v_small, v_large, n_mc, seed)
        pairs.append(
            {
                "v_small": v_small,
                "v_large": v_large,
                "loss_small": cmp.loss_small,
                "loss_large": cmp.loss_large,
                "margin_se": cmp.margin_se,
            }
        )
        worst = min(worst, cmp.margin_se)
    return _suite(worst > min_margin_se, worst - min_margin_se, min_margin_se, pairs=pairs)


def verify_experiment(config: ExperimentConfig) -> dict:
    """Run every verification suite and aggregate a pass/fail report."""
    vc: VerifyConfig = config.verify
    dataset, graph, trace = _protocol_run_for_verify(config)
    suites = {
        "orthogonality": orthogonality_suite(dataset, graph, trace),
        "decomposition": decomposition_suite(config),
        "pinsker": pinsker_suite(vc.pinsker_trials, vc.seed),
        "monotone_loss": monotone_loss_suite(trace),
        "coefficient_closed_form": coefficient_suite(),
        "scaling_factor_range": scaling_factor_suite(),
        "noise_monotonicity": noise_monotonicity_suite(
            vc.noise_scale, vc.noise_samples, vc.seed
        ),
    }
    return {
        "config_hash": config.config_hash(),
        "suites": suites,
        "all_passed": all(s["passed"] for s in suites.values()),
    }
