"""Sequential learning protocol over an agent DAG.

Agents are processed in topological order; each fits a logistic model on its
local feature columns plus its parents' logit columns and publishes its own
logit column. Fitted logit columns are cached for the whole run (n * D reals),
which is the accepted budget at desk scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, MissingParent, NotConvergedWarning
from .graph import AgentGraph
from .logistic import FitOptions, FitResult, bce_loss, fit_logistic

# Pass-through of a parent's logits is always feasible, so consecutive path
# losses may increase only by solver slack.
MONOTONE_SLACK_FACTOR = 10.0


@dataclass(frozen=True)
class AgentModel:
    """Fitted parameters of one agent: local feature weights ``w`` (ascending
    feature index) and parent logit weights ``v`` (declared parent order)."""

    agent_id: int
    w: np.ndarray
    v: np.ndarray
    loss: float
    grad_norm: float
    converged: bool
    iterations: int

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.w).sum() + np.abs(self.v).sum())


@dataclass(frozen=True)
class ProtocolTrace:
    """Per-agent models, logit columns, and losses of one protocol run."""

    order: tuple[int, ...]
    models: dict[int, AgentModel]
    logits: dict[int, np.ndarray]
    losses: dict[int, float]

    @property
    def sink_id(self) -> int:
        """Last agent in the topological order."""
        return self.order[-1]

    @property
    def all_converged(self) -> bool:
        return all(m.converged for m in self.models.values())

    def loss_path(self) -> np.ndarray:
        """Losses arranged by topological position."""
        return np.array([self.losses[a] for a in self.order])

    def logit_matrix(self) -> np.ndarray:
        """n x D matrix of logit columns in topological order."""
        return np.column_stack([self.logits[a] for a in self.order])


def agent_design(
    dataset: Dataset,
    graph: AgentGraph,
    agent_id: int,
    trace: ProtocolTrace,
) -> np.ndarray:
    """Design matrix for one agent: local features in ascending index order,
    then parent logit columns in declared parent order."""
    cols = [dataset.features[:, l - 1] for l in sorted(graph.feature_set(agent_id))]
    for parent in graph.parents_of(agent_id):
        if parent not in trace.logits:
            raise MissingParent(f"agent {agent_id} needs logits of agent {parent}")
        cols.append(trace.logits[parent])
    if not cols:
        return np.empty((dataset.n, 0))
    return np.column_stack(cols)


def run_protocol(
    dataset: Dataset,
    graph: AgentGraph,
    opts: FitOptions | None = None,
) -> ProtocolTrace:
    """Execute the sequential protocol and return the complete trace.

    Agents that fail to converge are recorded (converged=False) and their
    capped weights are still used downstream; the run never aborts on an
    unconverged fit. Results are deterministic for fixed inputs under a fixed
    threading configuration.
    """
    opts = opts or FitOptions()
    max_feature = max((max(s) for s in graph.feature_sets if s), default=0)
    if max_feature > dataset.d:
        raise DimensionMismatch(
            f"graph references feature {max_feature} but dataset has d={dataset.d}"
        )
    trace = ProtocolTrace(order=graph.topo_order, models={}, logits={}, losses={})
    for agent_id in graph.topo_order:
        design = agent_design(dataset, graph, agent_id, trace)
        fit = fit_logistic(design, dataset.labels, opts)
        n_local = len(graph.feature_set(agent_id))
        # Publish the column recomputed from the final weights so that
        # logits[a] == design @ weights holds exactly; record the loss of the
        # published column for consistency with downstream monotone checks.
        z = design @ fit.weights if design.shape[1] else np.zeros(dataset.n)
        loss = bce_loss(z, dataset.labels)
        trace.models[agent_id] = AgentModel(
            agent_id=agent_id,
            w=fit.weights[:n_local],
            v=fit.weights[n_local:],
            loss=loss,
            grad_norm=fit.grad_norm,
            converged=fit.converged,
            iterations=fit.iterations,
        )
        trace.logits[agent_id] = z
        trace.losses[agent_id] = loss
    return trace


def sink_excess_loss(
    trace: ProtocolTrace,
    dataset: Dataset,
    global_fit: FitResult,
) -> float:
    """Final-agent loss minus the all-features fit's loss.

    Warns (NotConvergedWarning) when either side missed its gradient
    tolerance; the value is then still returned. Since the global fit spans a
    superset feature space, the result is bounded below by minus the solver
    slack.
    """
    sink = trace.sink_id
    if not trace.models[sink].converged:
        warnings.warn(
            f"sink agent {sink} did not converge (grad_norm={trace.models[sink].grad_norm:.3g})",
            NotConvergedWarning,
            stacklevel=2,
        )
    if not global_fit.converged:
        warnings.warn(
            f"global fit did not converge (grad_norm={global_fit.grad_norm:.3g})",
            NotConvergedWarning,
            stacklevel=2,
        )
    sink_loss = bce_loss(trace.logits[sink], dataset.labels)
    return sink_loss - global_fit.loss
