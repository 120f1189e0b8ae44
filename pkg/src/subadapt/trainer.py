"""The outer block-coordinate loop: full-objective evaluation,
initialization, convergence, and a monotonicity-auditable trace.

Block order per cycle: projection (exact eigen-step), shared classifier
(closed form), classifier vectors (backtracked descent), source weights
(constrained QP). Each exact block minimizes its subproblem globally, the
descent block only accepts improving steps, so the full objective is
nonincreasing across every block boundary up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import recover_u_v, update_phi_varphi
from .data_model import DatasetPair, Hyperparams, ModelState, validate
from .losses import loss_value
from .neighborhood import NeighborGraph, build_graph
from .subspace import build_phi, projected_means, update_theta, update_w
from .weights import build_weight_problem, update_pi


@dataclass
class TrainingTrace:
    """Per-outer-iteration observability for the training loop.

    The three objective lists record the full objective after each block
    boundary of a cycle; flattened in order they form a nonincreasing
    sequence up to small slack. The weight-step objective pair records the
    solved QP value against the value at uniform weights (NaN when the
    weight block is disabled).
    """

    objective_after_subspace: list = field(default_factory=list)
    objective_after_classifier: list = field(default_factory=list)
    objective_after_weights: list = field(default_factory=list)
    matching_term: list = field(default_factory=list)
    q_value: list = field(default_factory=list)
    pi_min: list = field(default_factory=list)
    pi_max: list = field(default_factory=list)
    pi_mean: list = field(default_factory=list)
    inner_steps: list = field(default_factory=list)
    pi_step_objective: list = field(default_factory=list)
    pi_step_objective_uniform: list = field(default_factory=list)
    n_iters: int = 0
    stop_reason: str = ""


@dataclass(frozen=True)
class IterationSnapshot:
    """Copies of the raw parameters after one full block cycle."""

    iteration: int
    theta: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    varphi: np.ndarray
    pi: np.ndarray


def full_objective(theta, w, phi_vec, varphi_vec, pi, pair: DatasetPair,
                   graph_s: NeighborGraph, graph_t: NeighborGraph,
                   hp: Hyperparams) -> float:
    """The five-term training objective at the given parameters."""
    theta = np.asarray(theta, dtype=float)
    w = np.asarray(w, dtype=float)
    phi_vec = np.asarray(phi_vec, dtype=float)
    varphi_vec = np.asarray(varphi_vec, dtype=float)
    pi = np.asarray(pi, dtype=float)

    total = float(loss_value(hp.loss, pair.source_y, pair.source_x @ phi_vec) @ pi)
    if pair.n3:
        target_scores = pair.target_x[:pair.n3] @ varphi_vec
        total += float(loss_value(hp.loss, pair.target_y, target_scores).sum())

    u, v = recover_u_v(theta, w, phi_vec, varphi_vec)
    total += 0.5 * hp.c1 * (float(u @ u) + float(v @ v))

    w_s = graph_s.dense_coefficients()
    pi_resid = pi - w_s @ pi
    h_resid = graph_t.residual_vectors(pair.target_x) @ varphi_vec
    total += hp.c2 * (float(pi_resid @ pi_resid) + float(h_resid @ h_resid))

    means = projected_means(theta, pair, pi)
    gap = means.mu_s_pi - means.mu_t
    total += 0.5 * hp.c3 * float(gap @ gap)
    return total


def block_cycle(theta, w, phi_vec, varphi_vec, pi, pair, graph_s, graph_t, hp,
                update_subspace=True, update_weights=True, on_block=None):
    """Run one full block cycle; ``on_block(name, params...)`` is invoked
    after each block with the current parameters."""
    if update_subspace:
        phi_mat = build_phi(phi_vec, varphi_vec, pi, pair, hp)
        theta = update_theta(phi_mat, hp.r, prev_theta=theta)
        w = update_w(theta, phi_vec, varphi_vec)
    if on_block is not None:
        on_block("subspace", theta, w, phi_vec, varphi_vec, pi, None)

    phi_vec, varphi_vec, inner = update_phi_varphi(
        phi_vec, varphi_vec, theta, w, pi, pair, graph_t, hp)
    if on_block is not None:
        on_block("classifier", theta, w, phi_vec, varphi_vec, pi, inner)

    qp_objectives = (math.nan, math.nan)
    if update_weights:
        problem = build_weight_problem(phi_vec, theta, pair, graph_s, hp)
        new_pi = update_pi(problem, warm_start=pi)
        qp_objectives = (problem.objective(new_pi),
                         problem.objective(np.ones(pair.n1)))
        pi = new_pi
    if on_block is not None:
        on_block("weights", theta, w, phi_vec, varphi_vec, pi, qp_objectives)
    return theta, w, phi_vec, varphi_vec, pi


def fit(pair: DatasetPair, hp: Hyperparams, *, update_subspace=True,
        update_weights=True, iteration_callback=None):
    """Train the model by block-coordinate descent.

    Neighbor graphs are built once from the raw features. Classifier
    vectors and the shared classifier start at zero, weights at one, and
    the projection takes its first-update value. Stops when the relative
    objective change falls below ``hp.tol`` or after ``hp.max_outer_iters``
    cycles; hitting the cap is recorded, not raised.

    The ablation switches skip the projection block (keeping an identity
    prefix projection with a zero shared classifier) or the weight block
    (keeping uniform weights).

    Returns (ModelState, TrainingTrace).
    """
    validate(pair, hp)
    hp = hp.resolved(pair.m)
    graph_s = build_graph(pair.source_x, hp.k)
    graph_t = build_graph(pair.target_x, hp.k)

    m, r = pair.m, hp.r
    phi_vec = np.zeros(m)
    varphi_vec = np.zeros(m)
    w = np.zeros(r)
    pi = np.ones(pair.n1)
    theta = None if update_subspace else np.eye(r, m)

    trace = TrainingTrace()
    prev_objective = None
    stop_reason = "max_iters"

    for iteration in range(hp.max_outer_iters):
        records = {}

        def on_block(name, th, wv, ph, vph, pv, extra):
            records[name] = full_objective(th, wv, ph, vph, pv, pair,
                                           graph_s, graph_t, hp)
            if name == "classifier":
                records["inner"] = extra
            elif name == "weights":
                records["qp"] = extra

        theta, w, phi_vec, varphi_vec, pi = block_cycle(
            theta, w, phi_vec, varphi_vec, pi, pair, graph_s, graph_t, hp,
            update_subspace=update_subspace, update_weights=update_weights,
            on_block=on_block)

        trace.objective_after_subspace.append(records["subspace"])
        trace.objective_after_classifier.append(records["classifier"])
        trace.objective_after_weights.append(records["weights"])
        inner = records["inner"]
        trace.q_value.append(inner.q_values[-1])
        trace.inner_steps.append(inner.accepted_steps)
        trace.pi_step_objective.append(records["qp"][0])
        trace.pi_step_objective_uniform.append(records["qp"][1])
        means = projected_means(theta, pair, pi)
        gap = means.mu_s_pi - means.mu_t
        trace.matching_term.append(0.5 * hp.c3 * float(gap @ gap))
        trace.pi_min.append(float(pi.min()))
        trace.pi_max.append(float(pi.max()))
        trace.pi_mean.append(float(pi.mean()))
        trace.n_iters = iteration + 1

        if iteration_callback is not None:
            iteration_callback(IterationSnapshot(
                iteration=iteration, theta=theta.copy(), w=w.copy(),
                phi=phi_vec.copy(), varphi=varphi_vec.copy(), pi=pi.copy()))

        objective = records["weights"]
        if prev_objective is not None and \
                abs(objective - prev_objective) <= hp.tol * max(1.0, abs(prev_objective)):
            stop_reason = "converged"
            break
        prev_objective = objective

    trace.stop_reason = stop_reason
    state = ModelState.from_parameters(theta, w, phi_vec, varphi_vec, pi, hp.loss)
    return state, trace
