"""Per-point source weight step: assemble and solve the constrained QP.

The weights trade off three pulls: small per-point losses (linear term),
agreement with the neighborhood reconstruction of the weights (quadratic
term from scattered coefficient rows), and matching the weighted source
mean to the target mean in the subspace. The feasible set is the box
[0, delta] intersected with the plane sum(pi) = n1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import DatasetPair, Hyperparams, ValidationError
from .losses import loss_value
from .neighborhood import NeighborGraph
from .qp_solver import QpProblem, solve


@dataclass(frozen=True)
class WeightStepProblem:
    """Assembled quadratic pieces of the weight subproblem.

    ``recon_quad`` already carries the c2 factor; ``gamma`` has column i
    equal to theta @ source_x[i] / n1 and ``vartheta`` is the projected
    target mean, so the matching penalty is 0.5*c3*||gamma pi - vartheta||^2.
    """

    tau: np.ndarray
    recon_quad: np.ndarray
    gamma: np.ndarray
    vartheta: np.ndarray
    c3: float
    delta: float
    n1: int

    def objective(self, pi) -> float:
        """Value of the weight subproblem at pi, constant term included."""
        pi = np.asarray(pi, dtype=float)
        gap = self.gamma @ pi - self.vartheta
        return float(self.tau @ pi + pi @ self.recon_quad @ pi
                     + 0.5 * self.c3 * (gap @ gap))

    def qp_matrices(self):
        """(H, c) such that 0.5 pi'H pi + c'pi matches the objective up to
        the constant 0.5*c3*||vartheta||^2."""
        h = 2.0 * self.recon_quad + self.c3 * (self.gamma.T @ self.gamma)
        c = self.tau - self.c3 * (self.gamma.T @ self.vartheta)
        return h, c


def build_weight_problem(phi_vec, theta, pair: DatasetPair,
                         graph_s: NeighborGraph, hp: Hyperparams) -> WeightStepProblem:
    """Per-point losses, scattered reconstruction quadratic, and matching pieces."""
    phi_vec = np.asarray(phi_vec, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if phi_vec.shape != (pair.m,):
        raise ValidationError("phi length does not match the feature dimension")
    if theta.ndim != 2 or theta.shape[1] != pair.m:
        raise ValidationError("theta columns do not match the feature dimension")
    if graph_s.n != pair.n1:
        raise ValidationError("source graph size does not match the source set")
    tau = np.asarray(loss_value(hp.loss, pair.source_y, pair.source_x @ phi_vec),
                     dtype=float)
    eye_minus_w = np.eye(pair.n1) - graph_s.dense_coefficients()
    recon_quad = hp.c2 * (eye_minus_w.T @ eye_minus_w)
    gamma = (theta @ pair.source_x.T) / pair.n1
    vartheta = (pair.target_x @ theta.T).mean(axis=0)
    return WeightStepProblem(tau=tau, recon_quad=recon_quad, gamma=gamma,
                             vartheta=vartheta, c3=hp.c3, delta=hp.delta,
                             n1=pair.n1)


def update_pi(problem: WeightStepProblem, warm_start=None) -> np.ndarray:
    """Solve the weight subproblem; feasible to QP tolerances."""
    h, c = problem.qp_matrices()
    qp = QpProblem(h=h, c=c,
                   lower=np.zeros(problem.n1),
                   upper=np.full(problem.n1, problem.delta),
                   eq_sum=float(problem.n1))
    return solve(qp, warm_start=warm_start)
