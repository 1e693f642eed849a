"""Least-squares identification and the identify-then-control pipeline.

The model (A, B) is fit jointly by regressing x_{t+1} on [x_t; u_t]
across all supplied trajectories.  The nominal pipeline excites the
system with white noise through the episodic oracle, fits the model,
and plugs it into the exact Riccati solver (certainty equivalence).
Uncertainty is quantified by a parametric bootstrap: synthetic data sets
are re-simulated from the fitted model and refit, and the spread of the
refits is reported as operator-norm error bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, InsufficientExcitationError
from .lds import GaussianLinear
from .riccati import dare_solve

__all__ = [
    "ModelEstimate",
    "UncertaintyReport",
    "least_squares_identify",
    "nominal_pipeline",
    "bootstrap_uncertainty",
]


@dataclass
class ModelEstimate:
    A_hat: np.ndarray
    B_hat: np.ndarray
    residual_cov: np.ndarray
    n_transitions: int


@dataclass
class UncertaintyReport:
    eps_A: float
    eps_B: float
    confidence: float
    n_boot: int


def _stack_regression(trajectories):
    Zs, Ys = [], []
    for traj in trajectories:
        Zs.append(np.hstack([traj.states[:-1], traj.inputs]))
        Ys.append(traj.states[1:])
    if not Zs:
        raise ContractViolationError("need at least one trajectory")
    return np.vstack(Zs), np.vstack(Ys)


def least_squares_identify(trajectories, ridge=0.0):
    """Fit x_{t+1} = A x_t + B u_t by (optionally ridge-regularized) least squares.

    With ridge = 0 the regressor matrix must have full column rank d + p;
    otherwise an InsufficientExcitationError is raised.  residual_cov is
    the empirical covariance (normalized by the transition count) of the
    one-step fit residuals.
    """
    Z, Y = _stack_regression(trajectories)
    n, q = Z.shape
    d = Y.shape[1]
    p = q - d
    if ridge < 0:
        raise ContractViolationError("ridge must be nonnegative")
    if ridge == 0.0:
        Theta, _, rank, _ = np.linalg.lstsq(Z, Y, rcond=None)
        if rank < q:
            raise InsufficientExcitationError(
                f"regressors span only {rank} of {q} directions "
                f"({n} transitions); excite the system or use ridge > 0")
    else:
        Theta = np.linalg.solve(Z.T @ Z + ridge * np.eye(q), Z.T @ Y)
    resid = Y - Z @ Theta
    return ModelEstimate(
        A_hat=Theta[:d].T.copy(),
        B_hat=Theta[d:].T.copy(),
        residual_cov=resid.T @ resid / n,
        n_transitions=n,
    )


def nominal_pipeline(oracle, n_episodes, excitation_std, rng, ridge=0.0):
    """Identify with white-noise inputs, then control as if the fit were exact.

    Queries the oracle for n_episodes full episodes driven by
    u_t ~ N(0, excitation_std^2 I) (charging n_episodes * episode_len
    samples), fits (A_hat, B_hat), and solves the Riccati equation for
    the fitted model under the instance's true cost.  Identification and
    Riccati failures propagate to the caller, which is expected to
    record them as failed seeds.
    """
    inst = oracle.instance
    p = inst.system.p
    probe = GaussianLinear(K=np.zeros((p, inst.system.d)),
                           exploration_std=excitation_std)
    trajectories = [oracle.query(probe, inst.episode_len, rng)
                    for _ in range(int(n_episodes))]
    estimate = least_squares_identify(trajectories, ridge=ridge)
    sol = dare_solve(estimate.A_hat, estimate.B_hat, inst.cost)
    return estimate, sol.K


def bootstrap_uncertainty(estimate, trajectories, n_boot, confidence, rng,
                          ridge=0.0):
    """Parametric bootstrap error bounds for a fitted model.

    Each replicate re-simulates every trajectory from its recorded
    initial state under (A_hat, B_hat) with the same inputs and fresh
    noise drawn from N(0, residual_cov), refits, and records the
    operator-norm deviations from the original fit.  eps_A and eps_B are
    the `confidence` quantiles of those deviations.  Replicates use
    independent child streams spawned up front, so results do not depend
    on execution order.
    """
    n_boot = int(n_boot)
    if n_boot < 1:
        raise ContractViolationError("n_boot must be positive")
    if not (0.0 < confidence < 1.0):
        raise ContractViolationError("confidence must be in (0, 1)")
    A, B = estimate.A_hat, estimate.B_hat
    d = A.shape[0]
    # factor of the residual covariance for noise generation
    w, V = np.linalg.eigh(0.5 * (estimate.residual_cov + estimate.residual_cov.T))
    factor = V * np.sqrt(np.clip(w, 0.0, None))
    streams = rng.spawn(n_boot)
    errs_A = np.empty(n_boot)
    errs_B = np.empty(n_boot)
    for b, child in enumerate(streams):
        fakes = []
        for traj in trajectories:
            T = traj.horizon
            states = np.empty_like(traj.states)
            states[0] = traj.states[0]
            noise = child.standard_normal((T, d)) @ factor.T
            for t in range(T):
                states[t + 1] = A @ states[t] + B @ traj.inputs[t] + noise[t]
            fakes.append(_Transitions(states=states, inputs=traj.inputs))
        refit = least_squares_identify(fakes, ridge=ridge)
        errs_A[b] = np.linalg.norm(refit.A_hat - A, 2)
        errs_B[b] = np.linalg.norm(refit.B_hat - B, 2)
    return UncertaintyReport(
        eps_A=float(np.quantile(errs_A, confidence)),
        eps_B=float(np.quantile(errs_B, confidence)),
        confidence=float(confidence),
        n_boot=n_boot,
    )


@dataclass
class _Transitions:
    """Minimal stand-in with the fields the regression stacker reads."""

    states: np.ndarray
    inputs: np.ndarray
