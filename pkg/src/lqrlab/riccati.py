"""Exact solutions of the linear-quadratic control problem.

Finite-horizon problems are solved by the backward Riccati recursion,
infinite-horizon ones by value iteration on the Riccati map

    F(M) = Q + A'MA - A'MB (R + B'MB)^{-1} B'MA

iterated until the fixed-point defect is small.  Closed-loop average
cost is evaluated through the discrete Lyapunov equation, also by
fixed-point iteration.  Everything in this module is deterministic
matrix arithmetic; nothing touches the sampling oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ContractViolationError,
    InstabilityError,
    NoStabilizingSolutionError,
)
from .lds import QuadraticCost

__all__ = [
    "DareSolution",
    "FiniteHorizonSolution",
    "StabilityReport",
    "gain_from_value",
    "finite_horizon_solve",
    "dare_solve",
    "stability_report",
    "discrete_lyapunov",
    "closed_loop_average_cost",
    "relative_suboptimality",
    "rhc_action",
]


@dataclass
class DareSolution:
    """Stationary value matrix M, gain K, fixed-point residual, iteration count."""

    M: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int


@dataclass
class FiniteHorizonSolution:
    """Backward-recursion output.

    gains[t] is the optimal K_t for t = 0..N-1, values[t] the
    cost-to-go matrix M_t for t = 0..N (values[N] is the terminal S),
    offsets[t] the additive noise contribution to the cost-to-go.
    """

    gains: list
    values: list
    offsets: list


@dataclass
class StabilityReport:
    spectral_radius: float
    stable: bool


def _spectral_radius(M):
    return float(np.abs(np.linalg.eigvals(M)).max())


def stability_report(M):
    """Spectral radius of a square matrix; stable means strictly inside the unit circle."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolationError("stability_report expects a square matrix")
    rho = _spectral_radius(M)
    return StabilityReport(spectral_radius=rho, stable=bool(rho < 1.0))


def gain_from_value(A, B, R, M):
    """Greedy gain K = (R + B'MB)^{-1} B'MA for the value matrix M (u = -Kx)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    R = np.asarray(R, dtype=float)
    M = np.asarray(M, dtype=float)
    return np.linalg.solve(R + B.T @ M @ B, B.T @ M @ A)


def finite_horizon_solve(A, B, cost, horizon, noise_cov=None):
    """Solve the horizon-N problem by backward Riccati recursion.

    Parameters
    ----------
    A, B : arrays
        Dynamics matrices.
    cost : QuadraticCost
        Stage matrices Q, R and terminal matrix S.
    horizon : int
        Number of control steps N.
    noise_cov : array, optional
        Process noise covariance; feeds the additive offsets
        c_t = c_{t+1} + 1/2 trace(M_{t+1} noise_cov).  Omitted or zero
        gives all-zero offsets.

    Returns
    -------
    FiniteHorizonSolution
        Expected cost from state x at time t is
        1/2 x' values[t] x + offsets[t].
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    horizon = int(horizon)
    if horizon < 1:
        raise ContractViolationError("horizon must be a positive integer")
    if noise_cov is not None:
        noise_cov = np.asarray(noise_cov, dtype=float)
    M = cost.S.copy()
    # build in backward time order, reverse once at the end
    values = [M]
    gains = []
    offsets = [0.0]
    for _ in range(horizon):
        H = cost.R + B.T @ M @ B
        K = np.linalg.solve(H, B.T @ M @ A)
        Mn = cost.Q + A.T @ M @ (A - B @ K)
        Mn = 0.5 * (Mn + Mn.T)
        c = offsets[-1]
        if noise_cov is not None:
            c = c + 0.5 * float(np.trace(M @ noise_cov))
        gains.append(K)
        values.append(Mn)
        offsets.append(c)
        M = Mn
    return FiniteHorizonSolution(gains=gains[::-1], values=values[::-1],
                                 offsets=offsets[::-1])


def _fixed_point(apply_map, X0, tol, max_iter, err_cls, what):
    """Iterate X <- apply_map(X) until the step defect passes the stopping rule

        ||X_{k+1} - X_k||_F <= tol * (1 + ||X_{k+1}||_F)

    then keep tightening while each step still shrinks the defect, so the
    returned defect sits well under the threshold rather than just at it.
    """
    X = X0
    it = 0
    defect = np.inf
    converged = False
    while it < max_iter:
        Xn = apply_map(X)
        it += 1
        if not np.isfinite(Xn).all():
            raise err_cls(f"{what}: iteration diverged")
        defect = float(np.linalg.norm(Xn - X))
        X = Xn
        if defect <= tol * (1.0 + np.linalg.norm(X)):
            converged = True
            break
    if not converged:
        raise err_cls(f"{what}: no convergence in {max_iter} iterations "
                      f"(last defect {defect:.3e})")
    while it < max_iter and defect > 0.01 * tol * (1.0 + np.linalg.norm(X)):
        Xn = apply_map(X)
        it += 1
        d = float(np.linalg.norm(Xn - X))
        if not np.isfinite(Xn).all() or d >= defect:
            break
        X = Xn
        defect = d
    return X, defect, it


def dare_solve(A, B, cost, tol=1e-12, max_iter=1_000_000):
    """Stationary solution of the discrete-time Riccati equation.

    Runs value iteration M <- F(M) from M = Q until the fixed-point
    defect is below tol * (1 + ||M||_F).  The returned residual is
    ||F(M) - M||_F evaluated at the returned M.

    Raises NoStabilizingSolutionError if the iteration diverges, fails
    to converge within max_iter steps, or converges to a value whose
    greedy gain does not place the closed loop strictly inside the unit
    circle.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
        raise ContractViolationError("A must be square and B conformable")

    def riccati_map(M):
        H = cost.R + B.T @ M @ B
        Mn = cost.Q + A.T @ M @ (A - B @ np.linalg.solve(H, B.T @ M @ A))
        return 0.5 * (Mn + Mn.T)

    M, _, iterations = _fixed_point(
        riccati_map, cost.Q.copy(), tol, max_iter,
        NoStabilizingSolutionError, "Riccati value iteration")
    residual = float(np.linalg.norm(riccati_map(M) - M))
    K = gain_from_value(A, B, cost.R, M)
    rho = _spectral_radius(A - B @ K)
    if rho >= 1.0:
        raise NoStabilizingSolutionError(
            f"converged value matrix is not stabilizing (spectral radius {rho:.6f})")
    return DareSolution(M=M, K=K, residual=residual, iterations=iterations)


def discrete_lyapunov(A, W, tol=1e-12, max_iter=1_000_000):
    """Solve X = A X A' + W by fixed-point iteration from X = W.

    Requires the spectral radius of A to be strictly below one.
    """
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    rho = _spectral_radius(A)
    if rho >= 1.0:
        raise InstabilityError(
            f"Lyapunov equation requires spectral radius < 1, got {rho:.6f}")

    def lyap_map(X):
        Xn = A @ X @ A.T + W
        return 0.5 * (Xn + Xn.T)

    X, _, _ = _fixed_point(lyap_map, W.copy(), tol, max_iter,
                           InstabilityError, "Lyapunov iteration")
    return X


def closed_loop_average_cost(A, B, K, cost, noise_cov, tol=1e-12, max_iter=1_000_000):
    """Stationary per-step cost 1/2 trace((Q + K'RK) X) of u = -Kx.

    X is the stationary state covariance, solving
    X = (A-BK) X (A-BK)' + noise_cov.  Raises InstabilityError when the
    closed loop is not strictly stable.  At the optimal gain this equals
    1/2 trace(M noise_cov) with M the stationary value matrix.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    X = discrete_lyapunov(A - B @ K, np.asarray(noise_cov, dtype=float),
                          tol=tol, max_iter=max_iter)
    return 0.5 * float(np.trace((cost.Q + K.T @ cost.R @ K) @ X))


def relative_suboptimality(J, J_star):
    """(J - J_star) / J_star for J_star > 0; inf-valued J passes through."""
    if not (J_star > 0):
        raise ContractViolationError("J_star must be positive")
    return (J - J_star) / J_star


def rhc_action(x, A, B, cost, horizon, terminal_value):
    """First action of the horizon-H plan with terminal weight terminal_value.

    Solves the horizon-H problem with S replaced by terminal_value and
    returns u = -K_0 x.  With terminal_value equal to the stationary
    Riccati solution this reproduces the infinite-horizon optimal action
    for every H >= 1.
    """
    x = np.asarray(x, dtype=float)
    planned = QuadraticCost(Q=cost.Q, R=cost.R, S=terminal_value)
    sol = finite_horizon_solve(A, B, planned, horizon)
    return -sol.gains[0] @ x
