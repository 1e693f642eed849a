"""Linear dynamical systems, quadratic costs, and the episodic sampling oracle.

State evolves as x' = A x + B u + e with e ~ N(0, noise_cov).  Controllers
are linear, u = -K x, optionally with additive Gaussian exploration noise.
Costs follow the convention

    J = 1/2 sum_t (x_t' Q x_t + u_t' R u_t) + 1/2 x_T' S x_T

and the 1/2 factor is kept in every reported number so that costs are
comparable across all modules.  All sampling goes through EpisodicOracle,
which charges `horizon` samples per episode; methods are compared on the
oracle's samples_used counter, never on wall clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExhaustedError,
    ContractViolationError,
    IllPosedCostError,
)

__all__ = [
    "LinearSystem",
    "QuadraticCost",
    "LqrInstance",
    "LinearGain",
    "TimeVaryingGains",
    "GaussianLinear",
    "Trajectory",
    "EpisodeBudget",
    "EpisodicOracle",
    "step",
    "rollout",
    "trajectory_cost",
    "stage_cost",
    "load_instance",
    "dump_instance",
    "instance_to_dict",
    "instance_from_dict",
]

# Relative tolerance for symmetry / definiteness checks on cost and noise
# matrices.  Inputs are symmetrized internally once they pass.
_SYM_TOL = 1e-8
_EIG_TOL = 1e-10


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ContractViolationError(f"{name} must be a 2-d array, got shape {M.shape}")
    return M

def _check_symmetric(M, name):
    scale = 1.0 + np.linalg.norm(M)
    if np.linalg.norm(M - M.T) > _SYM_TOL * scale:
        raise ContractViolationError(f"{name} is not symmetric")
    return 0.5 * (M + M.T)

def _check_psd(M, name):
    M = _check_symmetric(M, name)
    if M.size and np.linalg.eigvalsh(M).min() < -_EIG_TOL * (1.0 + np.linalg.norm(M)):
        raise IllPosedCostError(f"{name} must be positive semidefinite")
    return M

def _check_pd(M, name):
    M = _check_symmetric(M, name)
    if M.size == 0 or np.linalg.eigvalsh(M).min() <= 0:
        raise IllPosedCostError(f"{name} must be positive definite")
    return M


@dataclass
class LinearSystem:
    """Dynamics x' = A x + B u + e, e ~ N(0, noise_cov)."""

    A: np.ndarray
    B: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        self.B = _as_matrix(self.B, "B")
        d = self.A.shape[0]
        if self.A.shape != (d, d):
            raise ContractViolationError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != d:
            raise ContractViolationError(
                f"B has {self.B.shape[0]} rows, expected {d}")
        self.noise_cov = _check_psd(_as_matrix(self.noise_cov, "noise_cov"), "noise_cov")
        if self.noise_cov.shape != (d, d):
            raise ContractViolationError(
                f"noise_cov must be {d}x{d}, got {self.noise_cov.shape}")
        # Factor F with F F' = noise_cov, via eigendecomposition so that
        # singular covariances (including exact zero) are handled.
        w, V = np.linalg.eigh(self.noise_cov)
        self._noise_factor = V * np.sqrt(np.clip(w, 0.0, None))
        self._noiseless = not self.noise_cov.any()

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]


@dataclass
class QuadraticCost:
    """Stage cost 1/2 (x'Qx + u'Ru), terminal cost 1/2 x'Sx."""

    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray | None = None

    def __post_init__(self):
        self.Q = _check_psd(_as_matrix(self.Q, "Q"), "Q")
        self.R = _check_pd(_as_matrix(self.R, "R"), "R")
        if self.S is None:
            self.S = np.zeros_like(self.Q)
        self.S = _check_psd(_as_matrix(self.S, "S"), "S")
        if self.S.shape != self.Q.shape:
            raise ContractViolationError("S must have the same shape as Q")


@dataclass
class LqrInstance:
    """A complete problem: dynamics, cost, initial state, episode length."""

    system: LinearSystem
    cost: QuadraticCost
    x0: np.ndarray
    episode_len: int

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        d = self.system.d
        if self.x0.shape != (d,):
            raise ContractViolationError(f"x0 must have {d} entries")
        if self.cost.Q.shape != (d, d):
            raise ContractViolationError("cost dimension does not match dynamics")
        if self.cost.R.shape != (self.system.p, self.system.p):
            raise ContractViolationError("R dimension does not match input count")
        self.episode_len = int(self.episode_len)
        if self.episode_len < 1:
            raise ContractViolationError("episode_len must be a positive integer")


def _as_gain(K, name="K"):
    K = np.asarray(K, dtype=float)
    if K.ndim == 1:
        K = K.reshape(1, -1)
    if K.ndim != 2:
        raise ContractViolationError(f"{name} must be a p x d matrix")
    return K


class LinearGain:
    """Deterministic static feedback u = -K x."""

    def __init__(self, K):
        self.K = _as_gain(K)

    def action(self, t, x, rng):
        return -self.K @ x


class TimeVaryingGains:
    """Feedback u_t = -K_t x with a finite gain schedule."""

    def __init__(self, gains):
        self.gains = [_as_gain(K) for K in gains]

    def action(self, t, x, rng):
        return -self.gains[t] @ x


class GaussianLinear:
    """Exploratory feedback u = -K x + exploration_std * eta, eta ~ N(0, I)."""

    def __init__(self, K, exploration_std):
        self.K = _as_gain(K)
        self.exploration_std = float(exploration_std)
        if self.exploration_std < 0:
            raise ContractViolationError("exploration_std must be nonnegative")

    def action(self, t, x, rng):
        u = -self.K @ x
        if self.exploration_std > 0:
            u = u + self.exploration_std * rng.standard_normal(self.K.shape[0])
        return u


@dataclass
class Trajectory:
    """One episode: states (T+1, d), inputs (T, p), stage costs (T,)."""

    states: np.ndarray
    inputs: np.ndarray
    stage_costs: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.stage_costs = np.asarray(self.stage_costs, dtype=float)
        T = self.inputs.shape[0]
        if self.states.shape[0] != T + 1 or self.stage_costs.shape[0] != T:
            raise ContractViolationError("trajectory arrays disagree on length")

    @property
    def horizon(self):
        return self.inputs.shape[0]

    def transitions(self):
        """Yield (x, u, stage_cost, x_next) tuples in time order."""
        for t in range(self.horizon):
            yield (self.states[t], self.inputs[t],
                   float(self.stage_costs[t]), self.states[t + 1])


def stage_cost(cost, x, u):
    """1/2 (x'Qx + u'Ru)."""
    return 0.5 * (x @ cost.Q @ x + u @ cost.R @ u)


def step(system, x, u, rng):
    """One transition x' = A x + B u + e with e ~ N(0, noise_cov).

    With noise_cov = 0 no random numbers are consumed and the result is exact.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (system.d,):
        raise ContractViolationError(f"state must have {system.d} entries")
    if u.shape != (system.p,):
        raise ContractViolationError(f"input must have {system.p} entries")
    xn = system.A @ x + system.B @ u
    if not system._noiseless:
        xn = xn + system._noise_factor @ rng.standard_normal(system.d)
    return xn


def rollout(instance, policy, horizon, rng):
    """Simulate `horizon` steps from instance.x0 under the given policy.

    Per step the policy draws its exploration noise (if any) before the
    process noise is drawn, so two rollouts with the same seed are
    bitwise identical.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ContractViolationError("horizon must be a positive integer")
    sys_, cost = instance.system, instance.cost
    d, p = sys_.d, sys_.p
    states = np.empty((horizon + 1, d))
    inputs = np.empty((horizon, p))
    x = instance.x0.copy()
    states[0] = x
    # inlined step() with the same draw order, minus per-step validation
    A, B, Q, R = sys_.A, sys_.B, cost.Q, cost.R
    factor, noiseless = sys_._noise_factor, sys_._noiseless
    action = policy.action
    for t in range(horizon):
        u = action(t, x, rng)
        inputs[t] = u
        x = A @ x + B @ u
        if not noiseless:
            x = x + factor @ rng.standard_normal(d)
        states[t + 1] = x
    xs, us = states[:-1], inputs
    costs = 0.5 * (np.einsum("ti,ij,tj->t", xs, Q, xs)
                   + np.einsum("ti,ij,tj->t", us, R, us))
    return Trajectory(states=states, inputs=inputs, stage_costs=costs)


def trajectory_cost(trajectory, cost):
    """Total cost 1/2 sum_t (x'Qx + u'Ru) + 1/2 x_T' S x_T."""
    xs = trajectory.states[:-1]
    us = trajectory.inputs
    xT = trajectory.states[-1]
    total = 0.5 * (np.einsum("ti,ij,tj->", xs, cost.Q, xs)
                   + np.einsum("ti,ij,tj->", us, cost.R, us))
    return float(total + 0.5 * xT @ cost.S @ xT)


@dataclass
class EpisodeBudget:
    """Mutable sample counter.  The only mutable piece of shared state."""

    samples_used: int = 0
    cap: int | None = None
    query_log: list = field(default_factory=list)

    def charge(self, horizon):
        if self.cap is not None and self.samples_used + horizon > self.cap:
            raise BudgetExhaustedError(
                f"query of horizon {horizon} would exceed cap {self.cap} "
                f"(used {self.samples_used})")
        self.samples_used += horizon
        self.query_log.append(horizon)


class EpisodicOracle:
    """The one data source every method shares.

    A query simulates one episode of the requested horizon from the
    instance's initial state and charges `horizon` samples against the
    budget.  There is no other way to observe the system.
    """

    def __init__(self, instance, budget=None):
        self.instance = instance
        if budget is None:
            budget = EpisodeBudget()
        elif isinstance(budget, int):
            budget = EpisodeBudget(cap=budget)
        self.budget = budget

    @property
    def samples_used(self):
        return self.budget.samples_used

    def query(self, policy, horizon, rng):
        self.budget.charge(int(horizon))
        return rollout(self.instance, policy, horizon, rng)


# ---------------------------------------------------------------------------
# Instance files: a flat JSON document with row-major nested arrays.

_INSTANCE_FIELDS = ("A", "B", "noise_cov", "Q", "R", "S", "x0", "episode_len")


def instance_to_dict(instance):
    return {
        "A": instance.system.A.tolist(),
        "B": instance.system.B.tolist(),
        "noise_cov": instance.system.noise_cov.tolist(),
        "Q": instance.cost.Q.tolist(),
        "R": instance.cost.R.tolist(),
        "S": instance.cost.S.tolist(),
        "x0": instance.x0.tolist(),
        "episode_len": instance.episode_len,
    }


def instance_from_dict(doc):
    missing = [k for k in ("A", "B", "Q", "R", "x0", "episode_len") if k not in doc]
    if missing:
        raise ContractViolationError(f"instance document missing fields: {missing}")
    A = np.asarray(doc["A"], dtype=float)
    d = A.shape[0] if A.ndim == 2 else 0
    noise_cov = doc.get("noise_cov")
    if noise_cov is None:
        noise_cov = np.zeros((d, d))
    system = LinearSystem(A=A, B=doc["B"], noise_cov=noise_cov)
    cost = QuadraticCost(Q=doc["Q"], R=doc["R"], S=doc.get("S"))
    return LqrInstance(system=system, cost=cost, x0=doc["x0"],
                       episode_len=doc["episode_len"])


def load_instance(path):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def dump_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")
