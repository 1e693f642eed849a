"""Direct policy search: score-function gradients and finite differences.

Both families treat the cost as a black box reachable only through
episode returns.  REINFORCE ascends the score-function gradient of a
Gaussian policy's expected return (reward = negative cost), with a
running-mean baseline and optional moment-adaptive steps.  Random
search ascends symmetric two-point finite-difference estimates of the
smoothed return.  A small diagnostic reproduces the dimension scaling
of the score estimator's magnitude on the quadratic toy reward
R(u) = ||u||^2, where the exact mean gradient norm at theta = 0 is

    sigma * 2^{3/2} * Gamma((d+3)/2) / Gamma(d/2)

(the third moment of a chi variable with d degrees of freedom, scaled
by sigma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .lds import GaussianLinear, LinearGain, trajectory_cost

__all__ = [
    "MomentState",
    "adaptive_step",
    "BaselineState",
    "score_gradient",
    "reinforce_trajectory_gradient",
    "ReinforceResult",
    "reinforce_train",
    "rs_two_point",
    "rs_multi",
    "RandomSearchResult",
    "random_search_train",
    "WhitenState",
    "whiten",
    "WhitenedLinearGain",
    "VarianceDiagnostic",
    "gradient_variance_diag",
    "expected_score_norm",
]


# ---------------------------------------------------------------------------
# moment-adaptive ascent direction

@dataclass
class MomentState:
    """Exponential moving first/second moments and the update count."""

    m1: np.ndarray
    m2: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape):
        return cls(m1=np.zeros(shape), m2=np.zeros(shape), t=0)


def adaptive_step(gradient, state, beta1=0.9, beta2=0.999, eps_reg=1e-8):
    """Bias-corrected moment-normalized direction.

    Returns (direction, new_state).  With beta1 = beta2 = 0 the
    direction degenerates to g / (|g| + eps_reg) elementwise.
    """
    g = np.asarray(gradient, dtype=float)
    t = state.t + 1
    m1 = beta1 * state.m1 + (1.0 - beta1) * g
    m2 = beta2 * state.m2 + (1.0 - beta2) * g * g
    mh1 = m1 / (1.0 - beta1 ** t)
    mh2 = m2 / (1.0 - beta2 ** t)
    direction = mh1 / (np.sqrt(mh2) + eps_reg)
    return direction, MomentState(m1=m1, m2=m2, t=t)


@dataclass
class BaselineState:
    """Running mean of past iterate returns; zero before any update."""

    total: float = 0.0
    count: int = 0

    @property
    def value(self):
        return self.total / self.count if self.count else 0.0

    def push(self, mean_return):
        return BaselineState(total=self.total + float(mean_return),
                             count=self.count + 1)


# ---------------------------------------------------------------------------
# score-function estimators

def score_gradient(theta, sigma, z, reward):
    """Single-sample REINFORCE gradient for z ~ N(theta, sigma^2 I).

    G = reward * (z - theta) / sigma^2, an unbiased estimate of the
    gradient of E[R(z)] with respect to theta.  Adding a constant c to
    the reward adds c * (z - theta) / sigma^2, which averages to zero
    but changes the variance.
    """
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    if sigma <= 0:
        raise ContractViolationError("sigma must be positive")
    return reward * (z - theta) / sigma ** 2


def reinforce_trajectory_gradient(trajectory, K, exploration_std, advantage):
    """Policy-gradient contribution of one episode for u = -Kx + sigma eta.

    advantage * sum_t grad_K log pi(u_t | x_t)
      = advantage * sum_t -(u_t + K x_t) / sigma^2  x_t'

    No dynamics terms enter; only the sampled states and inputs do.
    """
    K = np.asarray(K, dtype=float)
    sig2 = float(exploration_std) ** 2
    if sig2 <= 0:
        raise ContractViolationError("exploration_std must be positive")
    xs = trajectory.states[:-1]
    us = trajectory.inputs
    dev = -(us + xs @ K.T) / sig2          # (T, p), equals -eta / sigma
    return advantage * dev.T @ xs          # (p, d)


@dataclass
class ReinforceResult:
    gains: list
    mean_returns: list
    samples_used: int


def reinforce_train(oracle, K0, exploration_std, step_size, n_iters,
                    batch_size, rng, use_baseline=True, use_adam=True,
                    beta1=0.9, beta2=0.999, eps_reg=1e-8):
    """Episodic REINFORCE on the gain of a Gaussian linear policy.

    Each iteration draws batch_size episodes of the instance's length
    under u = -Kx + exploration_std * eta, scores them by reward
    = -episode cost, subtracts the running mean of previous iterates'
    returns, averages the trajectory gradients, and ascends (through the
    moment-adaptive direction when use_adam).  Charges exactly
    n_iters * batch_size * episode_len samples.  gains[i] is the
    deterministic gain after i iterations (gains[0] is K0).
    """
    inst = oracle.instance
    K = np.asarray(K0, dtype=float).copy()
    baseline = BaselineState()
    moments = MomentState.zeros(K.shape)
    gains = [K.copy()]
    mean_returns = []
    for _ in range(int(n_iters)):
        policy = GaussianLinear(K=K, exploration_std=exploration_std)
        grad = np.zeros_like(K)
        returns = np.empty(batch_size)
        trajs = []
        for b in range(int(batch_size)):
            traj = oracle.query(policy, inst.episode_len, rng)
            returns[b] = -trajectory_cost(traj, inst.cost)
            trajs.append(traj)
        base = baseline.value if use_baseline else 0.0
        for b, traj in enumerate(trajs):
            grad += reinforce_trajectory_gradient(
                traj, K, exploration_std, returns[b] - base)
        grad /= batch_size
        if use_adam:
            direction, moments = adaptive_step(grad, moments, beta1, beta2,
                                               eps_reg)
        else:
            direction = grad
        K = K + step_size * direction
        baseline = baseline.push(returns.mean())
        gains.append(K.copy())
        mean_returns.append(float(returns.mean()))
    return ReinforceResult(gains=gains, mean_returns=mean_returns,
                           samples_used=oracle.samples_used)


# ---------------------------------------------------------------------------
# random search

def rs_two_point(evaluate, theta, sigma, rng):
    """Symmetric two-point estimate along one Gaussian direction.

    g = (R(theta + sigma eps) - R(theta - sigma eps)) / (2 sigma) * eps
    with eps ~ N(0, I).  Costs two evaluations.
    """
    theta = np.asarray(theta, dtype=float)
    if sigma <= 0:
        raise ContractViolationError("sigma must be positive")
    eps = rng.standard_normal(theta.shape)
    diff = evaluate(theta + sigma * eps) - evaluate(theta - sigma * eps)
    return diff / (2.0 * sigma) * eps


def rs_multi(evaluate, theta, sigma, n_directions, rng):
    """Average of n_directions two-point estimates (2 * n_directions evaluations)."""
    n_directions = int(n_directions)
    if n_directions < 1:
        raise ContractViolationError("n_directions must be positive")
    g = np.zeros_like(np.asarray(theta, dtype=float))
    for _ in range(n_directions):
        g += rs_two_point(evaluate, theta, sigma, rng)
    return g / n_directions


@dataclass
class WhitenState:
    """Streaming per-coordinate mean and variance (population normalization)."""

    mean: np.ndarray
    m2: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, dim):
        return cls(mean=np.zeros(dim), m2=np.zeros(dim), count=0)

    @property
    def cov_diag(self):
        if self.count == 0:
            return np.zeros_like(self.m2)
        return self.m2 / self.count


def whiten(observation, state, eps_reg=1e-8):
    """Fold one observation into the running statistics and standardize it.

    Returns ((x - mean) / sqrt(cov_diag + eps_reg), updated state) with
    the statistics already including x.  The first observation therefore
    maps to zero.
    """
    x = np.asarray(observation, dtype=float)
    count = state.count + 1
    delta = x - state.mean
    mean = state.mean + delta / count
    m2 = state.m2 + delta * (x - mean)
    new = WhitenState(mean=mean, m2=m2, count=count)
    return (x - mean) / np.sqrt(new.cov_diag + eps_reg), new


class WhitenedLinearGain:
    """Linear gain applied to standardized states, sharing mutable statistics.

    Every state it acts on is folded into the running statistics, across
    episodes and across perturbed gains, mirroring how observation
    normalization is maintained in practice.
    """

    def __init__(self, K, state, eps_reg=1e-8):
        self.K = np.asarray(K, dtype=float)
        self.state = state
        self.eps_reg = eps_reg

    def action(self, t, x, rng):
        xs, self.state = whiten(x, self.state, self.eps_reg)
        return -self.K @ xs


@dataclass
class RandomSearchResult:
    gains: list
    samples_used: int
    whiten_state: WhitenState | None = None


def random_search_train(oracle, K0, sigma, step_size, n_iters, n_directions,
                        rng, whiten_states=False, eps_reg=1e-8):
    """Two-point random search over the flattened gain.

    R(theta) is the negative cost of one episode under the deterministic
    gain reshape(theta); each iteration spends 2 * n_directions episodes
    (charging 2 * n_directions * episode_len samples) and ascends the
    averaged estimate.  With whiten_states the policy acts on
    standardized states and the statistics accumulate over every state
    visited by any evaluation.
    """
    inst = oracle.instance
    shape = np.asarray(K0, dtype=float).shape
    theta = np.asarray(K0, dtype=float).ravel().copy()
    wstate = WhitenState.zeros(inst.system.d) if whiten_states else None
    gains = [theta.reshape(shape).copy()]

    def evaluate(th):
        nonlocal wstate
        K = th.reshape(shape)
        if whiten_states:
            policy = WhitenedLinearGain(K, wstate, eps_reg)
        else:
            policy = LinearGain(K)
        traj = oracle.query(policy, inst.episode_len, rng)
        if whiten_states:
            wstate = policy.state
        return -trajectory_cost(traj, inst.cost)

    for _ in range(int(n_iters)):
        g = rs_multi(evaluate, theta, sigma, n_directions, rng)
        theta = theta + step_size * g
        gains.append(theta.reshape(shape).copy())
    return RandomSearchResult(gains=gains, samples_used=oracle.samples_used,
                              whiten_state=wstate)


# ---------------------------------------------------------------------------
# variance diagnostic

@dataclass
class VarianceDiagnostic:
    dims: list
    mean_norms: list
    expected_norms: list
    slope: float


def expected_score_norm(dim, sigma=1.0):
    """Exact E||G|| for R(u) = ||u||^2 at theta = 0: sigma times the chi(d) third moment."""
    return sigma * 2.0 ** 1.5 * math.exp(
        math.lgamma((dim + 3) / 2.0) - math.lgamma(dim / 2.0))


def gradient_variance_diag(dims, sigma, n_samples, rng):
    """Measure E||G|| of the score estimator on R(u) = ||u||^2 at theta = 0.

    For each dimension d, draws n_samples of z ~ N(0, sigma^2 I) and
    averages ||R(z) (z - 0) / sigma^2|| = ||z||^3 / sigma^2.  Reports the
    least-squares slope of log mean norm against log d next to the exact
    values; the slope approaches 3/2 for large d.
    """
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or len(dims) < 1:
        raise ContractViolationError("dims must be positive integers")
    if sigma <= 0 or int(n_samples) < 1:
        raise ContractViolationError("sigma and n_samples must be positive")
    mean_norms = []
    for d in dims:
        z = sigma * rng.standard_normal((int(n_samples), d))
        mean_norms.append(float(np.mean(
            np.linalg.norm(z, axis=1) ** 3) / sigma ** 2))
    if len(dims) > 1:
        slope = float(np.polyfit(np.log(dims), np.log(mean_norms), 1)[0])
    else:
        slope = float("nan")
    return VarianceDiagnostic(
        dims=dims,
        mean_norms=mean_norms,
        expected_norms=[expected_score_norm(d, sigma) for d in dims],
        slope=slope,
    )
