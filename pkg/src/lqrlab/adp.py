"""Approximate dynamic programming on quadratic Q-functions.

A Q-function is the quadratic form

    q(x, u) = [x; u]' W [x; u] + offset

with W symmetric.  The greedy policy is u = -K x with K = W_uu^{-1} W_ux,
defined only while W_uu is positive definite; the induced state value is
the Schur complement W_xx - W_xu W_uu^{-1} W_ux.  Stage costs carry the
1/2 factor used everywhere else in the package, so the fixed-point W of
a policy is half the textbook unhalved form.

Two learners are provided: an LMS temporal-difference update applied one
transition at a time (q_learning_step, driven by q_learning_train), and
least-squares temporal difference evaluation over quadratic monomial
features (lstdq) wrapped in policy iteration (lspi).  Discounting uses
gamma < 1 throughout; the gamma-optimal gain for tests comes from the
exact solver applied to (sqrt(gamma) A, sqrt(gamma) B).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolationError,
    InsufficientDataError,
    NonExtractablePolicyError,
)
from .lds import GaussianLinear

__all__ = [
    "QuadraticQ",
    "q_eval",
    "greedy_gain",
    "value_from_q",
    "q_learning_step",
    "q_learning_train",
    "QLearningResult",
    "lstdq",
    "lspi",
    "LspiResult",
    "quadratic_features",
    "n_features",
]


@dataclass
class QuadraticQ:
    """Symmetric quadratic form over stacked (x, u) plus a scalar offset.

    d is the state dimension; the first d rows/columns of W are the
    state block.
    """

    W: np.ndarray
    offset: float
    d: int

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        n = self.W.shape[0]
        if self.W.shape != (n, n):
            raise ContractViolationError("W must be square")
        if not (0 < self.d < n):
            raise ContractViolationError("state dimension must split W")
        if np.linalg.norm(self.W - self.W.T) > 1e-8 * (1.0 + np.linalg.norm(self.W)):
            raise ContractViolationError("W must be symmetric")
        self.W = 0.5 * (self.W + self.W.T)
        self.offset = float(self.offset)

    @property
    def p(self):
        return self.W.shape[0] - self.d

    @property
    def W_xx(self):
        return self.W[: self.d, : self.d]

    @property
    def W_xu(self):
        return self.W[: self.d, self.d:]

    @property
    def W_ux(self):
        return self.W[self.d:, : self.d]

    @property
    def W_uu(self):
        return self.W[self.d:, self.d:]


def q_eval(q, x, u):
    """q(x, u) = [x; u]' W [x; u] + offset."""
    z = np.concatenate([np.asarray(x, dtype=float).ravel(),
                        np.asarray(u, dtype=float).ravel()])
    if z.shape[0] != q.W.shape[0]:
        raise ContractViolationError("state/input sizes do not match W")
    return float(z @ q.W @ z + q.offset)


def greedy_gain(q):
    """Minimizing gain K = W_uu^{-1} W_ux, so that argmin_u q(x, u) = -K x.

    Raises NonExtractablePolicyError unless W_uu is strictly positive
    definite (otherwise the quadratic has no minimizer in u).
    """
    Wuu = q.W_uu
    if np.linalg.eigvalsh(Wuu).min() <= 0:
        raise NonExtractablePolicyError(
            "action block of W is not positive definite")
    return np.linalg.solve(Wuu, q.W_ux)


def value_from_q(q):
    """State value of the greedy policy: min_u q(x, u) = x'Px + offset.

    P is the Schur complement W_xx - W_xu W_uu^{-1} W_ux.
    """
    K = greedy_gain(q)
    P = q.W_xx - q.W_xu @ K
    return 0.5 * (P + P.T), q.offset


def q_learning_step(q, transition, gamma, eta):
    """One LMS temporal-difference update on a single transition.

    With target y = c + gamma * min_u' q(x', u') and prediction
    q(x, u), the parameters move against the error delta = q(x, u) - y:

        W      <- W - eta * delta * zz'     (z = [x; u])
        offset <- offset - eta * delta

    The minimization inside the target requires an extractable greedy
    policy; NonExtractablePolicyError propagates to the caller.
    """
    x, u, c, xn = transition
    un = -greedy_gain(q) @ np.asarray(xn, dtype=float)
    y = c + gamma * q_eval(q, xn, un)
    delta = q_eval(q, x, u) - y
    z = np.concatenate([np.asarray(x, dtype=float).ravel(),
                        np.asarray(u, dtype=float).ravel()])
    W = q.W - eta * delta * np.outer(z, z)
    return QuadraticQ(W=0.5 * (W + W.T), offset=q.offset - eta * delta, d=q.d)


@dataclass
class QLearningResult:
    q: QuadraticQ
    gain: np.ndarray | None
    failed: bool
    samples_used: int


def q_learning_train(oracle, gamma, n_steps, eta, exploration_std, rng,
                     q0=None, eta_decay=0.0):
    """Drive q_learning_step from episodic data.

    Episodes of the instance's length are drawn with the current greedy
    gain plus Gaussian exploration; the q update is applied to each
    transition in order once the episode returns (the oracle hands back
    whole episodes, so within an episode the behavior gain is frozen).
    Exactly n_steps samples are charged, the last episode truncated to
    fit.  The step size at global step t is eta / (1 + eta_decay * t).

    If the greedy policy becomes non-extractable, updating stops but the
    remaining budget is still consumed, and the result is marked failed.
    """
    inst = oracle.instance
    d, p = inst.system.d, inst.system.p
    if q0 is None:
        W0 = np.zeros((d + p, d + p))
        W0[:d, :d] = 0.5 * inst.cost.Q
        W0[d:, d:] = 0.5 * inst.cost.R
        q0 = QuadraticQ(W=W0, offset=0.0, d=d)
    q = q0
    failed = False
    gain = greedy_gain(q)
    done = 0
    t = 0
    while done < n_steps:
        horizon = min(inst.episode_len, n_steps - done)
        behavior = GaussianLinear(K=gain, exploration_std=exploration_std)
        traj = oracle.query(behavior, horizon, rng)
        done += horizon
        if failed:
            continue
        try:
            for tr in traj.transitions():
                q = q_learning_step(q, tr, gamma, eta / (1.0 + eta_decay * t))
                t += 1
            gain = greedy_gain(q)
        except NonExtractablePolicyError:
            failed = True
    return QLearningResult(q=q, gain=None if failed else gain,
                           failed=failed, samples_used=done)


def n_features(d, p):
    m = d + p
    return m * (m + 1) // 2 + 1


def quadratic_features(z):
    """Monomials z_i z_j (i <= j) plus a constant, for rows z of shape (N, m)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    N, m = z.shape
    cols = [z[:, i] * z[:, j] for i in range(m) for j in range(i, m)]
    cols.append(np.ones(N))
    return np.column_stack(cols)


def _weights_to_q(w, d, p):
    m = d + p
    W = np.zeros((m, m))
    k = 0
    for i in range(m):
        for j in range(i, m):
            if i == j:
                W[i, i] = w[k]
            else:
                W[i, j] = W[j, i] = 0.5 * w[k]
            k += 1
    return QuadraticQ(W=W, offset=float(w[-1]), d=d)


def lstdq(transitions, K, gamma, ridge=0.0):
    """Least-squares temporal-difference evaluation of the policy u = -Kx.

    Solves sum_t phi(z_t) (phi(z_t) - gamma phi(z'_t))' w = sum_t phi(z_t) c_t
    over quadratic monomial features, where z'_t pairs the observed next
    state with the evaluated policy's action -K x'_t.  The data may come
    from any behavior policy.  With ridge = 0 a rank-deficient system
    raises InsufficientDataError; with ridge > 0 the system is solved
    with Tikhonov regularization.
    """
    K = np.asarray(K, dtype=float)
    p, d = K.shape
    rows = list(transitions)
    if not rows:
        raise InsufficientDataError("no transitions supplied")
    Z = np.array([np.concatenate([np.asarray(x, float).ravel(),
                                  np.asarray(u, float).ravel()])
                  for x, u, _, _ in rows])
    C = np.array([c for _, _, c, _ in rows], dtype=float)
    Xn = np.array([np.asarray(xn, float).ravel() for _, _, _, xn in rows])
    Zn = np.hstack([Xn, Xn @ -K.T])
    Phi = quadratic_features(Z)
    Phi_n = quadratic_features(Zn)
    M = Phi.T @ (Phi - gamma * Phi_n)
    b = Phi.T @ C
    if ridge == 0.0:
        if np.linalg.matrix_rank(M) < M.shape[0]:
            raise InsufficientDataError(
                f"LSTD system is rank deficient ({len(rows)} transitions, "
                f"{M.shape[0]} features); add data or use ridge > 0")
        w = np.linalg.solve(M, b)
    else:
        w = np.linalg.solve(M + ridge * np.eye(M.shape[0]), b)
    return _weights_to_q(w, d, p)


@dataclass
class LspiResult:
    gains: list
    qs: list = field(default_factory=list)
    failed: bool = False
    samples_used: int = 0


def lspi(oracle, K0, gamma, n_iters, samples_per_iter, exploration_std, rng,
         ridge=0.0):
    """Least-squares policy iteration against the episodic oracle.

    Each round collects samples_per_iter fresh transitions under the
    current gain plus Gaussian exploration (episodes of the instance's
    length, the last one truncated so the charge is exact), evaluates
    the current gain by lstdq over all data collected so far, and
    improves greedily.  Exactly n_iters * samples_per_iter samples are
    charged.  A round whose evaluation or improvement fails marks the
    result failed; data collection continues (later rounds may recover),
    but a result that ends failed should be scored as a failed seed.
    """
    inst = oracle.instance
    K = np.asarray(K0, dtype=float)
    gains = [K]
    qs = []
    data = []
    failed = False
    used = 0
    for _ in range(int(n_iters)):
        remaining = int(samples_per_iter)
        while remaining > 0:
            horizon = min(inst.episode_len, remaining)
            behavior = GaussianLinear(K=K, exploration_std=exploration_std)
            traj = oracle.query(behavior, horizon, rng)
            data.extend(traj.transitions())
            remaining -= horizon
            used += horizon
        try:
            q = lstdq(data, K, gamma, ridge=ridge)
            K_next = greedy_gain(q)
        except (InsufficientDataError, NonExtractablePolicyError,
                np.linalg.LinAlgError):
            failed = True
            qs.append(None)
            gains.append(K)
            continue
        failed = False
        qs.append(q)
        gains.append(K_next)
        K = K_next
    return LspiResult(gains=gains, qs=qs, failed=failed, samples_used=used)
