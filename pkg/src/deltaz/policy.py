"""Episodic REPS over a 4-D Gaussian skill distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DIM = 4


class PolicyError(ValueError):
    pass


class CholeskyFailure(PolicyError):
    pass


class TooFewSamples(PolicyError):
    pass


@dataclass(frozen=True)
class RepsConfig:
    epsilon: float = 1.0
    init_batch: int = 20
    batch: int = 10
    replay_window: int = 20
    max_updates: int = 50
    cov_floor: float = 1e-6
    init_mean: float = 0.4
    init_var: float = 0.15
    reward_repeats: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.batch < 1 or self.init_batch < self.batch:
            raise ValueError("need init_batch >= batch >= 1")
        if self.replay_window < self.batch:
            raise ValueError("replay_window must be at least one batch")
        if self.max_updates < 1 or self.reward_repeats < 1:
            raise ValueError("max_updates and reward_repeats must be >= 1")
        if self.cov_floor < 0 or self.init_var <= 0:
            raise ValueError("variances must be positive")


@dataclass(frozen=True)
class GaussianPolicy:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(DIM)
        cov = np.array(self.cov, dtype=float).reshape(DIM, DIM)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise CholeskyFailure("covariance is not positive definite") from exc


@dataclass(frozen=True)
class EpisodeRecord:
    """One executed episode.

    ``draw`` is the unclipped Gaussian sample the update fits; ``params`` is
    the clipped vector actually executed.
    """

    draw: np.ndarray
    params: np.ndarray
    reward: float
    final_angle: float
    success: bool


@dataclass
class UpdateInfo:
    eta: float
    degenerate: bool
    weights: np.ndarray = field(repr=False)


def init_policy(cfg: RepsConfig) -> GaussianPolicy:
    return GaussianPolicy(np.full(DIM, cfg.init_mean), np.eye(DIM) * cfg.init_var)


def sample(policy: GaussianPolicy, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` samples; returns ``(draws, clipped)``, both of shape (n, 4)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chol = policy.cholesky()
    z = rng.standard_normal((n, DIM))
    draws = policy.mean + z @ chol.T
    return draws, np.clip(draws, -1.0, 1.0)


def _shifted(rewards) -> np.ndarray:
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rewards must be a non-empty 1-D sequence")
    return r - r.max()


def is_degenerate(rewards) -> bool:
    r = np.asarray(rewards, dtype=float)
    return bool(r.max() - r.min() <= 1e-12)


def dual(eta: float, rewards, epsilon: float) -> float:
    """The eREPS dual g(eta) = eta*eps + eta*log mean exp(R/eta), max-shifted."""
    r = np.asarray(rewards, dtype=float)
    top = r.max()
    s = (r - top) / eta
    return eta * epsilon + top + eta * (math.log(np.exp(s).sum()) - math.log(r.size))


def sample_kl(weights) -> float:
    """KL of the weights against the uniform distribution, sum w log(w N)."""
    w = np.asarray(weights, dtype=float)
    nz = w[w > 0]
    return float(np.sum(nz * np.log(nz * w.size)))


def dual_bracket(rewards) -> tuple[float, float]:
    r = np.asarray(rewards, dtype=float)
    span = float(r.max() - r.min())
    return 1e-6 * span + 1e-12, 1e6 * span + 1.0


def solve_dual(rewards, epsilon: float, rtol: float = 1e-10) -> float:
    """Temperature minimising the dual over the standard bracket.

    g is convex with g'(eta) = epsilon - KL(w(eta) || uniform), and the KL term
    decreases in eta, so the minimiser is found by bisecting the sign of g' in
    log-space. Degenerate (constant) rewards return the upper bracket.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    shifted = _shifted(rewards)
    lo, hi = dual_bracket(rewards)
    if is_degenerate(rewards):
        return hi

    def slope(eta):
        return epsilon - sample_kl(weights_from(shifted, eta))

    if slope(lo) >= 0.0:
        return lo
    if slope(hi) <= 0.0:
        return hi
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol:
        mid = 0.5 * (a + b)
        if slope(math.exp(mid)) < 0.0:
            a = mid
        else:
            b = mid
    return math.exp(0.5 * (a + b))


def weights_from(rewards, eta: float) -> np.ndarray:
    if not eta > 0:
        raise ValueError("eta must be positive")
    e = np.exp(_shifted(rewards) / eta)
    return e / e.sum()


def weighted_ml_update(samples, weights, cfg: RepsConfig) -> GaussianPolicy:
    x = np.asarray(samples, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewSamples("need at least two samples")
    if w.shape != (x.shape[0],):
        raise ValueError("one weight per sample")
    mean = w @ x
    centred = x - mean
    cov = (centred * w[:, None]).T @ centred
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < cfg.cov_floor:
        vals = np.maximum(vals, cfg.cov_floor)
        cov = (vecs * vals) @ vecs.T
        cov = 0.5 * (cov + cov.T)
    return GaussianPolicy(mean, cov)


def reps_update(policy: GaussianPolicy, replay: Sequence[EpisodeRecord], cfg: RepsConfig) -> tuple[GaussianPolicy, UpdateInfo]:
    """One eREPS step over the replay window.

    A window of constant rewards carries no preference and leaves the policy
    as it was (reported through ``UpdateInfo.degenerate``).
    """
    replay = list(replay)[-cfg.replay_window:]
    if len(replay) < cfg.batch:
        raise TooFewSamples(f"replay holds {len(replay)} records, need {cfg.batch}")
    rewards = np.array([rec.reward for rec in replay])
    eta = solve_dual(rewards, cfg.epsilon)
    if is_degenerate(rewards):
        w = np.full(len(replay), 1.0 / len(replay))
        return policy, UpdateInfo(eta, True, w)
    w = weights_from(rewards, eta)
    draws = np.array([rec.draw for rec in replay])
    return weighted_ml_update(draws, w, cfg), UpdateInfo(eta, False, w)


def should_terminate(last_batch: Sequence[EpisodeRecord], cfg: RepsConfig) -> bool:
    return len(last_batch) == cfg.batch and all(rec.success for rec in last_batch)


def gaussian_kl(p: GaussianPolicy, q: GaussianPolicy) -> float:
    """KL(p || q) in nats."""
    lp, lq = p.cholesky(), q.cholesky()
    k = p.mean.size
    # tr(Sq^-1 Sp) via triangular solves
    m = np.linalg.solve(lq, lp)
    trace = float(np.sum(m * m))
    diff = np.linalg.solve(lq, q.mean - p.mean)
    maha = float(diff @ diff)
    logdet = 2.0 * (np.sum(np.log(np.diag(lq))) - np.sum(np.log(np.diag(lp))))
    return 0.5 * (trace + maha - k + logdet)
