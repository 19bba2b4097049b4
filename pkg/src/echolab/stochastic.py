"""Stationary ergodic input processes and value functionals.

Finite-state processes (i.i.d. draws, Markov chains started from their
stationary law, and wrapped deterministic series), the time-shift view,
Monte-Carlo value estimation, the empirical Bellman residual, and an
empirical contraction check for the one-step expectation operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .dynsys import TimeSeries
from .errors import AdmissibilityError, NonErgodicError
from .reservoir import make_rng
from .training import Readout


@dataclass
class ProcessSpec:
    """A finite-memory stationary process.

    kind selects the sampler:
      ('iid_finite', support, probabilities): rows of `support` drawn
          i.i.d. with the given probabilities.
      ('markov_chain', transition, emissions): a finite chain started
          from its stationary distribution, emitting `emissions[state]`.
      ('deterministic_wrap', series): replays a stored TimeSeries.
    """

    kind: Tuple
    seed: int = 0

    def __post_init__(self):
        tag = self.kind[0]
        if tag == "iid_finite":
            _, support, probs = self.kind
            probs = np.asarray(probs, dtype=float)
            if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < 0):
                raise ValueError("probabilities must be nonnegative and sum to 1")
            if not np.all(np.isfinite(np.asarray(support, dtype=float))):
                raise AdmissibilityError("support must be bounded")
        elif tag == "markov_chain":
            _, transition, emissions = self.kind
            P = np.asarray(transition, dtype=float)
            if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
                raise ValueError("transition rows must be stochastic")
            if not np.all(np.isfinite(np.asarray(emissions, dtype=float))):
                raise AdmissibilityError("emissions must be bounded")
        elif tag == "deterministic_wrap":
            if not isinstance(self.kind[1], TimeSeries):
                raise ValueError("deterministic_wrap expects a TimeSeries")
        else:
            raise ValueError(f"unknown process kind {tag!r}")

    @property
    def tag(self) -> str:
        return self.kind[0]


def stationary_distribution(transition: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Unique stationary law of an ergodic chain, or NonErgodicError."""
    P = np.asarray(transition, dtype=float)
    vals, vecs = np.linalg.eig(P.T)
    close = np.where(np.abs(vals - 1.0) < 1e-9)[0]
    if len(close) != 1:
        raise NonErgodicError("transition matrix has no unique stationary distribution")
    pi = np.real(vecs[:, close[0]])
    pi = pi / pi.sum()
    if np.any(pi < -tol):
        raise NonErgodicError("stationary vector has negative mass")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def sample_path(
    spec: ProcessSpec, length: int, return_states: bool = False
) -> Union[TimeSeries, Tuple[TimeSeries, np.ndarray]]:
    """Seeded, replayable sample of the process.

    Markov paths draw their initial state from the stationary
    distribution so the path is stationary from index 0; the optional
    second return value carries the hidden state indices.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = make_rng(spec.seed)
    tag = spec.tag
    if tag == "iid_finite":
        _, support, probs = spec.kind
        support = np.atleast_2d(np.asarray(support, dtype=float))
        idx = rng.choice(len(support), size=length, p=np.asarray(probs, dtype=float))
        series = TimeSeries(step=1.0, samples=support[idx])
        return (series, idx) if return_states else series
    if tag == "markov_chain":
        _, transition, emissions = spec.kind
        P = np.asarray(transition, dtype=float)
        emissions = np.atleast_2d(np.asarray(emissions, dtype=float))
        pi = stationary_distribution(P)
        states = np.empty(length, dtype=int)
        states[0] = rng.choice(len(pi), p=pi)
        for k in range(1, length):
            states[k] = rng.choice(len(pi), p=P[states[k - 1]])
        series = TimeSeries(step=1.0, samples=emissions[states])
        return (series, states) if return_states else series
    series = spec.kind[1]
    out = TimeSeries(
        step=series.step,
        samples=series.samples[:length].copy(),
        origin_index=series.origin_index,
    )
    if return_states:
        return out, np.arange(min(length, len(series)))
    return out


@dataclass
class PathView:
    """Index-shifted window into an immutable sample buffer."""

    buffer: np.ndarray
    offset: int = 0

    def __post_init__(self):
        self.buffer = np.atleast_2d(np.asarray(self.buffer, dtype=float))
        if not 0 <= self.offset <= len(self.buffer):
            raise IndexError("shifted window leaves the available samples")

    def __len__(self) -> int:
        return len(self.buffer) - self.offset

    def sample(self, i: int) -> np.ndarray:
        idx = i + self.offset
        if not 0 <= idx < len(self.buffer):
            raise IndexError(f"sample {i} outside the shifted window")
        return self.buffer[idx]


def shift(series: Union[TimeSeries, PathView], k: int) -> PathView:
    """Time-shift view: sample i of the result is sample i + k of the input.

    Shifts compose additively, so a +k followed by a -k shift is the
    identity; moving outside the stored samples raises IndexError.
    """
    if isinstance(series, PathView):
        return PathView(series.buffer, series.offset + k)
    return PathView(series.samples, k)


@dataclass
class RewardFunctional:
    """Causal reward depending on the last `window` inputs.

    fn receives a (window, d) array, newest input last, and must return
    a finite float.
    """

    window: int
    fn: Callable[[np.ndarray], float]
    sup_bound: Optional[float] = None

    def __call__(self, recent: np.ndarray) -> float:
        value = float(self.fn(np.atleast_2d(recent)))
        if not math.isfinite(value):
            raise AdmissibilityError("reward functional produced a non-finite value")
        if self.sup_bound is not None and abs(value) > self.sup_bound + 1e-12:
            raise AdmissibilityError("reward exceeded its declared bound")
        return value


@dataclass
class ValueEstimate:
    value: float
    stderr: float
    horizon: int
    n_rollouts: int


def _rollout_emissions(spec, rng, start_state, length):
    tag = spec.tag
    if tag == "iid_finite":
        _, support, probs = spec.kind
        support = np.atleast_2d(np.asarray(support, dtype=float))
        idx = rng.choice(len(support), size=length, p=np.asarray(probs, dtype=float))
        return support[idx]
    if tag == "markov_chain":
        _, transition, emissions = spec.kind
        P = np.asarray(transition, dtype=float)
        emissions = np.atleast_2d(np.asarray(emissions, dtype=float))
        states = np.empty(length, dtype=int)
        prev = start_state
        for k in range(length):
            prev = rng.choice(P.shape[0], p=P[prev])
            states[k] = prev
        return emissions[states]
    series = spec.kind[1]
    start = 0 if start_state is None else start_state + 1
    if start + length > len(series):
        raise ValueError("wrapped series too short for the requested horizon")
    return series.samples[start : start + length]


def value_mc(
    spec: ProcessSpec,
    reward: RewardFunctional,
    gamma: float,
    history: np.ndarray,
    n_rollouts: int = 200,
    horizon: Optional[int] = None,
    tail_tol: float = 1e-9,
    current_state: Optional[int] = None,
    seed: int = 0,
) -> ValueEstimate:
    """Monte-Carlo estimate of the discounted value given a history.

    `history` holds at least `reward.window` recent inputs (newest
    last); Markov and wrapped kinds condition on `current_state`, the
    hidden index behind the newest input, while i.i.d. kinds ignore it.
    The horizon defaults to the point where the geometric tail drops
    below tail_tol times the largest observed reward magnitude.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    history = np.atleast_2d(np.asarray(history, dtype=float))
    if len(history) < reward.window:
        raise ValueError("history shorter than the reward window")
    if horizon is None:
        if gamma == 0.0:
            horizon = 1
        else:
            horizon = max(1, int(math.ceil(math.log(tail_tol) / math.log(gamma))))
    rng = make_rng(seed)
    totals = np.empty(n_rollouts)
    for r in range(n_rollouts):
        future = _rollout_emissions(spec, rng, current_state, horizon - 1) if horizon > 1 else np.zeros((0, history.shape[1]))
        path = np.vstack([history, future])
        base = len(history) - 1
        total = 0.0
        for k in range(horizon):
            window = path[base + k - reward.window + 1 : base + k + 1]
            total += gamma**k * reward(window)
        totals[r] = total
    stderr = float(totals.std(ddof=1) / math.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0
    return ValueEstimate(
        value=float(totals.mean()), stderr=stderr, horizon=horizon, n_rollouts=n_rollouts
    )


def markov_value_oracle(transition: np.ndarray, rewards: np.ndarray, gamma: float) -> np.ndarray:
    """Exact tabular value (I - gamma P)^{-1} r."""
    P = np.asarray(transition, dtype=float)
    r = np.asarray(rewards, dtype=float)
    return np.linalg.solve(np.eye(P.shape[0]) - gamma * P, r)


def bellman_residual(
    features: np.ndarray,
    w: Union[Readout, np.ndarray],
    rewards: np.ndarray,
    gamma: float,
    burn_in: int = 0,
) -> float:
    """Path average of (W^T (H_k - gamma H_{k+1}) - R_k)^2.

    This is the empirical objective that the value-target transform
    plus offline training minimises; features are rows H_k along the
    path and rewards align with the transition leaving step k.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    H = np.atleast_2d(np.asarray(features, dtype=float))
    if len(H) < burn_in + 2:
        raise ValueError("path must be longer than burn_in + 2")
    weights = w.w if isinstance(w, Readout) else np.asarray(w, dtype=float)
    rewards = np.asarray(rewards, dtype=float)
    diffs = H[burn_in:-1] - gamma * H[burn_in + 1 :]
    preds = diffs @ weights
    r = rewards[burn_in : burn_in + len(preds)]
    return float(np.mean((preds - r) ** 2))


def bellman_contraction_check(
    transition: np.ndarray,
    feature_table: np.ndarray,
    gamma: float,
    path_states: np.ndarray,
    n_pairs: int = 100,
    seed: int = 0,
) -> float:
    """Empirical Lipschitz ratio of H -> gamma E[H(next)] + R.

    Draws random pairs of tabular functionals from the span of the
    feature table and measures ||Phi H1 - Phi H2|| / ||H1 - H2|| in the
    path's empirical norm, skipping coincident pairs. The reward term
    cancels in differences, so only the expectation part matters.
    """
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    P = np.asarray(transition, dtype=float)
    table = np.atleast_2d(np.asarray(feature_table, dtype=float))
    states = np.asarray(path_states, dtype=int)
    rng = make_rng(seed)
    max_ratio = 0.0
    for _ in range(n_pairs):
        w1 = rng.standard_normal(table.shape[1])
        w2 = rng.standard_normal(table.shape[1])
        h1, h2 = table @ w1, table @ w2
        diff = h1 - h2
        denom = math.sqrt(float(np.mean(diff[states] ** 2)))
        if denom < 1e-12:
            continue
        phi_diff = gamma * (P @ diff)
        numer = math.sqrt(float(np.mean(phi_diff[states] ** 2)))
        max_ratio = max(max_ratio, numer / denom)
    return max_ratio
