"""Deterministic pair schedules that drive any configuration into the
trivialized epsilon-neighbourhood.

The planner follows a constructive case analysis:

* tau < 1/2, spread below tau: always pair the two agents farthest apart.
* tau < 1/2, some pair beyond tau: push the extreme pair (r, s) to within
  delta of the poles, then sweep the other agents in index order, pairing
  agents at or below 1/2 with s and the rest with r.
* tau >= 1/2, a consecutive gap above tau: pair across the largest gap.
* tau >= 1/2 otherwise: pair the farthest pair still within tau; the
  configuration eventually falls into one of the cases above.

Ties go to the lexicographically lowest index pair.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ParameterError
from engine.process import OutcomeKind, apply_pair, as_configuration, classify
from kernel.rules import AttractionRepulsion


@dataclass
class ForcedTrajectory:
    states: list
    sequence: list = field(default_factory=list)
    reached: bool = False
    terminal_kind: str = None


def default_budget(n, epsilon):
    return 200 * n * math.ceil(math.log(1 / epsilon))


def _farthest_pair(config, limit=None):
    best, best_gap = None, -1.0
    for i, j in itertools.combinations(range(config.size), 2):
        gap = abs(config[i] - config[j])
        if limit is not None and gap > limit:
            continue
        if gap > best_gap:
            best, best_gap = (i, j), gap
    return best, best_gap


def _largest_consecutive_gap(config):
    order = np.argsort(config, kind='stable')
    gaps = np.diff(config[order])
    k = int(np.argmax(gaps))
    i, j = int(order[k]), int(order[k + 1])
    return (min(i, j), max(i, j)), float(gaps[k])


class _Planner:
    """Chooses the next forced pair; keeps the pole-driving phase between calls."""

    def __init__(self, params, epsilon):
        self.tau = params.tau
        self.epsilon = epsilon
        self.delta = min(epsilon, (0.5 - params.tau) / 2) if params.tau < 0.5 else None
        self.anchors = None

    def next_pair(self, config):
        if self.tau < 0.5:
            return self._below_half(config)
        return self._above_half(config)

    def _below_half(self, config):
        if self.anchors is None:
            if config.max() - config.min() <= self.tau:
                return _farthest_pair(config)[0]
            r, s = int(np.argmin(config)), int(np.argmax(config))
            self.anchors = (r, s)
        r, s = self.anchors
        if config[r] >= self.delta or config[s] <= 1 - self.delta:
            return (min(r, s), max(r, s))
        for k in range(config.size):
            if k in self.anchors:
                continue
            if self.epsilon <= config[k] <= 1 - self.epsilon:
                partner = s if config[k] <= 0.5 else r
                return (min(k, partner), max(k, partner))
        return (min(r, s), max(r, s))

    def _above_half(self, config):
        pair, gap = _largest_consecutive_gap(config)
        if gap > self.tau:
            return pair
        pair, gap = _farthest_pair(config, limit=self.tau)
        if gap <= 0.0:
            return _farthest_pair(config)[0]
        return pair


def forcing_sequence(config, params, epsilon, max_len=None):
    """Build a forced trajectory from `config` into the trivialized neighbourhood.

    Steps use the attraction-repulsion rule.

    Returns with `reached=False` when `max_len` pairs did not suffice.
    """
    if not 0.0 < epsilon < min(params.tau / 2, (1 - params.tau) / 2):
        raise ParameterError(f'epsilon must lie in (0, min(tau/2, (1-tau)/2)), got {epsilon}')
    config = as_configuration(config)
    if max_len is None:
        max_len = default_budget(config.size, epsilon)
    rule = AttractionRepulsion(params)
    planner = _Planner(params, epsilon)
    trajectory = ForcedTrajectory(states=[config])

    outcome = classify(config, epsilon)
    while not outcome.trivialized and len(trajectory.sequence) < max_len:
        i, j = planner.next_pair(config)
        config = apply_pair(config, i, j, rule)
        trajectory.sequence.append((i, j))
        trajectory.states.append(config)
        outcome = classify(config, epsilon)

    trajectory.reached = outcome.trivialized
    trajectory.terminal_kind = outcome.kind if outcome.trivialized else None
    return trajectory


def verify_forcing(config, params, epsilon):
    """True when the forcing planner reaches the trivialized neighbourhood within the default budget."""
    return forcing_sequence(config, params, epsilon).reached


def forced_path_probability(config, sequence, params):
    """Probability that uniform pair scheduling reproduces the forced states.

    Enumerates every scheduler outcome of length len(sequence); only usable
    for tiny n and short sequences.
    """
    config = as_configuration(config)
    rule = AttractionRepulsion(params)
    pairs = list(itertools.combinations(range(config.size), 2))
    target = [config]
    for i, j in sequence:
        target.append(apply_pair(target[-1], i, j, rule))

    hits = 0
    for choice in itertools.product(pairs, repeat=len(sequence)):
        state = config
        for t, (i, j) in enumerate(choice, start=1):
            state = apply_pair(state, i, j, rule)
            if not np.array_equal(state, target[t]):
                break
        else:
            hits += 1
    return hits / len(pairs) ** len(sequence)
