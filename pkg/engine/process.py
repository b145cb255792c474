"""Finite-population random interaction processes and trivialization detection."""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from django.db import models

from core.exceptions import ParameterError, SchedulerError
from core.seeding import stream

logger = logging.getLogger(__name__)

UNIFORM_PAIR_MAX_STEPS = 1_000_000
MATCHING_MAX_ROUNDS = 10_000
TRAJECTORY_POINTS = 1000


class SchedulerKind(models.TextChoices):
    UNIFORM_PAIR = 'uniform-pair', 'One uniformly random pair per step'
    RANDOM_MATCHING = 'random-matching', 'A uniformly random perfect matching per round'


class OutcomeKind(models.TextChoices):
    POLARIZED = 'polarized', 'Polarized'
    CONSENSUS = 'consensus', 'Consensus'
    NON_TRIVIALIZED = 'nontrivialized', 'Not trivialized'


def default_max_steps(scheduler):
    return UNIFORM_PAIR_MAX_STEPS if scheduler == SchedulerKind.UNIFORM_PAIR else MATCHING_MAX_ROUNDS


def as_configuration(values):
    """Validate opinions and return them as a float array."""
    config = np.array(values, dtype=float)
    if config.ndim != 1 or config.size < 2:
        raise ParameterError(f'a configuration needs at least 2 opinions, got {config.size}')
    if not np.all((config >= 0.0) & (config <= 1.0)):
        raise ParameterError('opinions must lie in [0, 1]')
    return config


def check_scheduler(scheduler, n):
    if scheduler == SchedulerKind.RANDOM_MATCHING and n % 2:
        raise SchedulerError(f'random matching needs an even number of agents, got n={n}')


# Initial distributions

@dataclass(frozen=True)
class Uniform01:

    def draw(self, n, rng):
        return rng.random(n)


@dataclass(frozen=True)
class EmpiricalSamples:
    """Resample a user-supplied list of opinions with replacement."""
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ParameterError('EmpiricalSamples needs at least one value')
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ParameterError('EmpiricalSamples values must lie in [0, 1]')

    def draw(self, n, rng):
        pool = np.asarray(self.values, dtype=float)
        return pool[rng.integers(0, len(pool), size=n)]


def sample_initial(n, distribution, rng):
    """Draw n iid opinions from `distribution`."""
    if n < 2:
        raise ParameterError(f'n must be at least 2, got {n}')
    return as_configuration(distribution.draw(n, rng))


# Scheduling primitives, shared with the geometry app

def draw_pair(rng, n):
    """A pair drawn uniformly from all n-choose-2, returned as (i, j) with i < j."""
    i = int(rng.random() * n)
    j = int(rng.random() * (n - 1))
    if j >= i:
        j += 1
    return (i, j) if i < j else (j, i)


def draw_matching(rng, n):
    """A uniform perfect matching as two aligned index arrays."""
    order = rng.permutation(n)
    return order[0::2], order[1::2]


# Classification

@dataclass(frozen=True)
class TrivialOutcome:
    kind: str
    epsilon: float
    alpha: float = None
    degenerate_pole: bool = False

    @property
    def trivialized(self):
        return self.kind != OutcomeKind.NON_TRIVIALIZED


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f'epsilon must lie in (0, 1/2), got {epsilon}')


def classify(config, epsilon):
    """Place `config` against the epsilon-neighborhoods of polarization and consensus.

    A configuration near a single pole is in both neighborhoods; it is
    reported as polarized with `degenerate_pole` set.
    """
    _check_epsilon(epsilon)
    config = np.asarray(config, dtype=float)
    low, high = config < epsilon, config > 1.0 - epsilon
    lo, hi = float(config.min()), float(config.max())
    spread_ok = hi - lo < 2 * epsilon
    if np.all(low | high):
        degenerate = bool(np.all(low) or np.all(high))
        alpha = (lo + hi) / 2 if spread_ok else None
        return TrivialOutcome(OutcomeKind.POLARIZED, epsilon, alpha, degenerate)
    if spread_ok:
        return TrivialOutcome(OutcomeKind.CONSENSUS, epsilon, (lo + hi) / 2)
    return TrivialOutcome(OutcomeKind.NON_TRIVIALIZED, epsilon)


# Process state and stepping

@dataclass(frozen=True, eq=False)
class ProcessState:
    """Configuration, step counter and the live random stream driving it."""
    config: np.ndarray
    time: int
    seed: int
    stream_index: tuple
    rng: np.random.Generator = field(compare=False, repr=False)

    @classmethod
    def start(cls, config, seed, stream_index=(0,)):
        index = tuple(stream_index) if isinstance(stream_index, (tuple, list)) else (stream_index,)
        return cls(as_configuration(config), 0, seed, index, stream(seed, *index))


def apply_pair(config, i, j, rule):
    """Force the pair (i, j) to interact; every other agent is copied unchanged."""
    if i == j:
        raise ParameterError('an agent cannot interact with itself')
    out = np.array(config, dtype=float)
    out[i], out[j] = rule.interact(float(out[i]), float(out[j]))
    return out


def apply_matching(config, left, right, rule):
    out = np.array(config, dtype=float)
    out[left], out[right] = rule.interact_many(out[left], out[right])
    return out


def step(state, scheduler, rule):
    """Advance the process by one step (UniformPair) or one round (RandomMatching)."""
    n = state.config.size
    check_scheduler(scheduler, n)
    if scheduler == SchedulerKind.UNIFORM_PAIR:
        i, j = draw_pair(state.rng, n)
        config = apply_pair(state.config, i, j, rule)
    else:
        left, right = draw_matching(state.rng, n)
        config = apply_matching(state.config, left, right, rule)
    return replace(state, config=config, time=state.time + 1)


@dataclass
class RunOutcome:
    outcome: TrivialOutcome
    steps: int
    trajectory: list = None


def run_to_trivialization(initial, rule, scheduler, epsilon, max_steps, rng, record=False, stride=None):
    """Iterate until the process enters the polarized or consensus neighborhood.

    Exhausting `max_steps` is reported in-band as NonTrivialized. With
    `record`, every `stride`-th state (default max_steps/1000) is kept along
    with the first and last.
    """
    _check_epsilon(epsilon)
    config = as_configuration(initial)
    n = config.size
    check_scheduler(scheduler, n)
    if max_steps is None:
        max_steps = default_max_steps(scheduler)
    stride = stride or max(1, max_steps // TRAJECTORY_POINTS)
    trajectory = [(0, config.copy())] if record else None

    outcome = classify(config, epsilon)
    if outcome.trivialized:
        return RunOutcome(outcome, 0, trajectory)

    if scheduler == SchedulerKind.UNIFORM_PAIR:
        steps = _run_pairs(config, rule, epsilon, max_steps, rng, trajectory, stride)
    else:
        steps = _run_matchings(config, rule, epsilon, max_steps, rng, trajectory, stride)

    outcome = classify(config, epsilon)
    if record and trajectory[-1][0] != steps:
        trajectory.append((steps, config.copy()))
    return RunOutcome(outcome, steps, trajectory)


def _run_pairs(config, rule, epsilon, max_steps, rng, trajectory, stride):
    # Works on a Python list for speed; the result is written back into `config`.
    xs = config.tolist()
    n = len(xs)
    top = 1.0 - epsilon
    near = sum(1 for x in xs if x < epsilon or x > top)
    steps = 0
    while steps < max_steps:
        i, j = draw_pair(rng, n)
        x, y = xs[i], xs[j]
        a, b = rule.interact(x, y)
        xs[i], xs[j] = a, b
        near += ((a < epsilon or a > top) + (b < epsilon or b > top)
                 - (x < epsilon or x > top) - (y < epsilon or y > top))
        steps += 1
        if trajectory is not None and steps % stride == 0:
            trajectory.append((steps, np.array(xs)))
        if near == n or max(xs) - min(xs) < 2 * epsilon:
            break
    config[:] = xs
    return steps


def _run_matchings(config, rule, epsilon, max_steps, rng, trajectory, stride):
    n = config.size
    top = 1.0 - epsilon
    rounds = 0
    while rounds < max_steps:
        left, right = draw_matching(rng, n)
        config[left], config[right] = rule.interact_many(config[left], config[right])
        rounds += 1
        if trajectory is not None and rounds % stride == 0:
            trajectory.append((rounds, config.copy()))
        if np.all((config < epsilon) | (config > top)) or config.max() - config.min() < 2 * epsilon:
            break
    return rounds
