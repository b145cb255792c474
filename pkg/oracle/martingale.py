"""Exact one-step drift of the pair energy h under uniform pair scheduling.

h(phi) = sum over pairs of |tau - |phi_i - phi_j||. For three agents the
drift is never negative; from four agents on it can be, and the search
below looks for such configurations.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from core.exceptions import ParameterError
from engine.process import as_configuration
from kernel.rules import AttractionRepulsion

logger = logging.getLogger(__name__)

# Drift below this counts as a genuine negative rather than rounding.
NEGATIVE_THRESHOLD = -1e-9
BATCH = 4096
RANDOM_SHARE = 0.9


@dataclass
class EnergyReport:
    h_value: float
    expected_next_h: float
    delta: float
    per_pair_outcomes: list = field(default_factory=list)


def _pair_index(n):
    i, j = np.triu_indices(n, k=1)
    return i, j


def _energy(configs, tau, i, j):
    return np.abs(tau - np.abs(configs[..., i] - configs[..., j])).sum(axis=-1)


def h_energy(config, tau):
    config = as_configuration(config)
    i, j = _pair_index(config.size)
    return float(_energy(config, tau, i, j))


def _after_each_pair(configs, rule, i, j):
    """Energies after forcing every pair; shape (batch, pairs)."""
    tau = rule.tau
    out = np.empty((configs.shape[0], len(i)))
    for k, (a, b) in enumerate(zip(i, j)):
        moved = configs.copy()
        moved[:, a], moved[:, b] = rule.interact_many(configs[:, a], configs[:, b])
        out[:, k] = _energy(moved, tau, i, j)
    return out


def expected_deltas(configs, params):
    """Exact drift E[h(next)] - h(now) for a batch of configurations, shape (batch,)."""
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    i, j = _pair_index(configs.shape[1])
    after = _after_each_pair(configs, AttractionRepulsion(params), i, j)
    return after.mean(axis=1) - _energy(configs, params.tau, i, j)


def expected_h_change(config, params):
    """Enumerate every pair, apply the rule, and average the resulting energies."""
    config = as_configuration(config)
    i, j = _pair_index(config.size)
    after = _after_each_pair(config[np.newaxis, :], AttractionRepulsion(params), i, j)[0]
    h_value = float(_energy(config, params.tau, i, j))
    expected = float(after.mean())
    return EnergyReport(
        h_value=h_value,
        expected_next_h=expected,
        delta=expected - h_value,
        per_pair_outcomes=[((int(a), int(b)), float(h)) for a, b, h in zip(i, j, after)],
    )


def _search(n, params, budget, seed):
    rng = np.random.default_rng(seed)
    best_config, best_delta = None, np.inf
    random_budget = int(budget * RANDOM_SHARE)

    spent = 0
    while spent < random_budget:
        size = min(BATCH, random_budget - spent)
        configs = rng.random((size, n))
        deltas = expected_deltas(configs, params)
        k = int(np.argmin(deltas))
        if deltas[k] < best_delta:
            best_config, best_delta = configs[k].copy(), float(deltas[k])
        spent += size

    if best_config is None:
        best_config = rng.random(n)
        best_delta = float(expected_deltas(best_config, params)[0])
        spent += 1

    # coordinate descent around the best random candidate
    scale = 0.05
    while spent < budget and scale > 1e-12:
        improved = False
        for coord in range(n):
            for sign in (1.0, -1.0):
                if spent >= budget:
                    break
                trial = best_config.copy()
                trial[coord] = min(1.0, max(0.0, trial[coord] + sign * scale))
                delta = float(expected_deltas(trial, params)[0])
                spent += 1
                if delta < best_delta:
                    best_config, best_delta, improved = trial, delta, True
        if not improved:
            scale /= 2
    return best_delta, best_config


def find_submartingale_counterexample(n, params, budget, seed):
    """A configuration whose expected energy drops, or None if none was found within `budget` evaluations."""
    if n < 2:
        raise ParameterError(f'n must be at least 2, got {n}')
    best_delta, best_config = _search(n, params, budget, seed)
    logger.info('n=%d tau=%s: lowest drift %.3e after %d evaluations', n, params.tau, best_delta, budget)
    if best_delta < NEGATIVE_THRESHOLD:
        return best_config
    return None


def search_counterexamples(n, params, budget, seeds, workers=1):
    """Run one search per seed and keep the lowest drift; ties go to the lowest seed."""
    if n < 2:
        raise ParameterError(f'n must be at least 2, got {n}')
    seeds = sorted(seeds)
    found = Parallel(n_jobs=workers)(delayed(_search)(n, params, budget, seed) for seed in seeds)
    best_delta, best_config = min(zip(found, itertools.count()), key=lambda item: (item[0][0], item[1]))[0]
    if best_delta < NEGATIVE_THRESHOLD:
        return best_config
    return None
