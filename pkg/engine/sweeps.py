"""Monte-Carlo estimates of the polarization probability over parameter grids."""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed

from core.exceptions import ParameterError
from core.seeding import stream
from kernel.rules import AttractionRepulsion

from .process import (OutcomeKind, SchedulerKind, Uniform01, check_scheduler, default_max_steps,
                      run_to_trivialization, sample_initial)

logger = logging.getLogger(__name__)

# Share of non-trivialized runs above which a cell is flagged.
NON_TRIVIALIZED_LIMIT = 0.01
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SweepResult:
    tau: float
    n: int
    runs: int
    polarized_count: int
    consensus_count: int
    nontrivialized: int
    p_hat: float
    ci_halfwidth: float
    mean_steps: float
    flagged: bool

    def as_dict(self):
        return asdict(self)


def tau_key(tau):
    """Stable integer key for a tau grid value, used in seed derivation."""
    return int(round(tau * 1_000_000_000))


def _run_chunk(params, n, indices, scheduler, master_seed, cell, max_steps, epsilon):
    rule = AttractionRepulsion(params)
    results = []
    for index in indices:
        rng = stream(master_seed, *cell, index)
        initial = sample_initial(n, Uniform01(), rng)
        run = run_to_trivialization(initial, rule, scheduler, epsilon, max_steps, rng)
        results.append((run.outcome.kind, run.steps))
    return results


def _chunks(runs, workers):
    size = max(1, math.ceil(runs / (4 * max(1, workers))))
    return [range(start, min(runs, start + size)) for start in range(0, runs, size)]


def estimate_p_polarization(params, n, runs, scheduler, master_seed, max_steps=None, workers=1, epsilon=None):
    """Fraction of trivialized runs that polarize, from iid uniform starts.

    Run r uses the stream (master_seed, n, tau, r), so the estimate does not
    depend on `workers`. Non-trivialized runs are left out of the
    denominator and counted separately.
    """
    if runs < 1:
        raise ParameterError(f'runs must be at least 1, got {runs}')
    check_scheduler(scheduler, n)
    max_steps = max_steps or default_max_steps(scheduler)
    epsilon = epsilon or params.stopping_epsilon
    cell = (n, tau_key(params.tau))

    chunks = _chunks(runs, workers)
    if workers > 1 and len(chunks) > 1:
        parts = Parallel(n_jobs=workers)(
            delayed(_run_chunk)(params, n, chunk, scheduler, master_seed, cell, max_steps, epsilon)
            for chunk in chunks
        )
    else:
        parts = [_run_chunk(params, n, chunk, scheduler, master_seed, cell, max_steps, epsilon) for chunk in chunks]
    outcomes = [item for part in parts for item in part]

    polarized = sum(1 for kind, _ in outcomes if kind == OutcomeKind.POLARIZED)
    consensus = sum(1 for kind, _ in outcomes if kind == OutcomeKind.CONSENSUS)
    stuck = runs - polarized - consensus
    decided = polarized + consensus
    p_hat = polarized / decided if decided else 0.0
    halfwidth = Z95 * math.sqrt(p_hat * (1 - p_hat) / decided) if decided else 1.0
    steps = [s for kind, s in outcomes if kind != OutcomeKind.NON_TRIVIALIZED]
    flagged = stuck > NON_TRIVIALIZED_LIMIT * runs
    if flagged:
        logger.warning('tau=%s n=%d: %d of %d runs did not trivialize within %d steps',
                       params.tau, n, stuck, runs, max_steps)

    result = SweepResult(
        tau=params.tau,
        n=n,
        runs=runs,
        polarized_count=polarized,
        consensus_count=consensus,
        nontrivialized=stuck,
        p_hat=p_hat,
        ci_halfwidth=halfwidth,
        mean_steps=float(np.mean(steps)) if steps else 0.0,
        flagged=flagged,
    )
    logger.info('tau=%s n=%d: p_hat=%.4f +- %.4f', params.tau, n, p_hat, halfwidth)
    return result


def sweep(tau_grid, n_list, params_base, runs, master_seed, scheduler=SchedulerKind.RANDOM_MATCHING,
          max_steps=None, workers=1, epsilon=None):
    """Evaluate every (tau, n) cell; results are ordered by (n, tau)."""
    if not tau_grid or not n_list:
        raise ParameterError('tau_grid and n_list must be non-empty')
    return [
        estimate_p_polarization(params_base.with_tau(tau), n, runs, scheduler, master_seed,
                                max_steps=max_steps, workers=workers, epsilon=epsilon)
        for n in sorted(n_list)
        for tau in sorted(tau_grid)
    ]


def two_agent_p_polarization(params, epsilon=None, resolution=400, max_steps=10_000):
    """Exact-by-quadrature polarization probability for n = 2.

    With two agents the process is deterministic given the start, so the
    probability is the area of the starting pairs whose orbit first enters
    the polarized neighborhood; it is integrated on a midpoint grid.
    """
    epsilon = epsilon or params.stopping_epsilon
    rule = AttractionRepulsion(params)
    axis = (np.arange(resolution) + 0.5) / resolution
    xs, ys = (a.ravel() for a in np.meshgrid(axis, axis, indexing='ij'))
    polarized = np.zeros(xs.size, dtype=bool)
    pending = np.ones(xs.size, dtype=bool)
    top = 1.0 - epsilon
    for _ in range(max_steps + 1):
        near = ((xs < epsilon) | (xs > top)) & ((ys < epsilon) | (ys > top))
        close = np.abs(xs - ys) < 2 * epsilon
        polarized |= pending & near
        pending &= ~(near | close)
        if not pending.any():
            break
        xs[pending], ys[pending] = rule.interact_many(xs[pending], ys[pending])
    return float(polarized.mean())
