"""Dispatch a validated config to its experiment and write the result files."""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from django.db import DatabaseError
from django.utils import timezone

from core.formats import fixed
from core.seeding import stream
from engine.process import SchedulerKind, Uniform01, run_to_trivialization, sample_initial
from engine.sweeps import sweep, tau_key
from geometry.dynamics import MAX_ROUNDS, run_multidim
from kernel.contract import check_rule_contract
from kernel.rules import build_rule
from meanfield.solver import bisect_critical_tau, evolve, initial_density
from oracle.forcing import verify_forcing
from oracle.martingale import expected_h_change, search_counterexamples

from .models import ExperimentKind, ExperimentRun

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
# Failing starts kept in force_check.json per tau.
FAILURES_KEPT = 10


@dataclass
class RunManifest:
    config_echo: dict
    tool_version: str
    master_seed: int
    started: str
    finished: str = None
    output_files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


def write_csv(path, header, rows):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([fixed(value) for value in row])


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False))
        handle.write('\n')


# Experiments. Each writes its files into `out` and returns (file names, summary).

def _simulate(config, out, workers):
    rule = build_rule(config.rule, config.model)
    rng = stream(config.seed, config.n)
    initial = sample_initial(config.n, Uniform01(), rng)
    epsilon = config.epsilon or config.model.stopping_epsilon
    # one row block per round
    stride = 1 if config.scheduler == SchedulerKind.RANDOM_MATCHING else max(1, config.n // 2)
    run = run_to_trivialization(initial, rule, config.scheduler, epsilon, config.max_steps, rng, record=True,
                                stride=stride)
    rows = ((t, agent, opinion) for t, state in run.trajectory for agent, opinion in enumerate(state))
    write_csv(out / 'trajectory.csv', ['t', 'agent', 'opinion'], rows)
    summary = {'outcome': run.outcome.kind, 'steps': run.steps, 'degenerate_pole': run.outcome.degenerate_pole}
    return ['trajectory.csv'], summary


def _sweep(config, out, workers):
    results = sweep(config.tau_grid, config.n_list, config.model, config.runs, config.seed,
                    scheduler=config.scheduler, max_steps=config.max_steps, workers=workers, epsilon=config.epsilon)
    header = ['n', 'tau', 'runs', 'polarized', 'p_hat', 'ci95', 'mean_steps', 'nontrivialized']
    rows = ((r.n, r.tau, r.runs, r.polarized_count, r.p_hat, r.ci_halfwidth, r.mean_steps, r.nontrivialized)
            for r in results)
    write_csv(out / 'sweep.csv', header, rows)
    return ['sweep.csv'], {'cells': len(results), 'flagged': [[r.n, r.tau] for r in results if r.flagged]}


def _pde(config, out, workers):
    initial = initial_density(config.initial, config.pde.grid_size, config.shape)
    snapshots, limit = evolve(initial, config.pde)
    rows = ((s.t, x, f) for s in snapshots for x, f in zip(s.grid.nodes, s.grid.values))
    write_csv(out / 'density.csv', ['t', 'x', 'f'], rows)
    summary = {'limit': limit.kind, 'time': limit.time, 'pole_mass': limit.pole_mass,
               'center_mass': limit.center_mass,
               'max_abs_drift': max((abs(s.grid.drift) for s in snapshots), default=0.0)}
    return ['density.csv'], summary


def _critical_tau(config, out, workers):
    lo, hi = config.bracket
    initial = initial_density(config.initial, config.pde.grid_size, config.shape)
    result = bisect_critical_tau(config.pde, lo, hi, config.tol, initial=initial)
    write_json(out / 'critical_tau.json', result.as_dict())
    return ['critical_tau.json'], {'tau_c': result.tau}


def _force_check(config, out, workers):
    taus = config.tau_grid or [config.model.tau]
    results = []
    for tau in sorted(taus):
        params = config.model.with_tau(tau)
        epsilon = config.epsilon or params.stopping_epsilon
        rng = stream(config.seed, config.n, tau_key(tau))
        failures, reached = [], 0
        for _ in range(config.samples):
            start = rng.random(config.n)
            if verify_forcing(start, params, epsilon):
                reached += 1
            elif len(failures) < FAILURES_KEPT:
                failures.append(start.tolist())
        results.append({'tau': tau, 'epsilon': epsilon, 'reached': reached, 'failed': config.samples - reached,
                        'first_failures': failures})
        logger.info('forcing tau=%s: %d of %d starts reached the neighborhood', tau, reached, config.samples)
    write_json(out / 'force_check.json', {'n': config.n, 'samples': config.samples, 'results': results})
    return ['force_check.json'], {'all_reached': all(r['failed'] == 0 for r in results)}


def _martingale(config, out, workers):
    found = search_counterexamples(config.n, config.model, config.budget, config.seeds, workers=workers)
    payload = {'found': found is not None, 'n': config.n, 'tau': config.model.tau, 'budget': config.budget,
               'seeds': sorted(config.seeds)}
    if found is not None:
        report = expected_h_change(found, config.model)
        payload.update(configuration=found.tolist(), delta=report.delta, h_value=report.h_value,
                       expected_next_h=report.expected_next_h)
    write_json(out / 'counterexample.json', payload)
    return ['counterexample.json'], {'found': payload['found']}


def _multidim(config, out, workers):
    record = tuple(int(t) for t in config.snapshot_times)
    run = run_multidim(config.n, config.model, config.domain, config.scheduler, config.epsilon,
                       config.max_steps or MAX_ROUNDS, config.seed, record_rounds=record)
    dimension = config.domain.dimension
    header = ['round', 'agent'] + [f'x{k}' for k in range(1, dimension + 1)]
    rows = ((r, agent, *point) for r, points in run.snapshots for agent, point in enumerate(points))
    write_csv(out / 'points.csv', header, rows)
    return ['points.csv'], {'label': run.label, 'rounds': run.rounds, **run.summary.as_dict()}


def _rule_check(config, out, workers):
    rule = build_rule(config.rule, config.model)
    report = check_rule_contract(rule, config.samples, config.seed)
    write_json(out / 'rule_report.json', {'rule': rule.name, 'ok': report.ok, **report.as_dict()})
    return ['rule_report.json'], {'ok': report.ok}


EXPERIMENTS = {
    ExperimentKind.SIMULATE: _simulate,
    ExperimentKind.SWEEP: _sweep,
    ExperimentKind.PDE: _pde,
    ExperimentKind.CRITICAL_TAU: _critical_tau,
    ExperimentKind.FORCE_CHECK: _force_check,
    ExperimentKind.MARTINGALE: _martingale,
    ExperimentKind.MULTIDIM: _multidim,
    ExperimentKind.RULE_CHECK: _rule_check,
}


def default_output_dir(config):
    return Path(settings.POLARLAB_OUTPUT_DIR) / f'{config.experiment}-{config.seed}'


def _record(run=None, **fields):
    """Create or update the registry row; a missing table only costs a warning."""
    if not settings.POLARLAB_RECORD_RUNS:
        return None
    try:
        if run is None:
            return ExperimentRun.objects.create(**fields)
        for name, value in fields.items():
            setattr(run, name, value)
        run.save()
        return run
    except DatabaseError as exc:
        logger.warning('run registry unavailable, run not recorded: %s', exc)
        return None


def run_experiment(config, output_dir=None, workers=None):
    """Run `config`, write its data files and manifest.json, and return the manifest.

    Data files depend only on the config and seed, never on `workers`.
    """
    out = Path(output_dir or config.output_dir or default_output_dir(config))
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or config.workers or settings.POLARLAB_WORKERS
    started = timezone.now()
    manifest = RunManifest(
        config_echo={**config.as_dict(), 'output_dir': str(out)},
        tool_version=settings.POLARLAB_VERSION,
        master_seed=config.seed,
        started=started.isoformat(),
    )
    logger.info('starting %s (seed %d) into %s', config.experiment, config.seed, out)
    run = _record(experiment=config.experiment, master_seed=config.seed, tool_version=settings.POLARLAB_VERSION,
                  output_dir=str(out), config=_jsonable(manifest.config_echo), started_at=started)

    try:
        files, summary = EXPERIMENTS[config.experiment](config, out, workers)
    except Exception as exc:
        if run is not None:
            _record(run, status='failed', error=str(exc), finished_at=timezone.now())
        raise

    finished = timezone.now()
    manifest.finished = finished.isoformat()
    manifest.output_files = sorted(files + [MANIFEST])
    manifest.summary = summary
    write_json(out / MANIFEST, manifest.as_dict())
    if run is not None:
        _record(run, status='finished', output_files=manifest.output_files, finished_at=finished)
    logger.info('finished %s: %s', config.experiment, ', '.join(manifest.output_files))
    return manifest
