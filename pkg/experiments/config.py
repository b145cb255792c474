"""Strict parsing of JSON experiment configs.

A config is one JSON object. Top-level keys are the ExperimentForm fields
plus three optional sections, `model`, `pde` and `domain`. Every key is
checked: unknown keys are rejected with the closest known key as a hint,
and each error carries its dotted path and the line of the key in the text.
"""

import difflib
import json
import os
from dataclasses import dataclass, field

from core.exceptions import ConfigError, ParameterError
from engine.process import SchedulerKind
from geometry.domains import build_domain
from geometry.dynamics import SpatialModelParams
from kernel.params import ModelParams
from meanfield.solver import InitialDensity, PdeParams

from .forms import DomainSectionForm, ExperimentForm, ModelSectionForm, PdeSectionForm
from .models import ExperimentKind

SECTIONS = {
    'model': ModelSectionForm,
    'pde': PdeSectionForm,
    'domain': DomainSectionForm,
}

MODEL_DEFAULTS = {'tau': 0.5, 'lam': 0.5, 'mu': 0.5, 'rule': 'attraction-repulsion'}

SAMPLE_DEFAULTS = {
    ExperimentKind.FORCE_CHECK: 1000,
    ExperimentKind.RULE_CHECK: 10_000,
}

DEFAULT_BUDGET = 100_000
DEFAULT_BRACKET = (0.45, 0.60)
DEFAULT_TOL = 0.005
DEFAULT_SNAPSHOT_TIMES = (0.0, 10.0, 20.0)


@dataclass
class ExperimentConfig:
    experiment: str
    model: ModelParams
    rule: str = 'attraction-repulsion'
    scheduler: str = SchedulerKind.RANDOM_MATCHING
    n: int = None
    n_list: list = field(default_factory=list)
    tau_grid: list = field(default_factory=list)
    runs: int = 100
    seed: int = 0
    seeds: list = field(default_factory=list)
    epsilon: float = None
    max_steps: int = None
    budget: int = DEFAULT_BUDGET
    samples: int = None
    snapshot_times: tuple = DEFAULT_SNAPSHOT_TIMES
    pde: PdeParams = None
    initial: str = InitialDensity.UNIFORM
    shape: float = 4.0
    bracket: tuple = DEFAULT_BRACKET
    tol: float = DEFAULT_TOL
    domain: object = None
    output_dir: str = None
    workers: int = None

    def as_dict(self):
        """The resolved config, defaults included."""
        echo = {
            'experiment': str(self.experiment),
            'model': {'tau': self.model.tau, 'lam': self.model.lam, 'mu': self.model.mu, 'rule': self.rule},
            'scheduler': str(self.scheduler),
            'n': self.n,
            'n_list': list(self.n_list),
            'tau_grid': list(self.tau_grid),
            'runs': self.runs,
            'seed': self.seed,
            'seeds': list(self.seeds),
            'epsilon': self.epsilon,
            'max_steps': self.max_steps,
            'budget': self.budget,
            'samples': self.samples,
            'snapshot_times': list(self.snapshot_times),
            'output_dir': self.output_dir,
        }
        if self.pde is not None:
            echo['pde'] = {
                'dt': self.pde.dt,
                'grid_size': self.pde.grid_size,
                't_max': self.pde.t_max,
                'classify_window': self.pde.classify_window,
                'classify_mass': self.pde.classify_mass,
                'initial': str(self.initial),
                'shape': self.shape,
                'bracket': list(self.bracket),
                'tol': self.tol,
            }
        if self.domain is not None:
            echo['domain'] = self.domain.as_dict()
        return echo


def line_of(text, path):
    """1-based line of the last key of `path`, searched after its parents."""
    position = 0
    for key in path:
        found = text.find(f'"{key}"', position)
        if found < 0:
            return None
        position = found
    return text.count('\n', 0, position) + 1


def suggest(key, allowed):
    """Closest allowed key: longest shared prefix first, then string similarity."""
    allowed = sorted(allowed)
    scored = [(len(os.path.commonprefix([key, candidate])), candidate) for candidate in allowed]
    best = max(score for score, _ in scored)
    if best >= 3:
        return min((len(candidate), candidate) for score, candidate in scored if score == best)[1]
    close = difflib.get_close_matches(key, allowed, n=1)
    return close[0] if close else None


class _Errors:

    def __init__(self, text):
        self.text = text
        self.entries = []

    def add(self, path, message, line_path=None):
        line = line_of(self.text, line_path or path.split('.')) if path else None
        self.entries.append((path or '<document>', line, message))

    def unknown(self, keys, allowed, prefix=''):
        for key in sorted(keys):
            hint = suggest(key, allowed)
            message = f"unknown key '{key}'" + (f"; did you mean '{hint}'?" if hint else '')
            self.add(prefix + key, message)

    def from_form(self, form, prefix=''):
        for name, errors in form.errors.as_data().items():
            for error in errors:
                message = ' '.join(error.messages)
                if name == '__all__':
                    key = error.code if error.code in form.fields else None
                    self.add(prefix + key if key else prefix.rstrip('.'), message,
                             line_path=[part for part in (prefix.rstrip('.'), key) if part] or None)
                else:
                    self.add(prefix + name, message)


def parse_config(text, overrides=None):
    """Validate a JSON config and resolve its defaults.

    `overrides` replaces top-level keys before validation (command-line flags).
    Raises ConfigError listing every problem found.
    """
    errors = _Errors(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([('<document>', exc.lineno, f'invalid JSON: {exc.msg}')]) from None
    if not isinstance(data, dict):
        raise ConfigError([('<document>', 1, 'a config must be a JSON object')])
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    allowed = set(ExperimentForm.base_fields) | set(SECTIONS)
    errors.unknown(set(data) - allowed, allowed)

    sections = {}
    for name, form_class in SECTIONS.items():
        if name not in data:
            continue
        section = data[name]
        if not isinstance(section, dict):
            errors.add(name, f'{name} must be an object')
            continue
        errors.unknown(set(section) - set(form_class.base_fields), form_class.base_fields, prefix=f'{name}.')
        sections[name] = {key: value for key, value in section.items() if key in form_class.base_fields}

    top = ExperimentForm({k: v for k, v in data.items() if k not in SECTIONS}, sections=sections)
    top_ok = top.is_valid()
    errors.from_form(top)
    experiment = top.cleaned_data.get('experiment') if top_ok else data.get('experiment')

    domain = None
    if 'domain' in sections:
        form = DomainSectionForm(sections['domain'])
        if form.is_valid():
            domain = build_domain(form.cleaned_data['kind'], form.cleaned_data.get('dimension') or 2)
        errors.from_form(form, prefix='domain.')

    spatial = experiment == ExperimentKind.MULTIDIM and domain is not None
    model_form = ModelSectionForm(sections.get('model', {}), max_tau=domain.diameter if spatial else 1.0)
    model_ok = model_form.is_valid()
    errors.from_form(model_form, prefix='model.')

    pde_form = PdeSectionForm(sections.get('pde', {}))
    pde_ok = pde_form.is_valid()
    errors.from_form(pde_form, prefix='pde.')

    if errors.entries or not (top_ok and model_ok and pde_ok):
        raise ConfigError(errors.entries)

    config = _resolve(top.cleaned_data, model_form.cleaned_data, pde_form.cleaned_data, domain, spatial, errors)
    if errors.entries:
        raise ConfigError(errors.entries)
    return config


def _given(cleaned, key, default):
    value = cleaned.get(key)
    return default if value in (None, '', []) else value


def _resolve(top, model, pde, domain, spatial, errors):
    values = {key: _given(model, key, default) for key, default in MODEL_DEFAULTS.items()}
    try:
        if spatial:
            params = SpatialModelParams.for_domain(values['tau'], values['lam'], values['mu'], domain)
        else:
            params = ModelParams(tau=values['tau'], lam=values['lam'], mu=values['mu'])
    except ParameterError as exc:
        errors.add('model', str(exc))
        return None

    experiment = top['experiment']
    seed = _given(top, 'seed', 0)
    snapshot_times = tuple(_given(top, 'snapshot_times', DEFAULT_SNAPSHOT_TIMES))
    config = ExperimentConfig(
        experiment=experiment,
        model=params,
        rule=values['rule'],
        scheduler=_given(top, 'scheduler', SchedulerKind.RANDOM_MATCHING),
        n=top.get('n'),
        n_list=_given(top, 'n_list', []),
        tau_grid=_given(top, 'tau_grid', []),
        runs=_given(top, 'runs', 100),
        seed=seed,
        seeds=_given(top, 'seeds', [seed]),
        epsilon=top.get('epsilon'),
        max_steps=top.get('max_steps'),
        budget=_given(top, 'budget', DEFAULT_BUDGET),
        samples=_given(top, 'samples', SAMPLE_DEFAULTS.get(experiment)),
        snapshot_times=snapshot_times,
        initial=_given(pde, 'initial', InitialDensity.UNIFORM),
        shape=_given(pde, 'shape', 4.0),
        bracket=tuple(_given(pde, 'bracket', DEFAULT_BRACKET)),
        tol=_given(pde, 'tol', DEFAULT_TOL),
        domain=domain,
        output_dir=_given(top, 'output_dir', None),
        workers=top.get('workers'),
    )
    if experiment in (ExperimentKind.PDE, ExperimentKind.CRITICAL_TAU):
        numerics = {key: pde[key] for key in ('dt', 'grid_size', 't_max', 'classify_window', 'classify_mass')
                    if pde.get(key) is not None}
        try:
            config.pde = PdeParams(model=params, snapshot_times=snapshot_times, **numerics)
        except ParameterError as exc:
            errors.add('pde', str(exc))
    if domain is not None and experiment != ExperimentKind.MULTIDIM:
        errors.add('domain', f'domain is only used by {ExperimentKind.MULTIDIM}')
    return config
