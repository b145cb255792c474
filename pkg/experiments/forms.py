from django import forms

from engine.process import SchedulerKind
from geometry.domains import DomainKind
from kernel.rules import RULES
from meanfield.solver import DEFAULT_GRID_SIZE, MIN_GRID_SIZE, InitialDensity

from .models import ExperimentKind

MAX_SEED = 2 ** 63 - 1


class NumberListField(forms.Field):
    """A JSON array of numbers, converted with `item`."""

    def __init__(self, *, item=float, **kwargs):
        self.item = item
        super().__init__(**kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError('expected a list of numbers')
        out = []
        for entry in value:
            if isinstance(entry, bool) or not isinstance(entry, (int, float)):
                raise forms.ValidationError(f'expected a number, got {entry!r}')
            if self.item is int and entry != int(entry):
                raise forms.ValidationError(f'expected an integer, got {entry!r}')
            out.append(self.item(entry))
        return out


def _open_unit(value, name):
    if value is not None and not 0.0 < value < 1.0:
        raise forms.ValidationError(f'{name} must lie in (0, 1), got {value}')
    return value


class ModelSectionForm(forms.Form):
    """The `model` section: interaction parameters and rule."""
    tau = forms.FloatField(required=False)
    lam = forms.FloatField(required=False)
    mu = forms.FloatField(required=False)
    rule = forms.ChoiceField(choices=[(name, name) for name in RULES], required=False)

    def __init__(self, *args, max_tau=1.0, **kwargs):
        self.max_tau = max_tau
        super().__init__(*args, **kwargs)

    def clean_tau(self):
        tau = self.cleaned_data.get('tau')
        if tau is None:
            return tau
        if self.max_tau > 1.0:
            if not 0.0 < tau <= self.max_tau:
                raise forms.ValidationError(f'tau must lie in (0, {self.max_tau:g}], got {tau}')
            return tau
        return _open_unit(tau, 'tau')

    def clean_lam(self):
        return _open_unit(self.cleaned_data.get('lam'), 'lam')

    def clean_mu(self):
        return _open_unit(self.cleaned_data.get('mu'), 'mu')


class PdeSectionForm(forms.Form):
    """The `pde` section: Euler step, grid, horizon and limit classification."""
    dt = forms.FloatField(required=False, min_value=0.0)
    grid_size = forms.IntegerField(required=False, min_value=MIN_GRID_SIZE)
    t_max = forms.FloatField(required=False, min_value=0.0)
    classify_window = forms.FloatField(required=False)
    classify_mass = forms.FloatField(required=False)
    initial = forms.ChoiceField(choices=InitialDensity.choices, required=False)
    shape = forms.FloatField(required=False, min_value=1.0)
    bracket = NumberListField(required=False)
    tol = forms.FloatField(required=False)

    def clean_dt(self):
        dt = self.cleaned_data.get('dt')
        if dt is not None and dt <= 0.0:
            raise forms.ValidationError(f'dt must be positive, got {dt}')
        return dt

    def clean_bracket(self):
        bracket = self.cleaned_data.get('bracket')
        if bracket and (len(bracket) != 2 or not 0.0 < bracket[0] < bracket[1] < 1.0):
            raise forms.ValidationError('bracket must be [lo, hi] with 0 < lo < hi < 1')
        return bracket

    def clean_tol(self):
        tol = self.cleaned_data.get('tol')
        if tol is not None and tol <= 0.0:
            raise forms.ValidationError(f'tol must be positive, got {tol}')
        return tol


class DomainSectionForm(forms.Form):
    kind = forms.ChoiceField(choices=DomainKind.choices)
    dimension = forms.IntegerField(required=False, min_value=1)

    def clean(self):
        cleaned_data = super().clean()
        if cleaned_data.get('kind') == DomainKind.DISK and cleaned_data.get('dimension') not in (None, 2):
            raise forms.ValidationError('the unit disk is only defined for dimension 2')
        return cleaned_data


# Keys each experiment cannot run without.
REQUIRED_KEYS = {
    ExperimentKind.SIMULATE: ('n',),
    ExperimentKind.SWEEP: ('tau_grid', 'n_list'),
    ExperimentKind.PDE: (),
    ExperimentKind.CRITICAL_TAU: (),
    ExperimentKind.FORCE_CHECK: ('n',),
    ExperimentKind.MARTINGALE: ('n',),
    ExperimentKind.MULTIDIM: ('n', 'domain'),
    ExperimentKind.RULE_CHECK: (),
}


class ExperimentForm(forms.Form):
    """Top-level keys of an experiment config."""
    experiment = forms.ChoiceField(choices=ExperimentKind.choices)
    scheduler = forms.ChoiceField(choices=SchedulerKind.choices, required=False)
    n = forms.IntegerField(required=False, min_value=2)
    n_list = NumberListField(item=int, required=False)
    tau_grid = NumberListField(required=False)
    runs = forms.IntegerField(required=False, min_value=1)
    seed = forms.IntegerField(required=False, min_value=0, max_value=MAX_SEED)
    seeds = NumberListField(item=int, required=False)
    epsilon = forms.FloatField(required=False)
    max_steps = forms.IntegerField(required=False, min_value=1)
    budget = forms.IntegerField(required=False, min_value=1)
    samples = forms.IntegerField(required=False, min_value=1)
    snapshot_times = NumberListField(required=False)
    output_dir = forms.CharField(required=False)
    workers = forms.IntegerField(required=False, min_value=1)

    def __init__(self, *args, sections=(), **kwargs):
        self.sections = set(sections)
        super().__init__(*args, **kwargs)

    def clean_n_list(self):
        n_list = self.cleaned_data.get('n_list')
        if any(n < 2 for n in n_list):
            raise forms.ValidationError('every n in n_list must be at least 2')
        return n_list

    def clean_tau_grid(self):
        tau_grid = self.cleaned_data.get('tau_grid')
        bad = [tau for tau in tau_grid if not 0.0 < tau < 1.0]
        if bad:
            raise forms.ValidationError(f'tau_grid values must lie in (0, 1), got {bad}')
        return tau_grid

    def clean_epsilon(self):
        epsilon = self.cleaned_data.get('epsilon')
        if epsilon is not None and not 0.0 < epsilon < 0.5:
            raise forms.ValidationError(f'epsilon must lie in (0, 1/2), got {epsilon}')
        return epsilon

    def clean_seeds(self):
        seeds = self.cleaned_data.get('seeds')
        if any(not 0 <= seed <= MAX_SEED for seed in seeds):
            raise forms.ValidationError(f'seeds must lie in [0, {MAX_SEED}]')
        return seeds

    def clean_snapshot_times(self):
        times = self.cleaned_data.get('snapshot_times')
        if any(t < 0 for t in times):
            raise forms.ValidationError('snapshot_times must be nonnegative')
        return times

    def clean(self):
        cleaned_data = super().clean()
        experiment = cleaned_data.get('experiment')
        if experiment:
            for key in REQUIRED_KEYS[experiment]:
                if key in self.fields and self.has_error(key):
                    continue
                present = key in self.sections if key == 'domain' else cleaned_data.get(key) not in (None, [])
                if not present:
                    self.add_error(None, forms.ValidationError(f'{key} is required for {experiment}', code=key))
        return cleaned_data
