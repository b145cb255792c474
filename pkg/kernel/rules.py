"""Interaction functions f = (f1, f2) acting on a pair of opinions.

Every rule satisfies order invariance: f1(x, y) == f2(y, x). Rules return
raw values from `pair`; `interact` clamps them into [0, 1].
"""

from abc import ABC, abstractmethod

import numpy as np

from core.exceptions import ParameterError

from .params import clamp


def bc_interact(x, y, params):
    """Bounded confidence: close pairs move together, far pairs ignore each other."""
    if abs(x - y) <= params.tau:
        return clamp(x + params.nu * (y - x)), clamp(y + params.nu * (x - y))
    return x, y


def ar_interact(x, y, params):
    """Attraction-repulsion: close pairs contract by 1-lam, far pairs move to the extremes."""
    return tuple(clamp(v) for v in _ar_pair(x, y, params))


def _ar_pair(x, y, params):
    if abs(x - y) <= params.tau:
        return x + params.nu * (y - x), y + params.nu * (x - y)
    mu = params.mu
    if x <= y:
        return x - mu * x, y + mu * (1 - y)
    return x + mu * (1 - x), y - mu * y


class InteractionRule(ABC):
    """A symmetric pair map. Subclass and implement `pair` to add a rule."""

    name = 'rule'

    @property
    @abstractmethod
    def tau(self):
        """Gap at or below which the rule attracts."""

    @abstractmethod
    def pair(self, x, y):
        """Unclamped images of (x, y)."""

    def interact(self, x, y):
        a, b = self.pair(x, y)
        return clamp(a), clamp(b)

    def pair_many(self, xs, ys):
        out = np.array([self.pair(float(x), float(y)) for x, y in zip(xs, ys)], dtype=float)
        if out.size == 0:
            return np.empty(0), np.empty(0)
        return out[:, 0], out[:, 1]

    def interact_many(self, xs, ys):
        """Apply the rule to aligned arrays of pairs."""
        a, b = self.pair_many(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        return np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0)

    def __repr__(self):
        return f'{type(self).__name__}(tau={self.tau})'


class _ParamsRule(InteractionRule):

    def __init__(self, params):
        self.params = params

    @property
    def tau(self):
        return self.params.tau

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, self.params))

    def __repr__(self):
        return f'{type(self).__name__}({self.params!r})'


class BoundedConfidence(_ParamsRule):
    name = 'bounded-confidence'

    def pair(self, x, y):
        if abs(x - y) <= self.params.tau:
            nu = self.params.nu
            return x + nu * (y - x), y + nu * (x - y)
        return x, y

    def pair_many(self, xs, ys):
        nu = self.params.nu
        close = np.abs(xs - ys) <= self.params.tau
        return np.where(close, xs + nu * (ys - xs), xs), np.where(close, ys + nu * (xs - ys), ys)


class AttractionRepulsion(_ParamsRule):
    name = 'attraction-repulsion'

    def pair(self, x, y):
        return _ar_pair(x, y, self.params)

    def pair_many(self, xs, ys):
        nu, mu = self.params.nu, self.params.mu
        close = np.abs(xs - ys) <= self.params.tau
        x_low = xs <= ys
        # repulsion images written exactly as the scalar branch computes them
        rx = np.where(x_low, xs - mu * xs, xs + mu * (1 - xs))
        ry = np.where(x_low, ys + mu * (1 - ys), ys - mu * ys)
        return np.where(close, xs + nu * (ys - xs), rx), np.where(close, ys + nu * (xs - ys), ry)


class FunctionRule(InteractionRule):
    """Wrap a user map `f1(x, y)` with attraction threshold `tau`.

    The second component is derived as f2(x, y) = f1(y, x).
    """

    def __init__(self, f1, tau, name='custom'):
        if not callable(f1):
            raise ParameterError('f1 must be callable')
        self.f1 = f1
        self._tau = tau
        self.name = name

    @property
    def tau(self):
        return self._tau

    def pair(self, x, y):
        return self.f1(x, y), self.f1(y, x)


class NeutralBandRule(InteractionRule):
    """Attraction below `tau_low`, repulsion above `tau_high`, translation in between.

    Inside the band both agents shift by the same amount toward the border
    farther from the pair, so the gap is preserved and the process need not
    trivialize.
    """
    name = 'neutral-band'

    def __init__(self, tau_low, tau_high, lam, mu):
        if not 0.0 < tau_low < tau_high < 1.0:
            raise ParameterError(f'need 0 < tau_low < tau_high < 1, got {tau_low}, {tau_high}')
        if not (0.0 < lam < 1.0 and 0.0 < mu < 1.0):
            raise ParameterError('lam and mu must lie in (0, 1)')
        self.tau_low, self.tau_high, self.lam, self.mu = tau_low, tau_high, lam, mu

    @property
    def tau(self):
        return self.tau_low

    def pair(self, x, y):
        gap = abs(x - y)
        if gap < self.tau_low:
            nu = self.lam / 2
            return x + nu * (y - x), y + nu * (x - y)
        lo, hi = (x, y) if x <= y else (y, x)
        if gap > self.tau_high:
            lo, hi = lo - self.mu * lo, hi + self.mu * (1 - hi)
        elif lo + hi < 1.0:
            shift = self.mu * (1 - hi)
            lo, hi = lo + shift, hi + shift
        else:
            shift = self.mu * lo
            lo, hi = lo - shift, hi - shift
        return (lo, hi) if x <= y else (hi, lo)

    def __repr__(self):
        return f'NeutralBandRule({self.tau_low}, {self.tau_high}, lam={self.lam}, mu={self.mu})'


RULES = {
    BoundedConfidence.name: BoundedConfidence,
    AttractionRepulsion.name: AttractionRepulsion,
}


def build_rule(name, params):
    try:
        return RULES[name](params)
    except KeyError:
        raise ParameterError(f'unknown rule {name!r}; choose from {sorted(RULES)}') from None
