"""Forward Euler integration of the mean-field density equation on [0, 1].

The density is stored at the nodes x_k = k/M and read as piecewise constant:
node k holds the average over its cell [(k - 1/2)/M, (k + 1/2)/M], clipped to
[0, 1], so the two pole cells are half as wide. Each step moves mass between
cells with the attraction and repulsion maps integrated exactly over cells and
clipped limits, which conserves mass up to rounding.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.db import models
from scipy.integrate import trapezoid

from core.exceptions import BracketError, NumericalInstability, ParameterError
from kernel.params import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 400
MIN_GRID_SIZE = 50
BLOW_UP = 1e6
CONFIRMATIONS = 5
# Cell edges handled per block in the transport quadrature.
CHUNK = 128


class LimitKind(models.TextChoices):
    POLARIZED = 'polarized', 'Mass concentrated at both poles'
    CONSENSUS = 'consensus', 'Mass concentrated at the center'
    UNDECIDED = 'undecided', 'Undecided'


class InitialDensity(models.TextChoices):
    UNIFORM = 'uniform', 'Uniform on [0, 1]'
    TRIANGLE = 'triangle', 'Symmetric triangle peaked at 1/2'
    BETA = 'beta', 'Symmetric beta-shaped bump'


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density samples at x_k = k/M.

    `clipped` and `drift` are filled in by `euler_step`: the largest negative
    excursion removed and the mass error corrected by renormalization.
    """
    values: np.ndarray
    clipped: float = 0.0
    drift: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ParameterError('a density grid needs at least two nodes')
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ParameterError('density values must be finite and nonnegative')
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_values(cls, values):
        return cls(values).normalized()

    @property
    def grid_size(self):
        return self.values.size - 1

    @property
    def nodes(self):
        return np.arange(self.values.size) / self.grid_size

    @property
    def mass(self):
        return float(trapezoid(self.values, dx=1.0 / self.grid_size))

    def normalized(self):
        mass = self.mass
        if mass <= 0.0:
            raise ParameterError('density has zero mass and cannot be normalized')
        return replace(self, values=self.values / mass)

    def window_mass(self, lo, hi):
        """Mass of the piecewise-linear interpolant on [lo, hi]."""
        x = self.nodes
        points = np.concatenate([[lo], x[(x > lo) & (x < hi)], [hi]])
        return float(trapezoid(np.interp(points, x, self.values), points))


@dataclass(frozen=True)
class PdeParams:
    model: ModelParams
    dt: float = 1.0
    grid_size: int = DEFAULT_GRID_SIZE
    t_max: float = 100.0
    classify_window: float = 0.05
    classify_mass: float = 0.95
    snapshot_times: tuple = (0.0, 10.0, 20.0)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ParameterError(f'dt must be positive, got {self.dt}')
        if not isinstance(self.grid_size, int) or self.grid_size < MIN_GRID_SIZE:
            raise ParameterError(f'grid_size must be an integer >= {MIN_GRID_SIZE}, got {self.grid_size}')
        if not self.t_max > 0.0:
            raise ParameterError(f't_max must be positive, got {self.t_max}')
        limit = min(self.model.tau / 2, 0.25)
        if not 0.0 < self.classify_window < limit:
            raise ParameterError(f'classify_window must lie in (0, {limit:g}), got {self.classify_window}')
        if not 0.5 < self.classify_mass <= 1.0:
            raise ParameterError(f'classify_mass must lie in (1/2, 1], got {self.classify_mass}')
        object.__setattr__(self, 'snapshot_times', tuple(sorted(float(t) for t in self.snapshot_times)))

    def with_tau(self, tau):
        return replace(self, model=self.model.with_tau(tau))


@dataclass(frozen=True)
class LimitClass:
    kind: str
    pole_mass: float
    center_mass: float
    time: float = 0.0

    @property
    def leaning(self):
        """The decided kind, or for Undecided the side holding more mass."""
        if self.kind != LimitKind.UNDECIDED:
            return self.kind
        return LimitKind.POLARIZED if self.pole_mass >= self.center_mass else LimitKind.CONSENSUS


@dataclass(frozen=True)
class Snapshot:
    t: float
    grid: DensityGrid


def initial_density(kind=InitialDensity.UNIFORM, grid_size=DEFAULT_GRID_SIZE, shape=4.0):
    """A normalized starting density; every built-in kind is symmetric about 1/2."""
    k = np.arange(grid_size + 1)
    if kind == InitialDensity.UNIFORM:
        values = np.ones(grid_size + 1)
    elif kind == InitialDensity.TRIANGLE:
        values = 2.0 - 4.0 * np.abs(k - grid_size / 2) / grid_size
    elif kind == InitialDensity.BETA:
        if shape < 1.0:
            raise ParameterError(f'beta shape must be >= 1, got {shape}')
        x = k / grid_size
        values = (x * (1.0 - x)) ** (shape - 1.0)
        values = (values + values[::-1]) / 2
    else:
        raise ParameterError(f'unknown initial density {kind!r}')
    return DensityGrid.from_values(values)


def _edges(m):
    """Cell edges: node k owns [(k - 1/2)/M, (k + 1/2)/M] clipped to [0, 1]."""
    return np.concatenate([[0.0], (np.arange(m) + 0.5) / m, [1.0]])


def _cell_value(values, z):
    m = values.size - 1
    return values[np.clip(np.rint(z * m), 0, m).astype(int)]


def _segments(breaks, upper=1.0):
    """Midpoints and lengths between the sorted breakpoints of each row, clipped to [0, upper]."""
    breaks = np.sort(np.clip(breaks, 0.0, upper), axis=1)
    return (breaks[:, 1:] + breaks[:, :-1]) / 2, np.diff(breaks, axis=1)


def _mass_below(values, params):
    """Mass of the density after one round of meetings lying below each cell edge.

    Every agent z meets a partner y drawn from the same piecewise-constant
    density and moves to its attraction or repulsion image. The integrands
    below are linear between consecutive breakpoints, so the midpoint rule
    on each segment is exact.
    """
    m = values.size - 1
    edges = _edges(m)
    cumulative = np.concatenate([[0.0], np.cumsum(values * np.diff(edges))])
    total = cumulative[-1]
    tau, nu, mu = params.model.tau, params.model.nu, params.model.mu

    def below(s):
        return np.interp(s, edges, cumulative)

    attraction_breaks = np.concatenate([edges, edges + tau, edges - tau])
    down_breaks = np.concatenate([edges, edges - tau])
    up_breaks = np.concatenate([edges, edges + tau])
    out = np.empty(edges.size)
    for start in range(0, edges.size, CHUNK):
        c = edges[start:start + CHUNK, np.newaxis]
        rows = c.shape[0]

        # attraction: |z - y| <= tau and (1 - nu) z + nu y <= c, integrated over the partner y
        moving = np.concatenate([(c - (1 - nu) * edges) / nu, c - (1 - nu) * tau, c + (1 - nu) * tau], axis=1)
        y, dy = _segments(np.concatenate([np.broadcast_to(attraction_breaks, (rows, attraction_breaks.size)),
                                          moving], axis=1))
        low = np.maximum(y - tau, 0.0)
        high = np.minimum(np.minimum(y + tau, (c - nu * y) / (1 - nu)), 1.0)
        attracted = (_cell_value(values, y) * (below(np.maximum(high, low)) - below(low)) * dy).sum(axis=1)

        # repulsion toward 0: partner above z + tau, image (1 - mu) z <= c
        z, dz = _segments(np.broadcast_to(down_breaks, (rows, down_breaks.size)), np.minimum(c / (1 - mu), 1.0))
        pushed_down = (_cell_value(values, z) * (total - below(z + tau)) * dz).sum(axis=1)

        # repulsion toward 1: partner below z - tau, image (1 - mu) z + mu <= c
        z, dz = _segments(np.broadcast_to(up_breaks, (rows, up_breaks.size)),
                          np.clip((c - mu) / (1 - mu), 0.0, 1.0))
        pushed_up = (_cell_value(values, z) * below(z - tau) * dz).sum(axis=1)

        out[start:start + rows] = attracted + pushed_down + pushed_up
    return out


def pde_rhs(grid, params):
    """Time derivative of the density at every node, as a rate of change of cell averages.

    The influx into a cell is the exact mass the interaction maps carry into
    it, so the rates integrate to zero up to rounding.
    """
    widths = np.diff(_edges(grid.grid_size))
    return np.diff(_mass_below(grid.values, params)) / widths - grid.values


def mass_drift(grid, params):
    """Mass gained or lost by one unnormalized Euler step."""
    return float(params.dt * trapezoid(pde_rhs(grid, params), dx=1.0 / grid.grid_size))


def euler_step(grid, params, step=None):
    values = grid.values + params.dt * pde_rhs(grid, params)
    if not np.all(np.isfinite(values)) or np.abs(values).max() > BLOW_UP:
        raise NumericalInstability(
            f'density exceeded {BLOW_UP:g} at step {step}; reduce dt or refine the grid', step=step)
    clipped = float(max(0.0, -values.min()))
    values = np.maximum(values, 0.0)
    mass = float(trapezoid(values, dx=1.0 / grid.grid_size))
    if mass <= 0.0:
        raise NumericalInstability(f'density lost all mass at step {step}', step=step)
    logger.debug('step %s: mass drift %.3e, clipped %.3e', step, mass - 1.0, clipped)
    return DensityGrid(values / mass, clipped=clipped, drift=mass - 1.0)


def classify_density(grid, params, time=0.0):
    w = params.classify_window
    pole = grid.window_mass(0.0, w) + grid.window_mass(1.0 - w, 1.0)
    center = grid.window_mass(0.5 - w, 0.5 + w)
    if pole >= params.classify_mass:
        kind = LimitKind.POLARIZED
    elif center >= params.classify_mass:
        kind = LimitKind.CONSENSUS
    else:
        kind = LimitKind.UNDECIDED
    return LimitClass(kind, pole, center, time)


def evolve(initial, params):
    """Integrate from `initial` until a limit is confirmed or t_max is reached.

    Returns the snapshots taken at `params.snapshot_times` (each at the first
    step within half a step of the requested time) and the final LimitClass.
    """
    if initial.grid_size != params.grid_size:
        raise ParameterError(f'initial grid has M={initial.grid_size}, params expect M={params.grid_size}')
    grid = initial.normalized()
    dt = params.dt
    steps = math.ceil(params.t_max / dt - 1e-9)
    pending = list(params.snapshot_times)
    snapshots = []

    def take(k):
        while pending and k * dt >= pending[0] - dt / 2:
            snapshots.append(Snapshot(k * dt, grid))
            pending.pop(0)

    take(0)
    limit = classify_density(grid, params)
    streak = 0
    for k in range(1, steps + 1):
        grid = euler_step(grid, params, step=k)
        take(k)
        previous, limit = limit, classify_density(grid, params, k * dt)
        if limit.kind == LimitKind.UNDECIDED:
            streak = 0
        elif limit.kind == previous.kind:
            streak += 1
        else:
            streak = 1
        if streak >= CONFIRMATIONS:
            break

    logger.info('tau=%s: %s at t=%g (pole mass %.3f, center mass %.3f)',
                params.model.tau, limit.kind, limit.time, limit.pole_mass, limit.center_mass)
    return snapshots, limit


@dataclass
class Bisection:
    tau: float
    lo: float
    hi: float
    iterations: list = field(default_factory=list)

    def as_dict(self):
        return {'tau_c': self.tau, 'lo': self.lo, 'hi': self.hi,
                'iterations': [{'tau': tau, 'kind': kind, 'pole_mass': pole, 'center_mass': center}
                               for tau, kind, pole, center in self.iterations]}


def bisect_critical_tau(params_base, lo, hi, tol, initial=None):
    """Bisection on tau with the evolve classifier; keeps every midpoint it tried.

    An Undecided midpoint is resolved by where most of its mass sits.
    """
    if not 0.0 < lo < hi < 1.0:
        raise ParameterError(f'need 0 < lo < hi < 1, got [{lo}, {hi}]')
    if not tol > 0.0:
        raise ParameterError(f'tol must be positive, got {tol}')
    if initial is None:
        initial = initial_density(InitialDensity.UNIFORM, params_base.grid_size)

    def limit_at(tau):
        return evolve(initial, params_base.with_tau(tau))[1]

    low, high = limit_at(lo), limit_at(hi)
    if low.leaning == high.leaning:
        raise BracketError(f'both ends of [{lo}, {hi}] lead to {low.leaning}')
    if low.leaning != LimitKind.POLARIZED:
        raise BracketError(f'[{lo}, {hi}] is reversed: the low end reaches consensus')

    result = Bisection(tau=(lo + hi) / 2, lo=lo, hi=hi)
    while hi - lo >= tol:
        mid = (lo + hi) / 2
        limit = limit_at(mid)
        result.iterations.append((mid, limit.leaning, limit.pole_mass, limit.center_mass))
        logger.info('bisection: tau=%.6f leans %s, bracket [%.6f, %.6f]', mid, limit.leaning, lo, hi)
        if limit.leaning == LimitKind.POLARIZED:
            lo = mid
        else:
            hi = mid
    result.tau, result.lo, result.hi = (lo + hi) / 2, lo, hi
    return result


def find_critical_tau(params_base, lo, hi, tol):
    return bisect_critical_tau(params_base, lo, hi, tol).tau


def histogram_l1(positions, grid, bins=100):
    """L1 distance between an agent histogram on `bins` equal bins and the density."""
    positions = np.asarray(positions, dtype=float)
    if positions.size == 0:
        raise ParameterError('no positions to compare')
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(positions, bins=edges)
    pde = np.array([grid.window_mass(a, b) for a, b in zip(edges[:-1], edges[1:])])
    return float(np.abs(counts / positions.size - pde).sum())
