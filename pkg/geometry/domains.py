"""Convex opinion domains and the chord through two of their points."""

import math
from abc import ABC, abstractmethod

import numpy as np
from django.db import models

from core.exceptions import ParameterError

# Distance from the boundary tolerated by `contains`.
INSIDE_TOLERANCE = 1e-12


class DomainKind(models.TextChoices):
    HYPERCUBE = 'hypercube', 'Unit hypercube [0, 1]^D'
    DISK = 'disk', 'Unit disk centered at the origin'


class Domain(ABC):
    kind = None

    @property
    @abstractmethod
    def dimension(self):
        ...

    @property
    @abstractmethod
    def diameter(self):
        ...

    @abstractmethod
    def sample(self, n, rng):
        """n points drawn uniformly from the domain, shape (n, D)."""

    @abstractmethod
    def contains(self, points):
        ...

    @abstractmethod
    def clip(self, points):
        """Project rounding excursions back into the domain."""

    @abstractmethod
    def boundary_distance(self, points):
        ...

    @abstractmethod
    def chord_ends(self, p, q):
        """Vectorized boundary hits of the lines through rows of p and q.

        Rows where p == q have no direction and come back as NaN.
        """

    def as_dict(self):
        return {'kind': str(self.kind), 'dimension': self.dimension}

    def __eq__(self, other):
        return type(self) is type(other) and self.dimension == other.dimension

    def __hash__(self):
        return hash((self.kind, self.dimension))


class Hypercube(Domain):
    kind = DomainKind.HYPERCUBE

    def __init__(self, dimension):
        if not isinstance(dimension, int) or dimension < 1:
            raise ParameterError(f'hypercube dimension must be a positive integer, got {dimension!r}')
        self._dimension = dimension

    @property
    def dimension(self):
        return self._dimension

    @property
    def diameter(self):
        return math.sqrt(self._dimension)

    def sample(self, n, rng):
        return rng.random((n, self._dimension))

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return np.all((points >= -INSIDE_TOLERANCE) & (points <= 1.0 + INSIDE_TOLERANCE), axis=-1)

    def clip(self, points):
        return np.clip(points, 0.0, 1.0)

    def boundary_distance(self, points):
        points = np.asarray(points, dtype=float)
        return np.minimum(points, 1.0 - points).min(axis=-1)

    def chord_ends(self, p, q):
        # slab clipping: the line leaves the cube through the first face it meets on each side
        u = q - p
        with np.errstate(divide='ignore', invalid='ignore'):
            t0, t1 = -p / u, (1.0 - p) / u
        moving = u != 0.0
        near = np.where(moving, np.minimum(t0, t1), -np.inf)
        far = np.where(moving, np.maximum(t0, t1), np.inf)
        k_near, k_far = near.argmax(axis=1), far.argmin(axis=1)
        rows = np.arange(p.shape[0])
        t_near, t_far = near[rows, k_near], far[rows, k_far]
        with np.errstate(invalid='ignore'):
            a = np.clip(p + t_near[:, np.newaxis] * u, 0.0, 1.0)
            b = np.clip(p + t_far[:, np.newaxis] * u, 0.0, 1.0)
        # the face that stopped each ray is hit exactly
        a[rows, k_near] = np.where(u[rows, k_near] > 0.0, 0.0, 1.0)
        b[rows, k_far] = np.where(u[rows, k_far] > 0.0, 1.0, 0.0)
        still = ~moving.any(axis=1)
        a[still], b[still] = np.nan, np.nan
        return a, b

    def __repr__(self):
        return f'Hypercube({self._dimension})'


class UnitDisk(Domain):
    kind = DomainKind.DISK

    @property
    def dimension(self):
        return 2

    @property
    def diameter(self):
        return 2.0

    def sample(self, n, rng):
        # rejection from the bounding square
        points = np.empty((0, 2))
        while points.shape[0] < n:
            batch = rng.uniform(-1.0, 1.0, size=(2 * (n - points.shape[0]) + 8, 2))
            points = np.concatenate([points, batch[np.einsum('ij,ij->i', batch, batch) <= 1.0]])
        return points[:n]

    def contains(self, points):
        return np.linalg.norm(np.asarray(points, dtype=float), axis=-1) <= 1.0 + INSIDE_TOLERANCE

    def clip(self, points):
        norms = np.linalg.norm(points, axis=-1, keepdims=True)
        return np.where(norms > 1.0, points / np.where(norms > 1.0, norms, 1.0), points)

    def boundary_distance(self, points):
        return 1.0 - np.linalg.norm(np.asarray(points, dtype=float), axis=-1)

    def chord_ends(self, p, q):
        # |p + t u| = 1 has one root <= 0 and one >= 1 for p, q inside
        u = q - p
        a2 = np.einsum('ij,ij->i', u, u)
        b1 = np.einsum('ij,ij->i', p, u)
        c0 = np.einsum('ij,ij->i', p, p) - 1.0
        root = np.sqrt(np.maximum(b1 * b1 - a2 * c0, 0.0))
        with np.errstate(divide='ignore', invalid='ignore'):
            t_near, t_far = (-b1 - root) / a2, (-b1 + root) / a2
            a = self.clip(p + t_near[:, np.newaxis] * u)
            b = self.clip(p + t_far[:, np.newaxis] * u)
        return a, b

    def __repr__(self):
        return 'UnitDisk()'


def build_domain(kind, dimension=2):
    if kind == DomainKind.HYPERCUBE:
        return Hypercube(dimension)
    if kind == DomainKind.DISK:
        if dimension != 2:
            raise ParameterError(f'the unit disk is only defined for D=2, got D={dimension}')
        return UnitDisk()
    raise ParameterError(f'unknown domain {kind!r}; choose one of {", ".join(DomainKind.values)}')


def _point(value, domain, name):
    point = np.asarray(value, dtype=float).reshape(-1)
    if point.size != domain.dimension:
        raise ParameterError(f'{name} has {point.size} coordinates, the domain has D={domain.dimension}')
    if not domain.contains(point):
        raise ParameterError(f'{name}={point.tolist()} lies outside {domain!r}')
    return point


def boundary_intersections(p, q, domain):
    """Where the line through p and q meets the boundary: (a, b) ordered a, p, q, b."""
    p, q = _point(p, domain, 'p'), _point(q, domain, 'q')
    if np.array_equal(p, q):
        raise ParameterError('p and q coincide; the line through them is undefined')
    a, b = domain.chord_ends(p[np.newaxis, :], q[np.newaxis, :])
    return a[0], b[0]
