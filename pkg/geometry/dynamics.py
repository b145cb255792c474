"""Pairwise interactions along the line through two points, and population runs."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import AgglomerativeClustering

from core.exceptions import ParameterError
from core.seeding import stream
from engine.process import SchedulerKind, check_scheduler, draw_matching, draw_pair
from kernel.params import ModelParams

from .domains import _point

logger = logging.getLogger(__name__)

MAX_ROUNDS = 10_000
STATIONARY_ROUNDS = 10


class OutcomeLabel:
    CONSENSUS = 'consensus'
    POLARIZED = 'polarized'
    MIXED = 'mixed'
    UNDECIDED = 'undecided'


@dataclass(frozen=True)
class SpatialModelParams(ModelParams):
    """ModelParams whose tolerance may reach the diameter of the domain."""
    diameter: float = 1.0

    def check_tau(self):
        if not 0.0 < self.tau <= self.diameter:
            raise ParameterError(f'tau must lie in (0, {self.diameter:g}], got {self.tau}')

    @classmethod
    def for_domain(cls, tau, lam, mu, domain):
        return cls(tau=tau, lam=lam, mu=mu, diameter=domain.diameter)

    def as_dict(self):
        return {**super().as_dict(), 'diameter': self.diameter}


def interact_many(p, q, params, domain):
    """Apply the rule to aligned rows of p and q, shape (m, D) each."""
    u = q - p
    close = np.sqrt(np.einsum('ij,ij->i', u, u)) <= params.tau
    a, b = domain.chord_ends(p, q)
    nu, mu = params.nu, params.mu
    with np.errstate(invalid='ignore'):
        rp = p - mu * (p - a)
        rq = q + mu * (b - q)
    p_new = np.where(close[:, np.newaxis], p + nu * (q - p), rp)
    q_new = np.where(close[:, np.newaxis], q + nu * (p - q), rq)
    return domain.clip(p_new), domain.clip(q_new)


def interact_points(p, q, params, domain):
    """Attract along the segment when |p - q| <= tau, otherwise push both toward the boundary.

    Repulsion shrinks each point's distance to its own boundary hit by 1 - mu.
    """
    p, q = _point(p, domain, 'p'), _point(q, domain, 'q')
    p_new, q_new = interact_many(p[np.newaxis, :], q[np.newaxis, :], params, domain)
    return p_new[0], q_new[0]


def matching_round(points, params, domain, rng):
    """One round of the matching dynamic; returns a new array."""
    left, right = draw_matching(rng, points.shape[0])
    out = points.copy()
    out[left], out[right] = interact_many(points[left], points[right], params, domain)
    return out


def pair_step(points, params, domain, rng):
    i, j = draw_pair(rng, points.shape[0])
    out = points.copy()
    p_new, q_new = interact_many(points[[i]], points[[j]], params, domain)
    out[i], out[j] = p_new[0], q_new[0]
    return out


@dataclass(frozen=True)
class ClusterSummary:
    """Single-linkage clusters, largest first; `clusters` holds (center, count).

    `separation` is the smallest distance between points of two different
    clusters, infinite when there is only one.
    """
    clusters: tuple
    linkage_radius: float
    separation: float = math.inf

    @property
    def centers(self):
        return np.array([center for center, _ in self.clusters])

    @property
    def counts(self):
        return [count for _, count in self.clusters]

    def as_dict(self):
        return {'linkage_radius': self.linkage_radius, 'separation': self.separation,
                'clusters': [{'center': list(center), 'count': count} for center, count in self.clusters]}


def summarize_clusters(points, radius):
    points = np.asarray(points, dtype=float)
    separation = math.inf
    if points.shape[0] == 1:
        labels = np.ones(1, dtype=int)
    else:
        model = AgglomerativeClustering(n_clusters=None, linkage='single', distance_threshold=radius).fit(points)
        labels = model.labels_
        # merges at or past the cut join distinct clusters; the shortest is their closest approach
        above = model.distances_[model.distances_ >= radius]
        if above.size:
            separation = float(above.min())
    clusters = []
    for label in np.unique(labels):
        members = points[labels == label]
        clusters.append((tuple(float(c) for c in members.mean(axis=0)), int(members.shape[0])))
    clusters.sort(key=lambda item: (-item[1], item[0]))
    return ClusterSummary(tuple(clusters), radius, separation)


def label_outcome(summary, domain, epsilon, stationary):
    if not stationary:
        return OutcomeLabel.UNDECIDED
    if len(summary.clusters) == 1:
        return OutcomeLabel.CONSENSUS
    if np.all(domain.boundary_distance(summary.centers) <= epsilon):
        return OutcomeLabel.POLARIZED
    return OutcomeLabel.MIXED


@dataclass
class MultidimRun:
    summary: ClusterSummary
    label: str
    rounds: int
    points: np.ndarray
    snapshots: list = field(default_factory=list)


def default_epsilon(tau):
    return min(tau / 2, 0.05)


def run_multidim(n, params, domain, scheduler=SchedulerKind.RANDOM_MATCHING, epsilon=None, max_rounds=MAX_ROUNDS,
                 seed=0, record_rounds=()):
    """Simulate n uniform points until they stop moving, then cluster them.

    The run is stationary once no point moves more than epsilon in each of
    ten consecutive rounds and no two clusters are within tau of each other,
    so no attracting pair is left to merge. A round is one matching, or
    n // 2 single pairs under the uniform-pair scheduler. Point clouds are
    kept for every round in `record_rounds` and for the last round.
    """
    if n < 2:
        raise ParameterError(f'n must be at least 2, got {n}')
    check_scheduler(scheduler, n)
    epsilon = default_epsilon(params.tau) if epsilon is None else epsilon
    if not epsilon > 0.0:
        raise ParameterError(f'epsilon must be positive, got {epsilon}')

    rng = stream(seed)
    points = domain.sample(n, rng)
    wanted = set(record_rounds)
    snapshots = [(0, points.copy())] if 0 in wanted else []

    quiet, rounds, stationary = 0, 0, False
    while rounds < max_rounds:
        before = points
        if scheduler == SchedulerKind.RANDOM_MATCHING:
            points = matching_round(points, params, domain, rng)
        else:
            for _ in range(max(1, n // 2)):
                points = pair_step(points, params, domain, rng)
        rounds += 1
        moved = np.linalg.norm(points - before, axis=1).max()
        quiet = quiet + 1 if moved < epsilon else 0
        if rounds in wanted:
            snapshots.append((rounds, points.copy()))
        if quiet >= STATIONARY_ROUNDS:
            if summarize_clusters(points, epsilon).separation > params.tau:
                stationary = True
                break
            quiet = 0
    if not snapshots or snapshots[-1][0] != rounds:
        snapshots.append((rounds, points.copy()))

    summary = summarize_clusters(points, epsilon)
    label = label_outcome(summary, domain, epsilon, stationary)
    logger.info('%r n=%d tau=%s: %s after %d rounds, %d clusters', domain, n, params.tau, label, rounds,
                len(summary.clusters))
    return MultidimRun(summary, label, rounds, points, snapshots)
