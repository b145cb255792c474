"""Empirical check of the attraction-repulsion cleavage hypotheses for a rule."""

import logging
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ParameterError

from .params import CLAMP_TOLERANCE

logger = logging.getLogger(__name__)

# Comparison slack for containment and order-invariance checks.
TOLERANCE = 1e-12


@dataclass
class RuleContractReport:
    order_invariance_ok: bool
    attraction_ok: bool
    repulsion_ok: bool
    fixed_points_ok: bool
    range_ok: bool
    worst_attraction_ratio: float
    worst_repulsion_ratio: float
    sample_count: int
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return all((self.order_invariance_ok, self.attraction_ok, self.repulsion_ok,
                    self.fixed_points_ok, self.range_ok))

    def as_dict(self):
        return {
            'order_invariance_ok': self.order_invariance_ok,
            'attraction_ok': self.attraction_ok,
            'repulsion_ok': self.repulsion_ok,
            'fixed_points_ok': self.fixed_points_ok,
            'range_ok': self.range_ok,
            'worst_attraction_ratio': self.worst_attraction_ratio,
            'worst_repulsion_ratio': self.worst_repulsion_ratio,
            'sample_count': self.sample_count,
            'violations': [{'x': x, 'y': y, 'reason': reason} for x, y, reason in self.violations],
        }


def contract_samples(tau, sample_count, rng):
    """Product grid, uniform random pairs, boundary pairs and pairs straddling tau."""
    side = max(2, int(np.sqrt(sample_count / 2)))
    axis = np.linspace(0.0, 1.0, side)
    gx, gy = np.meshgrid(axis, axis, indexing='ij')
    pieces = [np.column_stack([gx.ravel(), gy.ravel()])]

    edge = rng.random(16)
    pieces.append(np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]))
    pieces.append(np.column_stack([np.zeros(16), edge]))
    pieces.append(np.column_stack([edge, np.ones(16)]))
    pieces.append(np.column_stack([edge, edge]))

    if tau < 1.0:
        base = rng.random(32) * (1.0 - tau)
        for offset in (-1e-9, 0.0, 1e-9):
            upper = np.clip(base + tau + offset, 0.0, 1.0)
            pieces.append(np.column_stack([base, upper]))
            pieces.append(np.column_stack([upper, base]))

    remaining = max(1, sample_count - sum(len(p) for p in pieces))
    pieces.append(rng.random((remaining, 2)))
    return np.concatenate(pieces)


def check_rule_contract(rule, sample_count, seed):
    """Probe `rule` for order invariance, attraction/repulsion cleavage and fixed points.

    Ratios are reported as the worst observed values: the largest contraction
    ratio on the attraction branch and the smallest expansion ratio on the
    repulsion branch, the latter restricted to gaps in (tau, 1).
    """
    if sample_count < 1:
        raise ParameterError(f'sample_count must be at least 1, got {sample_count}')
    rng = np.random.default_rng(seed)
    tau = rule.tau
    pairs = contract_samples(tau, sample_count, rng)
    xs, ys = pairs[:, 0], pairs[:, 1]
    a, b = rule.pair_many(xs, ys)
    swapped_a, swapped_b = rule.pair_many(ys, xs)

    lo, hi = np.minimum(xs, ys), np.maximum(xs, ys)
    gap = hi - lo
    x_low = xs <= ys
    new_lo, new_hi = np.where(x_low, a, b), np.where(x_low, b, a)
    new_gap = np.abs(a - b)
    attract = gap <= tau
    moving = gap > 0

    violations = []

    def flag(mask, reason):
        for x, y in pairs[mask]:
            violations.append((float(x), float(y), reason))
        return not mask.any()

    order_ok = flag((np.abs(a - swapped_b) > TOLERANCE) | (np.abs(b - swapped_a) > TOLERANCE), 'order invariance')
    range_ok = flag((np.minimum(a, b) < -CLAMP_TOLERANCE) | (np.maximum(a, b) > 1 + CLAMP_TOLERANCE), 'range')

    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(moving, new_gap / np.where(moving, gap, 1.0), 1.0)

    contained = (np.minimum(a, b) >= lo - TOLERANCE) & (np.maximum(a, b) <= hi + TOLERANCE)
    contracting = attract & moving
    attraction_ok = flag(attract & ~contained, 'attraction leaves [x, y]')
    attraction_ok = flag(contracting & (ratio >= 1.0), 'attraction does not contract') and attraction_ok

    repel = ~attract
    interior = repel & (gap < 1.0)
    excluded = (new_lo <= lo + TOLERANCE) & (new_hi >= hi - TOLERANCE)
    repulsion_ok = flag(repel & ~excluded, 'repulsion enters (x, y)')
    repulsion_ok = flag(interior & (ratio < 1.0 - TOLERANCE), 'repulsion contracts') and repulsion_ok

    fixed = (a == xs) & (b == ys)
    extreme = (gap == 0.0) | (gap == 1.0)
    fixed_points_ok = flag(fixed & ~extreme, 'fixed point with gap in (0, 1)')
    fixed_points_ok = flag(~fixed & extreme, 'gap 0 or 1 is not fixed') and fixed_points_ok

    worst_attraction = float(ratio[contracting].max()) if contracting.any() else 0.0
    worst_repulsion = float(ratio[interior].min()) if interior.any() else float('inf')

    report = RuleContractReport(
        order_invariance_ok=order_ok,
        attraction_ok=attraction_ok,
        repulsion_ok=repulsion_ok,
        fixed_points_ok=fixed_points_ok,
        range_ok=range_ok,
        worst_attraction_ratio=worst_attraction,
        worst_repulsion_ratio=worst_repulsion,
        sample_count=len(pairs),
        violations=violations,
    )
    logger.info('%r: contract %s with %d violations over %d pairs',
                rule, 'holds' if report.ok else 'fails', len(violations), len(pairs))
    return report
