"""Ancestral sampling into datasets, plus the two evaluation metrics.

generate_dataset shares the samplers' randomness contract (one counter-
based stream keyed by the seed, one row per sample), so a given
(network, n, seed) always produces the identical dataset, byte for byte,
regardless of worker count.
"""
from __future__ import annotations

import math

import numpy as np

from ._par import parallel_map
from ._sampling import SamplePlan, _subranges, uniform_matrix, weighted_block
from .core import Network, PotentialTable
from .errors import ValidationError
from .io_formats import Dataset
from .structure import PdagGraph

NORMALIZATION_TOL = 1e-6


def generate_dataset(
    net: Network, n: int, seed: int = 0, workers: int = 1
) -> Dataset:
    """Draw n rows by forward sampling in topological order."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    plan = SamplePlan(net)
    q_rows = plan.p_rows()
    q_cum = {node.var: node.cum for node in plan.nodes}
    U = uniform_matrix(seed, n, net.n)
    parts = parallel_map(
        lambda r: weighted_block(plan, q_rows, q_cum, {}, U, r[0], r[1])[0],
        _subranges(0, n),
        workers,
    )
    columns = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
    return Dataset(list(net.variables), columns)


def shd(g1: PdagGraph, g2: PdagGraph) -> int:
    """Structural Hamming distance over unordered pairs.

    +1 when an edge exists in exactly one graph; +1 when it exists in both
    with different marks (direction, or directed vs undirected).
    """
    if g1.n != g2.n:
        raise ValidationError(
            f"variable-set mismatch: {g1.n} vs {g2.n} variables"
        )
    m1, m2 = g1.edge_marks(), g2.edge_marks()
    dist = 0
    for key in m1.keys() | m2.keys():
        if m1.get(key) != m2.get(key):
            dist += 1
    return dist


def hellinger(p: PotentialTable, q: PotentialTable) -> float:
    """sqrt(1/2 * sum((sqrt(p) - sqrt(q))^2)); 0 iff equal, 1 on disjoint
    support."""
    if p.scope != q.scope or p.cards != q.cards:
        raise ValidationError(
            f"scope mismatch: {p.scope}/{p.cards} vs {q.scope}/{q.cards}"
        )
    for t in (p, q):
        if abs(t.values.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(
                f"unnormalized input (sum {t.values.sum():.9g})"
            )
    h2 = 0.5 * float(((np.sqrt(p.values) - np.sqrt(q.values)) ** 2).sum())
    return min(1.0, math.sqrt(h2))


def mean_hellinger(
    a: dict[int, PotentialTable], b: dict[int, PotentialTable]
) -> float:
    """Arithmetic mean of per-variable Hellinger distances."""
    if not a or set(a) != set(b):
        raise ValidationError("marginal sets cover different variables")
    return float(np.mean([hellinger(a[v], b[v]) for v in sorted(a)]))
