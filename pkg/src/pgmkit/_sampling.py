"""Forward-sampling machinery shared by the samplers and the dataset generator.

Randomness contract: one counter-based generator keyed by the seed produces
a uniform matrix with one row per sample and one column per topological
position. Sample i consumes only row i, so any partition of rows over
workers yields identical draws; tallies are accumulated over fixed-size
blocks in index order, making every downstream estimate bitwise invariant
to the worker count.

Each node's CPT rows are pre-extracted into one contiguous
(parent-configuration, state) matrix with a parallel cumulative matrix, so
the hot loop is a gather plus a vectorized CDF inversion per node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._par import SAMPLE_BLOCK, block_ranges, parallel_map
from .core import Network, PotentialTable, cpt_rows, table_normalize


@dataclass
class _Node:
    var: int
    pos: int  # topological position = uniform-matrix column
    parents: tuple[int, ...]  # declared order
    pcards: tuple[int, ...]
    card: int
    rows: np.ndarray  # (n_parent_configs, card)
    cum: np.ndarray  # row-wise cumulative sums of rows


class SamplePlan:
    """Per-node sampling data, topologically ordered and contiguous."""

    def __init__(self, net: Network):
        self.net = net
        self.topo = net.topological_order()
        self.n_vars = net.n
        self.max_card = max(v.cardinality for v in net.variables)
        self.nodes: list[_Node] = []
        for pos, v in enumerate(self.topo):
            rows = np.ascontiguousarray(cpt_rows(net, v))
            ps = net.parents[v]
            self.nodes.append(
                _Node(
                    v,
                    pos,
                    ps,
                    tuple(net.cardinality(p) for p in ps),
                    net.cardinality(v),
                    rows,
                    np.cumsum(rows, axis=1),
                )
            )

    def p_rows(self) -> dict[int, np.ndarray]:
        """Importance function equal to the network itself (shared arrays)."""
        return {node.var: node.rows for node in self.nodes}


def uniform_matrix(seed: int, n: int, n_vars: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.random((n, n_vars))


def make_cum(q_rows: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    return {v: np.cumsum(r, axis=1) for v, r in q_rows.items()}


def _draw(cum_rows: np.ndarray, cfg: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Invert each row's CDF at u. States of zero width are never chosen
    except when u lands exactly on a boundary."""
    c = cum_rows[cfg]
    x = (u[:, None] >= c).sum(axis=1)
    return np.minimum(x, c.shape[1] - 1).astype(np.int32)


def _config_codes(X: np.ndarray, node: _Node, rows: np.ndarray | None = None) -> np.ndarray:
    take = (lambda p: X[p]) if rows is None else (lambda p: X[p][rows])
    cfg = np.zeros(X.shape[1] if rows is None else rows.size, dtype=np.int64)
    for p, pc in zip(node.parents, node.pcards):
        cfg = cfg * pc + take(p)
    return cfg


def weighted_block(
    plan: SamplePlan,
    q_rows: dict[int, np.ndarray],
    q_cum: dict[int, np.ndarray],
    ev: dict[int, int],
    U: np.ndarray,
    lo: int,
    hi: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Importance-sample rows [lo, hi): evidence clamped, the rest drawn
    from Q, weights P(x, e)/Q(x).

    When a node's Q is the network's own row array (object identity), its
    weight factor is exactly 1 and is skipped — so likelihood weighting
    carries only the evidence factors, and with no evidence every weight
    is exactly 1.0.
    """
    m = hi - lo
    X = np.empty((plan.n_vars, m), dtype=np.int32)
    w = np.ones(m)
    for node in plan.nodes:
        v = node.var
        cfg = _config_codes(X, node)
        obs = ev.get(v)
        if obs is not None:
            X[v] = obs
            w = w * node.rows[cfg, obs]
        else:
            x = _draw(q_cum[v], cfg, U[lo:hi, node.pos])
            X[v] = x
            qr = q_rows[v]
            if qr is not node.rows:
                p_val = node.rows[cfg, x]
                q_val = qr[cfg, x]
                w = w * np.divide(
                    p_val, q_val, out=np.zeros_like(p_val), where=q_val > 0
                )
    return X, w


def pls_block(
    plan: SamplePlan, ev: dict[int, int], U: np.ndarray, lo: int, hi: int
) -> tuple[np.ndarray, np.ndarray]:
    """Forward-sample rows [lo, hi); returns states and the alive mask.

    Rows that contradict evidence stop being sampled at the node that
    killed them (the consistency check is fused into the sweep).
    """
    m = hi - lo
    X = np.zeros((plan.n_vars, m), dtype=np.int32)
    alive = np.ones(m, dtype=bool)
    for node in plan.nodes:
        live = np.flatnonzero(alive)
        if live.size == 0:
            break
        cfg = _config_codes(X, node, live)
        x = _draw(node.cum, cfg, U[lo:hi, node.pos][live])
        X[node.var, live] = x
        obs = ev.get(node.var)
        if obs is not None:
            alive[live] = x == obs
    return X, alive


def block_tallies(
    plan: SamplePlan,
    X: np.ndarray,
    weights: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """(n_vars, max_card) weighted state counts for one block."""
    T = np.zeros((plan.n_vars, plan.max_card))
    for v in range(plan.n_vars):
        col = X[v] if mask is None else X[v][mask]
        wv = weights if weights is None or mask is None else weights[mask]
        card = plan.net.cardinality(v)
        T[v, :card] = np.bincount(col, weights=wv, minlength=card)[:card]
    return T


def _subranges(start: int, stop: int) -> list[tuple[int, int]]:
    return [(start + a, start + b) for a, b in block_ranges(stop - start, SAMPLE_BLOCK)]


def run_weighted(
    plan: SamplePlan,
    q_rows: dict[int, np.ndarray],
    q_cum: dict[int, np.ndarray],
    ev: dict[int, int],
    U: np.ndarray,
    start: int,
    stop: int,
    workers: int,
) -> tuple[np.ndarray, float, float]:
    """Tallies, total weight, and total squared weight over [start, stop)."""

    def work(r: tuple[int, int]):
        X, w = weighted_block(plan, q_rows, q_cum, ev, U, r[0], r[1])
        return block_tallies(plan, X, weights=w), float(w.sum()), float((w * w).sum())

    parts = parallel_map(work, _subranges(start, stop), workers)
    T = np.zeros((plan.n_vars, plan.max_card))
    sw = sw2 = 0.0
    for t, a, b in parts:
        T += t
        sw += a
        sw2 += b
    return T, sw, sw2


def run_adaptive(
    plan: SamplePlan,
    q_rows: dict[int, np.ndarray],
    q_cum: dict[int, np.ndarray],
    ev: dict[int, int],
    U: np.ndarray,
    start: int,
    stop: int,
    workers: int,
) -> tuple[np.ndarray, float, float, dict[int, np.ndarray]]:
    """run_weighted plus, for every non-evidence node, the weighted
    (parent-configuration, state) counts that drive importance-function
    updates. Counts are merged in block index order like everything else."""
    nodes = [node for node in plan.nodes if node.var not in ev]

    def work(r: tuple[int, int]):
        X, w = weighted_block(plan, q_rows, q_cum, ev, U, r[0], r[1])
        fams = [
            np.bincount(
                _config_codes(X, node) * node.card + X[node.var],
                weights=w,
                minlength=node.rows.size,
            ).reshape(node.rows.shape)
            for node in nodes
        ]
        t = block_tallies(plan, X, weights=w)
        return t, float(w.sum()), float((w * w).sum()), fams

    parts = parallel_map(work, _subranges(start, stop), workers)
    T = np.zeros((plan.n_vars, plan.max_card))
    sw = sw2 = 0.0
    F = {node.var: np.zeros(node.rows.shape) for node in nodes}
    for t, a, b, fams in parts:
        T += t
        sw += a
        sw2 += b
        for node, f in zip(nodes, fams):
            F[node.var] += f
    return T, sw, sw2, F


def run_pls(
    plan: SamplePlan,
    ev: dict[int, int],
    U: np.ndarray,
    start: int,
    stop: int,
    workers: int,
) -> tuple[np.ndarray, int]:
    """Tallies over accepted rows plus the accepted count."""

    def work(r: tuple[int, int]):
        X, alive = pls_block(plan, ev, U, r[0], r[1])
        return block_tallies(plan, X, mask=alive), int(alive.sum())

    parts = parallel_map(work, _subranges(start, stop), workers)
    T = np.zeros((plan.n_vars, plan.max_card))
    accepted = 0
    for t, a in parts:
        T += t
        accepted += a
    return T, accepted


def tallies_to_marginals(net: Network, T: np.ndarray) -> dict[int, PotentialTable]:
    """Normalize each variable's tally row into a one-variable posterior."""
    out = {}
    for v in range(net.n):
        card = net.cardinality(v)
        out[v] = table_normalize(PotentialTable((v,), (card,), T[v, :card]))
    return out


def epsilon_cutoff(rows: np.ndarray, eps: float) -> np.ndarray:
    """Raise sub-eps entries to eps, rescaling the rest of each row.

    Rows whose entries are all below eps become uniform.
    """
    rows = np.asarray(rows, dtype=np.float64)
    small = rows < eps
    kept_mass = np.where(small, 0.0, rows).sum(axis=1, keepdims=True)
    target = 1.0 - eps * small.sum(axis=1, keepdims=True)
    ok = (kept_mass > 0) & (target > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(small, eps, rows * np.where(ok, target / kept_mass, 1.0))
    out = np.where(ok, scaled, np.maximum(rows, eps))
    out = out / out.sum(axis=1, keepdims=True)
    return out
