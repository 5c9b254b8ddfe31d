"""Exact inference: variable elimination and junction-tree calibration.

Both engines share the min-fill heuristic over the moral graph. The
junction tree uses HUGIN-style two-phase propagation: messages within a
tree level have no data dependencies, so they are computed in parallel and
applied in clique-index order, which keeps the calibrated tables bitwise
identical for any worker count. The root is picked to minimize tree height
so the level schedule is as wide as possible.

Evidence is absorbed by zeroing rows (not slicing), so every table keeps
its shape and the precomputed broadcast alignments stay valid across
queries.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._par import parallel_map
from .core import (
    Evidence,
    Network,
    PotentialTable,
    table_divide,
    table_marginalize,
    table_multiply,
    table_normalize,
    table_reduce,
    validate_evidence,
)
from .errors import ImpossibleEvidenceError, ValidationError, ZeroMassError


def _moral_adjacency(net: Network) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(net.n)]
    for i in range(net.n):
        fam = net.family(i)
        for a in fam:
            for b in fam:
                if a != b:
                    adj[a].add(b)
    return adj


def _fill_count(adj: list[set[int]], v: int) -> int:
    nbrs = sorted(adj[v])
    return sum(
        1
        for k in range(len(nbrs))
        for m in range(k + 1, len(nbrs))
        if nbrs[m] not in adj[nbrs[k]]
    )


def _eliminate_vertex(adj: list[set[int]], v: int):
    nbrs = sorted(adj[v])
    for k in range(len(nbrs)):
        for m in range(k + 1, len(nbrs)):
            adj[nbrs[k]].add(nbrs[m])
            adj[nbrs[m]].add(nbrs[k])
    for u in nbrs:
        adj[u].discard(v)
    adj[v].clear()


def elimination_order(net: Network, targets: Iterable[int]) -> list[int]:
    """Greedy min-fill order over the moral graph, excluding targets.

    Ties go to the lowest variable id.
    """
    targets = set(targets)
    adj = _moral_adjacency(net)
    candidates = [v for v in range(net.n) if v not in targets]
    order = []
    remaining = set(candidates)
    while remaining:
        best = min(remaining, key=lambda v: (_fill_count(adj, v), v))
        order.append(best)
        _eliminate_vertex(adj, best)
        remaining.discard(best)
    return order


def variable_elimination(
    net: Network, query: int, ev: Evidence | None = None, workers: int = 1
) -> PotentialTable:
    """Normalized posterior P(query | ev) by sum-product elimination."""
    ev = validate_evidence(net, ev or {})
    if not 0 <= query < net.n:
        raise ValidationError(f"query variable {query} out of range")
    factors = [table_reduce(cpt, ev) for cpt in net.cpts]
    for v in elimination_order(net, {query}):
        bucket = [f for f in factors if v in f.scope]
        if not bucket:
            continue
        factors = [f for f in factors if v not in f.scope]
        prod = bucket[0]
        for f in bucket[1:]:
            prod = table_multiply(prod, f)
        keep = [u for u in prod.scope if u != v]
        factors.append(table_marginalize(prod, keep, workers))
    result = factors[0]
    for f in factors[1:]:
        result = table_multiply(result, f)
    try:
        return table_normalize(result)
    except ZeroMassError:
        raise ImpossibleEvidenceError("impossible evidence") from None


# ---------------------------------------------------------------------------
# Junction tree


@dataclass
class JunctionTree:
    """Clique tree built from a network; immutable once constructed."""

    net: Network
    cliques: list[tuple[int, ...]]  # sorted variable ids per clique
    edges: list[tuple[int, int]]  # clique-index pairs, i < j
    sep_vars: list[tuple[int, ...]]  # per edge
    root: int
    levels: list[int]  # depth of each clique from the root
    parent: list[int]  # tree parent per clique; -1 at the root
    parent_edge: list[int]  # index into edges; -1 at the root
    assigned: list[list[int]]  # CPT indices attached to each clique

    def cliques_containing(self, var: int) -> list[int]:
        return [k for k, c in enumerate(self.cliques) if var in c]

    def height(self) -> int:
        return max(self.levels) if self.levels else 0


def _maximal_cliques(elim_cliques: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Drop cliques contained in another, keeping first occurrences in order."""
    sets = [frozenset(c) for c in elim_cliques]
    keep = []
    for k, c in enumerate(sets):
        dominated = any(
            c < o or (c == o and m < k) for m, o in enumerate(sets) if m != k
        )
        if not dominated:
            keep.append(elim_cliques[k])
    return keep


def _eccentricities(n: int, adj: list[list[int]]) -> list[int]:
    ecc = [0] * n
    for s in range(n):
        dist = [-1] * n
        dist[s] = 0
        queue = [s]
        while queue:
            nxt = []
            for u in queue:
                for w in adj[u]:
                    if dist[w] < 0:
                        dist[w] = dist[u] + 1
                        nxt.append(w)
            queue = nxt
        ecc[s] = max(dist)
    return ecc


def build_junction_tree(net: Network) -> JunctionTree:
    """Moralize, triangulate (min-fill), and assemble the clique tree."""
    adj = _moral_adjacency(net)
    elim_cliques: list[tuple[int, ...]] = []
    remaining = set(range(net.n))
    while remaining:
        v = min(remaining, key=lambda u: (_fill_count(adj, u), u))
        elim_cliques.append(tuple(sorted({v, *adj[v]})))
        _eliminate_vertex(adj, v)
        remaining.discard(v)
    cliques = _maximal_cliques(elim_cliques)
    m = len(cliques)
    clique_sets = [set(c) for c in cliques]

    # Maximum spanning tree on separator size; zero-weight edges permitted so
    # disconnected networks still yield a single tree.
    candidates = sorted(
        (
            (-len(clique_sets[i] & clique_sets[j]), i, j)
            for i in range(m)
            for j in range(i + 1, m)
        )
    )
    uf = list(range(m))

    def find(a: int) -> int:
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    edges: list[tuple[int, int]] = []
    sep_vars: list[tuple[int, ...]] = []
    for negw, i, j in candidates:
        ri, rj = find(i), find(j)
        if ri == rj:
            continue
        uf[ri] = rj
        edges.append((i, j))
        sep_vars.append(tuple(sorted(clique_sets[i] & clique_sets[j])))
        if len(edges) == m - 1:
            break

    tree_adj: list[list[int]] = [[] for _ in range(m)]
    for i, j in edges:
        tree_adj[i].append(j)
        tree_adj[j].append(i)
    for lst in tree_adj:
        lst.sort()

    ecc = _eccentricities(m, tree_adj)
    root = min(range(m), key=lambda k: (ecc[k], k))

    levels = [-1] * m
    parent = [-1] * m
    parent_edge = [-1] * m
    edge_index = {e: k for k, e in enumerate(edges)}
    levels[root] = 0
    queue = [root]
    while queue:
        nxt = []
        for u in queue:
            for w in tree_adj[u]:
                if levels[w] < 0:
                    levels[w] = levels[u] + 1
                    parent[w] = u
                    parent_edge[w] = edge_index[(min(u, w), max(u, w))]
                    nxt.append(w)
        queue = nxt

    assigned: list[list[int]] = [[] for _ in range(m)]
    for i in range(net.n):
        fam = set(net.family(i))
        for k in range(m):
            if fam <= clique_sets[k]:
                assigned[k].append(i)
                break
        else:  # pragma: no cover - families are cliques of the moral graph
            raise ValidationError(f"no clique contains family of variable {i}")

    return JunctionTree(
        net, cliques, edges, sep_vars, root, levels, parent, parent_edge, assigned
    )


@dataclass
class CalibratedTree:
    """Propagation output: every clique table holds P(clique vars, ev)."""

    tree: JunctionTree
    clique_tables: list[PotentialTable]
    sep_tables: list[PotentialTable]
    evidence: dict[int, int]

    def query(self, var: int) -> PotentialTable:
        """Posterior P(var | ev) from the smallest clique containing var."""
        packs = self.tree.cliques_containing(var)
        if not packs:
            raise ValidationError(f"variable {var} not in any clique")
        k = min(packs, key=lambda c: (len(self.tree.cliques[c]), c))
        marg = table_marginalize(self.clique_tables[k], [var])
        try:
            return table_normalize(marg)
        except ZeroMassError:
            raise ImpossibleEvidenceError("impossible evidence") from None


def jt_propagate(
    tree: JunctionTree, ev: Evidence | None = None, workers: int = 1
) -> CalibratedTree:
    """Two-phase (collect, then distribute) calibration.

    Message over an edge: new_sep = marginalize(source clique, separator);
    target clique *= new_sep / old_sep. Collect runs levels deepest-first,
    distribute shallowest-first; within a level all messages are computed
    from the same snapshot, in parallel, and then applied grouped by
    target clique — groups in parallel, messages within a group in clique
    order — so the multiplication chain feeding any one table never
    depends on the worker count.
    """
    net = tree.net
    ev = validate_evidence(net, ev or {})
    m = len(tree.cliques)
    cards = [
        tuple(net.cardinality(v) for v in c) for c in tree.cliques
    ]

    def build_psi(k: int) -> PotentialTable:
        psi = PotentialTable.ones(tree.cliques[k], cards[k])
        for i in tree.assigned[k]:
            psi = table_multiply(psi, net.cpts[i])
        return psi

    psis = parallel_map(build_psi, list(range(m)), workers)
    for v in sorted(ev):
        k = min(tree.cliques_containing(v))
        psis[k] = table_reduce(psis[k], {v: ev[v]})

    seps = [
        PotentialTable.ones(sv, tuple(net.cardinality(u) for u in sv))
        for sv in tree.sep_vars
    ]

    height = tree.height()
    # Collect: deepest level first, every clique messages its parent.
    for level in range(height, 0, -1):
        senders = [k for k in range(m) if tree.levels[k] == level]
        marg_workers = workers if len(senders) == 1 else 1
        margs = parallel_map(
            lambda k: table_marginalize(
                psis[k], tree.sep_vars[tree.parent_edge[k]], marg_workers
            ),
            senders,
            workers,
        )
        by_parent: dict[int, list[tuple[int, PotentialTable]]] = {}
        for k, new_sep in zip(senders, margs):
            by_parent.setdefault(tree.parent[k], []).append((k, new_sep))

        def absorb(p: int) -> PotentialTable:
            psi = psis[p]
            for k, new_sep in by_parent[p]:
                e = tree.parent_edge[k]
                psi = table_multiply(psi, table_divide(new_sep, seps[e]))
            return psi

        targets = sorted(by_parent)
        for p, psi in zip(targets, parallel_map(absorb, targets, workers)):
            psis[p] = psi
        for k, new_sep in zip(senders, margs):
            seps[tree.parent_edge[k]] = new_sep

    if psis[tree.root].total() <= 0.0:
        raise ImpossibleEvidenceError("impossible evidence")

    # Distribute: root downward; parents message all their children.
    for level in range(height):
        receivers = [k for k in range(m) if tree.levels[k] == level + 1]
        marg_workers = workers if len(receivers) == 1 else 1
        margs = parallel_map(
            lambda k: table_marginalize(
                psis[tree.parent[k]], tree.sep_vars[tree.parent_edge[k]], marg_workers
            ),
            receivers,
            workers,
        )

        def receive(pair: tuple[int, PotentialTable]) -> PotentialTable:
            k, new_sep = pair
            e = tree.parent_edge[k]
            return table_multiply(psis[k], table_divide(new_sep, seps[e]))

        updated = parallel_map(receive, list(zip(receivers, margs)), workers)
        for k, psi, new_sep in zip(receivers, updated, margs):
            psis[k] = psi
            seps[tree.parent_edge[k]] = new_sep

    return CalibratedTree(tree, psis, seps, dict(ev))


def jt_marginals(
    net: Network,
    query_vars: Sequence[int] | None = None,
    ev: Evidence | None = None,
    workers: int = 1,
    tree: JunctionTree | None = None,
) -> dict[int, PotentialTable]:
    """Posterior marginals for query_vars (default: every variable)."""
    if tree is None:
        tree = build_junction_tree(net)
    calibrated = jt_propagate(tree, ev, workers)
    if query_vars is None:
        query_vars = range(net.n)
    return {v: calibrated.query(v) for v in query_vars}


def ve_marginals(
    net: Network,
    query_vars: Sequence[int] | None = None,
    ev: Evidence | None = None,
    workers: int = 1,
) -> dict[int, PotentialTable]:
    if query_vars is None:
        query_vars = range(net.n)
    return {v: variable_elimination(net, v, ev, workers) for v in query_vars}
