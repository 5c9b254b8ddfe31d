"""Constraint-based structure learning.

Pipeline: PC-stable skeleton discovery -> v-structure orientation -> Meek
rules -> (optionally) extension to a member DAG of the equivalence class.

Parallelism is at the conditional-independence-test level: within a PC
level every surviving edge is an independent task (its subset sequence is
evaluated serially inside the task), adjacency sets are frozen at level
start, and removals are committed in edge order at level end. The output
is therefore identical for any worker count, and invariant under variable
permutation (the PC-stable property).

The CI test is the G² likelihood-ratio test. All subset tests for one edge
share a single joint count table over the edge's candidate variables when
that table is small enough; per-subset tables are obtained by summing axes
out, which yields the exact same integer counts as counting directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2

from ._par import parallel_map
from .errors import ExtensionError, ValidationError
from .io_formats import Dataset

# Joint count tables up to this many cells are built once per edge and
# marginalized per subset; larger candidate unions fall back to per-subset
# counting passes.
COUNT_CACHE_CELLS = 1 << 20

UNDIRECTED = 0  # i - j
FORWARD = 1  # i -> j  (key order: i < j)
BACKWARD = 2  # j -> i


class PdagGraph:
    """Partially directed graph over n dense variable ids.

    Edges are stored per unordered pair with a mark: undirected, or
    directed one way. No self-loops, at most one edge per pair.
    """

    __slots__ = ("n", "_marks", "_adj")

    def __init__(self, n: int):
        self.n = n
        self._marks: dict[tuple[int, int], int] = {}
        self._adj: list[set[int]] = [set() for _ in range(n)]

    # -- construction -------------------------------------------------

    @classmethod
    def complete(cls, n: int) -> "PdagGraph":
        g = cls(n)
        for i in range(n):
            for j in range(i + 1, n):
                g.add_undirected(i, j)
        return g

    @classmethod
    def from_parents(cls, parents: Sequence[Sequence[int]]) -> "PdagGraph":
        g = cls(len(parents))
        for i, ps in enumerate(parents):
            for p in ps:
                g.set_directed(p, i)
        return g

    def copy(self) -> "PdagGraph":
        g = PdagGraph(self.n)
        g._marks = dict(self._marks)
        g._adj = [set(s) for s in self._adj]
        return g

    # -- mutation -----------------------------------------------------

    def _key(self, i: int, j: int) -> tuple[int, int]:
        if i == j:
            raise ValidationError("self-loops are not allowed")
        return (i, j) if i < j else (j, i)

    def add_undirected(self, i: int, j: int):
        self._marks[self._key(i, j)] = UNDIRECTED
        self._adj[i].add(j)
        self._adj[j].add(i)

    def set_directed(self, src: int, dst: int):
        """Add or overwrite the (src, dst) edge as src -> dst."""
        self._marks[self._key(src, dst)] = FORWARD if src < dst else BACKWARD
        self._adj[src].add(dst)
        self._adj[dst].add(src)

    def remove_edge(self, i: int, j: int):
        self._marks.pop(self._key(i, j), None)
        self._adj[i].discard(j)
        self._adj[j].discard(i)

    # -- queries ------------------------------------------------------

    def adjacent(self, i: int, j: int) -> bool:
        return j in self._adj[i]

    def is_undirected(self, i: int, j: int) -> bool:
        return self._marks.get(self._key(i, j)) == UNDIRECTED

    def has_directed(self, src: int, dst: int) -> bool:
        want = FORWARD if src < dst else BACKWARD
        return self._marks.get(self._key(src, dst)) == want

    def neighbors(self, i: int) -> list[int]:
        return sorted(self._adj[i])

    def undirected_neighbors(self, i: int) -> list[int]:
        return [j for j in self.neighbors(i) if self.is_undirected(i, j)]

    def parents_of(self, i: int) -> list[int]:
        return [j for j in self.neighbors(i) if self.has_directed(j, i)]

    def children_of(self, i: int) -> list[int]:
        return [j for j in self.neighbors(i) if self.has_directed(i, j)]

    def n_edges(self) -> int:
        return len(self._marks)

    def edge_marks(self) -> dict[tuple[int, int], int]:
        """{(i, j) with i < j: mark} snapshot."""
        return dict(self._marks)

    def __eq__(self, other):
        return (
            isinstance(other, PdagGraph)
            and self.n == other.n
            and self._marks == other._marks
        )

    def __repr__(self):
        return f"PdagGraph(n={self.n}, edges={self.n_edges()})"

    # -- JSON ----------------------------------------------------------

    def to_obj(self, names: Sequence[str]) -> dict:
        edges = []
        for (i, j), mark in sorted(self._marks.items()):
            if mark == BACKWARD:
                i, j = j, i
            edges.append(
                {"from": names[i], "to": names[j], "directed": mark != UNDIRECTED}
            )
        return {"variables": list(names), "edges": edges}

    @classmethod
    def from_obj(cls, obj: Mapping) -> tuple["PdagGraph", list[str]]:
        names = list(obj["variables"])
        ids = {s: k for k, s in enumerate(names)}
        g = cls(len(names))
        for e in obj["edges"]:
            i, j = ids[e["from"]], ids[e["to"]]
            if e.get("directed", True):
                g.set_directed(i, j)
            else:
                g.add_undirected(i, j)
        return g, names


@dataclass(frozen=True)
class CiResult:
    statistic: float
    dof: int
    p_value: float
    independent: bool


# ---------------------------------------------------------------------------
# G² conditional independence test


def _count_joint(data: Dataset, var_ids: Sequence[int]) -> np.ndarray:
    """Integer count table over var_ids (axes in the given order)."""
    cards = [data.variables[v].cardinality for v in var_ids]
    flat = np.zeros(data.n_rows, dtype=np.int64)
    for v, c in zip(var_ids, cards):
        flat = flat * c + data.columns[v]
    return np.bincount(flat, minlength=math.prod(cards)).reshape(cards)


def _counts_xyz(
    data: Dataset, x: int, y: int, z: Sequence[int], joint=None, joint_vars=None
) -> np.ndarray:
    """Counts with axes (x, y, *sorted(z)), from scratch or from a cache."""
    zs = sorted(z)
    target = sorted([x, y, *zs])
    if joint is None:
        counts = _count_joint(data, target)
    else:
        drop = tuple(k for k, v in enumerate(joint_vars) if v not in set(target))
        counts = joint.sum(axis=drop) if drop else joint
    perm = [target.index(x), target.index(y)] + [target.index(v) for v in zs]
    return np.transpose(counts, perm)


def _g2_from_counts(counts: np.ndarray) -> tuple[float, int]:
    """G² statistic and the zero-marginal dof reduction for (x, y | z) counts."""
    cx, cy = counts.shape[:2]
    n3 = counts.reshape(cx, cy, -1).astype(np.float64)
    rows = n3.sum(axis=1, keepdims=True)
    cols = n3.sum(axis=0, keepdims=True)
    tot = n3.sum(axis=(0, 1), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = rows * cols / tot
        terms = np.where(n3 > 0, n3 * np.log(n3 / expected), 0.0)
    stat = 2.0 * float(terms.sum())
    reduction = int((rows == 0).sum() + (cols == 0).sum())
    return stat, reduction


def _base_dof(data: Dataset, x: int, y: int, z: Sequence[int]) -> int:
    cx = data.variables[x].cardinality
    cy = data.variables[y].cardinality
    return (cx - 1) * (cy - 1) * math.prod(data.variables[v].cardinality for v in z)


def _ci_from_counts(counts: np.ndarray, base_dof: int, alpha: float) -> CiResult:
    stat, reduction = _g2_from_counts(counts)
    dof = base_dof - reduction
    dof = max(dof, 1) if stat > 0.0 else max(dof, 0)
    p = float(chi2.sf(stat, dof)) if dof > 0 else 1.0
    return CiResult(stat, dof, p, p > alpha)


def ci_test(
    data: Dataset, x: int, y: int, z: Iterable[int] = (), alpha: float = 0.05
) -> CiResult:
    """G² test of x ⟂ y | z on complete discrete data.

    Degrees of freedom start at (|X|-1)(|Y|-1)·Π|Z_k| and drop by one per
    zero row/column marginal within a z-configuration. Conditional tests
    whose base dof exceeds n_rows/10 are skipped and reported independent
    (p = 1); marginal tests always run.
    """
    z = sorted(set(int(v) for v in z))
    if x == y or x in z or y in z:
        raise ValidationError("ci_test requires x != y and x, y not in z")
    base = _base_dof(data, x, y, z)
    if z and base > data.n_rows / 10:
        return CiResult(0.0, base, 1.0, True)
    return _ci_from_counts(_counts_xyz(data, x, y, z), base, alpha)


# ---------------------------------------------------------------------------
# PC-stable skeleton


def _edge_task(
    data: Dataset,
    x: int,
    y: int,
    cand_x: list[int],
    cand_y: list[int],
    level: int,
    alpha: float,
):
    """Try all level-sized subsets for one edge; first independent wins.

    Returns (sepset or None, tests_run). Subsets come from x's candidate
    neighbors first, then y's, each in lexicographic order.
    """
    union = sorted({x, y, *cand_x, *cand_y})
    joint = joint_vars = None
    cells = math.prod(data.variables[v].cardinality for v in union)
    if cells <= COUNT_CACHE_CELLS:
        joint, joint_vars = _count_joint(data, union), union
    guard = data.n_rows / 10
    seen: set[tuple[int, ...]] = set()
    tests = 0
    for cands in (cand_x, cand_y):
        if len(cands) < level:
            continue
        for subset in combinations(cands, level):
            if subset in seen:
                continue
            seen.add(subset)
            tests += 1
            base = _base_dof(data, x, y, subset)
            if subset and base > guard:
                return list(subset), tests
            counts = _counts_xyz(data, x, y, subset, joint, joint_vars)
            if _ci_from_counts(counts, base, alpha).independent:
                return list(subset), tests
    return None, tests


def pc_stable_skeleton(
    data: Dataset,
    alpha: float = 0.05,
    max_depth: int = -1,
    workers: int = 1,
    stats: dict | None = None,
) -> tuple[PdagGraph, dict[frozenset, list[int]]]:
    """Level-wise PC-stable; returns the undirected skeleton and sepsets.

    Adjacency sets are frozen at the start of each level, so removal order
    within a level cannot influence any test — the source of both order
    independence and worker-count invariance.
    """
    n = len(data.variables)
    if max_depth < 0:
        max_depth = max(n - 2, 0)
    g = PdagGraph.complete(n)
    sepsets: dict[frozenset, list[int]] = {}
    ci_tests = 0

    for level in range(max_depth + 1):
        frozen = {i: g.neighbors(i) for i in range(n)}
        edges = sorted(g.edge_marks())
        tasks = []
        for x, y in edges:
            cand_x = [v for v in frozen[x] if v != y]
            cand_y = [v for v in frozen[y] if v != x]
            if len(cand_x) >= level or len(cand_y) >= level:
                tasks.append((x, y, cand_x, cand_y))
        if not tasks:
            break
        results = parallel_map(
            lambda t: _edge_task(data, t[0], t[1], t[2], t[3], level, alpha),
            tasks,
            workers,
        )
        for (x, y, _, _), (sepset, tests) in zip(tasks, results):
            ci_tests += tests
            if sepset is not None:
                g.remove_edge(x, y)
                sepsets[frozenset((x, y))] = sepset
    if stats is not None:
        stats["ci_tests"] = stats.get("ci_tests", 0) + ci_tests
    return g, sepsets


# ---------------------------------------------------------------------------
# Orientation


def orient_v_structures(
    skeleton: PdagGraph, sepsets: Mapping[frozenset, list[int]]
) -> PdagGraph:
    """Orient unshielded triples x - z - y with z outside sepset(x, y).

    Triples are visited in lexicographic (x, y, z) order with x < y; a
    later triple may overwrite an earlier orientation (last writer wins),
    which pins down the output on conflicting data.
    """
    g = skeleton.copy()
    n = g.n
    for x in range(n):
        for y in range(x + 1, n):
            if skeleton.adjacent(x, y):
                continue
            sep = sepsets.get(frozenset((x, y)))
            if sep is None:
                continue
            for z in sorted(set(skeleton.neighbors(x)) & set(skeleton.neighbors(y))):
                if z not in sep:
                    g.set_directed(x, z)
                    g.set_directed(y, z)
    return g


def _meek_applies(g: PdagGraph, a: int, b: int) -> bool:
    """Does any of Meek's four rules orient the undirected a - b as a -> b?"""
    # R1: some c -> a with c, b nonadjacent.
    for c in g.parents_of(a):
        if not g.adjacent(c, b):
            return True
    # R2: a directed path a -> c -> b.
    for c in g.children_of(a):
        if g.has_directed(c, b):
            return True
    # R3: a - c -> b and a - d -> b with c, d nonadjacent.
    into_b = [
        c for c in g.undirected_neighbors(a) if c != b and g.has_directed(c, b)
    ]
    for ci in range(len(into_b)):
        for di in range(ci + 1, len(into_b)):
            if not g.adjacent(into_b[ci], into_b[di]):
                return True
    # R4: a - d, d -> c, c -> b, a adjacent to c, b, d nonadjacent.
    for d in g.undirected_neighbors(a):
        if d == b or g.adjacent(d, b):
            continue
        for c in g.children_of(d):
            if g.has_directed(c, b) and g.adjacent(a, c):
                return True
    return False


def apply_meek_rules(g: PdagGraph) -> PdagGraph:
    """Propagate orientations with Meek rules R1-R4 until fixpoint."""
    g = g.copy()
    changed = True
    while changed:
        changed = False
        for (i, j), mark in sorted(g.edge_marks().items()):
            if mark != UNDIRECTED:
                continue
            if _meek_applies(g, i, j):
                g.set_directed(i, j)
                changed = True
            elif _meek_applies(g, j, i):
                g.set_directed(j, i)
                changed = True
    return g


def extend_to_dag(cpdag: PdagGraph) -> list[list[int]]:
    """Orient all undirected edges, yielding a DAG in the same class.

    Repeatedly removes an eligible sink: a node with no outgoing directed
    edges whose undirected neighbors are adjacent to all its other
    neighbors. Candidates are scanned from the highest id down, so lower
    ids end up ancestors when the class leaves the choice free.
    """
    h = cpdag.copy()
    result = cpdag.copy()
    remaining = set(range(h.n))
    while remaining:
        chosen = -1
        for s in sorted(remaining, reverse=True):
            if h.children_of(s):
                continue
            nbrs = h.neighbors(s)
            und = h.undirected_neighbors(s)
            if all(u == w or h.adjacent(u, w) for u in und for w in nbrs):
                chosen = s
                break
        if chosen < 0:
            raise ExtensionError("no consistent extension of the partially directed graph")
        for u in h.undirected_neighbors(chosen):
            result.set_directed(u, chosen)
        for u in h.neighbors(chosen):
            h.remove_edge(u, chosen)
        remaining.discard(chosen)

    parents = [sorted(result.parents_of(i)) for i in range(result.n)]
    # A failed extension can slip through eligibility on adversarial input;
    # a cycle check catches it.
    indeg = [len(ps) for ps in parents]
    ready = [i for i in range(result.n) if indeg[i] == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for c in range(result.n):
            if i in parents[c]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
    if seen != result.n:
        raise ExtensionError("no consistent extension of the partially directed graph")
    return parents


def dag_to_cpdag(parents: Sequence[Sequence[int]]) -> PdagGraph:
    """Equivalence-class representative of a DAG (for SHD comparisons)."""
    n = len(parents)
    skeleton = PdagGraph(n)
    for i, ps in enumerate(parents):
        for p in ps:
            skeleton.add_undirected(p, i)
    g = skeleton.copy()
    for z in range(n):
        ps = sorted(parents[z])
        for ai in range(len(ps)):
            for bi in range(ai + 1, len(ps)):
                a, b = ps[ai], ps[bi]
                if not skeleton.adjacent(a, b):
                    g.set_directed(a, z)
                    g.set_directed(b, z)
    return apply_meek_rules(g)


@dataclass
class StructureResult:
    cpdag: PdagGraph
    dag_parents: list[list[int]]
    sepsets: dict[frozenset, list[int]]
    ci_tests: int
    skeleton_edges: int


def learn_structure(
    data: Dataset, alpha: float = 0.05, max_depth: int = -1, workers: int = 1
) -> StructureResult:
    """Full pipeline: skeleton, v-structures, Meek closure, DAG extension."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must be in (0,1)")
    stats: dict = {}
    skeleton, sepsets = pc_stable_skeleton(data, alpha, max_depth, workers, stats)
    cpdag = apply_meek_rules(orient_v_structures(skeleton, sepsets))
    dag_parents = extend_to_dag(cpdag)
    return StructureResult(
        cpdag, dag_parents, sepsets, stats.get("ci_tests", 0), skeleton.n_edges()
    )
