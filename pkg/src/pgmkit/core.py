"""Domain types and potential-table algebra.

A discrete Bayesian network is a DAG over dense integer variable ids plus
one conditional probability table (CPT) per node. The PotentialTable is the
workhorse of every inference routine: a flat, stride-indexed nonnegative
float64 array over a scope of variable ids kept in ascending order.

The ascending canonical order is what makes the table kernels cheap: any
pairwise multiply or divide is a single broadcast sweep with precomputed
axis alignment, with no per-entry assignment decoding. Marginalization uses
a blocked reduction whose block layout depends only on the table shape, so
results are bitwise identical for any worker count.

Tables are immutable after construction and safe to share across threads.
Evidence is a plain mapping from variable id to observed state index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._par import REDUCE_BLOCK, block_ranges, parallel_map, resolve_workers
from .errors import (
    InconsistentCalibrationError,
    ScopeViolationError,
    TableTooLargeError,
    ValidationError,
    ZeroMassError,
)

# Default cap on table entries; operations that would exceed it fail fast.
DEFAULT_SIZE_CAP = 1 << 26

# Tolerance for CPT row normalization checks.
CPT_ROW_TOL = 1e-9

Evidence = Mapping[int, int]


@dataclass(frozen=True)
class DiscreteVariable:
    """A categorical variable with a dense 0-based id."""

    id: int
    name: str
    cardinality: int
    state_names: tuple[str, ...]

    def __post_init__(self):
        if self.cardinality < 2:
            raise ValidationError(
                f"variable {self.name!r}: cardinality must be >= 2, got {self.cardinality}"
            )
        states = tuple(self.state_names)
        object.__setattr__(self, "state_names", states)
        if len(states) != self.cardinality:
            raise ValidationError(
                f"variable {self.name!r}: {len(states)} state names for cardinality {self.cardinality}"
            )
        if len(set(states)) != len(states):
            raise ValidationError(f"variable {self.name!r}: duplicate state names")

    def state_index(self, state: str) -> int:
        try:
            return self.state_names.index(state)
        except ValueError:
            raise ValidationError(
                f"variable {self.name!r} has no state {state!r}; "
                f"valid states: {', '.join(self.state_names)}"
            ) from None


def _strides(cards: tuple[int, ...]) -> tuple[int, ...]:
    out = [1] * len(cards)
    for k in range(len(cards) - 2, -1, -1):
        out[k] = out[k + 1] * cards[k + 1]
    return tuple(out)


class PotentialTable:
    """Nonnegative multidimensional table over an ascending variable scope.

    values is the row-major flattening: entry for assignment x sits at
    sum_k x[scope[k]] * strides[k], with strides[k] = prod(cards[k+1:]).
    """

    __slots__ = ("scope", "cards", "strides", "values")

    def __init__(
        self,
        scope: Sequence[int],
        cards: Sequence[int],
        values: np.ndarray | Sequence[float],
    ):
        scope = tuple(int(v) for v in scope)
        cards = tuple(int(c) for c in cards)
        if len(scope) != len(cards):
            raise ValidationError("scope and cards lengths differ")
        if any(scope[k] >= scope[k + 1] for k in range(len(scope) - 1)):
            raise ValidationError(f"scope must be strictly ascending, got {scope}")
        vals = np.ascontiguousarray(values, dtype=np.float64).ravel()
        if vals.size != math.prod(cards):
            raise ValidationError(
                f"values length {vals.size} != product of cards {math.prod(cards)}"
            )
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValidationError("table values must be finite and nonnegative")
        vals.flags.writeable = False
        self.scope = scope
        self.cards = cards
        self.strides = _strides(cards)
        self.values = vals

    @classmethod
    def scalar(cls, value: float = 1.0) -> "PotentialTable":
        return cls((), (), np.array([value]))

    @classmethod
    def ones(cls, scope: Sequence[int], cards: Sequence[int]) -> "PotentialTable":
        return cls(scope, cards, np.ones(math.prod(cards)))

    @property
    def nd(self) -> np.ndarray:
        """Read-only view shaped by cards (scalar tables give shape ())."""
        return self.values.reshape(self.cards)

    def total(self) -> float:
        return float(_blocked_total(self.values))

    def axis_of(self, var: int) -> int:
        try:
            return self.scope.index(var)
        except ValueError:
            raise ScopeViolationError(
                f"scope violation: variable {var} not in scope {self.scope}"
            ) from None

    def __repr__(self):
        return f"PotentialTable(scope={self.scope}, cards={self.cards})"


def _expand_shape(scope: tuple[int, ...], cards: tuple[int, ...], target_scope) -> tuple:
    """Shape that aligns this table's axes with target_scope for broadcasting."""
    pos = {v: k for k, v in enumerate(scope)}
    return tuple(cards[pos[v]] if v in pos else 1 for v in target_scope)


def table_multiply(
    a: PotentialTable, b: PotentialTable, size_cap: int | None = None
) -> PotentialTable:
    """Pointwise product over the union scope.

    Both inputs are canonical-ordered, so the product is one broadcast
    sweep after aligning each input's axes with the union scope.
    """
    cap = DEFAULT_SIZE_CAP if size_cap is None else size_cap
    cards_by_var: dict[int, int] = {}
    for t in (a, b):
        for v, c in zip(t.scope, t.cards):
            if cards_by_var.setdefault(v, c) != c:
                raise ValidationError(
                    f"variable {v} has conflicting cardinalities {cards_by_var[v]} and {c}"
                )
    scope = tuple(sorted(cards_by_var))
    cards = tuple(cards_by_var[v] for v in scope)
    size = math.prod(cards)
    if size > cap:
        raise TableTooLargeError(
            f"table too large: product scope {scope} has {size} entries (cap {cap})"
        )
    av = a.values.reshape(_expand_shape(a.scope, a.cards, scope))
    bv = b.values.reshape(_expand_shape(b.scope, b.cards, scope))
    return PotentialTable(scope, cards, (av * bv).ravel())


def _blocked_total(values: np.ndarray) -> np.float64:
    """Total mass under the fixed-block deterministic reduction."""
    n = values.size
    if n <= REDUCE_BLOCK:
        return np.float64(values.sum())
    acc = np.float64(0.0)
    for lo, hi in block_ranges(n, REDUCE_BLOCK):
        acc = acc + values[lo:hi].sum()
    return acc


def table_marginalize(
    t: PotentialTable, keep: Iterable[int], workers: int = 1
) -> PotentialTable:
    """Sum out every variable not in keep.

    The flat index range is partitioned into blocks aligned with the first
    axis; block partial sums are combined in index order, so the result is
    bitwise identical for any worker count.
    """
    keep_set = frozenset(keep)
    scope_set = set(t.scope)
    if not keep_set <= scope_set:
        extra = sorted(keep_set - scope_set)
        raise ScopeViolationError(f"scope violation: {extra} not in scope {t.scope}")
    if keep_set == scope_set:
        return t
    out_scope = tuple(v for v in t.scope if v in keep_set)
    out_cards = tuple(c for v, c in zip(t.scope, t.cards) if v in keep_set)
    elim_axes = tuple(k for k, v in enumerate(t.scope) if v not in keep_set)
    nd = t.nd

    first_card = t.cards[0]
    inner = t.values.size // first_card
    rows_per_block = max(1, REDUCE_BLOCK // max(inner, 1))
    ranges = block_ranges(first_card, rows_per_block)
    if len(ranges) == 1:
        out = nd.sum(axis=elim_axes)
    else:
        parts = parallel_map(
            lambda r: nd[r[0] : r[1]].sum(axis=elim_axes), ranges, workers
        )
        if 0 in elim_axes:
            out = parts[0].copy()
            for p in parts[1:]:
                out += p
        else:
            out = np.concatenate(parts, axis=0)
    return PotentialTable(out_scope, out_cards, np.asarray(out).ravel())


def table_reduce(t: PotentialTable, ev: Evidence) -> PotentialTable:
    """Zero out entries inconsistent with the evidence; scope unchanged.

    Evidence on variables outside the scope is ignored.
    """
    relevant = [(v, s) for v, s in ev.items() if v in t.scope]
    if not relevant:
        return t
    out = t.nd.copy()
    for v, s in relevant:
        axis = t.axis_of(v)
        card = t.cards[axis]
        if not 0 <= s < card:
            raise ValidationError(
                f"evidence state {s} out of range for variable {v} (cardinality {card})"
            )
        idx = [slice(None)] * out.ndim
        idx[axis] = np.arange(card) != s
        out[tuple(idx)] = 0.0
    return PotentialTable(t.scope, t.cards, out.ravel())


def table_divide(num: PotentialTable, den: PotentialTable) -> PotentialTable:
    """Pointwise division with the junction-tree convention 0/0 = 0."""
    if not set(den.scope) <= set(num.scope):
        raise ScopeViolationError(
            f"scope violation: divisor scope {den.scope} not within {num.scope}"
        )
    dv = den.values.reshape(_expand_shape(den.scope, den.cards, num.scope))
    nv = num.nd
    zero = dv == 0.0
    if np.any(zero & (nv > 0.0)):
        raise InconsistentCalibrationError(
            "inconsistent calibration: positive mass divided by zero"
        )
    out = np.divide(nv, np.where(zero, 1.0, dv))
    out = np.where(np.broadcast_to(zero, out.shape), 0.0, out)
    return PotentialTable(num.scope, num.cards, out.ravel())


def table_normalize(t: PotentialTable) -> PotentialTable:
    """Scale values to total mass 1."""
    s = _blocked_total(t.values)
    if not s > 0.0:
        raise ZeroMassError("zero mass: table sums to zero")
    return PotentialTable(t.scope, t.cards, t.values / s)


class Network:
    """A Bayesian network: DAG over DiscreteVariables plus one CPT per node.

    variables must be listed in id order (ids are exactly 0..n-1); parents
    keeps each node's declared parent order, which fixes the row layout used
    by the BIF format and the sampling kernels.
    """

    def __init__(
        self,
        variables: Sequence[DiscreteVariable],
        parents: Sequence[Sequence[int]],
        cpts: Sequence[PotentialTable],
        name: str = "network",
        validate: bool = True,
    ):
        self.variables = list(variables)
        self.parents = [tuple(int(p) for p in ps) for ps in parents]
        self.cpts = list(cpts)
        self.name = name
        self._topo: tuple[int, ...] | None = None
        if validate:
            self._validate()

    @property
    def n(self) -> int:
        return len(self.variables)

    def _validate(self):
        n = self.n
        if [v.id for v in self.variables] != list(range(n)):
            raise ValidationError("variable ids must be exactly 0..n-1, in order")
        names = [v.name for v in self.variables]
        if len(set(names)) != n:
            raise ValidationError("variable names must be unique")
        if len(self.parents) != n or len(self.cpts) != n:
            raise ValidationError("parents and cpts must have one entry per variable")
        for i, ps in enumerate(self.parents):
            if i in ps:
                raise ValidationError(f"variable {i} cannot be its own parent")
            if len(set(ps)) != len(ps):
                raise ValidationError(f"variable {i} lists a duplicate parent")
            if any(not 0 <= p < n for p in ps):
                raise ValidationError(f"variable {i} has an out-of-range parent")
        self.topological_order()  # raises on cycles
        for i, cpt in enumerate(self.cpts):
            fam = self.family(i)
            if cpt.scope != fam:
                raise ValidationError(
                    f"CPT scope {cpt.scope} for variable {i} != family {fam}"
                )
            cards = tuple(self.variables[v].cardinality for v in fam)
            if cpt.cards != cards:
                raise ValidationError(f"CPT cards mismatch for variable {i}")
            sums = cpt.nd.sum(axis=cpt.axis_of(i))
            if not np.allclose(sums, 1.0, rtol=0.0, atol=CPT_ROW_TOL):
                worst = float(np.abs(sums - 1.0).max())
                raise ValidationError(
                    f"CPT rows for variable {i} deviate from 1 by {worst:.3g}"
                )

    def family(self, i: int) -> tuple[int, ...]:
        return tuple(sorted((i, *self.parents[i])))

    def topological_order(self) -> tuple[int, ...]:
        """Kahn's algorithm; deterministic (lowest id first among ready nodes)."""
        if self._topo is not None:
            return self._topo
        n = self.n
        indeg = [len(ps) for ps in self.parents]
        children: list[list[int]] = [[] for _ in range(n)]
        for i, ps in enumerate(self.parents):
            for p in ps:
                children[p].append(i)
        import heapq

        ready = [i for i in range(n) if indeg[i] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            i = heapq.heappop(ready)
            order.append(i)
            for c in children[i]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != n:
            raise ValidationError("cyclic parent structure")
        self._topo = tuple(order)
        return self._topo

    def children_of(self, i: int) -> list[int]:
        return [c for c in range(self.n) if i in self.parents[c]]

    def var_id(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.id
        raise ValidationError(f"no variable named {name!r}")

    def cardinality(self, i: int) -> int:
        return self.variables[i].cardinality

    def equals(self, other: "Network", tol: float = 0.0) -> bool:
        """Same variables, graph, and CPT entries (within tol)."""
        if self.n != other.n or self.variables != other.variables:
            return False
        if self.parents != other.parents:
            return False
        for a, b in zip(self.cpts, other.cpts):
            if a.scope != b.scope or a.cards != b.cards:
                return False
            if tol == 0.0:
                if not np.array_equal(a.values, b.values):
                    return False
            elif not np.allclose(a.values, b.values, rtol=0.0, atol=tol):
                return False
        return True


def validate_evidence(net: Network, ev: Evidence) -> dict[int, int]:
    """Check ids and state bounds; returns a plain dict copy."""
    out = {}
    for v, s in ev.items():
        v, s = int(v), int(s)
        if not 0 <= v < net.n:
            raise ValidationError(f"evidence variable {v} out of range")
        card = net.cardinality(v)
        if not 0 <= s < card:
            raise ValidationError(
                f"evidence state {s} out of range for variable {v} (cardinality {card})"
            )
        out[v] = s
    return out


def cpt_from_rows(
    variables: Sequence[DiscreteVariable],
    node: int,
    parents: Sequence[int],
    rows: np.ndarray | Sequence[Sequence[float]],
) -> PotentialTable:
    """Build a canonical CPT from rows in declared-parent order.

    rows has one row per parent configuration (odometer order over the
    declared parent list, last parent fastest); each row is the node's
    distribution for that configuration.
    """
    parents = list(parents)
    card = variables[node].cardinality
    pcards = [variables[p].cardinality for p in parents]
    rows = np.asarray(rows, dtype=np.float64).reshape(tuple(pcards) + (card,))
    declared = parents + [node]
    scope = sorted(declared)
    perm = [declared.index(v) for v in scope]
    cards = tuple(variables[v].cardinality for v in scope)
    return PotentialTable(scope, cards, np.transpose(rows, perm).ravel())


def cpt_rows(net: Network, i: int) -> np.ndarray:
    """Inverse of cpt_from_rows: (n_parent_configs, cardinality) matrix.

    Parent configurations are coded in declared order, last parent fastest.
    """
    cpt = net.cpts[i]
    declared = list(net.parents[i]) + [i]
    perm = [cpt.scope.index(v) for v in declared]
    return np.transpose(cpt.nd, perm).reshape(-1, net.cardinality(i))
