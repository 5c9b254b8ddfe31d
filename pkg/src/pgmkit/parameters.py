"""Closed-form CPT estimation from complete data.

Each family (node plus parents) is counted in one column-major pass and
estimated independently, so families can run in parallel. The default
pseudocount of 1 keeps every probability strictly positive, which the
importance samplers downstream rely on; pseudocount=0 gives the pure
maximum-likelihood estimate with a uniform-row convention for parent
configurations that never occur.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ._par import parallel_map
from .core import DiscreteVariable, Network, cpt_from_rows
from .errors import ValidationError
from .io_formats import Dataset


def _match_columns(variables: Sequence[DiscreteVariable], data: Dataset) -> np.ndarray:
    """Recode data columns to the structure's variable order and state order."""
    by_name = {v.name: v for v in data.variables}
    missing = [v.name for v in variables if v.name not in by_name]
    if missing:
        raise ValidationError(
            f"dataset lacks variable(s): {', '.join(sorted(missing))}"
        )
    cols = np.empty((len(variables), data.n_rows), dtype=np.int32)
    for v in variables:
        dv = by_name[v.name]
        if dv.state_names == v.state_names:
            cols[v.id] = data.columns[dv.id]
            continue
        try:
            remap = np.array(
                [v.state_index(s) for s in dv.state_names], dtype=np.int32
            )
        except ValidationError:
            raise ValidationError(
                f"dataset states for {v.name!r} ({', '.join(dv.state_names)}) "
                f"do not match the structure's ({', '.join(v.state_names)})"
            ) from None
        cols[v.id] = remap[data.columns[dv.id]]
    return cols


def fit_mle(
    variables: Sequence[DiscreteVariable],
    parents: Sequence[Sequence[int]],
    data: Dataset,
    pseudocount: float = 1.0,
    workers: int = 1,
    name: str = "network",
) -> Network:
    """Estimate P(x | pa) = (N(x, pa) + c) / (N(pa) + c·|X|).

    Dataset columns are matched to the structure's variables by name (and
    recoded by state name when the orders differ).
    """
    if pseudocount < 0:
        raise ValidationError("pseudocount must be >= 0")
    variables = list(variables)
    cols = _match_columns(variables, data)
    cards = [v.cardinality for v in variables]

    def fit_family(i: int):
        fam = [*parents[i], i]
        flat = np.zeros(data.n_rows, dtype=np.int64)
        for v in fam:
            flat = flat * cards[v] + cols[v]
        size = math.prod(cards[v] for v in fam)
        counts = np.bincount(flat, minlength=size).reshape(-1, cards[i])
        counts = counts.astype(np.float64)
        totals = counts.sum(axis=1, keepdims=True)
        if pseudocount == 0.0:
            rows = np.divide(
                counts, np.where(totals == 0.0, 1.0, totals),
                out=np.full_like(counts, 1.0 / cards[i]),
                where=totals > 0.0,
            )
        else:
            rows = (counts + pseudocount) / (totals + pseudocount * cards[i])
        return cpt_from_rows(variables, i, parents[i], rows)

    cpts = parallel_map(fit_family, range(len(variables)), workers)
    return Network(variables, [list(p) for p in parents], cpts, name=name)
