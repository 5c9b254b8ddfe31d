"""Network and dataset serialization: BIF v0.3, JSON, DOT, CSV.

The JSON schema (documented in the README) is the lossless interchange
format; BIF is the interoperability format (probabilities printed with 17
significant digits, so float64 values survive a round-trip); DOT is
one-way, for visualization.

CSV datasets are a plain RFC-4180 subset: comma-separated, no quoting, no
embedded commas. Each column's distinct values, sorted lexicographically,
define that variable's states.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DiscreteVariable, Network, PotentialTable, cpt_from_rows, cpt_rows
from .errors import FormatError, ParseError, ValidationError

# Row sums farther than this from 1 are an error; closer (but not exact at
# working precision) gets silently renormalized.
BIF_ROW_SUM_TOL = 1e-6
_EXACT_SUM_TOL = 1e-12


@dataclass
class Dataset:
    """Complete discrete data, stored column-major.

    columns[i] is variable i's state-index array; one shared row count.
    """

    variables: list[DiscreteVariable]
    columns: np.ndarray  # (n_vars, n_rows) int32

    def __post_init__(self):
        self.columns = np.ascontiguousarray(self.columns, dtype=np.int32)
        if self.columns.ndim != 2 or self.columns.shape[0] != len(self.variables):
            raise ValidationError("columns must be a (n_vars, n_rows) array")
        for v in self.variables:
            col = self.columns[v.id]
            if col.size and (col.min() < 0 or col.max() >= v.cardinality):
                raise ValidationError(
                    f"column {v.name!r} has out-of-range state indices"
                )

    @property
    def n_rows(self) -> int:
        return self.columns.shape[1]

    def var_id(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.id
        raise ValidationError(f"no variable named {name!r} in dataset")


# ---------------------------------------------------------------------------
# CSV


def load_csv(text: str, header: bool = True) -> Dataset:
    """Parse a no-quoting CSV into a Dataset.

    State indices are assigned by lexicographic sort of each column's
    distinct values, which makes them independent of row order.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    rows = [line.rstrip("\r").split(",") for line in lines]
    if not rows:
        raise ParseError("empty CSV input")
    if header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
        first_data_line = 2
    else:
        names = [f"v{i}" for i in range(len(rows[0]))]
        body = rows
        first_data_line = 1
    if not body:
        raise ParseError("CSV has no data rows")
    ncol = len(names)
    if len(set(names)) != ncol:
        raise ParseError("duplicate column names in CSV header")
    for k, row in enumerate(body):
        if len(row) != ncol:
            raise ParseError(
                f"ragged CSV row at line {first_data_line + k}: "
                f"expected {ncol} fields, got {len(row)}"
            )
        for j, cell in enumerate(row):
            if cell == "":
                raise ParseError(
                    f"missing value at line {first_data_line + k}, column {names[j]!r}"
                )
    raw = np.array(body, dtype=object).T  # (ncol, nrows) of strings
    variables = []
    codes = np.empty((ncol, len(body)), dtype=np.int32)
    for j in range(ncol):
        states, inverse = np.unique(raw[j].astype(str), return_inverse=True)
        if states.size < 2:
            raise ParseError(
                f"column {names[j]!r} is constant; cardinality >= 2 required"
            )
        variables.append(
            DiscreteVariable(j, names[j], int(states.size), tuple(states.tolist()))
        )
        codes[j] = inverse
    return Dataset(variables, codes)


def write_csv(ds: Dataset) -> str:
    lines = [",".join(v.name for v in ds.variables)]
    cols = [ds.variables[j].state_names for j in range(len(ds.variables))]
    for r in range(ds.n_rows):
        lines.append(",".join(cols[j][ds.columns[j, r]] for j in range(len(cols))))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# BIF v0.3

_TOKEN_RE = re.compile(r"[^\s{}()\[\];|,]+|[{}()\[\];|,]")
_COMMENT_RE = re.compile(r"//[^\n]*|/\*.*?\*/", re.S)


class _Tokens:
    def __init__(self, text: str):
        self.toks = _TOKEN_RE.findall(_COMMENT_RE.sub(" ", text))
        self.pos = 0

    def peek(self) -> str | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of BIF input")
        self.pos += 1
        return tok

    def expect(self, want: str) -> str:
        tok = self.next()
        if tok != want:
            raise ParseError(f"expected {want!r}, got {tok!r}")
        return tok

    def until(self, stop: str) -> list[str]:
        out = []
        while True:
            tok = self.next()
            if tok == stop:
                return out
            out.append(tok)


def _skip_block(ts: _Tokens):
    """Consume a brace-balanced { ... } block (opening brace already read)."""
    depth = 1
    while depth:
        tok = ts.next()
        if tok == "{":
            depth += 1
        elif tok == "}":
            depth -= 1


def _parse_float(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}") from None


def _finish_rows(name: str, rows: np.ndarray) -> np.ndarray:
    """Normalize parsed CPT rows, or fail, per the row-sum tolerance."""
    if np.isnan(rows).any():
        missing = int(np.isnan(rows).any(axis=1).sum())
        raise ParseError(
            f"probability block for {name!r} leaves {missing} parent "
            "configuration(s) unspecified"
        )
    sums = rows.sum(axis=1)
    bad = np.abs(sums - 1.0) > BIF_ROW_SUM_TOL
    if bad.any():
        raise FormatError(
            f"row sum {sums[bad][0]:g} exceeds tolerance for variable {name!r}"
        )
    off = np.abs(sums - 1.0) > _EXACT_SUM_TOL
    if off.any():
        rows = rows.copy()
        rows[off] /= sums[off, None]
    return rows


def parse_bif(text: str) -> Network:
    ts = _Tokens(text)
    if ts.peek() != "network":
        raise ParseError("BIF input must start with a network block")
    ts.next()
    net_name = ts.next()
    ts.expect("{")
    _skip_block(ts)

    variables: list[DiscreteVariable] = []
    ids: dict[str, int] = {}
    blocks: dict[int, tuple[list[int], np.ndarray]] = {}

    while ts.peek() is not None:
        kw = ts.next()
        if kw == "variable":
            name = ts.next()
            if name in ids:
                raise ParseError(f"duplicate variable block for {name!r}")
            ts.expect("{")
            ts.expect("type")
            ts.expect("discrete")
            ts.expect("[")
            card = int(_parse_float(ts.next()))
            ts.expect("]")
            ts.expect("{")
            states = [t for t in ts.until("}") if t != ","]
            ts.expect(";")
            _skip_block(ts)  # remaining property lines, then '}'
            ids[name] = len(variables)
            try:
                variables.append(
                    DiscreteVariable(ids[name], name, card, tuple(states))
                )
            except ValidationError as e:
                raise ParseError(str(e)) from None
        elif kw == "probability":
            ts.expect("(")
            head = ts.until(")")
            names = [t for t in head if t not in (",", "|")]
            child, pnames = names[0], names[1:]
            if child not in ids:
                raise ParseError(f"unknown variable {child!r} in probability block")
            for p in pnames:
                if p not in ids:
                    raise ParseError(f"unknown parent {p!r} for {child!r}")
            ci = ids[child]
            if ci in blocks:
                raise ParseError(f"duplicate probability block for {child!r}")
            pids = [ids[p] for p in pnames]
            pcards = [variables[p].cardinality for p in pids]
            card = variables[ci].cardinality
            nconf = math.prod(pcards)
            rows = np.full((nconf, card), np.nan)
            ts.expect("{")
            while True:
                tok = ts.next()
                if tok == "}":
                    break
                if tok == "table":
                    vals = [_parse_float(t) for t in ts.until(";") if t != ","]
                    if len(vals) != nconf * card:
                        raise ParseError(
                            f"table for {child!r} has {len(vals)} values, "
                            f"expected {nconf * card}"
                        )
                    rows = np.array(vals).reshape(nconf, card)
                elif tok == "(":
                    cfg = [t for t in ts.until(")") if t != ","]
                    if len(cfg) != len(pids):
                        raise ParseError(
                            f"row for {child!r} names {len(cfg)} parent states, "
                            f"expected {len(pids)}"
                        )
                    idx = 0
                    for p, s in zip(pids, cfg):
                        try:
                            si = variables[p].state_index(s)
                        except ValidationError as e:
                            raise ParseError(str(e)) from None
                        idx = idx * variables[p].cardinality + si
                    vals = [_parse_float(t) for t in ts.until(";") if t != ","]
                    if len(vals) != card:
                        raise ParseError(
                            f"row for {child!r} has {len(vals)} values, expected {card}"
                        )
                    if not np.isnan(rows[idx]).all():
                        raise ParseError(f"duplicate row in block for {child!r}")
                    rows[idx] = vals
                elif tok == "property":
                    ts.until(";")
                else:
                    raise ParseError(f"unsupported entry {tok!r} in probability block")
            blocks[ci] = (pids, _finish_rows(child, rows))
        else:
            raise ParseError(f"unexpected token {kw!r} at top level")

    missing = [v.name for v in variables if v.id not in blocks]
    if missing:
        raise ParseError(f"no probability block for {missing[0]!r}")
    parents = [blocks[i][0] for i in range(len(variables))]
    cpts = [
        cpt_from_rows(variables, i, parents[i], blocks[i][1])
        for i in range(len(variables))
    ]
    try:
        return Network(variables, parents, cpts, name=net_name)
    except ValidationError as e:
        raise ParseError(str(e)) from None


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_bif(net: Network) -> str:
    out = [f"network {net.name} {{", "}"]
    for v in net.variables:
        out.append(f"variable {v.name} {{")
        out.append(
            f"  type discrete [ {v.cardinality} ] {{ {', '.join(v.state_names)} }};"
        )
        out.append("}")
    for i, v in enumerate(net.variables):
        ps = net.parents[i]
        rows = cpt_rows(net, i)
        if not ps:
            out.append(f"probability ( {v.name} ) {{")
            out.append(f"  table {' '.join(_fmt(x) for x in rows[0])};")
        else:
            pnames = ", ".join(net.variables[p].name for p in ps)
            out.append(f"probability ( {v.name} | {pnames} ) {{")
            pcards = [net.cardinality(p) for p in ps]
            for r in range(rows.shape[0]):
                cfg, rem = [], r
                for c in reversed(pcards):
                    cfg.append(rem % c)
                    rem //= c
                cfg.reverse()
                labels = ", ".join(
                    net.variables[p].state_names[s] for p, s in zip(ps, cfg)
                )
                out.append(f"  ({labels}) {' '.join(_fmt(x) for x in rows[r])};")
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON

_JSON_FORMAT = "pgmkit-network"


def _variables_to_obj(variables: Sequence[DiscreteVariable]) -> list[dict]:
    return [{"name": v.name, "states": list(v.state_names)} for v in variables]


def _parents_to_obj(variables, parents) -> list[list[str]]:
    return [[variables[p].name for p in ps] for ps in parents]


def network_to_json(net: Network) -> str:
    obj = {
        "format": _JSON_FORMAT,
        "version": 1,
        "name": net.name,
        "variables": _variables_to_obj(net.variables),
        "parents": _parents_to_obj(net.variables, net.parents),
        "cpts": [cpt_rows(net, i).tolist() for i in range(net.n)],
    }
    return json.dumps(obj, indent=2) + "\n"


def structure_to_json(
    variables: Sequence[DiscreteVariable],
    parents: Sequence[Sequence[int]],
    name: str = "network",
) -> str:
    obj = {
        "format": _JSON_FORMAT,
        "version": 1,
        "name": name,
        "variables": _variables_to_obj(variables),
        "parents": _parents_to_obj(variables, parents),
    }
    return json.dumps(obj, indent=2) + "\n"


def _parse_json_obj(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from None
    if not isinstance(obj, dict) or obj.get("format") != _JSON_FORMAT:
        raise ParseError(f"not a {_JSON_FORMAT} document")
    return obj


def _parse_vars_parents(obj: dict):
    try:
        variables = [
            DiscreteVariable(i, v["name"], len(v["states"]), tuple(v["states"]))
            for i, v in enumerate(obj["variables"])
        ]
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed variables array: {e}") from None
    ids = {v.name: v.id for v in variables}
    if len(ids) != len(variables):
        raise ParseError("duplicate variable names")
    raw_parents = obj.get("parents")
    if raw_parents is None or len(raw_parents) != len(variables):
        raise ParseError("parents array missing or wrong length")
    parents = []
    for ps in raw_parents:
        for p in ps:
            if p not in ids:
                raise ParseError(f"unknown parent name {p!r}")
        parents.append([ids[p] for p in ps])
    return variables, parents


def parse_structure_json(text: str):
    """Returns (variables, parents); accepts full-network documents too."""
    variables, parents = _parse_vars_parents(_parse_json_obj(text))
    return variables, parents


def parse_network_json(text: str) -> Network:
    obj = _parse_json_obj(text)
    variables, parents = _parse_vars_parents(obj)
    raw_cpts = obj.get("cpts")
    if raw_cpts is None or len(raw_cpts) != len(variables):
        raise ParseError("cpts array missing or wrong length")
    cpts = []
    for i, rows in enumerate(raw_cpts):
        try:
            arr = np.asarray(rows, dtype=np.float64)
        except ValueError:
            raise ParseError(f"malformed cpt rows for variable {i}") from None
        expect = (
            math.prod(variables[p].cardinality for p in parents[i]),
            variables[i].cardinality,
        )
        if arr.shape != expect:
            raise ParseError(
                f"cpt for {variables[i].name!r} has shape {arr.shape}, expected {expect}"
            )
        cpts.append(cpt_from_rows(variables, i, parents[i], arr))
    try:
        return Network(variables, parents, cpts, name=obj.get("name", "network"))
    except ValidationError as e:
        raise ParseError(str(e)) from None


# ---------------------------------------------------------------------------
# DOT

_BARE_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _dot_id(name: str) -> str:
    if _BARE_ID.match(name) and name.lower() not in {
        "graph", "digraph", "node", "edge", "subgraph", "strict",
    }:
        return name
    return '"' + name.replace('"', '\\"') + '"'


def write_dot(net: Network) -> str:
    out = [f"digraph {_dot_id(net.name)} {{"]
    for v in net.variables:
        out.append(f"  {_dot_id(v.name)};")
    for i in range(net.n):
        for p in net.parents[i]:
            out.append(f"  {_dot_id(net.variables[p].name)} -> {_dot_id(net.variables[i].name)};")
    out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Dispatch


def convert(net: Network, target: str) -> str:
    if target == "bif":
        return write_bif(net)
    if target == "dot":
        return write_dot(net)
    if target == "json":
        return network_to_json(net)
    raise ValidationError(f"unknown target {target!r}; expected bif, dot, or json")


def read_network_text(text: str) -> Network:
    """Parse either format, sniffing JSON by its leading brace."""
    if text.lstrip()[:1] == "{":
        return parse_network_json(text)
    return parse_bif(text)
