"""Command-line frontend.

Conventions: machine-readable results are JSON on stdout, diagnostics and
errors go to stderr. Exit codes: 0 success, 1 runtime or data error,
2 usage error (argparse failures, out-of-range flag values, unknown
variable or state names).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from ._par import resolve_workers
from .approximate import (
    ENGINES,
    SamplerConfig,
    classify,
    infer_marginals,
)
from .core import Network
from .errors import PgmError, ValidationError
from .io_formats import (
    Dataset,
    convert,
    load_csv,
    parse_bif,
    parse_structure_json,
    read_network_text,
    structure_to_json,
    write_bif,
    write_csv,
)
from .parameters import fit_mle
from .simulate import generate_dataset, hellinger, mean_hellinger, shd
from .structure import PdagGraph, dag_to_cpdag, learn_structure


class _UsageError(Exception):
    """Raised for post-argparse problems that are still the caller's fault."""


def _alpha(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float {text!r}") from None
    if not 0.0 < val < 1.0:
        raise argparse.ArgumentTypeError("alpha must be in (0,1)")
    return val


def _nonneg_float(name: str):
    def parse(text: str) -> float:
        try:
            val = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid float {text!r}") from None
        if val < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0")
        return val

    return parse


def _positive_int(name: str):
    def parse(text: str) -> int:
        try:
            val = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
        if val < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return val

    return parse


def _nonneg_int(name: str):
    def parse(text: str) -> int:
        try:
            val = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
        if val < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0")
        return val

    return parse


def _print_json(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _load_network(path: str) -> Network:
    return read_network_text(Path(path).read_text())


def _load_dataset(path: str) -> Dataset:
    return load_csv(Path(path).read_text())


def _parse_evidence(net: Network, text: str | None) -> dict[int, int]:
    ev: dict[int, int] = {}
    if not text:
        return ev
    for item in text.split(","):
        if "=" not in item:
            raise _UsageError(
                f"evidence item {item!r} is not of the form VAR=state"
            )
        name, state = item.split("=", 1)
        try:
            vid = net.var_id(name.strip())
            ev[vid] = net.variables[vid].state_index(state.strip())
        except ValidationError as e:
            raise _UsageError(str(e)) from None
    return ev


def _parse_query(net: Network, text: str | None, ev: dict[int, int]) -> list[int]:
    if not text:
        return [v for v in range(net.n) if v not in ev]
    out = []
    for name in text.split(","):
        try:
            out.append(net.var_id(name.strip()))
        except ValidationError as e:
            raise _UsageError(str(e)) from None
    return out


def _marginals_obj(net: Network, marg) -> dict:
    out = {}
    for v in sorted(marg):
        var = net.variables[v]
        out[var.name] = {
            s: float(p) for s, p in zip(var.state_names, marg[v].values)
        }
    return out


# ---------------------------------------------------------------------------
# Commands


def _cmd_learn_structure(args) -> int:
    data = _load_dataset(args.data)
    workers = resolve_workers(args.workers)
    t0 = time.perf_counter()
    result = learn_structure(data, args.alpha, args.depth, workers)
    wall = time.perf_counter() - t0
    names = [v.name for v in data.variables]

    cpdag_obj = {"format": "pgmkit-cpdag", **result.cpdag.to_obj(names)}
    Path(f"{args.out}.cpdag.json").write_text(json.dumps(cpdag_obj, indent=2) + "\n")
    Path(f"{args.out}.dag.bif-structure.json").write_text(
        structure_to_json(data.variables, result.dag_parents, name=Path(args.data).stem)
    )
    _print_json(
        {
            "edges": result.cpdag.n_edges(),
            "ci_tests": result.ci_tests,
            "wall_time_s": wall,
        }
    )
    return 0


def _load_structure(path: str):
    text = Path(path).read_text()
    if text.lstrip()[:1] == "{":
        return parse_structure_json(text)
    net = parse_bif(text)
    return net.variables, net.parents


def _cmd_learn_params(args) -> int:
    data = _load_dataset(args.data)
    variables, parents = _load_structure(args.structure)
    workers = resolve_workers(args.workers)
    net = fit_mle(
        variables, parents, data, args.pseudocount, workers,
        name=Path(args.out).stem,
    )
    Path(args.out).write_text(write_bif(net))
    _print_json({"variables": net.n, "rows": data.n_rows, "out": args.out})
    return 0


def _cmd_infer(args) -> int:
    net = _load_network(args.model)
    ev = _parse_evidence(net, args.evidence)
    query = _parse_query(net, args.query, ev)
    workers = resolve_workers(args.workers)
    try:
        cfg = SamplerConfig(
            n_samples=args.n,
            seed=args.seed,
            update_interval=args.update_interval,
            epsilon_cutoff=args.epsilon_cutoff,
            lbp_iters=args.lbp_iters,
            lbp_tol=args.lbp_tol,
        )
    except ValidationError as e:
        raise _UsageError(str(e)) from None
    marg, diag = infer_marginals(net, ev, args.engine, query, cfg, workers)
    obj = {"marginals": _marginals_obj(net, marg)}
    if diag is not None:
        obj["diagnostics"] = diag.to_obj()
        if diag.converged is False:
            print("warning: belief propagation unconverged", file=sys.stderr)
    _print_json(obj)
    return 0


def _cmd_generate(args) -> int:
    net = _load_network(args.model)
    ds = generate_dataset(net, args.n, args.seed, resolve_workers(args.workers))
    Path(args.out).write_text(write_csv(ds))
    _print_json({"rows": ds.n_rows, "variables": net.n, "out": args.out})
    return 0


def _graph_from_file(path: str) -> tuple[PdagGraph, list[str]]:
    """CPDAG JSON is used as-is; networks/structures become their CPDAG."""
    text = Path(path).read_text()
    if text.lstrip()[:1] == "{":
        obj = json.loads(text)
        if obj.get("format") == "pgmkit-cpdag" or "edges" in obj:
            return PdagGraph.from_obj(obj)
        variables, parents = parse_structure_json(text)
        return dag_to_cpdag(parents), [v.name for v in variables]
    net = parse_bif(text)
    return dag_to_cpdag(net.parents), [v.name for v in net.variables]


def _cmd_eval_shd(args) -> int:
    g1, names1 = _graph_from_file(args.learned)
    g2, names2 = _graph_from_file(args.truth)
    if sorted(names1) != sorted(names2):
        raise ValidationError(
            "variable-set mismatch between learned and truth graphs"
        )
    if names1 != names2:  # align the second graph to the first's order
        perm = {names2.index(s): k for k, s in enumerate(names1)}
        g2b = PdagGraph(g2.n)
        for (i, j), mark in g2.edge_marks().items():
            if mark == 0:
                g2b.add_undirected(perm[i], perm[j])
            elif mark == 1:
                g2b.set_directed(perm[i], perm[j])
            else:
                g2b.set_directed(perm[j], perm[i])
        g2 = g2b
    _print_json({"shd": shd(g1, g2)})
    return 0


def _marginals_from_file(path: str) -> dict[str, dict[str, float]]:
    obj = json.loads(Path(path).read_text())
    if "marginals" in obj:
        obj = obj["marginals"]
    if not isinstance(obj, dict) or not obj:
        raise ValidationError(f"{path}: not a marginals document")
    return obj


def _cmd_eval_hellinger(args) -> int:
    from .core import PotentialTable

    a = _marginals_from_file(args.a)
    b = _marginals_from_file(args.b)
    if set(a) != set(b):
        raise ValidationError("marginal sets cover different variables")
    ma, mb = {}, {}
    for k, name in enumerate(sorted(a)):
        da, db = a[name], b[name]
        if set(da) != set(db):
            raise ValidationError(f"state sets differ for {name!r}")
        states = sorted(da)
        ma[k] = PotentialTable((k,), (len(states),), [da[s] for s in states])
        mb[k] = PotentialTable((k,), (len(states),), [db[s] for s in states])
    _print_json({"mean_hellinger": mean_hellinger(ma, mb)})
    return 0


def _cmd_convert(args) -> int:
    net = _load_network(getattr(args, "in"))
    Path(args.out).write_text(convert(net, args.to))
    _print_json({"out": args.out, "format": args.to})
    return 0


def _cmd_classify(args) -> int:
    net = _load_network(args.model)
    data = _load_dataset(args.data)
    try:
        class_var = net.var_id(args.class_var)
    except ValidationError as e:
        raise _UsageError(str(e)) from None
    cfg = SamplerConfig(n_samples=args.n, seed=args.seed)
    _, accuracy = classify(
        net, data, class_var, args.engine, cfg, resolve_workers(args.workers)
    )
    _print_json(
        {
            "accuracy": accuracy,
            "n_rows": data.n_rows,
            "engine": args.engine,
            "class_var": args.class_var,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_workers(p):
    p.add_argument(
        "--workers",
        type=_nonneg_int("workers"),
        default=0,
        help="worker threads; 0 means all available cores (default 0)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgmkit",
        description="Learning, inference, and evaluation for discrete "
        "probabilistic graphical models.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn-structure", help="PC-stable CPDAG discovery from CSV")
    p.add_argument("--data", required=True, help="CSV dataset (header row)")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument(
        "--depth", type=int, default=-1,
        help="max conditioning-set size; -1 = unlimited (default)",
    )
    _add_workers(p)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=_cmd_learn_structure)

    p = sub.add_parser("learn-params", help="fit CPTs for a fixed structure")
    p.add_argument("--data", required=True)
    p.add_argument("--structure", required=True, help="structure JSON or BIF file")
    p.add_argument(
        "--pseudocount", type=_nonneg_float("pseudocount"), default=1.0
    )
    _add_workers(p)
    p.add_argument("--out", required=True, help="output BIF path")
    p.set_defaults(func=_cmd_learn_params)

    p = sub.add_parser("infer", help="posterior marginals given evidence")
    p.add_argument("--model", required=True, help="BIF or network JSON")
    p.add_argument("--engine", choices=ENGINES, default="jt")
    p.add_argument("--evidence", help="comma-separated VAR=state pairs")
    p.add_argument("--query", help="comma-separated variable names (default: all non-evidence)")
    p.add_argument("--n", type=_positive_int("n"), default=100_000)
    p.add_argument("--seed", type=_nonneg_int("seed"), default=0)
    p.add_argument("--update-interval", type=_positive_int("update-interval"))
    p.add_argument("--epsilon-cutoff", type=float)
    p.add_argument("--lbp-iters", type=_positive_int("lbp-iters"), default=100)
    p.add_argument("--lbp-tol", type=float, default=1e-6)
    _add_workers(p)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("generate", help="forward-sample a CSV dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive_int("n"), required=True)
    p.add_argument("--seed", type=_nonneg_int("seed"), default=0)
    _add_workers(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("eval", help="evaluation metrics")
    esub = p.add_subparsers(dest="metric", required=True)
    q = esub.add_parser("shd", help="structural Hamming distance between graphs")
    q.add_argument("--learned", required=True)
    q.add_argument("--truth", required=True)
    q.set_defaults(func=_cmd_eval_shd)
    q = esub.add_parser("hellinger", help="mean Hellinger distance between marginal files")
    q.add_argument("--a", required=True)
    q.add_argument("--b", required=True)
    q.set_defaults(func=_cmd_eval_hellinger)

    p = sub.add_parser("convert", help="rewrite a network in another format")
    p.add_argument("--in", required=True, dest="in")
    p.add_argument("--to", required=True, choices=("bif", "dot", "json"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("classify", help="predict a class variable per data row")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--class-var", required=True)
    p.add_argument("--engine", choices=ENGINES, default="jt")
    p.add_argument("--n", type=_positive_int("n"), default=10_000)
    p.add_argument("--seed", type=_nonneg_int("seed"), default=0)
    _add_workers(p)
    p.set_defaults(func=_cmd_classify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PgmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON input: {e}", file=sys.stderr)
        return 1


def run() -> None:  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":
    run()
