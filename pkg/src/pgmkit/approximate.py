"""Approximate inference engines and the shared engine dispatch.

Five samplers (rejection, likelihood weighting, self-importance, adaptive
importance, evidence-pre-propagated importance) share one importance-
sampling kernel: evidence nodes are clamped and contribute their
likelihood to the weight, other nodes are drawn from the current
importance function Q with weight factor P/Q. With Q equal to the network
itself the factor is exactly 1, which makes the degenerate cases line up
bitwise (no-update SIS == LW; LW with no evidence has all weights 1.0).

Loopy belief propagation runs a flooding (Jacobi) schedule on the factor
graph: both message halves are computed from the previous iteration's
values, so per-message parallelism cannot change the result.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from ._sampling import (
    SamplePlan,
    epsilon_cutoff,
    run_adaptive,
    run_pls,
    run_weighted,
    tallies_to_marginals,
    uniform_matrix,
)
from ._par import parallel_map
from .core import (
    Evidence,
    Network,
    PotentialTable,
    table_marginalize,
    table_multiply,
    table_reduce,
    validate_evidence,
)
from .errors import (
    AllSamplesRejectedError,
    PgmError,
    ValidationError,
    ZeroTotalWeightError,
)
from .exact import jt_marginals, jt_propagate, build_junction_tree, ve_marginals
from .io_formats import Dataset
from .parameters import _match_columns

MarginalSet = dict[int, PotentialTable]

ENGINES = ("ve", "jt", "lbp", "pls", "lw", "sis", "ais", "epis")


@dataclass
class SamplerConfig:
    """Knobs shared by the sampling engines; every field has a sane default.

    update_interval is the stage length for the adaptive engines (defaults
    to n_samples/10). epsilon_cutoff defaults per engine: 0.04 for the
    adaptive sampler's heuristic init, 0.01 for the pre-propagated one.
    """

    n_samples: int = 100_000
    seed: int = 0
    update_interval: int | None = None
    epsilon_cutoff: float | None = None
    lbp_iters: int = 100
    lbp_tol: float = 1e-6
    lbp_damping: float = 0.0
    learning_rate_start: float = 0.4  # "a"
    learning_rate_end: float = 0.14  # "b"
    stages: int = 10
    burn_in: int | None = None
    blend: float = 0.5

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValidationError("n_samples must be positive")
        if self.update_interval is not None and self.update_interval < 1:
            raise ValidationError("update_interval must be >= 1")
        if self.epsilon_cutoff is not None and not 0 < self.epsilon_cutoff < 0.5:
            raise ValidationError("epsilon_cutoff must be in (0, 0.5)")
        if self.lbp_iters < 1:
            raise ValidationError("lbp_iters must be >= 1")
        if self.lbp_tol <= 0:
            raise ValidationError("lbp_tol must be positive")
        if not 0 <= self.lbp_damping < 1:
            raise ValidationError("lbp_damping must be in [0, 1)")
        if self.learning_rate_start < 0:
            raise ValidationError("learning_rate_start must be >= 0")
        if self.learning_rate_start > 0 and self.learning_rate_end <= 0:
            raise ValidationError("learning_rate_end must be positive")
        if self.stages < 1:
            raise ValidationError("stages must be >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValidationError("burn_in must be >= 0")
        if not 0 < self.blend <= 1:
            raise ValidationError("blend must be in (0, 1]")


@dataclass
class Diagnostics:
    engine: str
    n_samples: int | None = None
    acceptance_rate: float | None = None
    effective_sample_size: float | None = None
    converged: bool | None = None
    iterations: int | None = None

    def to_obj(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _ess(sw: float, sw2: float) -> float:
    return sw * sw / sw2 if sw2 > 0 else 0.0


def probabilistic_logic_sampling(
    net: Network, ev: Evidence | None = None, cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics]:
    """Forward sampling with rejection of evidence-inconsistent samples."""
    cfg = cfg or SamplerConfig()
    ev = validate_evidence(net, ev or {})
    plan = SamplePlan(net)
    U = uniform_matrix(cfg.seed, cfg.n_samples, net.n)
    T, accepted = run_pls(plan, ev, U, 0, cfg.n_samples, workers)
    if accepted == 0:
        raise AllSamplesRejectedError(
            f"all samples rejected (rejection rate 1.000, n={cfg.n_samples})"
        )
    diag = Diagnostics(
        "pls",
        cfg.n_samples,
        acceptance_rate=accepted / cfg.n_samples,
        effective_sample_size=float(accepted),
    )
    return tallies_to_marginals(net, T), diag


def _static_run(
    net: Network,
    ev: Mapping[int, int],
    cfg: SamplerConfig,
    plan: SamplePlan,
    q_rows: dict[int, np.ndarray],
    workers: int,
    engine: str,
) -> tuple[MarginalSet, Diagnostics]:
    """One importance-sampling pass over all samples with a fixed Q."""
    q_cum = {}
    for node in plan.nodes:
        r = q_rows[node.var]
        q_cum[node.var] = node.cum if r is node.rows else np.cumsum(r, axis=1)
    U = uniform_matrix(cfg.seed, cfg.n_samples, net.n)
    T, sw, sw2 = run_weighted(plan, q_rows, q_cum, ev, U, 0, cfg.n_samples, workers)
    if sw <= 0.0:
        raise ZeroTotalWeightError("zero total weight")
    diag = Diagnostics(
        engine, cfg.n_samples, effective_sample_size=_ess(sw, sw2)
    )
    return tallies_to_marginals(net, T), diag


def likelihood_weighting(
    net: Network, ev: Evidence | None = None, cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics]:
    """Clamp evidence, sample the rest forward, weight by the likelihood."""
    cfg = cfg or SamplerConfig()
    ev = validate_evidence(net, ev or {})
    plan = SamplePlan(net)
    return _static_run(net, ev, cfg, plan, plan.p_rows(), workers, "lw")


def self_importance_sampling(
    net: Network, ev: Evidence | None = None, cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics]:
    """Likelihood weighting whose importance function drifts toward the
    running weighted estimates.

    Every update_interval samples, each row of each non-evidence node's Q
    is blended toward the cumulative weighted frequency estimate for that
    parent configuration (convex blend, default factor 0.5); rows whose
    configuration has no weight yet are left alone. If no update fires the
    run is identical to likelihood weighting.
    """
    cfg = cfg or SamplerConfig()
    ev = validate_evidence(net, ev or {})
    plan = SamplePlan(net)
    n = cfg.n_samples
    interval = cfg.update_interval or max(1, n // 10)
    q_rows = plan.p_rows()
    q_cum = {node.var: node.cum for node in plan.nodes}
    U = uniform_matrix(cfg.seed, n, net.n)
    T = np.zeros((net.n, plan.max_card))
    fam = {node.var: np.zeros(node.rows.shape) for node in plan.nodes
           if node.var not in ev}
    sw = sw2 = 0.0
    start = 0
    while start < n:
        stop = min(start + interval, n)
        t, a, b, f = run_adaptive(plan, q_rows, q_cum, ev, U, start, stop, workers)
        T += t
        sw += a
        sw2 += b
        for v, counts in f.items():
            fam[v] += counts
        start = stop
        if start < n and sw > 0.0:
            for node in plan.nodes:
                v = node.var
                if v in ev:
                    continue
                mass = fam[v].sum(axis=1, keepdims=True)
                seen = mass > 0.0
                if not seen.any():
                    continue
                est = np.divide(fam[v], mass, out=np.zeros_like(fam[v]), where=seen)
                blended = (1.0 - cfg.blend) * q_rows[v] + cfg.blend * est
                q_rows[v] = np.where(seen, blended, q_rows[v])
                q_cum[v] = np.cumsum(q_rows[v], axis=1)
    if sw <= 0.0:
        raise ZeroTotalWeightError("zero total weight")
    diag = Diagnostics("sis", n, effective_sample_size=_ess(sw, sw2))
    return tallies_to_marginals(net, T), diag


def _ais_initial_q(
    plan: SamplePlan, ev: Mapping[int, int], eps: float
) -> dict[int, np.ndarray]:
    """The two heuristics: uniform rows for parents of evidence, then a
    probability floor of eps everywhere."""
    net = plan.net
    ev_parents = set()
    for e in ev:
        ev_parents.update(net.parents[e])
    ev_parents -= set(ev)
    q: dict[int, np.ndarray] = {}
    for node in plan.nodes:
        v = node.var
        if v in ev:
            q[v] = node.rows
            continue
        rows = (
            np.full_like(node.rows, 1.0 / node.card)
            if v in ev_parents
            else node.rows
        )
        q[v] = epsilon_cutoff(rows, eps)
    return q


def ais_bn(
    net: Network, ev: Evidence | None = None, cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics]:
    """Adaptive importance sampling with staged learning.

    Stage k's weighted frequency estimates, taken per parent configuration,
    pull the importance CPTs toward the posterior with rate
    eta(k) = a * (b/a)^(k / k_max); early (burn-in) stages only train Q and
    are excluded from the final estimate.
    """
    cfg = cfg or SamplerConfig()
    ev = validate_evidence(net, ev or {})
    plan = SamplePlan(net)
    n = cfg.n_samples
    eps = cfg.epsilon_cutoff if cfg.epsilon_cutoff is not None else 0.04
    a, b = cfg.learning_rate_start, cfg.learning_rate_end
    q_rows = _ais_initial_q(plan, ev, eps)
    if a == 0.0:
        # Degenerate rate: the heuristic-initialized static sampler.
        return _static_run(net, ev, cfg, plan, q_rows, workers, "ais")

    if cfg.update_interval is not None:
        k_max = max(1, math.ceil(n / cfg.update_interval))
    else:
        k_max = cfg.stages
    k_max = min(k_max, n)
    burn = cfg.burn_in if cfg.burn_in is not None else (k_max // 3 if k_max > 1 else 0)
    burn = min(burn, k_max - 1)

    sizes = [n // k_max + (1 if i < n % k_max else 0) for i in range(k_max)]
    q_cum = {v: np.cumsum(r, axis=1) for v, r in q_rows.items()}
    U = uniform_matrix(cfg.seed, n, net.n)
    T = np.zeros((net.n, plan.max_card))
    sw = sw2 = 0.0
    start = 0
    for k in range(1, k_max + 1):
        stop = start + sizes[k - 1]
        t, tw, tw2, f = run_adaptive(plan, q_rows, q_cum, ev, U, start, stop, workers)
        if k > burn:
            T += t
            sw += tw
            sw2 += tw2
        if k < k_max and tw > 0.0:
            eta = a * (b / a) ** (k / k_max)
            for node in plan.nodes:
                v = node.var
                if v in ev:
                    continue
                mass = f[v].sum(axis=1, keepdims=True)
                seen = mass > 0.0
                if not seen.any():
                    continue
                est = np.divide(f[v], mass, out=np.zeros_like(f[v]), where=seen)
                q_rows[v] = np.where(seen, (1.0 - eta) * q_rows[v] + eta * est,
                                     q_rows[v])
                q_cum[v] = np.cumsum(q_rows[v], axis=1)
        start = stop
    if sw <= 0.0:
        raise ZeroTotalWeightError("zero total weight")
    diag = Diagnostics("ais", n, effective_sample_size=_ess(sw, sw2))
    return tallies_to_marginals(net, T), diag


# ---------------------------------------------------------------------------
# Loopy belief propagation


def _lbp_run(net: Network, ev: Mapping[int, int], max_iters: int, tol: float,
             damping: float, workers: int):
    """Flooding sum-product on the Bayesian network's factor graph.

    Returns (factors_of_var, factor->var messages, converged, iterations).
    """
    factors = [table_reduce(net.cpts[i], ev) for i in range(net.n)]
    scopes = [f.scope for f in factors]
    cards = [net.cardinality(v) for v in range(net.n)]
    factors_of: list[list[int]] = [[] for _ in range(net.n)]
    for i, sc in enumerate(scopes):
        for v in sc:
            factors_of[v].append(i)

    def uniform(v: int) -> np.ndarray:
        return np.full(cards[v], 1.0 / cards[v])

    fv = {(i, v): uniform(v) for i, sc in enumerate(scopes) for v in sc}
    vf = {(v, i): uniform(v) for i, sc in enumerate(scopes) for v in sc}
    fv_keys = sorted(fv)
    vf_keys = sorted(vf)

    def normalized(vals: np.ndarray, v: int) -> np.ndarray:
        s = vals.sum()
        return vals / s if s > 0 else uniform(v)

    converged = False
    iters = 0
    for it in range(1, max_iters + 1):
        iters = it

        def factor_to_var(key):
            i, v = key
            t = factors[i]
            for u in scopes[i]:
                if u != v:
                    t = table_multiply(t, PotentialTable((u,), (cards[u],), vf[(u, i)]))
            vals = normalized(table_marginalize(t, [v]).values, v)
            if damping:
                vals = (1.0 - damping) * vals + damping * fv[key]
            return vals

        new_fv = dict(zip(fv_keys, parallel_map(factor_to_var, fv_keys, workers)))

        new_vf = {}
        for v, i in vf_keys:
            prod = np.ones(cards[v])
            for j in factors_of[v]:
                if j != i:
                    prod = prod * fv[(j, v)]
            prod = normalized(prod, v)
            if damping:
                prod = (1.0 - damping) * prod + damping * vf[(v, i)]
            new_vf[(v, i)] = prod

        delta = 0.0
        for key in fv_keys:
            delta = max(delta, float(np.abs(new_fv[key] - fv[key]).max()))
        for key in vf_keys:
            delta = max(delta, float(np.abs(new_vf[key] - vf[key]).max()))
        fv, vf = new_fv, new_vf
        if delta < tol:
            converged = True
            break
    return factors_of, fv, converged, iters


def loopy_belief_propagation(
    net: Network,
    ev: Evidence | None = None,
    max_iters: int = 100,
    tol: float = 1e-6,
    damping: float = 0.0,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics]:
    """Factor-graph sum-product; non-convergence is reported, not raised."""
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    ev = validate_evidence(net, ev or {})
    factors_of, fv, converged, iters = _lbp_run(
        net, ev, max_iters, tol, damping, workers
    )
    marginals: MarginalSet = {}
    for v in range(net.n):
        card = net.cardinality(v)
        belief = np.ones(card)
        for j in factors_of[v]:
            belief = belief * fv[(j, v)]
        s = belief.sum()
        belief = belief / s if s > 0 else np.full(card, 1.0 / card)
        marginals[v] = PotentialTable((v,), (card,), belief)
    diag = Diagnostics("lbp", converged=converged, iterations=iters)
    return marginals, diag


def epis_bn(
    net: Network, ev: Evidence | None = None, cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics]:
    """Importance sampling whose Q is the CPTs reweighted by belief-
    propagation messages arriving from below (children's factors).

    With no evidence the messages are uniform and this is plain forward
    sampling from the prior.
    """
    cfg = cfg or SamplerConfig()
    ev = validate_evidence(net, ev or {})
    plan = SamplePlan(net)
    if not ev:
        marg, diag = _static_run(net, ev, cfg, plan, plan.p_rows(), workers, "epis")
        diag.converged = True
        diag.iterations = 0
        return marg, diag

    eps = cfg.epsilon_cutoff if cfg.epsilon_cutoff is not None else 0.01
    factors_of, fv, converged, iters = _lbp_run(
        net, ev, cfg.lbp_iters, cfg.lbp_tol, cfg.lbp_damping, workers
    )
    q_rows: dict[int, np.ndarray] = {}
    for node in plan.nodes:
        v = node.var
        if v in ev:
            q_rows[v] = node.rows
            continue
        lam = np.ones(node.card)
        for j in factors_of[v]:
            if j != v:
                lam = lam * fv[(j, v)]
        s = lam.sum()
        lam = lam / s if s > 0 else np.full(node.card, 1.0 / node.card)
        rows = node.rows * lam[None, :]
        sums = rows.sum(axis=1, keepdims=True)
        rows = np.where(sums > 0, rows / np.where(sums > 0, sums, 1.0), node.rows)
        q_rows[v] = epsilon_cutoff(rows, eps)
    marg, diag = _static_run(net, ev, cfg, plan, q_rows, workers, "epis")
    diag.converged = converged
    diag.iterations = iters
    return marg, diag


# ---------------------------------------------------------------------------
# Dispatch and classification


def infer_marginals(
    net: Network,
    ev: Evidence | None = None,
    engine: str = "jt",
    query_vars: Sequence[int] | None = None,
    cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[MarginalSet, Diagnostics | None]:
    """Posterior marginals by any engine; samplers compute all variables
    and filter, exact engines compute only what is asked."""
    if engine not in ENGINES:
        raise ValidationError(
            f"unknown engine {engine!r}; expected one of {', '.join(ENGINES)}"
        )
    ev = validate_evidence(net, ev or {})
    if engine == "ve":
        return ve_marginals(net, query_vars, ev, workers), None
    if engine == "jt":
        return jt_marginals(net, query_vars, ev, workers), None
    cfg = cfg or SamplerConfig()
    if engine == "lbp":
        marg, diag = loopy_belief_propagation(
            net, ev, cfg.lbp_iters, cfg.lbp_tol, cfg.lbp_damping, workers
        )
    elif engine == "pls":
        marg, diag = probabilistic_logic_sampling(net, ev, cfg, workers)
    elif engine == "lw":
        marg, diag = likelihood_weighting(net, ev, cfg, workers)
    elif engine == "sis":
        marg, diag = self_importance_sampling(net, ev, cfg, workers)
    elif engine == "ais":
        marg, diag = ais_bn(net, ev, cfg, workers)
    else:
        marg, diag = epis_bn(net, ev, cfg, workers)
    if query_vars is not None:
        marg = {v: marg[v] for v in query_vars}
    return marg, diag


def classify(
    net: Network,
    data: Dataset,
    class_var: int,
    engine: str = "jt",
    cfg: SamplerConfig | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, float]:
    """Predict class_var per row from all other columns as evidence.

    Returns (predictions, accuracy against the data's own class column).
    """
    if not 0 <= class_var < net.n:
        raise ValidationError(f"class variable {class_var} out of range")
    if engine not in ENGINES:
        raise ValidationError(
            f"unknown engine {engine!r}; expected one of {', '.join(ENGINES)}"
        )
    cols = _match_columns(net.variables, data)
    ev_vars = [v for v in range(net.n) if v != class_var]
    tree = build_junction_tree(net) if engine == "jt" else None
    preds = np.empty(data.n_rows, dtype=np.int32)
    for r in range(data.n_rows):
        ev = {v: int(cols[v, r]) for v in ev_vars}
        try:
            if tree is not None:
                post = jt_propagate(tree, ev, workers).query(class_var)
            else:
                post = infer_marginals(
                    net, ev, engine, [class_var], cfg, workers
                )[0][class_var]
        except PgmError as e:
            raise type(e)(f"row {r}: {e}") from e
        preds[r] = int(np.argmax(post.values))
    accuracy = float(np.mean(preds == cols[class_var]))
    return preds, accuracy
