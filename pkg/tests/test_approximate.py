import numpy as np
import pytest

import pgmkit as pk
from pgmkit._sampling import epsilon_cutoff, uniform_matrix
from pgmkit.approximate import _ais_initial_q, _static_run
from pgmkit._sampling import SamplePlan

import _helpers as H


def cfg(n, seed=0, **kw):
    return pk.SamplerConfig(n_samples=n, seed=seed, **kw)


def values_of(marginals):
    return {v: t.values for v, t in marginals.items()}


def assert_marginals_equal(a, b):
    assert a.keys() == b.keys()
    for v in a:
        np.testing.assert_array_equal(a[v].values, b[v].values)


# ---------------------------------------------------------------------------
# probabilistic logic sampling


def test_pls_prior_estimate(ab_net):
    marg, diag = pk.probabilistic_logic_sampling(ab_net, {}, cfg(200_000))
    assert marg[1].values[1] == pytest.approx(0.41, abs=0.01)
    assert diag.acceptance_rate == 1.0


def test_pls_acceptance_rate_tracks_evidence_probability(ab_net):
    _, diag = pk.probabilistic_logic_sampling(ab_net, {0: 1}, cfg(200_000))
    assert diag.acceptance_rate == pytest.approx(0.3, abs=0.01)


def test_pls_rejects_everything_on_impossible_evidence():
    vs = H.make_variables(2, [2, 2])
    det = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[1.0, 0.0]]),
            pk.cpt_from_rows(vs, 1, [0], [[1.0, 0.0], [0.0, 1.0]]),
        ],
    )
    with pytest.raises(pk.AllSamplesRejectedError, match="rejection rate 1.000"):
        pk.probabilistic_logic_sampling(det, {1: 1}, cfg(1000))


# ---------------------------------------------------------------------------
# likelihood weighting


def test_lw_posterior_estimate(ab_net):
    marg, _ = pk.likelihood_weighting(ab_net, {1: 1}, cfg(200_000))
    assert marg[0].values[1] == pytest.approx(0.6585, abs=0.01)


def test_lw_without_evidence_has_unit_weights(ab_net):
    n = 10_000
    _, diag = pk.likelihood_weighting(ab_net, {}, cfg(n))
    # all weights exactly 1.0 -> ESS is exactly n
    assert diag.effective_sample_size == float(n)


def test_lw_matches_pls_tallies_without_evidence(bench8):
    n = 50_000
    lw, _ = pk.likelihood_weighting(bench8, {}, cfg(n))
    pls, _ = pk.probabilistic_logic_sampling(bench8, {}, cfg(n))
    assert_marginals_equal(lw, pls)


def test_lw_zero_total_weight():
    vs = H.make_variables(2, [2, 2])
    det = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[1.0, 0.0]]),
            pk.cpt_from_rows(vs, 1, [0], [[1.0, 0.0], [0.0, 1.0]]),
        ],
    )
    with pytest.raises(pk.ZeroTotalWeightError, match="zero total weight"):
        pk.likelihood_weighting(det, {1: 1}, cfg(1000))


def test_lw_ess_matches_hand_computed_weights(ab_net):
    n = 4096
    marg, diag = pk.likelihood_weighting(ab_net, {1: 1}, cfg(n))
    # replicate the kernel by hand: column 0 of the uniform matrix drives A
    u = uniform_matrix(0, n, 2)[:, 0]
    a = (u >= 0.7).astype(int)  # P(A=1)=0.3, CDF inversion
    w = np.where(a == 1, 0.9, 0.2)  # P(B=1 | A)
    assert diag.effective_sample_size == pytest.approx(
        w.sum() ** 2 / (w * w).sum(), rel=1e-12
    )
    np.testing.assert_allclose(
        marg[0].values,
        [w[a == 0].sum() / w.sum(), w[a == 1].sum() / w.sum()],
        rtol=1e-12,
    )


# ---------------------------------------------------------------------------
# self-importance sampling


def test_sis_without_updates_is_likelihood_weighting(bench8):
    n = 20_000
    ev = {7: 1}
    lw, lw_diag = pk.likelihood_weighting(bench8, ev, cfg(n))
    sis, sis_diag = pk.self_importance_sampling(
        bench8, ev, cfg(n, update_interval=n)
    )
    assert_marginals_equal(lw, sis)
    assert sis_diag.effective_sample_size == lw_diag.effective_sample_size


def test_sis_prior_estimate(bench8):
    marg, _ = pk.self_importance_sampling(bench8, {}, cfg(200_000))
    exact = pk.jt_marginals(bench8)
    for v in range(bench8.n):
        np.testing.assert_allclose(marg[v].values, exact[v].values, atol=0.01)


def test_sis_no_worse_than_lw_on_unlikely_evidence(rare8):
    # fixed-seed regression on a rare-evidence chain
    n = 200_000
    ev = {3: 1, 4: 0, 7: 1}
    exact = pk.jt_marginals(rare8, ev=ev)
    lw, _ = pk.likelihood_weighting(rare8, ev, cfg(n))
    sis, _ = pk.self_importance_sampling(rare8, ev, cfg(n))
    assert pk.mean_hellinger(sis, exact) <= pk.mean_hellinger(lw, exact)


# ---------------------------------------------------------------------------
# AIS-BN


def test_epsilon_cutoff_pinned_example():
    rows = np.array([[0.001, 0.999]])
    out = epsilon_cutoff(rows, 0.04)
    np.testing.assert_allclose(out, [[0.04, 0.96]], atol=1e-12)


def test_epsilon_cutoff_leaves_safe_rows_alone():
    rows = np.array([[0.3, 0.7], [0.04, 0.96]])
    np.testing.assert_array_equal(epsilon_cutoff(rows, 0.04), rows)


def test_epsilon_cutoff_rows_stay_normalized(rng):
    rows = rng.dirichlet([0.3] * 4, size=50)
    out = epsilon_cutoff(rows, 0.04)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
    # floored entries sit at the cutoff; the rest shrink pro rata
    small = rows < 0.04
    np.testing.assert_allclose(out[small], 0.04, rtol=1e-14)
    assert (out[~small] <= rows[~small] + 1e-14).all()
    assert out.min() > 0


def test_ais_zero_learning_rate_is_the_static_heuristic_sampler(bench8):
    n = 30_000
    ev = {6: 1, 7: 0}
    c = cfg(n, learning_rate_start=0.0)
    got, got_diag = pk.ais_bn(bench8, ev, c)
    plan = SamplePlan(bench8)
    q_rows = _ais_initial_q(plan, ev, 0.04)
    want, want_diag = _static_run(bench8, ev, c, plan, q_rows, 1, "ais")
    assert_marginals_equal(got, want)
    assert got_diag.effective_sample_size == want_diag.effective_sample_size


def test_ais_parents_of_evidence_become_uniform(bench8):
    plan = SamplePlan(bench8)
    q = _ais_initial_q(plan, {7: 0}, 0.04)
    # node 6 is 7's parent: its proposal rows turn uniform
    np.testing.assert_allclose(q[6], 0.5, atol=1e-12)
    # node 7 is evidence: proposal untouched (clamped during sampling)
    np.testing.assert_array_equal(q[7], plan.p_rows()[7])


def test_ais_recovers_posterior(bench8):
    ev = {6: 1, 7: 0}
    exact = pk.jt_marginals(bench8, ev=ev)
    marg, diag = pk.ais_bn(bench8, ev, cfg(100_000))
    assert pk.mean_hellinger(marg, exact) <= 0.05
    assert diag.n_samples == 100_000


# ---------------------------------------------------------------------------
# EPIS-BN


def test_epis_without_evidence_matches_prior_sampler(bench8):
    n = 20_000
    epis, diag = pk.epis_bn(bench8, {}, cfg(n))
    lw, _ = pk.likelihood_weighting(bench8, {}, cfg(n))
    assert_marginals_equal(epis, lw)
    assert diag.converged is True
    assert diag.iterations == 0


def test_epis_on_polytree_has_near_perfect_proposal():
    rng = np.random.default_rng(42)
    net = H.random_polytree_network(rng, 8)
    ev = {7: 0}
    n = 20_000
    marg, diag = pk.epis_bn(net, ev, cfg(n))
    assert diag.effective_sample_size >= 0.99 * n
    exact = pk.jt_marginals(net, ev=ev)
    assert pk.mean_hellinger(marg, exact) <= 0.02


def test_epis_beats_lw_on_rare_evidence(rare8):
    n = 100_000
    ev = {3: 1, 4: 0, 7: 1}
    exact = pk.jt_marginals(rare8, ev=ev)
    lw, _ = pk.likelihood_weighting(rare8, ev, cfg(n))
    epis, _ = pk.epis_bn(rare8, ev, cfg(n))
    assert pk.mean_hellinger(epis, exact) <= pk.mean_hellinger(lw, exact)


# ---------------------------------------------------------------------------
# loopy belief propagation


def test_lbp_exact_on_chain(chain3):
    ev = {2: 1}
    marg, diag = pk.loopy_belief_propagation(chain3, ev)
    assert diag.converged
    exact = pk.ve_marginals(chain3, ev=ev)
    for v in range(chain3.n):
        np.testing.assert_allclose(marg[v].values, exact[v].values, atol=1e-8)


def test_lbp_root_beliefs_equal_priors_without_evidence(bench8):
    marg, _ = pk.loopy_belief_propagation(bench8)
    np.testing.assert_allclose(marg[0].values, [0.65, 0.35], atol=1e-6)
    np.testing.assert_allclose(marg[1].values, [0.35, 0.65], atol=1e-6)


def test_lbp_huge_tolerance_stops_after_one_iteration(chain3):
    marg, diag = pk.loopy_belief_propagation(chain3, {}, max_iters=100, tol=1e9)
    assert diag.converged
    assert diag.iterations == 1


def test_lbp_on_loopy_graph_returns_normalized_beliefs(bench8):
    marg, diag = pk.loopy_belief_propagation(bench8, {7: 1})
    for v in range(bench8.n):
        assert marg[v].values.sum() == pytest.approx(1.0, abs=1e-9)
    assert isinstance(diag.converged, bool)


def test_lbp_validates_arguments(chain3):
    with pytest.raises(pk.ValidationError):
        pk.loopy_belief_propagation(chain3, {}, max_iters=0)
    with pytest.raises(pk.ValidationError):
        pk.loopy_belief_propagation(chain3, {}, tol=0.0)


def test_lbp_damping_converges_to_same_fixpoint(chain3):
    ev = {2: 0}
    plain, _ = pk.loopy_belief_propagation(chain3, ev)
    damped, diag = pk.loopy_belief_propagation(chain3, ev, damping=0.5)
    assert diag.converged
    for v in range(chain3.n):
        np.testing.assert_allclose(plain[v].values, damped[v].values, atol=1e-5)


# ---------------------------------------------------------------------------
# worker invariance (bitwise), all samplers


@pytest.mark.parametrize("engine", ["pls", "lw", "sis", "ais", "epis", "lbp"])
def test_sampler_worker_invariance(engine, bench8):
    ev = {7: 1}
    c = cfg(30_000)
    runs = []
    for w in (1, 2, 8):
        marg, diag = pk.infer_marginals(bench8, ev, engine, cfg=c, workers=w)
        runs.append((values_of(marg), diag))
    for vals, diag in runs[1:]:
        assert vals.keys() == runs[0][0].keys()
        for v in vals:
            np.testing.assert_array_equal(vals[v], runs[0][0][v])
        assert diag == runs[0][1]


# ---------------------------------------------------------------------------
# dispatch and configuration


def test_infer_marginals_rejects_unknown_engine(ab_net):
    with pytest.raises(pk.ValidationError, match="unknown engine"):
        pk.infer_marginals(ab_net, engine="gibbs")


def test_infer_marginals_filters_query_vars(bench8):
    marg, _ = pk.infer_marginals(bench8, {0: 1}, "lw", query_vars=[3, 5], cfg=cfg(1000))
    assert sorted(marg) == [3, 5]


def test_exact_engines_have_no_diagnostics(ab_net):
    _, diag = pk.infer_marginals(ab_net, engine="ve")
    assert diag is None
    _, diag = pk.infer_marginals(ab_net, engine="jt")
    assert diag is None


def test_sampler_config_validation():
    with pytest.raises(pk.ValidationError):
        pk.SamplerConfig(n_samples=0)
    with pytest.raises(pk.ValidationError, match=r"epsilon_cutoff must be in \(0, 0.5\)"):
        pk.SamplerConfig(epsilon_cutoff=0.7)
    with pytest.raises(pk.ValidationError):
        pk.SamplerConfig(update_interval=0)
    with pytest.raises(pk.ValidationError):
        pk.SamplerConfig(lbp_damping=1.0)
    with pytest.raises(pk.ValidationError):
        pk.SamplerConfig(blend=0.0)


def test_diagnostics_to_obj_drops_missing_fields():
    d = pk.Diagnostics("lw", n_samples=10, effective_sample_size=5.0)
    assert d.to_obj() == {
        "engine": "lw",
        "n_samples": 10,
        "effective_sample_size": 5.0,
    }


def test_all_marginals_sum_to_one(bench8):
    for engine in pk.ENGINES:
        marg, _ = pk.infer_marginals(bench8, {6: 1}, engine, cfg=cfg(5000))
        for t in marg.values():
            assert t.values.sum() == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# classification


def test_classify_beats_majority_baseline(bench8):
    ds = pk.generate_dataset(bench8, 1000, seed=21)
    _, acc = pk.classify(bench8, ds, class_var=3, engine="jt")
    counts = np.bincount(ds.columns[3], minlength=2)
    baseline = counts.max() / ds.n_rows
    assert acc >= baseline


def test_classify_exact_engines_agree(bench8):
    ds = pk.generate_dataset(bench8, 200, seed=22)
    preds_jt, acc_jt = pk.classify(bench8, ds, class_var=6, engine="jt")
    preds_ve, acc_ve = pk.classify(bench8, ds, class_var=6, engine="ve")
    np.testing.assert_array_equal(preds_jt, preds_ve)
    assert acc_jt == acc_ve


def test_classify_deterministic_row():
    vs = H.make_variables(2, [2, 2])
    det = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[0.5, 0.5]]),
            pk.cpt_from_rows(vs, 1, [0], [[1.0, 0.0], [0.0, 1.0]]),
        ],
    )
    ds = pk.Dataset(vs, np.array([[1], [1]], dtype=np.int32))
    preds, acc = pk.classify(det, ds, class_var=0)
    assert preds.tolist() == [1]
    assert acc == 1.0


def test_classify_error_carries_row_index():
    vs = H.make_variables(2, [2, 2])
    det = pk.Network(
        vs,
        [[], [0]],
        [
            pk.cpt_from_rows(vs, 0, [], [[1.0, 0.0]]),
            pk.cpt_from_rows(vs, 1, [0], [[1.0, 0.0], [0.0, 1.0]]),
        ],
    )
    # row 0 is consistent; row 1 carries impossible evidence B=1
    ds = pk.Dataset(vs, np.array([[0, 0], [0, 1]], dtype=np.int32))
    with pytest.raises(pk.ImpossibleEvidenceError, match="row 1"):
        pk.classify(det, ds, class_var=0)
