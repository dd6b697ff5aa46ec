import numpy as np
import pytest

from fragility.errors import ParamError
from fragility.estimators import spatial_did
from fragility.exposures import aggregate_exposures
from fragility.graph import build_graph, is_connected, mean_pair_exposure
from fragility.spectrum import lambda2_dense, lambda2_lanczos
from fragility.synth import (
    ConsolidationScenario,
    CrisisPanelSpec,
    consolidation_pair,
    crisis_panel,
    decay_dataset,
    exposure_history,
    make_regular,
    observed_mask,
    ring_lattice_lambda2,
)


def test_make_regular_cycle_closed_form():
    g = make_regular(8, 2, 1.0)
    assert lambda2_lanczos(g).lambda2 == pytest.approx(2 * (1 - np.cos(2 * np.pi / 8)), rel=1e-9)
    g4 = make_regular(4, 2, 1.0)
    assert lambda2_lanczos(g4).lambda2 == pytest.approx(2.0, rel=1e-9)


def test_make_regular_weight_scaling():
    lam1 = lambda2_dense(make_regular(10, 2, 1.0)).lambda2
    lam3 = lambda2_dense(make_regular(10, 2, 3.0)).lambda2
    assert lam3 == pytest.approx(3 * lam1, rel=1e-10)


def test_make_regular_matches_circulant_formula():
    for n, d, w in [(9, 2, 1.0), (12, 4, 0.7), (20, 6, 2.0)]:
        g = make_regular(n, d, w)
        assert lambda2_dense(g).lambda2 == pytest.approx(ring_lattice_lambda2(n, d, w), rel=1e-9)


def test_make_regular_rejects_bad_degree():
    with pytest.raises(ParamError):
        make_regular(6, 3, 1.0)  # odd
    with pytest.raises(ParamError):
        make_regular(6, 6, 1.0)  # degree >= n


def test_consolidation_identity_scenario():
    sc = ConsolidationScenario(n0=60, n1=60, w0=8.0, w1=8.0, seed=1)
    g0, g1 = consolidation_pair(sc)
    lam0 = lambda2_dense(g0).lambda2
    lam1 = lambda2_dense(g1).lambda2
    assert lam1 == pytest.approx(lam0, rel=1e-9)


def test_consolidation_intensity_targets_hit():
    for topology, param in (("ring_lattice", None), ("erdos_renyi", 0.15), ("core_periphery", 0.3)):
        sc = ConsolidationScenario(n0=60, n1=40, w0=5.0, w1=11.0, topology=topology, topology_param=param, seed=2)
        g0, g1 = consolidation_pair(sc)
        assert mean_pair_exposure(g0) == pytest.approx(5.0, rel=0.05)
        assert mean_pair_exposure(g1) == pytest.approx(11.0, rel=0.05)
        assert is_connected(g0) and is_connected(g1)


def test_consolidation_ratio_follows_intensity_over_size_scaling():
    sc = ConsolidationScenario(n0=296, n1=156, w0=12.6, w1=47.3, seed=0)
    g0, g1 = consolidation_pair(sc)
    ratio = lambda2_dense(g1).lambda2 / lambda2_dense(g0).lambda2
    assert ratio == pytest.approx(sc.predicted_ratio(), rel=0.15)


def test_consolidation_node_reduction_alone_raises_lambda2():
    # under the w/n scaling the ratio grows as n falls at fixed intensity
    sc = ConsolidationScenario(n0=120, n1=60, w0=10.0, w1=10.0, seed=4)
    g0, g1 = consolidation_pair(sc)
    assert lambda2_dense(g1).lambda2 > lambda2_dense(g0).lambda2


def test_consolidation_rejects_growth():
    with pytest.raises(ParamError):
        ConsolidationScenario(n0=50, n1=60, w0=1.0, w1=1.0)


def test_crisis_panel_deterministic():
    spec = CrisisPanelSpec(seed=9)
    a = crisis_panel(spec)
    b = crisis_panel(spec)
    assert np.array_equal(a.panel.lambda2, b.panel.lambda2)
    assert np.array_equal(a.outcomes.outcomes, b.outcomes.outcomes)
    for name in a.panel.controls:
        assert np.array_equal(a.panel.controls[name], b.panel.controls[name])


def test_crisis_panel_zero_spillover_truths_coincide():
    spec = CrisisPanelSpec(spillover_per_link=0.0, seed=1)
    truth = crisis_panel(spec).truth
    assert truth.naive_effect == truth.direct_effect


def test_crisis_panel_zero_noise_exact_recovery():
    spec = CrisisPanelSpec(T=40, crisis_quarter=20, direct_effect=1176.0, noise_sigma=0.0, seed=5)
    result = crisis_panel(spec)
    report = spatial_did(result.panel, reps=50, seed=5)
    assert report.coefficients["post"] == pytest.approx(1176.0, rel=1e-9)


def test_crisis_panel_pretrend_linear_when_noise_free():
    spec = CrisisPanelSpec(
        T=40, crisis_quarter=20, direct_effect=500.0, noise_sigma=0.0, trend_slope=7.0,
        controls_model={}, seed=5,
    )
    panel = crisis_panel(spec).panel
    pre = panel.quarters < panel.crisis_quarter
    y = panel.lambda2[pre]
    diffs = np.diff(y)
    assert np.allclose(diffs, 7.0, atol=1e-9)


def test_naive_ground_truth_expectation_monte_carlo():
    # direct 1000, spillover 700, mean degree 1.0 -> expected naive truth 1700
    draws = [
        crisis_panel(
            CrisisPanelSpec(
                direct_effect=1000.0, spillover_per_link=700.0, mean_degree=1.0,
                n_institutions=40, seed=s,
            )
        ).truth.naive_effect
        for s in range(300)
    ]
    assert np.mean(draws) == pytest.approx(1700.0, abs=30.0)


def test_crisis_panel_interior_break_enforced():
    with pytest.raises(ParamError):
        CrisisPanelSpec(T=12, crisis_quarter=10)
    with pytest.raises(ParamError):
        CrisisPanelSpec(T=11)


def test_decay_dataset_kappa_zero_constant_in_distance():
    data = decay_dataset(kappa=0.0, alpha=0.5, beta=2.0, gamma_net=0.3, n_pairs=100, seed=3)
    expected = 0.5 + 2.0 + 0.3 * data.network_distance
    assert np.allclose(data.delta_outcome, expected, atol=1e-12)


def test_decay_dataset_deterministic():
    a = decay_dataset(kappa=0.01, alpha=0.0, beta=1.0, gamma_net=0.1, seed=6)
    b = decay_dataset(kappa=0.01, alpha=0.0, beta=1.0, gamma_net=0.1, seed=6)
    assert np.array_equal(a.distance_km, b.distance_km)
    assert np.array_equal(a.delta_outcome, b.delta_outcome)


def test_exposure_history_valid_connected_panel():
    panel = exposure_history(n=12, T=4, crisis_quarter=2, seed=3)
    assert len(panel.institutions) == 12
    assert panel.quarters == [0, 1, 2, 3]
    for q in panel.quarters:
        E = aggregate_exposures(panel, q)
        g = build_graph(E, "geometric_mean")
        assert g.n == 12
        assert is_connected(g)
    again = exposure_history(n=12, T=4, crisis_quarter=2, seed=3)
    assert aggregate_exposures(again, 1).tolist() == aggregate_exposures(panel, 1).tolist()


def test_observed_mask_fraction_and_determinism():
    panel = exposure_history(n=10, T=3, crisis_quarter=1, seed=2)
    mask = observed_mask(panel, fraction=0.5, seed=4)
    assert mask == observed_mask(panel, fraction=0.5, seed=4)
    assert 0.3 <= len(mask) / len(panel.records) <= 0.7
    assert all(key in {(r.quarter, r.lender, r.borrower) for r in panel.records} for key in mask)
