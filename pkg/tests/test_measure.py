import json

import numpy as np
import pytest

from latlab import (
    ConfigError,
    DomainSpec,
    affine_map,
    bounds_report,
    builtin_map,
    estimate_k_integral,
    estimate_near_fixed_measure,
    estimate_VS,
    make_domain,
    q_grid_scan,
)
from latlab.measure import check_hypotheses, measure_bounds, sample_offsets, sweep_offsets

from _corpus import corpus, quarter
from oracles import near_fixed_quadrature, q_grid_oracle

N = 20_000

# near-fixed volumes h^d / det(I - A) for the affine corpus maps, whose
# near-fixed parallelograms lie inside the domain
AFFINE_VNEAR = {"A1": 16 / 9, "A2": 8 / 3, "A3": 5 / 8}


def within(est, truth, k=3.0):
    return abs(est.value - truth) <= k * est.stderr + 1e-12


@pytest.mark.parametrize("inst", [i for i in corpus() if i.label[:2] in AFFINE_VNEAR], ids=lambda i: i.label)
def test_affine_vnear_closed_form_matches_quadrature(inst):
    truth = AFFINE_VNEAR[inst.label[:2]]
    assert near_fixed_quadrature(inst.f, inst.dom.lower, inst.dom.upper, inst.h, 1500) == pytest.approx(truth, abs=5e-3)


def test_quarter_q_grid_oracle():
    inst = quarter()
    frac, mean_k = q_grid_oracle(inst.f, -2, 2, 1.0, 3000)
    assert frac == pytest.approx(2 / 3, abs=2 / 3000)
    assert mean_k == pytest.approx(4 / 3, abs=2 / 3000)


def test_estimate_VS_examples():
    inst = quarter()
    est = estimate_VS(inst.f, inst.dom, 1.0, N, seed=1)
    assert within(est, 2 / 3)
    assert est.ci_low <= est.value <= est.ci_high
    half = estimate_VS(builtin_map("scalar-linear", [0.5]), DomainSpec.box([-1], [1]), 0.5, N, seed=1)
    assert half.value == 0.0
    ident = estimate_VS(builtin_map("scalar-linear", [1.0]), DomainSpec.box([-2], [2]), 1.0, N, seed=1)
    assert ident.value == 0.0


def test_estimate_near_fixed_examples():
    inst = quarter()
    assert within(estimate_near_fixed_measure(inst.f, inst.dom, 1.0, N, seed=2), 4 / 3)
    dom = DomainSpec.box([-1, 0], [2, 3])
    ident = estimate_near_fixed_measure(builtin_map("scalar-linear", [1.0, 2]), dom, 0.5, N, seed=2)
    assert ident.value == pytest.approx(9.0) and ident.stderr == 0.0
    shift = estimate_near_fixed_measure(builtin_map("shift", [10.0]), inst.dom, 1.0, N, seed=2)
    assert shift.value == 0.0


def test_near_fixed_respects_membership():
    dom = make_domain([0, 0], [2, 2], "simplex")
    est = estimate_near_fixed_measure(builtin_map("scalar-linear", [1.0, 2]), dom, 0.5, N, seed=4)
    assert within(est, 2.0)  # area of the triangle


def test_estimate_k_integral_examples():
    inst = quarter()
    assert within(estimate_k_integral(inst.f, inst.dom, 1.0, N, seed=3), 4 / 3)
    ident = estimate_k_integral(builtin_map("scalar-linear", [1.0]), DomainSpec.box([-2], [2]), 1.0, N, seed=3)
    assert ident.value == 4.0 and ident.stderr == 0.0
    assert estimate_k_integral(builtin_map("shift", [10.0]), inst.dom, 1.0, N, seed=3).value == 0.0


def test_estimators_need_100_samples():
    inst = quarter()
    for fn in (estimate_VS, estimate_k_integral, estimate_near_fixed_measure):
        with pytest.raises(ValueError):
            fn(inst.f, inst.dom, 1.0, 99)


def test_sample_offsets_chunking_is_invisible():
    whole = sample_offsets(0.5, 2, 9, 0, 1000)
    parts = np.vstack([sample_offsets(0.5, 2, 9, a, b) for a, b in [(0, 3), (3, 517), (517, 1000)]])
    np.testing.assert_array_equal(whole, parts)
    assert np.all(whole > -0.25) and np.all(whole <= 0.25)


def test_sweep_independent_of_workers():
    inst = corpus()[3]
    a = sweep_offsets(inst.f, inst.dom, inst.h, 30_000, 5, n_jobs=1)
    b = sweep_offsets(inst.f, inst.dom, inst.h, 30_000, 5, n_jobs=8)
    assert a == b


def test_measure_bounds_formula():
    assert measure_bounds(4 / 3, 1.0, 1, 5) == pytest.approx((2 / 3, 11 / 12))
    assert measure_bounds(3.0, 1.0, 1, 5)[0] == 0.0
    assert measure_bounds(0.5, 1.0, 1, 1)[1] is None


def test_bounds_report_quarter():
    inst = quarter()
    rep = bounds_report(inst.f, inst.dom, 1.0, N, seed=7)
    assert rep.L == 5
    assert rep.hypotheses_verified and rep.all_passed
    lo_sigma = rep.vnear_estimate.stderr
    assert abs(rep.lower_bound - 2 / 3) <= 3 * lo_sigma
    assert abs(rep.upper_bound - 11 / 12) <= 3 * lo_sigma / 4
    assert within(rep.vs_estimate, 2 / 3)
    assert rep.upper_bound == pytest.approx(5 / 4 - rep.vnear_estimate.value / 4)


def test_bounds_report_half_map():
    rep = bounds_report(builtin_map("scalar-linear", [0.5]), DomainSpec.box([-1], [1]), 0.5, N, seed=7)
    assert rep.vs_estimate.value == 0.0
    assert rep.hypotheses_verified and rep.all_passed


def test_bounds_report_affine_2d():
    inst = corpus()[3]
    rep = bounds_report(inst.f, inst.dom, 1.0, N, seed=7)
    assert rep.L == 25
    assert within(rep.vnear_estimate, 16 / 9)
    assert rep.hypotheses_verified and rep.all_passed


def test_bounds_report_L_equal_one():
    rep = bounds_report(builtin_map("scalar-linear", [0.5]), DomainSpec.box([0], [0.5]), 1.0, 1000, seed=1)
    assert rep.L == 1 and rep.upper_bound is None
    assert "vs_below_upper" not in [c.name for c in rep.checks]
    assert any("L = 1" in n for n in rep.notes)


def test_bounds_report_flags_failed_hypotheses():
    inst = corpus()[2]  # x + 10 leaves the domain
    rep = bounds_report(inst.f, inst.dom, 1.0, 1000, seed=1)
    assert not rep.hypotheses_verified
    assert not rep.hypotheses["self_mapping"].satisfied
    assert rep.sweep.escaped == 1000


def test_bounds_report_json_is_finite_and_deterministic():
    inst = quarter()
    a = json.dumps(bounds_report(inst.f, inst.dom, 1.0, 5000, 3, n_jobs=1).to_dict(), sort_keys=True, allow_nan=False)
    b = json.dumps(bounds_report(inst.f, inst.dom, 1.0, 5000, 3, n_jobs=4).to_dict(), sort_keys=True, allow_nan=False)
    assert a == b
    for key in ("lower_bound", "upper_bound", "L", "vs", "vnear", "k_integral"):
        assert key in json.loads(a)


def test_hypotheses_on_predicate_domain():
    f = builtin_map("scalar-linear", [0.25, 2])
    hyp = check_hypotheses(f, make_domain([-2, -2], [2, 2], "ball"), 0.5)
    assert hyp["margin"].satisfied and hyp["margin"].details["checked"] is False
    assert hyp["self_mapping"].satisfied and hyp["monotone"].satisfied


def test_hypotheses_order_bounds_fail_on_l_shape():
    f = builtin_map("scalar-linear", [0.25, 2])
    hyp = check_hypotheses(f, make_domain([0, 0], [2, 2], "L-shape"), 1.0)
    assert not hyp["order_bounds"].satisfied
    assert hyp["order_bounds"].witness["missing"] == "max"


def test_q_grid_scan_quarter():
    inst = quarter()
    table = q_grid_scan(inst.f, inst.dom, 1.0, 1000)
    assert 0.664 <= table.fraction(table.k == 1) <= 0.670
    robust_eq = table.equilibrium[table.robust]
    assert np.all(np.isfinite(robust_eq))
    assert np.all(np.isnan(table.equilibrium[table.k != 1]))
    frac, _ = q_grid_oracle(inst.f, -2, 2, 1.0, 1000)
    assert table.fraction(table.robust) == frac


def test_q_grid_scan_small_and_cycles():
    inst = quarter()
    table = q_grid_scan(inst.f, inst.dom, 1.0, 2)
    assert len(table.k) == 2 and set(table.k.tolist()) <= {1, 2}
    # on a wide domain every point away from 1/2 swaps with its mirror image
    table = q_grid_scan(builtin_map("negated-linear", [1.0]), DomainSpec.box([-2], [3]), 1.0, 50)
    assert not table.robust.any()


def test_q_grid_scan_2d_order_and_header():
    f = affine_map([[0.25, 0.125], [0.0, 0.25]])
    table = q_grid_scan(f, DomainSpec.box([-2, -2], [2, 2]), 1.0, 3)
    assert table.header() == ["q_1", "q_2", "k", "robust", "eq_1", "eq_2"]
    assert table.q[:3, 0].tolist() == pytest.approx([-1 / 3, -1 / 3, -1 / 3])
    assert table.q[:3, 1].tolist() == pytest.approx([-1 / 3, 0, 1 / 3])


def test_q_grid_scan_rejects_bad_inputs():
    inst = quarter()
    with pytest.raises(ConfigError):
        q_grid_scan(inst.f, inst.dom, 1.0, 1)
    with pytest.raises(ConfigError):
        q_grid_scan(builtin_map("scalar-linear", [0.5, 3]), DomainSpec.box([0] * 3, [1] * 3), 1.0, 4)


def test_gated_vs_counts_only_self_mapping_offsets():
    # 0.25x + 1.6 on [-2, 2] with h = 1 escapes through the top for some offsets only
    f = affine_map([[0.25]], [1.6])
    rep = bounds_report(f, DomainSpec.box([-2], [2]), 1.0, 20_000, seed=5)
    assert 0 < rep.sweep.escaped < rep.sweep.n
    assert rep.vs_gated_estimate.value <= rep.vs_estimate.value
    # a robust discretization never escapes, so the gate removes nothing from S
    assert rep.sweep.robust_gated == rep.sweep.robust
    doc = rep.to_dict()
    assert doc["offsets"]["self_mapping"] == rep.sweep.n - rep.sweep.escaped
    assert doc["vs_gated"]["value"] == doc["vs"]["value"]
