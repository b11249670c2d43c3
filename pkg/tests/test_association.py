import numpy as np
import pytest

from cellfree_jrc.association import (
    AssociationMatrix,
    association_diff,
    exhaustive_p1,
    initial_association,
    lsfc_se_proxy,
    nearest_ap_association,
    refine_association,
    threshold_select,
)
from cellfree_jrc.errors import (
    InfeasibleAssociationError,
    SearchSpaceTooLargeError,
    UnsatisfiableLoSError,
)
from cellfree_jrc.topology import NetworkLayout, Rect


def test_initial_association_single_ue_two_aps():
    # One UE, two APs, tau_p = 1: after the AP-preference pass both APs
    # serve the UE, giving S = [1 1].
    s = initial_association(np.array([[2.0, 1.0]]), tau_p=1)
    np.testing.assert_array_equal(s.s, [[1, 1]])


def test_initial_association_preserves_argmax():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k_num, l_num = 4, 6
        beta = rng.lognormal(size=(k_num, l_num))
        assoc = initial_association(beta, tau_p=k_num)
        for k in range(k_num):
            assert assoc.s[k, np.argmax(beta[k])] == 1


def test_initial_association_constraints_on_random_instances():
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 100:
        l_num = int(rng.integers(2, 9))
        tau_p = int(rng.integers(1, 5))
        k_max = (l_num * tau_p) // 2
        if k_max < 1:
            continue
        k_num = int(rng.integers(1, k_max + 1))
        beta = rng.lognormal(size=(k_num, l_num))
        assoc = initial_association(beta, tau_p)
        assert (assoc.s.sum(axis=1) >= 2).all(), "every UE needs two serving APs"
        assert (assoc.s.sum(axis=0) <= tau_p).all(), "AP capacity exceeded"
        checked += 1


def test_initial_association_infeasible_capacity():
    with pytest.raises(InfeasibleAssociationError, match="tau_p"):
        initial_association(np.ones((3, 1)), tau_p=2)


def test_threshold_select_extremes():
    row = np.array([1.0, 3.0, 2.0, 5.0])
    np.testing.assert_array_equal(threshold_select(row, -np.inf), [0, 1, 2, 3])
    with pytest.warns(UserWarning):
        selected = threshold_select(row, 6.0)
    assert selected.size == 0


def test_threshold_select_median_upper_half():
    row = np.array([1.0, 4.0, 2.0, 8.0, 3.0, 6.0])
    selected = threshold_select(row, np.median(row))
    np.testing.assert_array_equal(selected, [1, 3, 5])


def test_exhaustive_all_ones_optimal_when_monotone():
    beta = np.array([[1.0, 2.0], [2.0, 1.0]])
    evaluator = lsfc_se_proxy(beta, power_over_noise=10.0, tau_p=2, tau_c=200)
    best, value = exhaustive_p1(beta, tau_p=2, se_evaluator=evaluator)
    np.testing.assert_array_equal(best.s, np.ones((2, 2)))
    assert value == pytest.approx(np.sum(evaluator(best)))


def test_exhaustive_dominates_heuristic():
    rng = np.random.default_rng(2)
    for _ in range(10):
        k_num, l_num, tau_p = 3, 4, 2
        beta = rng.lognormal(size=(k_num, l_num))
        evaluator = lsfc_se_proxy(beta, power_over_noise=5.0, tau_p=tau_p, tau_c=200)
        heuristic = initial_association(beta, tau_p)
        _, best_value = exhaustive_p1(beta, tau_p, evaluator)
        gap = best_value - float(np.sum(evaluator(heuristic)))
        assert gap >= -1e-12


def test_exhaustive_infeasible_single_ap():
    beta = np.ones((3, 1))
    evaluator = lsfc_se_proxy(beta, 1.0, 2, 200)
    with pytest.raises(InfeasibleAssociationError):
        exhaustive_p1(beta, tau_p=2, se_evaluator=evaluator)


def test_exhaustive_cap_exceeded():
    beta = np.ones((6, 6))
    evaluator = lsfc_se_proxy(beta, 1.0, 3, 200)
    with pytest.raises(SearchSpaceTooLargeError, match="initial_association"):
        exhaustive_p1(beta, tau_p=3, se_evaluator=evaluator)


AREA = Rect(0.0, 0.0, 120.0, 120.0)
APS = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [100.0, 100.0]])
UE = np.array([[40.0, 40.0]])


def _layout():
    return NetworkLayout(ap_positions=APS, ue_positions=UE, area=AREA)


def _true_reports(layout, serving):
    from cellfree_jrc.topology import bearing

    return {
        (0, l): bearing(layout.ap_positions[l], layout.ue_positions[0]) for l in serving
    }


def _unit_scnr(k, l):
    return 1.0


def test_refine_no_clutter_keeps_association():
    layout = _layout()
    assoc = AssociationMatrix(np.array([[1, 1, 1, 0]], dtype=np.int8))
    reports = _true_reports(layout, [0, 1, 2])
    refined = refine_association(
        assoc, reports, UE, layout, _unit_scnr, tau_p=2, tol=7.5
    )
    np.testing.assert_array_equal(refined.s, assoc.s)


def test_refine_removes_exactly_the_blocked_ap():
    layout = _layout()
    assoc = AssociationMatrix(np.array([[1, 1, 1, 0]], dtype=np.int8))
    reports = _true_reports(layout, [0, 1, 2])
    reports[(0, 1)] += 0.3  # corrupted bearing misses the UE by far more than tol
    refined = refine_association(
        assoc, reports, UE, layout, _unit_scnr, tau_p=2, tol=7.5
    )
    np.testing.assert_array_equal(refined.s, [[1, 0, 1, 0]])
    assert association_diff(assoc, refined) == [(0, 1, "removed")]


def test_refine_replaces_fully_blocked_cluster():
    layout = _layout()
    assoc = AssociationMatrix(np.array([[1, 1, 0, 0]], dtype=np.int8))
    reports = _true_reports(layout, [0, 1, 2, 3])
    reports[(0, 0)] += 0.25
    reports[(0, 1)] -= 0.25
    refined = refine_association(
        assoc, reports, UE, layout, _unit_scnr, tau_p=2, tol=7.5
    )
    np.testing.assert_array_equal(refined.s, [[0, 0, 1, 1]])
    assert refined.s[0].sum() >= 2


def test_refine_respects_ap_capacity():
    layout = NetworkLayout(
        ap_positions=APS,
        ue_positions=np.array([[40.0, 40.0], [60.0, 60.0]]),
        area=AREA,
    )
    from cellfree_jrc.topology import bearing

    s = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=np.int8)
    assoc = AssociationMatrix(s)
    reports = {}
    for k in range(2):
        for l in range(4):
            reports[(k, l)] = bearing(layout.ap_positions[l], layout.ue_positions[k])
    # Block both serving APs of UE 0; with tau_p = 1, APs 2 and 3 are full,
    # so no clutter-free pair can be restored.
    reports[(0, 0)] += 0.3
    reports[(0, 1)] += 0.3
    with pytest.raises(UnsatisfiableLoSError) as exc:
        refine_association(assoc, reports, layout.ue_positions, layout, _unit_scnr, tau_p=1)
    assert exc.value.ue_index == 0


def test_refine_improves_min_scnr_with_blocked_ap():
    from cellfree_jrc.coverage import CoverageParams, per_link_scnr
    from cellfree_jrc.topology import ClutterField

    layout = _layout()
    assoc = AssociationMatrix(np.array([[1, 1, 1, 0]], dtype=np.int8))
    # A scatterer close to AP 1, just off its line of sight to the UE: the
    # bearing is corrupted and the scatterer sits inside the range cell.
    params = CoverageParams(delta_r=200.0)
    clutter = ClutterField(
        positions=np.array([[95.2, 3.4]]),
        rcs=np.array([50.0]),
        fading_gain=np.array([1.0]),
        intensity=0.0,
    )

    def scnr_eval(k, l):
        return per_link_scnr(layout.ap_positions[l], layout.ue_positions[k], clutter, params)

    reports = _true_reports(layout, [0, 1, 2, 3])
    reports[(0, 1)] += 0.25
    before_min = min(scnr_eval(0, l) for l in (0, 1, 2))
    refined = refine_association(assoc, reports, UE, layout, scnr_eval, tau_p=2)
    after_min = min(scnr_eval(0, l) for l in np.flatnonzero(refined.s[0]))
    assert refined.s[0, 1] == 0
    assert after_min >= before_min


def test_nearest_ap_association():
    layout = _layout()
    assoc = nearest_ap_association(layout)
    np.testing.assert_array_equal(assoc.s, [[1, 0, 0, 0]])
