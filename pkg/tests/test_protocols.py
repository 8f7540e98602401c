from dataclasses import replace
from fractions import Fraction

import pytest

from nsboxes import (CoincidenceError, ProtocolError, condition_on_success, execute_plan,
                     expected_boxes_theorem1, make_d_box, plan_conversion, protocol1_wiring,
                     protocol2_box, protocol3_box, protocol4_round, protocol4_round_wiring,
                     variant_threshold_round, variant_threshold_wiring, variant_two_zero_round)
from nsboxes.protocols import (PROTOCOL2, PROTOCOL4, ConversionPlan, plan_consumption,
                               protocol4_labeling, protocol4_output_value, protocol4_step,
                               threshold_step)
from nsboxes.wiring import LookupMap, round_table


def test_protocol1_rejects_non_d_box():
    local = make_d_box(2)
    with pytest.raises(ProtocolError):
        protocol1_wiring(protocol3_box(2, 2, 3)[0], local)


@pytest.mark.parametrize("n, d1, expected", [(6, 3, 3), (4, 2, 2), (5, 5, 5), (12, 4, 4)])
def test_protocol2(n, d1, expected):
    assert protocol2_box(make_d_box(n), d1) == make_d_box(expected)


def test_protocol2_needs_divisor():
    with pytest.raises(ProtocolError, match="does not divide"):
        protocol2_box(make_d_box(6), 4)


@pytest.mark.parametrize("d1, n, d2", [(2, 1, 2), (2, 2, 4), (3, 2, 9)])
def test_protocol3_exact_cases(d1, n, d2):
    box, err = protocol3_box(d1, n, d2)
    assert err == 0
    assert box == make_d_box(d2)


def test_protocol3_approximate():
    box, err = protocol3_box(2, 2, 3)
    assert err == Fraction(1, 4)
    assert any(p != Fraction(1, 3) for _, p in box.nonzero())


@pytest.mark.parametrize("d1, d2", [(2, 2), (2, 4), (2, 8), (3, 3), (2, 6), (3, 4), (2, 7)])
def test_protocol3_error_vanishes_exactly_for_divisors(d1, d2):
    # TV is zero precisely when d2 divides d1**n
    for n in range(1, 6):
        if not d2 <= d1 ** n <= 81:
            continue
        _, err = protocol3_box(d1, n, d2)
        assert (err == 0) == (d1 ** n % d2 == 0)


def test_protocol3_errors():
    with pytest.raises(ProtocolError):
        protocol3_box(2, 2, 5)


def test_table_one():
    rt = round_table(protocol4_round_wiring(2))
    q = Fraction(1, 4)
    pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for x, y in [(0, 0), (0, 1), (1, 0)]:
        assert rt.block(x, y) == {(a, a): q for a in pairs}
    assert rt.block(1, 1) == {((0, 0), (0, 0)): q, ((0, 1), (1, 1)): q,
                              ((1, 0), (0, 1)): q, ((1, 1), (1, 0)): q}


@pytest.mark.parametrize("d", [0, 1])
def test_round_needs_d_at_least_two(d):
    with pytest.raises(ProtocolError):
        protocol4_round_wiring(d)


@pytest.mark.parametrize("o1, o2, d, expected", [(0, 0, None, 0), (1, 0, None, 2), (3, 4, 5, 3)])
def test_output_value(o1, o2, d, expected):
    assert protocol4_output_value(o1, o2, d) == expected


def test_output_value_range():
    with pytest.raises(ProtocolError):
        protocol4_output_value(5, 0, 5)


def test_labeling_from_text():
    assert protocol4_labeling(2) == {(0, 1): 0, (1, 0): 2, (1, 1): 1}


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_protocol4_conditioned(d):
    box, p = protocol4_round(d).conditioned()
    assert p == Fraction(d * d - 1, d * d)
    assert box == make_d_box(d + 1)


def test_condition_with_explicit_labels():
    lab = protocol4_labeling(2)
    box, p = condition_on_success(protocol4_round_wiring(2), ((0, 0), (0, 0)), (lab, lab))
    assert (box, p) == (make_d_box(3), Fraction(3, 4))


def test_condition_non_coincident_failure():
    w = protocol4_round_wiring(2)
    with pytest.raises(CoincidenceError, match="communication-free halting"):
        condition_on_success(w, ((0, 0), (1, 1)))


def test_condition_input_dependent_failure():
    # Alice always feeds x into box 1, so outputs 00 are no longer coincident across inputs
    w = protocol4_round_wiring(2)
    w = replace(w, alice_input_maps=(w.alice_input_maps[0],
                                     LookupMap((0,), {(x, a): x for x in range(2)
                                                      for a in range(2)})))
    with pytest.raises(ProtocolError):
        condition_on_success(w, ((0, 0), (0, 0)))


def test_condition_always_failing():
    w = protocol4_round_wiring(2)
    everything = [(a, b) for a in range(2) for b in range(2)]
    with pytest.raises(ProtocolError, match="never succeeds"):
        condition_on_success(w, (everything, everything))


@pytest.mark.parametrize("d, expected", [(2, Fraction(8, 3)), (5, Fraction(25, 12))])
def test_theorem1_values(d, expected):
    assert expected_boxes_theorem1(d) == expected


def test_theorem1_decreasing_to_two():
    vals = [expected_boxes_theorem1(d) for d in range(2, 40)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v > 2 for v in vals)


@pytest.mark.parametrize("d, target, success", [
    (2, 2, Fraction(1, 2)), (3, 7, Fraction(7, 9)), (5, 23, Fraction(23, 25))])
def test_two_zero(d, target, success):
    rnd = variant_two_zero_round(d)
    box, p = rnd.conditioned()
    assert rnd.target_size == target
    assert p == success
    assert box == make_d_box(target)


def test_two_zero_alice_side():
    box, p = variant_two_zero_round(5, party="alice").conditioned()
    assert (box, p) == (make_d_box(23), Fraction(23, 25))


def test_threshold_s1_is_protocol4():
    assert variant_threshold_wiring(5, 1) == protocol4_round_wiring(5)
    assert variant_threshold_round(5, 1).conditioned()[1] == Fraction(24, 25)


def test_threshold_d4_s2():
    rnd = variant_threshold_round(4, 2)
    box, p = rnd.conditioned()
    assert p == Fraction(3, 4)
    assert box == make_d_box(6)


@pytest.mark.parametrize("s", [0, 5, 7])
def test_threshold_range(s):
    with pytest.raises(ProtocolError):
        variant_threshold_wiring(5, s)


def test_plan_single_step():
    plan = plan_conversion(2, 3)
    assert [s.kind for s in plan.steps] == [PROTOCOL4]
    assert plan.expected_consumption == Fraction(8, 3)


def test_plan_identity():
    plan = plan_conversion(3, 3)
    assert plan.steps == ()
    assert plan.expected_consumption == 1


def test_plan_protocol2_only():
    plan = plan_conversion(6, 3)
    assert [s.kind for s in plan.steps] == [PROTOCOL2]
    assert plan.expected_consumption == 1


@pytest.mark.parametrize("src, dst", [(2, 5), (3, 10), (2, 7), (4, 3), (5, 2), (2, 1), (3, 8)])
def test_plan_executes_exactly(src, dst):
    plan = plan_conversion(src, dst)
    final, results = execute_plan(plan)
    assert final == make_d_box(dst)
    assert plan_consumption(plan.steps) == plan.expected_consumption
    assert [p for _, _, p in results] == [s.success_probability for s in plan.steps]


def test_plan_is_shortest():
    # 2 -> 5 cannot be done in one step: thresholds from 2 only reach 3
    assert len(plan_conversion(2, 5).steps) == 2


def test_plan_rejects_bad_chain():
    with pytest.raises(ProtocolError):
        ConversionPlan(2, 5, (protocol4_step(2),), Fraction(8, 3))


def test_plan_errors():
    with pytest.raises(ProtocolError):
        plan_conversion(2, 0)
    with pytest.raises(ProtocolError):
        plan_conversion(1, 3)


def test_threshold_step_costs():
    assert threshold_step(5, 4).expected_cost == Fraction(2) / Fraction(9, 25)
    assert threshold_step(5, 1) == protocol4_step(5)
