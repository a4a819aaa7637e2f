import math
from collections import Counter

import pytest
from hypothesis import assume, given, settings, strategies as st

from greenwalk.errors import DivergenceError, InputError, InvariantError, ResourceError
from greenwalk.pathological import solve_parameters
from greenwalk.templates import (NO_JUMP, Template, TemplateUniverse, enumerate_classes,
                                 enumerate_templates, green_upper_bound, length, log_weight,
                                 max_level, sum_all_bound, sum_max_ge, sum_max_lt_len_ge, weight)

U1 = TemplateUniverse(0.9, (0.1,), (200,), (0.1, 0.09))
U2 = TemplateUniverse(0.9, (0.1, 0.075), (200, 400), (0.1, 0.0875, 0.07))


# ------------------------------------------------------------------ oracles
def test_weight_examples():
    assert weight(Template((3,)), U1) == pytest.approx(0.729, rel=1e-15)
    U = TemplateUniverse(0.5, (0.1,), (100,))
    assert weight(Template.from_entries([0, 0, 0]), U) == pytest.approx(math.exp(-10), rel=1e-15)
    t = Template.from_entries([2, 1, 0, 0, 4])
    assert log_weight(t, U2) == pytest.approx(math.log(weight(t, U2)), rel=1e-13)


def test_length_and_max():
    U = TemplateUniverse(0.5, (0.1,), (10,))
    assert length(Template.from_entries([2, 0, 3]), U) == 15
    assert max_level(Template((5,))) == NO_JUMP
    t1, t2 = Template.from_entries([2, 0, 3]), Template.from_entries([1, 0, 0, 0, 2])
    assert length(t1 * t2, U) == length(t1, U) + length(t2, U)
    assert (t1 * t2).entries() == (2, 0, 4, 0, 0, 0, 2)


def test_template_rejects_malformed():
    with pytest.raises(InputError):
        Template.from_entries([1, 0])
    with pytest.raises(InputError):
        weight(Template.from_entries([0, 3, 0]), U2)


def test_sum_all_bound_examples():
    assert sum_all_bound(TemplateUniverse(0.9, (0.1,), ())) == pytest.approx(10.0)
    expect = 10 / (1 - 10 * math.exp(-20))
    assert sum_all_bound(U1) == pytest.approx(expect, rel=1e-14)
    total = math.fsum(c.mass for c in enumerate_classes(U1, 1e-30))
    assert total <= sum_all_bound(U1) * (1 + 1e-13)
    assert total == pytest.approx(sum_all_bound(U1), rel=1e-12)
    assert sum_all_bound(U2) >= sum_all_bound(U1)


def test_sum_all_bound_divergence():
    with pytest.raises(DivergenceError):
        sum_all_bound(TemplateUniverse(0.9, (0.01,), (10,)))


def test_sum_max_ge_examples():
    assert sum_max_ge(2, U2).value == 0
    b1 = sum_max_ge(1, U2)
    assert b1.value <= b1.constant * math.exp(-30)
    assert sum_max_ge(0, U2).value >= b1.value
    S = sum_all_bound(U2)
    assert b1.constant == pytest.approx(S * S * math.e / (math.e - 1))


UP = solve_parameters(None, 0.05, 2, 0.8661)


def test_sum_max_lt_len_ge_examples():
    U = UP
    K = 1 / (1 - 0.8661 * math.exp(0.1))
    b0 = sum_max_lt_len_ge(1, 0, U)
    assert b0.value == b0.constant <= 2 * K
    # jump-free family with s_0 = r_0
    Ur0 = solve_parameters(None, 0.05, 2, 0.8661, s0_rule="r0")
    assert sum_max_lt_len_ge(0, 30, Ur0).value == pytest.approx(math.exp(-0.1 * 30) * K, rel=1e-14)
    # extended rule s_0 = 0.125 with its own geometric factor
    K0 = 1 / (1 - 0.8661 * math.exp(0.125))
    assert sum_max_lt_len_ge(0, 30, U).value == pytest.approx(math.exp(-0.125 * 30) * K0, rel=1e-14)
    n = 25
    ratio = sum_max_lt_len_ge(2, 2 * n, U).value / sum_max_lt_len_ge(2, n, U).value
    assert ratio == pytest.approx(math.exp(-U.s[2] * n), rel=1e-13)


def test_green_upper_bound_examples():
    U = UP
    b = green_upper_bound(U.n[1], 1, U)
    t1 = sum_max_ge(1, U).value
    t2 = sum_max_lt_len_ge(1, U.n[1], U).value
    assert b.value == pytest.approx(t1 + t2)
    assert t2 / t1 <= 100 * math.exp(-(U.s[1] - U.r[1]) * U.n[1])
    # half length: the second term dominates because s_i < 2 r_i
    half = green_upper_bound(U.n[1] / 2, 1, U)
    C = max(sum_max_ge(1, U).constant, sum_max_lt_len_ge(1, 0, U).constant)
    assert half.value <= 2 * C * math.exp(-U.s[1] * U.n[1] / 2)
    assert green_upper_bound(0, 0, U).value <= 2 * C


def test_enumerate_examples():
    assert [t for t, _ in enumerate_templates(U2, 1.5)] == []
    assert [t for t, _ in enumerate_templates(U2, 1.0)] == [Template((0,))]
    U0 = TemplateUniverse(0.5, (0.1,), ())
    got = sorted(t.a[0] for t, _ in enumerate_templates(U0, 0.5 ** 5 * (1 - 1e-12)))
    assert got == [0, 1, 2, 3, 4, 5]
    with pytest.raises(ResourceError):
        list(enumerate_templates(U0, 1e-300, cap=50))


def test_classes_match_templates():
    U = TemplateUniverse(0.5, (0.6, 0.4), (3, 5), (0.6, 0.5, 0.35))
    floor = 1e-4
    brute = Counter()
    for t, w in enumerate_templates(U, floor):
        brute[(t.levels, sum(t.a))] += 1
    classes = {(c.levels, c.total_a): c for c in enumerate_classes(U, floor)}
    assert set(brute) == set(classes)
    assert all(classes[k].multiplicity == v for k, v in brute.items())


# ---------------------------------------------------------------- validator
def test_validator_names_index():
    bad = TemplateUniverse(0.5, (0.3, 0.3, 0.1), (10, 20), (0.3, 0.31, 0.15))
    msg = "; ".join(bad.findings())
    assert "not decreasing at index 1" in msg
    with pytest.raises(InvariantError, match="index 1"):
        bad.validate()


def test_validator_growth_condition():
    U = TemplateUniverse(0.5, (0.2, 0.15, 0.12), (100, 110), (0.2, 0.18, 0.14))
    msg = "; ".join(U.findings())
    assert "growth condition" in msg and "index 0" in msg


def test_validator_summability():
    U = TemplateUniverse(0.5, (0.6, 0.4, 0.3), (4, 30), (0.6, 0.5, 0.35))
    msg = "; ".join(U.findings())
    assert "summability" in msg and "index 0" in msg


def test_validator_accepts_solver_output():
    U = solve_parameters(None, 0.05, 3, 0.8661)
    assert U.findings() == []


# --------------------------------------------------------------- properties
@st.composite
def universes(draw):
    rho = draw(st.floats(0.2, 0.85))
    r_limit = draw(st.floats(0.05, 0.4))
    assume(rho * math.exp(2 * r_limit) < 0.97)
    depth = draw(st.integers(1, 3))
    U = solve_parameters(None, r_limit, depth, rho)
    extra = draw(st.lists(st.integers(0, 6), min_size=depth, max_size=depth))
    n = [v + 2 * sum(extra[: i + 1]) for i, v in enumerate(U.n)]
    U = TemplateUniverse(U.rho, U.r, tuple(n), U.s, U.r_limit)
    assume(not U.findings())
    return U


templates = st.lists(st.integers(0, 5), min_size=1, max_size=7).filter(lambda v: len(v) % 2 == 1)


@settings(max_examples=100, deadline=None)
@given(universes(), templates, templates)
def test_weight_is_multiplicative(U, e1, e2):
    t1 = Template.from_entries([v if k % 2 == 0 else v % U.depth for k, v in enumerate(e1)])
    t2 = Template.from_entries([v if k % 2 == 0 else v % U.depth for k, v in enumerate(e2)])
    assert weight(t1 * t2, U) == pytest.approx(weight(t1, U) * weight(t2, U), rel=1e-13)
    assert length(t1 * t2, U) == length(t1, U) + length(t2, U)


@settings(max_examples=40, deadline=None)
@given(universes(), st.floats(0, 200))
def test_lt_len_monotone(U, n):
    for i in range(U.depth + 1):
        assert sum_max_lt_len_ge(i, n + 1, U).value <= sum_max_lt_len_ge(i, n, U).value
    # monotone in i; the step from 0 uses s_0 = r_0 (the extended s_0 carries its own factor)
    U0 = TemplateUniverse(U.rho, U.r, U.n, (U.r[0],) + U.s[1:], U.r_limit)
    for V in (U, U0):
        for i in range(1 if V is U0 else 2, V.depth + 1):
            lo = sum_max_lt_len_ge(i - 1, n, V).value
            assert sum_max_lt_len_ge(i, n, V).value >= lo * (1 - 1e-14)


@settings(max_examples=10, deadline=None)
@given(universes())
def test_enumerated_sums_below_bounds(U):
    classes = list(enumerate_classes(U, 1e-30))
    # closed forms are evaluated in floating point: allow rounding in the last bits
    assert math.fsum(c.mass for c in classes) <= sum_all_bound(U) * (1 + 1e-13)
    for i in range(U.depth + 1):
        part = math.fsum(c.mass for c in classes if c.max_level >= i)
        assert part <= sum_max_ge(i, U).value * (1 + 1e-13)
        for n in (0, 5, 20, 80):
            part = math.fsum(c.mass for c in classes if c.max_level < i and c.length >= n)
            assert part <= sum_max_lt_len_ge(i, n, U).value * (1 + 1e-13)
