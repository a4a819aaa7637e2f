import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from greenwalk.errors import InputError, ResourceError
from greenwalk.groups import free_group, free_product
from greenwalk.measures import (Measure, TailFamily, admissibility_check, convolve, delta, dumps,
                                lazy, loads, nearest_neighbor, power, realize, srw, symmetrize,
                                tail_profile)

F2 = free_group(2)


def brute_return(group, mu, n):
    """Sum over all support sequences of length n that multiply to e."""
    items = list(mu.weights.items())
    total = Fraction(0)
    for seq in itertools.product(items, repeat=n):
        g = ()
        w = Fraction(1)
        for s, v in seq:
            g = group.multiply(g, s)
            w *= v
        if g == ():
            total += w
    return total


# ------------------------------------------------------------------ oracles
def test_srw_is_symmetric_probability():
    mu = srw(F2)
    assert mu.total_mass == 1
    assert mu.check_symmetric()
    assert mu(F2.parse("a")) == Fraction(1, 4)


def test_two_step_return():
    assert power(srw(F2), 2)(()) == Fraction(1, 4)


def test_four_step_return_matches_brute_force():
    # closed walks of length 4 on the 4-regular tree: d(2d - 1) = 28 of 4^4
    p4 = power(srw(F2), 4)(())
    assert p4 == Fraction(28, 256) == Fraction(7, 64)
    assert p4 == brute_return(F2, srw(F2), 4)


def test_convolution_mass_multiplies():
    mu = nearest_neighbor(F2, {"a": Fraction(1, 2), "b": Fraction(1, 3)})
    nu = lazy(srw(F2))
    assert convolve(mu, nu).total_mass == mu.total_mass * nu.total_mass


def test_convolution_cap():
    with pytest.raises(ResourceError):
        power(srw(F2), 12, cap=1000)


def test_nearest_neighbor_validates_letters():
    with pytest.raises(InputError):
        nearest_neighbor(F2, {"ab": 1})


def test_symmetrize():
    mu = nearest_neighbor(F2, {"a": Fraction(1, 2), "b": Fraction(1, 2)})
    assert not mu.check_symmetric()
    s = symmetrize(mu)
    assert s.check_symmetric() and s.total_mass == 1
    assert s(F2.parse("A")) == Fraction(1, 4)


def test_realize_radius_and_receipt():
    mu, rec = realize(F2, TailFamily.gaussian(0.5), 1e-12)
    assert rec.radius == 8
    assert rec.discarded_mass <= 1e-12
    assert math.isclose(float(mu.total_mass) + rec.discarded_mass, 1.0, rel_tol=1e-12)
    assert realize(F2, TailFamily.gaussian(0.5), 1e-40)[1].radius == 14


def test_realize_is_radial():
    mu, _ = realize(F2, TailFamily.geometric(0.2), 1e-6)
    prof = mu.radial_profile()
    assert prof is not None and prof[0] == 0
    assert all(a > b for a, b in zip(prof[1:], prof[2:]))


def test_tail_profile():
    mu = lazy(srw(F2))
    assert tail_profile(mu) == [Fraction(1, 2), Fraction(0)]


@pytest.mark.parametrize("weights, witness", [
    ({"a": 1}, "b"),
    ({"a": Fraction(1, 2), "b": Fraction(1, 2)}, "A"),
])
def test_admissibility_witness(weights, witness):
    res = admissibility_check(nearest_neighbor(F2, weights))
    assert not res.admissible
    assert F2.format(res.witness) == witness


def test_admissible_measures():
    assert admissibility_check(srw(F2))
    Z = free_product(2, 2, 2)
    assert admissibility_check(srw(Z))
    # generators reached only through products
    mu = Measure(F2, {F2.parse(w): 1 for w in ("ab", "bA", "BA", "aB", "a", "A")})
    assert admissibility_check(mu)


def test_dumps_loads_roundtrip():
    mu = nearest_neighbor(F2, {"a": Fraction(1, 3), "B": Fraction(1, 6)}) + delta(F2)
    back = loads(F2, dumps(mu))
    assert back.weights == mu.weights
    f = loads(F2, "a 0.25\nA 0.25  # comment\n\nb 1/2\n")
    assert not f.exact and f(F2.parse("b")) == 0.5


# --------------------------------------------------------------- properties
weights = st.fractions(min_value=0, max_value=1, max_denominator=50)


@settings(max_examples=60, deadline=None)
@given(st.lists(weights, min_size=4, max_size=4), st.lists(weights, min_size=4, max_size=4))
def test_convolution_mass_property(w1, w2):
    syms = ["a", "A", "b", "B"]
    if not any(w1) or not any(w2):
        return
    mu = nearest_neighbor(F2, dict(zip(syms, w1)))
    nu = nearest_neighbor(F2, dict(zip(syms, w2)))
    c = convolve(mu, nu)
    assert c.total_mass == mu.total_mass * nu.total_mass
    assert all(v >= 0 for v in c.weights.values())


@settings(max_examples=40, deadline=None)
@given(st.lists(weights, min_size=2, max_size=2), st.integers(1, 4))
def test_powers_of_symmetric_are_symmetric(w, n):
    if not any(w):
        return
    mu = nearest_neighbor(F2, {"a": w[0], "A": w[0], "b": w[1], "B": w[1]})
    p = power(mu, n)
    assert p.check_symmetric()
    assert p.total_mass == mu.total_mass ** n
