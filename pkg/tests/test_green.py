import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greenwalk.domains import Domain, Region
from greenwalk.errors import DivergenceError, InputError, ResourceError
from greenwalk.green import (GreenConfig, decomposition_check, exact_path_masses, first_visit,
                             green, green_restricted, harnack_check, harnack_constant,
                             martin_kernel, return_log_series, spectral_radius, supermult_check)
from greenwalk.groups import free_group, free_product
from greenwalk.lumped import SegmentLump, orbit_targets, branch_counts
from greenwalk.measures import (Measure, TailFamily, lazy, nearest_neighbor, power, realize, srw)

F2 = free_group(2)
Z2_3 = free_product(2, 2, 2)
SRW = srw(F2)
P = F2.parse


# ------------------------------------------------------------------ oracles
def test_srw_green_at_identity():
    gv = green("e", "e", SRW, GreenConfig(working_radius=30))
    assert gv.converged
    assert gv.value == pytest.approx(1.5, abs=1e-9)
    assert gv.value <= 1.5  # truncations are lower bounds


def test_srw_green_decays_geometrically():
    cfg = GreenConfig(working_radius=30)
    for w, expect in (("a", 0.5), ("ab", 1.5 / 9), ("BaB", 1.5 / 27)):
        assert green("e", w, SRW, cfg).value == pytest.approx(expect, rel=1e-9)


def test_first_visit_masses():
    cfg = GreenConfig(working_radius=30)
    assert first_visit("e", "e", SRW, cfg).value == pytest.approx(1 / 3, rel=1e-9)
    assert first_visit("e", "a", SRW, cfg).value == pytest.approx(1 / 3, rel=1e-9)


def test_z2_cubed_green():
    mu = srw(Z2_3)
    cfg = GreenConfig(working_radius=40)
    assert green("e", "e", mu, cfg).value == pytest.approx(2.0, rel=1e-9)
    assert green("e", "ab", mu, cfg).value == pytest.approx(0.5, rel=1e-9)


def test_lazy_walk_doubles_green():
    assert green("e", "e", lazy(SRW), GreenConfig(working_radius=30)).value == pytest.approx(3.0, rel=1e-9)


def test_martin_kernel_on_axis():
    m = martin_kernel("a", "aaaaaa", SRW, GreenConfig(working_radius=30))
    assert m.value == pytest.approx(3.0, rel=1e-9)


def test_rational_mode_is_exact():
    cfg = GreenConfig(working_radius=3, mode="rational", diagnostics=False)
    gv = green("e", "a", SRW, cfg)
    assert isinstance(gv.exact, Fraction)
    # the truncated value is a lower bound of 1/2
    assert 0 < gv.exact < Fraction(1, 2)
    fl = green("e", "a", SRW, GreenConfig(working_radius=3, engine="explicit", diagnostics=False))
    assert float(gv.exact) == pytest.approx(fl.value, rel=1e-12)


def test_path_cap_masses():
    # exactly 7/64 of the 4-step paths return
    m = exact_path_masses((), SRW.to_exact(), 4, [()])[()]
    assert m == [1, 0, Fraction(1, 4), 0, Fraction(7, 64)]


def test_rational_path_cap_limit():
    with pytest.raises(ResourceError):
        GreenConfig(mode="rational", path_cap=21)


def test_restricted_ball_complement_is_zero_for_srw():
    cfg = GreenConfig(working_radius=10, center=())
    val = green_restricted("A", "a", Domain.ball_complement((), 0), SRW, cfg).value
    assert val == 0.0


def test_recurrent_like_scaling_is_detected():
    # 1.2 * srw has spectral radius > 1: the Green function is infinite
    with pytest.raises(DivergenceError):
        green("e", "e", SRW.scale(Fraction(6, 5)), GreenConfig(working_radius=12))


# ------------------------------------------------------ lumping vs explicit
@pytest.mark.parametrize("L", [0, 1, 2, 4])
def test_orbit_targets_cover_spheres(L):
    q, d = 3, 4
    b = branch_counts(L, q)
    sphere = 4 * 3 ** (d - 1)
    for k in range(L + 1):
        for h in range(4):
            assert sum(c for _, c in orbit_targets(k, h, d, L, q, b)) == sphere


@pytest.mark.parametrize("group_name", ["F2", "Z2_3"])
@pytest.mark.parametrize("x, y, domain", [
    ("e", "e", None), ("e", "a", None), ("a", "ab", None),
    ("A", "ab", ("ball", "e", 0)), ("e", "abab", ("ball", "ab", 1)),
])
def test_lumped_matches_explicit(group_name, x, y, domain):
    g = F2 if group_name == "F2" else Z2_3
    mu, _ = realize(g, TailFamily.gaussian(0.7), 1e-5)
    if g is Z2_3:
        x = x.replace("A", "c")
    x, y = g.parse(x), g.parse(y)
    om = Domain.full() if domain is None else Domain.ball_complement(g.parse(domain[1]), domain[2])
    base = dict(working_radius=5, center=())
    a = green_restricted(x, y, om, mu, GreenConfig(engine="lumped", **base))
    b = green_restricted(x, y, om, mu, GreenConfig(engine="explicit", **base))
    assert a.value == pytest.approx(b.value, rel=1e-11, abs=1e-300)
    assert "lumped" in a.method and "explicit" in b.method


def test_hourglass_lumped_matches_explicit():
    mu, _ = realize(F2, TailFamily.gaussian(0.7), 1e-5)
    x, y, z = P("AA"), P("e"), P("aa")
    om = Domain.hourglass(F2, x, y, z, 1)
    base = dict(working_radius=4, center="tube")
    a = green_restricted(x, z, om, mu, GreenConfig(engine="lumped", **base))
    b = green_restricted(x, z, om, mu, GreenConfig(engine="explicit", **base))
    assert a.value == pytest.approx(b.value, rel=1e-11)


# ------------------------------------------------------------ decompositions
def test_decomposition_residual_zero():
    cfg = GreenConfig(working_radius=3, mode="rational")
    mu = nearest_neighbor(F2, {"a": Fraction(3, 10), "A": Fraction(3, 10),
                               "b": Fraction(1, 5), "B": Fraction(1, 5)})
    res = decomposition_check("e", "ab", [P("a"), P("b")], Domain.complement([P("B")]), mu, cfg)
    assert res.first_visit == 0 and res.last_visit == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 16), st.integers(0, 16), st.sets(st.integers(1, 16), min_size=1, max_size=3))
def test_decomposition_property(ix, iy, iA):
    ball = F2.ball((), 2)
    x, y = ball[ix], ball[iy]
    A = [ball[i] for i in iA if ball[i] not in (x, y)]
    if not A:
        return
    res = decomposition_check(x, y, A, Domain.full(), SRW, GreenConfig(working_radius=3, mode="rational"))
    assert res.max == 0


# -------------------------------------------------------- inequalities
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 16), st.integers(0, 16), st.integers(0, 16))
def test_supermultiplicativity_property(i, j, k):
    ball = F2.ball((), 2)
    r = supermult_check(ball[i], ball[j], ball[k], SRW, 4, 4)
    assert r.holds and r.lhs <= r.rhs


def test_harnack_constant_values():
    assert harnack_constant(SRW) == pytest.approx(4.0)
    nn = nearest_neighbor(F2, {"a": 0.4, "A": 0.4, "b": 0.1, "B": 0.1})
    assert harnack_constant(nn) == pytest.approx(10.0)


def test_harnack_check_holds():
    assert harnack_check("A", "e", "aaa", SRW, GreenConfig(working_radius=20)).holds


# ------------------------------------------------------------- spectral
def test_return_series_matches_convolution():
    lp = return_log_series(SRW, 6)
    for n in (2, 4, 6):
        assert math.exp(lp[n]) == pytest.approx(float(power(SRW, n)(())), rel=1e-12)
    assert lp[3] == -math.inf


def test_return_series_explicit_path():
    nn = nearest_neighbor(F2, {"a": 0.4, "A": 0.4, "b": 0.1, "B": 0.1})
    lp = return_log_series(nn, 6)
    assert math.exp(lp[4]) == pytest.approx(float(power(nn.to_exact(), 4)(())), rel=1e-12)


def test_spectral_estimates_bracket_truth():
    est = spectral_radius(SRW)
    rho = math.sqrt(3) / 2
    # even-return roots increase to rho; the ball eigenvalue is below the norm
    assert est.even_return < rho
    assert est.power < rho
    assert est.extrapolated == pytest.approx(rho, rel=1e-6)
    assert est.power <= est.power_upper * (1 + 1e-12)


def test_even_return_roots_increase():
    lp = return_log_series(SRW, 400)
    roots = [math.exp(lp[n] / n) for n in range(2, 401, 2)]
    assert all(b > a for a, b in zip(roots, roots[1:]))
