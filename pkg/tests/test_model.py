import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fbmruin.errors import DegenerateInput, DomainError
from fbmruin.model import (
    Case,
    ModelParams,
    OneDimParams,
    classify,
    derive,
    drift_d,
    lines_cross,
    validate,
)

P0 = ModelParams(2, 1, 1, 2, 0.5, 1.0)
P1 = ModelParams(2, 1, 1, 1.4, 0.25, 1.0)

positive = st.floats(0.1, 10.0)
hurst = st.floats(0.05, 0.95)


@st.composite
def interior_params(draw, H=hurst):
    """Crossing lines with t1 < t* by construction; t* < t2 is filtered."""
    h = draw(H) if isinstance(H, st.SearchStrategy) else H
    c1, q1 = draw(positive), draw(positive)
    c2 = c1 * draw(st.floats(0.05, 0.95))
    t1 = h * q1 / (c1 * (1 - h))
    t_star = t1 * (1 + draw(st.floats(0.01, 3.0)))
    q2 = q1 + (c1 - c2) * t_star
    assume(t_star < h * q2 / (c2 * (1 - h)) * (1 - 1e-6))
    return ModelParams(c1, q1, c2, q2, h)


def test_validate_accepts_valid_params():
    p = ModelParams(2, 1, 1, 2, 0.5, 0.5)
    assert validate(p) is p


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(H=1.0), "H"),
        (dict(H=0.0), "H"),
        (dict(delta=-1.0), "delta"),
        (dict(c1=-2.0), "c1"),
        (dict(q2=0.0), "q2"),
        (dict(c2=math.nan), "c2"),
    ],
)
def test_validate_names_offending_field(kwargs, field):
    base = dict(c1=2, q1=1, c2=1, q2=2, H=0.5, delta=0.5)
    with pytest.raises(DomainError) as err:
        validate(ModelParams(**{**base, **kwargs}))
    assert err.value.field == field


@pytest.mark.parametrize(
    "params, tag",
    [
        (ModelParams(2, 1, 1, 2, 0.5), "CaseTwoInterior"),
        (ModelParams(2, 1, 1, 2, 0.25), "CaseOneExterior(2)"),
        (ModelParams(2, 2, 1, 3, 0.5), "CaseThreeBoundary(1)"),
        (ModelParams(1, 4, 0.5, 5, 0.5), "CaseOneExterior(1)"),
        (ModelParams(2, 1, 1, 2, 0.75), "CaseOneExterior(1)"),
    ],
)
def test_classify_worked_examples(params, tag):
    assert classify(params).tag == tag


def test_classify_relabels_reversed_orientation():
    # c1 < c2 and q1 > q2: the lines still cross, so labels are swapped internally
    cls = classify(ModelParams(1, 2, 2, 1, 0.5))
    assert cls.swapped
    assert cls.tag == "CaseTwoInterior"


def test_non_crossing_lines_are_degenerate():
    assert classify(ModelParams(2, 2, 1, 1, 0.5)).tag == "DegenerateOneLine(1)"
    assert classify(ModelParams(1, 1, 2, 2, 0.5)).tag == "DegenerateOneLine(2)"


def test_parallel_lines_pick_larger_intercept():
    assert classify(ModelParams(1, 1, 1, 3, 0.5)).tag == "DegenerateOneLine(2)"
    assert classify(ModelParams(1, 3, 1, 1, 0.5)).tag == "DegenerateOneLine(1)"


def test_boundary_tie_tolerance():
    # t1 = 1 = t*; a relative nudge of 1e-12 stays on the boundary
    eps = 1e-12
    assert classify(ModelParams(2, 2 * (1 + eps), 1, 3, 0.5)).case is Case.CASE_THREE_BOUNDARY
    assert classify(ModelParams(2, 2.001, 1, 3, 0.5)).case is not Case.CASE_THREE_BOUNDARY


@settings(max_examples=200, deadline=None)
@given(positive, positive, positive, positive, hurst)
def test_classify_is_label_symmetric(c1, q1, c2, q2, H):
    assume((c1, q1) != (c2, q2))
    a = classify(ModelParams(c1, q1, c2, q2, H))
    b = classify(ModelParams(c2, q2, c1, q1, H))
    assert a.case == b.case
    if a.index is not None:
        assert b.index == 3 - a.index


def test_derive_p0():
    q = derive(P0)
    assert q.eta == pytest.approx(3.0, rel=1e-14)
    assert q.t_star == pytest.approx(1.0, rel=1e-14)
    assert q.d_h == pytest.approx(3.0, rel=1e-14)
    assert q.gamma == pytest.approx(4.5, rel=1e-14)
    assert q.big_a == pytest.approx(math.exp(1.5), rel=1e-14)
    assert q.d_slope_neg == pytest.approx(1 / 3, rel=1e-14)
    assert q.d_slope_pos == pytest.approx(-1 / 3, rel=1e-14)
    assert q.d_delta_offset == pytest.approx(-3.0, rel=1e-14)


def test_derive_p1():
    q = derive(P1)
    assert q.t_star == pytest.approx(0.4, rel=1e-12)
    assert q.w1p == pytest.approx(4.980, abs=1e-3)
    assert q.w2p == pytest.approx(-0.7114, abs=1e-3)
    assert q.big_b == pytest.approx(0.3113, abs=1e-4)


def test_w_derivatives_match_finite_differences():
    # independent check of the closed-form derivative
    q = derive(P1)
    h = 1e-6
    w1 = lambda t: (1 + 2 * t) ** 2 / t**0.5
    w2 = lambda t: (1.4 + t) ** 2 / t**0.5
    assert q.w1p == pytest.approx((w1(0.4 + h) - w1(0.4 - h)) / (2 * h), rel=1e-7)
    assert q.w2p == pytest.approx((w2(0.4 + h) - w2(0.4 - h)) / (2 * h), rel=1e-6)


def test_derive_rejects_degenerate():
    with pytest.raises(DegenerateInput):
        derive(ModelParams(2, 2, 1, 1, 0.5))


def test_derive_is_deterministic():
    assert derive(P1) == derive(P1)


@settings(max_examples=300, deadline=None)
@given(positive, positive, positive, positive, hurst)
def test_derived_invariants(c1, q1, c2, q2, H):
    p = ModelParams(c1, q1, c2, q2, H)
    assume(lines_cross(p))
    assume(abs(c1 - c2) > 1e-3 and abs(q1 - q2) > 1e-3)
    q = derive(p)
    assert q.t1 < q.t2
    a, b = (p.q1 + p.c1 * q.t_star), (p.q2 + p.c2 * q.t_star)
    assert a == pytest.approx(b, rel=1e-12)
    assert q.eta == pytest.approx(a, rel=1e-12)
    cls = classify(p)
    interior = cls.case is Case.CASE_TWO_INTERIOR
    assume(cls.case is not Case.CASE_THREE_BOUNDARY)
    assert (q.big_b > 0) == interior
    if interior:
        assert q.w1p > 0 > q.w2p
        assert q.d_slope_pos < 1 and q.d_slope_neg > -1
        assert q.gamma > 0


@settings(max_examples=200, deadline=None)
@given(interior_params(H=0.5))
def test_amplitude_exceeds_one_in_interior_brownian_case(p):
    # A > 1 is equivalent to t* < t2 only when H = 1/2, the one regime that uses A
    assert classify(p).case is Case.CASE_TWO_INTERIOR
    assert derive(p).big_a > 1


def test_amplitude_can_fall_below_one_off_brownian_case():
    p = ModelParams(3, 1, 2, 3, 0.75)
    assert classify(p).case is Case.CASE_TWO_INTERIOR
    assert derive(p).big_a < 1


def test_drift_examples():
    q = derive(P0)
    assert drift_d(-3.0, q) == pytest.approx(-1.0)
    assert drift_d(0.0, q) == 0.0
    assert drift_d(3.0, q, "delta_shifted") == pytest.approx(-4.0)
    assert drift_d(-3.0, q, "delta_shifted") == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        drift_d(0.0, q, "other")


@settings(max_examples=200, deadline=None)
@given(interior_params())
def test_drift_is_concave_with_zero_at_origin(p):
    assert classify(p).case is Case.CASE_TWO_INTERIOR
    q = derive(p)
    assert drift_d(0.0, q) == 0.0
    assert q.d_slope_neg >= q.d_slope_pos
    assert q.d_slope_pos < 1 and q.d_slope_neg > -1
    assert q.big_b > 0 and q.w1p > 0 > q.w2p


def test_one_dim_params():
    p = OneDimParams(c=1.0, q=2.0, H=0.25, delta=1.0)
    assert p.t0 == pytest.approx(1 / 3)
    assert p.t_peak == pytest.approx(2 / 3)
    assert p.c_big == pytest.approx(1.7547, abs=1e-4)
    # t0 minimises f and the closed-form second derivative matches a difference quotient
    h = 1e-4
    fd = (p.f(p.t0 + h) - 2 * p.f(p.t0) + p.f(p.t0 - h)) / h**2
    assert p.f_second_at_t0 == pytest.approx(fd, rel=1e-5)
    assert p.f(p.t0) < min(p.f(p.t0 * 0.9), p.f(p.t0 * 1.1))
    with pytest.raises(DomainError):
        OneDimParams(c=0.0, q=1.0, H=0.5)
