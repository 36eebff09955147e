import numpy as np
import pytest

from hodgescat.expressions import (Expression, ExpressionError,
                                   parse_expression, sampled_agrees,
                                   tail_boundedness)


def test_parse_and_eval():
    e = parse_expression("exp(-r) + r^2 / 2")
    assert e(2.0) == pytest.approx(np.exp(-2) + 2.0)
    arr = e(np.array([1.0, 3.0]))
    assert arr.shape == (2,)


def test_parse_rejects_unknown_symbols():
    with pytest.raises(ExpressionError):
        parse_expression("q + 1")
    with pytest.raises(ExpressionError):
        parse_expression("import os")


def test_bump_support_and_smoothness():
    b = parse_expression("bump(3, 7)")
    xs = np.linspace(0, 10, 101)
    vals = b(xs)
    assert np.all(vals[(xs <= 3) | (xs >= 7)] == 0.0)
    assert vals[50] == pytest.approx(1.0)  # peak at the center
    # derivative stays finite across the support edges
    dv = b.diff()(xs)
    assert np.all(np.isfinite(dv))


def test_diff_matches_finite_difference():
    e = parse_expression("sinh(2*exp(-r))")
    h = 1e-6
    fd = (e(2.0 + h) - e(2.0 - h)) / (2 * h)
    assert e.diff()(2.0) == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize("txt,status", [
    ("exp(-r)", "bounded"),
    ("1/r^2", "bounded"),
    ("4*r^2", "unbounded"),
    ("exp(r)", "unbounded"),
    ("2 + sin(r)", "bounded"),
])
def test_tail_boundedness(txt, status):
    assert tail_boundedness(parse_expression(txt)).status == status


def test_tail_inconclusive_never_guesses():
    # an eventually increasing sampled tail with no symbolic limit available
    # through the bump composition stays explicit about it
    v = tail_boundedness(Expression("bump(100, 300)*exp(r)"), r0=1.0)
    assert v.status in ("bounded", "inconclusive")


def test_sampled_agreement():
    e = parse_expression("exp(-r)")
    rr = np.linspace(1, 5, 9)
    assert sampled_agrees(e, rr, np.exp(-rr))
    assert not sampled_agrees(e, rr, np.exp(-rr) + 1e-6)
