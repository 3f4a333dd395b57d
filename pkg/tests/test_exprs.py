import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from logitmeta import InputError
from logitmeta.exprs import Expr, parse


@pytest.mark.parametrize("text,n,value", [
    ("n**3", 4, 64.0),
    ("exp(0.5*n)", 2, math.e),
    ("50*n**2", 10, 5000.0),
    ("-n + 3", 1, 2.0),
    ("sqrt(n)*log(n)", math.e**2, 2 * math.e),
    ("e**n", 1, math.e),
    ("poly:2,3", 2, 16.0),
    ("exp:0.3,1", 10, math.exp(3)),
    ("explog:1", 4, math.exp(2 * math.log(4))),
    ("nlogn", math.e, math.e),
])
def test_values(text, n, value):
    assert Expr(text)(n) == pytest.approx(value, rel=1e-14)


def test_vectorized():
    out = Expr("n**2")(np.array([1, 2, 3]))
    assert out.tolist() == [1.0, 4.0, 9.0]


@pytest.mark.parametrize("text", [
    "__import__('os')", "m + 1", "n if n else 1", "open(n)", "exp(n, 2)", "n % 2",
    "poly:1", "bogus:1,2", "exp(", "True", "'n'", "n.real", "[n]", "log(n=1)",
])
def test_rejected(text):
    with pytest.raises(InputError):
        Expr(text)


def test_parse_passthrough():
    e = Expr("n")
    assert parse(e) is e
    assert repr(parse("n+1")) == "Expr('n+1')"


@given(st.integers(1, 10**6), st.floats(0.1, 3.0))
def test_poly_template_matches_expression(n, d):
    assert Expr(f"poly:1.5,{d!r}")(n) == pytest.approx(1.5 * n**d, rel=1e-12)
