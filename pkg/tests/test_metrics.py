import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from risfb.errors import DimensionError, DomainError
from risfb.metrics import average_nmse_db, format_db, nmse, nmse_db, to_db
from risfb.numerics import crandn, make_rng


def test_nmse_examples():
    H = crandn(make_rng(0), (8, 4))
    assert nmse(H, H) == 0.0
    assert nmse_db(H, H) == -np.inf
    assert nmse_db(H, 0.9 * H) == pytest.approx(-20.0, abs=1e-9)
    assert nmse_db(H, np.zeros_like(H)) == pytest.approx(0.0, abs=1e-12)


def test_nmse_errors():
    with pytest.raises(DimensionError):
        nmse(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(DomainError):
        nmse(np.zeros((2, 2)), np.ones((2, 2)))


@given(st.floats(1e-3, 1e3), st.floats(0, 2 * np.pi))
def test_nmse_scale_invariant(mag, phase):
    rng = make_rng(1)
    H, E = crandn(rng, (6, 3)), crandn(rng, (6, 3))
    c = mag * np.exp(1j * phase)
    assert nmse(c * H, c * (H + 0.1 * E)) == pytest.approx(nmse(H, H + 0.1 * E), rel=1e-9)


def test_average_is_linear_mean():
    assert average_nmse_db([0.1, 0.001]) == pytest.approx(to_db(0.0505))
    assert average_nmse_db([0.01] * 5) == pytest.approx(-20.0)


def test_db_formatting_sentinel():
    assert format_db(0.0) == "<-180"
    assert format_db(1e-20) == "<-180"
    assert format_db(0.01) == "-20.0000"
    with pytest.raises(DomainError):
        to_db(-1.0)
