"""Hypothesis strategies for parameter tuples."""

from __future__ import annotations

from hypothesis import assume
from hypothesis import strategies as st

from radial_lab import SystemParams


@st.composite
def growth_params(draw, max_N: int = 6):
    """Parameters with p < 1 and ps + q < 1 (kappa bounded away from 0)."""
    N = draw(st.integers(2, max_N))
    a = draw(st.floats(0, 3))
    b = draw(st.floats(0, 3))
    s = draw(st.floats(1, 3))
    p = draw(st.floats(0.02, min(0.98, 0.95 / s)))
    q = draw(st.floats(0.01, 0.99))
    assume(1 - p * s - q > 0.02)
    return SystemParams(N, a, b, p, q, s)


@st.composite
def any_params(draw):
    N = draw(st.integers(2, 8))
    a = draw(st.floats(0, 4))
    b = draw(st.floats(0, 4))
    s = draw(st.floats(1, 6))
    p = draw(st.floats(0.01, 4))
    q = draw(st.floats(0.01, 4))
    return SystemParams(N, a, b, p, q, s)
