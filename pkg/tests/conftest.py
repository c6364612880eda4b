import pytest
from hypothesis import strategies as st

from smflow.rates import Constant, PiecewiseConstant, RateMatrix, Saturating

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(criterion, passed, detail, elapsed):
        _ACCEPTANCE.append((criterion, passed, detail, elapsed))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail, elapsed in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {criterion}  ({elapsed:.2f}s)  {detail}")


rates_c = st.floats(min_value=0.05, max_value=5.0)


@st.composite
def piecewise(draw, positive=True):
    n = draw(st.integers(min_value=1, max_value=3))
    bps = sorted(draw(st.sets(st.floats(min_value=0.05, max_value=8.0), min_size=n, max_size=n)))
    lo = 0.05 if positive else 0.0
    vals = draw(st.lists(st.floats(min_value=lo, max_value=5.0), min_size=n, max_size=n))
    tail = draw(st.floats(min_value=0.05, max_value=5.0))
    return PiecewiseConstant(bps, vals, tail)


@st.composite
def rate_functions(draw, families=("constant", "saturating", "piecewise")):
    fam = draw(st.sampled_from(families))
    if fam == "constant":
        return Constant(draw(rates_c))
    if fam == "saturating":
        return Saturating(draw(rates_c))
    return draw(piecewise())


@st.composite
def rate_matrices(draw, min_states=2, max_states=5, families=("constant", "saturating", "piecewise")):
    n = draw(st.integers(min_value=min_states, max_value=max_states))
    states = list(range(1, n + 1))
    rates = {(i, j): draw(rate_functions(families)) for i in states for j in states if i != j}
    return RateMatrix(states, rates)
