import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hmmtails.model import (
    BoundedUniform,
    CoefficientLaw,
    Constant,
    DegenerateLine,
    InducedModel,
    LogUniform,
    SignedLogUniform,
    TwoPoint,
    TwoSidedPareto,
)

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

E = math.e


# -- worked models --------------------------------------------------------

@pytest.fixture
def iid_grey():
    return InducedModel.build([[1.0]], [CoefficientLaw(TwoSidedPareto(1.5, 1.0, 1.0, 0.0), Constant(0.5))])


@pytest.fixture
def two_state_grey():
    return InducedModel.build(
        [[0.5, 0.5], [0.5, 0.5]],
        [
            CoefficientLaw(TwoSidedPareto(1.0, 1.0, 1.0, 0.0), Constant(0.5)),
            CoefficientLaw(TwoSidedPareto(1.0, 2.0, 2.0, 0.0), Constant(0.25)),
        ],
    )


@pytest.fixture
def signed_grey():
    return InducedModel.build([[1.0]], [CoefficientLaw(TwoSidedPareto(1.0, 1.0, 1.0, 0.0), Constant(-0.5))])


@pytest.fixture
def kesten_lattice():
    return InducedModel.build([[1.0]], [CoefficientLaw(Constant(1.0), TwoPoint(2.0, 0.5, 0.25))])


@pytest.fixture
def kesten_signed():
    return InducedModel.build(
        [[1.0]], [CoefficientLaw(BoundedUniform(-1.0, 1.0), SignedLogUniform(math.exp(-2), E, 0.25))]
    )


@pytest.fixture
def degenerate_line():
    law = CoefficientLaw(None, LogUniform(0.5, 1.5), DegenerateLine(2.0))
    return InducedModel.build([[0.7, 0.3], [0.4, 0.6]], [law, law], states=["a", "b"])


# -- strategies -----------------------------------------------------------

@st.composite
def stochastic_matrices(draw, max_d=8):
    """Strictly positive rows, hence irreducible."""
    d = draw(st.integers(1, max_d))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    P = rng.uniform(0.05, 1.0, size=(d, d))
    return P / P.sum(axis=1, keepdims=True)


@st.composite
def sparse_stochastic_matrices(draw, max_d=6):
    """Cycle plus random extra edges: irreducible, possibly periodic."""
    d = draw(st.integers(2, max_d))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    P = np.zeros((d, d))
    for i in range(d):
        P[i, (i + 1) % d] = rng.uniform(0.1, 1.0)
    extra = rng.random((d, d)) < 0.3
    P[extra] += rng.uniform(0.0, 1.0, size=extra.sum())
    return P / P.sum(axis=1, keepdims=True)


def m_laws():
    pos = st.floats(0.1, 3.0)
    return st.one_of(
        pos.map(Constant),
        st.tuples(pos, pos, st.floats(0.0, 1.0)).map(lambda t: TwoPoint(*t)),
        st.tuples(st.floats(0.1, 1.0), st.floats(1.05, 3.0)).map(lambda t: LogUniform(t[0], t[0] * t[1])),
        st.tuples(st.floats(0.1, 1.0), st.floats(1.05, 3.0), st.floats(0.0, 1.0)).map(
            lambda t: SignedLogUniform(t[0], t[0] * t[1], t[2])
        ),
    )


def q_laws():
    return st.one_of(
        st.floats(-3, 3).map(Constant),
        st.tuples(st.floats(0.5, 3.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0)).map(
            lambda t: TwoSidedPareto(t[0], 2.0, t[1], t[2])
        ),
        st.tuples(st.floats(-2, 0), st.floats(0.1, 2)).map(lambda t: BoundedUniform(t[0], t[0] + t[1])),
    )


@st.composite
def catalog_models(draw, max_d=5):
    P = draw(stochastic_matrices(max_d))
    laws = [CoefficientLaw(draw(q_laws()), draw(m_laws())) for _ in range(P.shape[0])]
    return InducedModel.build(P, laws)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
