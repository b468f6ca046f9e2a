"""Tails of the random linear recursion ``R_n = Q_n + M_n R_{n-1}`` with hidden-Markov coefficients."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BoundedUniform,
    ChainSpec,
    CoefficientLaw,
    Constant,
    DegenerateLine,
    Independent,
    InducedModel,
    LogUniform,
    SignedLogUniform,
    TwoPoint,
    TwoSidedPareto,
    check_assumptions,
    m_moment,
    q_tail_params,
    sample_pair,
    stationary_distribution,
)

__all__ = [
    "BoundedUniform",
    "ChainSpec",
    "CoefficientLaw",
    "Constant",
    "DegenerateLine",
    "Independent",
    "InducedModel",
    "LogUniform",
    "SignedLogUniform",
    "TwoPoint",
    "TwoSidedPareto",
    "check_assumptions",
    "m_moment",
    "q_tail_params",
    "sample_pair",
    "stationary_distribution",
]
