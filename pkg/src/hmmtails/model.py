"""State space, modulating chain and per-state coefficient laws.

The coefficient pair at time n is ``(Q_n, M_n) = (Q_{n,X_n}, M_{n,X_n})``: a
fresh independent draw from the law attached to the current hidden state.
Laws come from a closed catalog so that every tail constant and every
``E|M|^beta`` is available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import BadChain, BadExponent, BadLaw

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Q laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoSidedPareto:
    """Pure power tails ``P(Q > t) = q_plus t^-alpha0``, ``P(Q < -t) = q_minus t^-alpha0``.

    The formulas hold exactly for ``t >= threshold = max(t0, (q_plus + q_minus)^(1/alpha0))``;
    the second term only matters when the weights are too large for the tails
    to start at t0.  The remaining mass sits on a uniform core on
    ``[core_lo, core_hi]``, which must lie inside ``[-t0, t0]``.
    """

    alpha0: float
    t0: float = 1.0
    q_plus: float = 1.0
    q_minus: float = 0.0
    core_lo: float | None = None
    core_hi: float | None = None

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.t0 > 0):
            raise BadLaw("TwoSidedPareto needs alpha0 > 0 and t0 > 0")
        if self.q_plus < 0 or self.q_minus < 0:
            raise BadLaw("TwoSidedPareto weights must be nonnegative")
        lo, hi = self.core
        if not (-self.t0 <= lo <= hi <= self.t0):
            raise BadLaw("TwoSidedPareto core must lie inside [-t0, t0]")

    @property
    def threshold(self) -> float:
        return max(float(self.t0), (self.q_plus + self.q_minus) ** (1.0 / self.alpha0))

    @property
    def tail_mass(self) -> float:
        return min(1.0, (self.q_plus + self.q_minus) * self.threshold ** (-self.alpha0))

    @property
    def core(self) -> tuple[float, float]:
        lo = -self.t0 if self.core_lo is None else self.core_lo
        hi = self.t0 if self.core_hi is None else self.core_hi
        return float(lo), float(hi)

    def tail_params(self):
        return self.q_plus, self.q_minus, self.alpha0

    def constant_value(self):
        return None

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # one uniform per draw: pick the branch, then rescale u within it
        t1 = self.threshold
        wp = self.q_plus * t1 ** (-self.alpha0)
        wm = self.q_minus * t1 ** (-self.alpha0)
        u = rng.random(size)
        out = np.empty(size)
        plus = u < wp
        minus = (u >= wp) & (u < wp + wm)
        core = ~(plus | minus)
        if plus.any():
            out[plus] = pareto_quantile(1.0 - u[plus] / wp, self.alpha0, t1)
        if minus.any():
            out[minus] = -pareto_quantile(1.0 - (u[minus] - wp) / wm, self.alpha0, t1)
        if core.any():
            lo, hi = self.core
            w = (u[core] - wp - wm) / max(1.0 - wp - wm, np.finfo(float).tiny)
            out[core] = lo + (hi - lo) * w
        return out


def pareto_quantile(u, alpha0: float, t0: float):
    """Inverse survival function ``t0 * u^(-1/alpha0)`` for u in (0, 1]."""
    return t0 * np.power(u, -1.0 / alpha0)


@dataclass(frozen=True)
class Constant:
    value: float

    def tail_params(self):
        return 0.0, 0.0, math.inf

    def constant_value(self):
        return float(self.value)

    def sample(self, rng, size):
        return np.full(size, float(self.value))

    # M-law interface
    def moment(self, beta: float, sign: int) -> float:
        v = float(self.value)
        if sign * v <= 0:
            return 0.0
        return abs(v) ** beta

    def log_moment(self) -> float:
        return math.log(abs(self.value))

    def log_support(self):
        return [math.log(abs(self.value))]

    def _check_m(self):
        if self.value == 0:
            raise BadLaw("constant M must be nonzero")


@dataclass(frozen=True)
class BoundedUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise BadLaw("BoundedUniform needs lo < hi")

    def tail_params(self):
        return 0.0, 0.0, math.inf

    def constant_value(self):
        return None

    def sample(self, rng, size):
        return self.lo + (self.hi - self.lo) * rng.random(size)


# ---------------------------------------------------------------------------
# M laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPoint:
    """``M = a`` with probability p, ``M = -b`` otherwise (a, b > 0)."""

    a: float
    b: float
    p: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and 0 <= self.p <= 1):
            raise BadLaw("TwoPoint needs a > 0, b > 0 and 0 <= p <= 1")

    def moment(self, beta, sign):
        if sign > 0:
            return self.p * self.a ** beta
        return (1 - self.p) * self.b ** beta

    def log_moment(self):
        total = 0.0
        if self.p > 0:
            total += self.p * math.log(self.a)
        if self.p < 1:
            total += (1 - self.p) * math.log(self.b)
        return total

    def log_support(self):
        pts = []
        if self.p > 0:
            pts.append(math.log(self.a))
        if self.p < 1:
            pts.append(math.log(self.b))
        return pts

    def constant_value(self):
        if self.p == 1:
            return self.a
        if self.p == 0:
            return -self.b
        return None

    def sample(self, rng, size):
        return np.where(rng.random(size) < self.p, self.a, -self.b)


@dataclass(frozen=True)
class LogUniform:
    """``log M`` uniform on ``[log lo, log hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0 < self.lo < self.hi):
            raise BadLaw("LogUniform needs 0 < lo < hi")

    def magnitude_moment(self, beta: float) -> float:
        width = math.log(self.hi / self.lo)
        x = beta * width
        if x == 0:
            return 1.0
        # lo^beta * (e^x - 1) / x, stable for small beta
        return self.lo ** beta * math.expm1(x) / x

    def moment(self, beta, sign):
        return self.magnitude_moment(beta) if sign > 0 else 0.0

    def log_moment(self):
        return 0.5 * (math.log(self.lo) + math.log(self.hi))

    def log_support(self):
        return None

    def constant_value(self):
        return None

    def sample_magnitude(self, rng, size):
        return np.exp(math.log(self.lo) + math.log(self.hi / self.lo) * rng.random(size))

    def sample(self, rng, size):
        return self.sample_magnitude(rng, size)


@dataclass(frozen=True)
class SignedLogUniform(LogUniform):
    """LogUniform magnitude with sign -1 with probability s, independent of the magnitude."""

    s: float = 0.5

    def __post_init__(self):
        super().__post_init__()
        if not 0 <= self.s <= 1:
            raise BadLaw("SignedLogUniform needs 0 <= s <= 1")

    def moment(self, beta, sign):
        weight = (1 - self.s) if sign > 0 else self.s
        return weight * self.magnitude_moment(beta)

    def sample(self, rng, size):
        mag = self.sample_magnitude(rng, size)
        return np.where(rng.random(size) < self.s, -mag, mag)


QLaw = Union[TwoSidedPareto, Constant, BoundedUniform]
MLaw = Union[Constant, TwoPoint, LogUniform, SignedLogUniform]

Q_LAWS = (TwoSidedPareto, Constant, BoundedUniform)
M_LAWS = (Constant, TwoPoint, LogUniform, SignedLogUniform)


@dataclass(frozen=True)
class Independent:
    pass


@dataclass(frozen=True)
class DegenerateLine:
    """``Q = c (1 - M)`` exactly, so ``Q + c M = c`` almost surely."""

    c: float


@dataclass(frozen=True)
class CoefficientLaw:
    """Joint law of ``(Q, M)`` in one state.  ``q_law`` is ignored (may be None) under DegenerateLine."""

    q_law: QLaw | None
    m_law: MLaw
    coupling: Independent | DegenerateLine = field(default_factory=Independent)

    def __post_init__(self):
        if not isinstance(self.m_law, M_LAWS):
            raise BadLaw(f"unsupported M law {type(self.m_law).__name__}")
        if isinstance(self.m_law, Constant):
            self.m_law._check_m()
        if isinstance(self.coupling, Independent):
            if not isinstance(self.q_law, Q_LAWS):
                raise BadLaw("independent coupling needs a Q law from the catalog")
        elif not isinstance(self.coupling, DegenerateLine):
            raise BadLaw(f"unsupported coupling {self.coupling!r}")

    @property
    def degenerate_line(self) -> bool:
        return isinstance(self.coupling, DegenerateLine)

    def q_constant(self):
        """Value of Q when Q is almost surely constant, else None."""
        if self.degenerate_line:
            m = self.m_law.constant_value()
            return None if m is None else self.coupling.c * (1.0 - m)
        return self.q_law.constant_value()

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.m_law.sample(rng, size)
        if self.degenerate_line:
            q = self.coupling.c * (1.0 - m)
        else:
            q = self.q_law.sample(rng, size)
        return q, m


# ---------------------------------------------------------------------------
# chain and model
# ---------------------------------------------------------------------------

def stationary_distribution(P) -> np.ndarray:
    """Stationary law of an irreducible row-stochastic matrix.

    Solves ``pi (P - I) = 0`` with the last balance equation replaced by
    ``sum(pi) = 1``.
    """
    P = np.asarray(P, dtype=float)
    _check_stochastic(P)
    d = P.shape[0]
    A = P.T - np.eye(d)
    A[-1, :] = 1.0
    rhs = np.zeros(d)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise BadChain("stationary system is singular") from exc
    if np.any(pi <= 0) or np.max(np.abs(pi @ P - pi)) > STATIONARY_TOL:
        raise BadChain("could not find a strictly positive stationary law")
    return pi


def _check_stochastic(P: np.ndarray) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise BadChain(f"P must be a nonempty square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise BadChain("P has negative or non-finite entries")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > STOCHASTIC_TOL:
        raise BadChain("rows of P must sum to 1")
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise BadChain(f"P is reducible ({n_comp} communicating classes)")


@dataclass(frozen=True, eq=False)
class ChainSpec:
    states: tuple
    P: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        _check_stochastic(P)
        states = tuple(self.states)
        if len(states) != P.shape[0] or len(set(states)) != len(states):
            raise BadChain("states must be distinct and match the size of P")
        if self.pi is None:
            pi = stationary_distribution(P)
        else:
            pi = np.array(self.pi, dtype=float)
            if (
                pi.shape != (len(states),)
                or abs(pi.sum() - 1) > STATIONARY_TOL
                or np.max(np.abs(pi @ P - pi)) > STATIONARY_TOL
            ):
                raise BadChain("supplied pi is not stationary for P")
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @property
    def d(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise BadChain(f"unknown state {state!r}") from None


@dataclass(frozen=True, eq=False)
class InducedModel:
    chain: ChainSpec
    laws: Mapping
    exponent_hint: float | None = None

    def __post_init__(self):
        missing = [s for s in self.chain.states if s not in self.laws]
        if missing:
            raise BadLaw(f"no coefficient law for states {missing}")
        object.__setattr__(self, "laws", dict(self.laws))
        object.__setattr__(self, "_ordered", tuple(self.laws[s] for s in self.chain.states))

    @classmethod
    def build(cls, P, laws: Sequence[CoefficientLaw], states=None, exponent_hint=None):
        """Positional convenience constructor: ``laws[i]`` belongs to row i of P."""
        states = tuple(range(len(laws))) if states is None else tuple(states)
        return cls(ChainSpec(states, P), dict(zip(states, laws)), exponent_hint)

    @property
    def d(self) -> int:
        return self.chain.d

    @property
    def ordered_laws(self) -> tuple:
        return self._ordered

    def sample_coefficients(self, state_idx: np.ndarray, rng: np.random.Generator):
        """Draw ``(q, m)`` for every entry of an array of state indices."""
        state_idx = np.asarray(state_idx)
        q = np.empty(state_idx.shape)
        m = np.empty(state_idx.shape)
        if self.d == 1:
            q[...], m[...] = self._ordered[0].sample(rng, state_idx.size)
            return q, m
        for s, law in enumerate(self._ordered):
            mask = state_idx == s
            n = int(mask.sum())
            if n:
                q[mask], m[mask] = law.sample(rng, n)
        return q, m


# ---------------------------------------------------------------------------
# closed-form moments and tails
# ---------------------------------------------------------------------------

def _sign_code(sign) -> int:
    if sign in ("both", 0, None):
        return 0
    if sign in (1, "+", "+1"):
        return 1
    if sign in (-1, "-", "-1"):
        return -1
    raise ValueError(f"sign must be +1, -1 or 'both', got {sign!r}")


def m_moment(law, beta: float, sign=0) -> float:
    """``E(|M|^beta 1{sign(M) = sign})``; ``sign='both'`` (or 0) sums the two halves."""
    if beta < 0:
        raise BadExponent("beta must be nonnegative")
    m_law = law.m_law if isinstance(law, CoefficientLaw) else law
    code = _sign_code(sign)
    if code == 0:
        return m_law.moment(beta, 1) + m_law.moment(beta, -1)
    return m_law.moment(beta, code)


def m_log_moment(law) -> float:
    m_law = law.m_law if isinstance(law, CoefficientLaw) else law
    return m_law.log_moment()


def q_tail_params(law) -> tuple[float, float, float]:
    """Exact ``(q_plus, q_minus, alpha0)``; bounded laws give ``(0, 0, inf)``."""
    if isinstance(law, CoefficientLaw):
        if law.degenerate_line:
            return 0.0, 0.0, math.inf
        law = law.q_law
    return law.tail_params()


def tail_vectors(model: InducedModel, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-state ``q^(+1)`` and ``q^(-1)`` measured against ``t^-alpha``.

    Lighter tails (alpha0 > alpha) contribute 0; heavier ones are infinite.
    """
    qp = np.zeros(model.d)
    qm = np.zeros(model.d)
    for i, law in enumerate(model.ordered_laws):
        plus, minus, a0 = q_tail_params(law)
        if plus == 0 and minus == 0:
            continue
        if math.isclose(a0, alpha, rel_tol=1e-12, abs_tol=0.0):
            qp[i], qm[i] = plus, minus
        elif a0 < alpha:
            qp[i] = math.inf if plus > 0 else 0.0
            qm[i] = math.inf if minus > 0 else 0.0
    return qp, qm


def moment_vectors(model: InducedModel, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-state ``m^(+1)`` and ``m^(-1)`` at exponent beta."""
    plus = np.array([m_moment(law, beta, 1) for law in model.ordered_laws])
    minus = np.array([m_moment(law, beta, -1) for law in model.ordered_laws])
    return plus, minus


def lyapunov_exponent(model: InducedModel) -> float:
    """``sum_i pi_i E log|M_i|``; negative iff the recursion contracts."""
    return float(sum(p * m_log_moment(law) for p, law in zip(model.chain.pi, model.ordered_laws)))


def sample_pair(law: CoefficientLaw, rng: np.random.Generator) -> tuple[float, float]:
    q, m = law.sample(rng, 1)
    return float(q[0]), float(m[0])


# ---------------------------------------------------------------------------
# lattice certificate
# ---------------------------------------------------------------------------

def lattice_span(model: InducedModel, max_denominator: int = 10_000, tol: float = 1e-9):
    """Return a span delta with every attainable log|M| in delta*Z, or None if lattice-free.

    Decided exactly on the catalog: any continuous magnitude law makes the
    stationary log|M| non-lattice.  Finite supports are lattice iff all
    nonzero points are rational multiples of one another.
    """
    points: list[float] = []
    for law in model.ordered_laws:
        support = law.m_law.log_support()
        if support is None:
            return None
        points.extend(support)
    nonzero = [v for v in points if abs(v) > tol]
    if not nonzero:
        return math.inf  # log|M| = 0: every delta works
    base = nonzero[0]
    ratios = []
    for v in nonzero:
        frac = Fraction(v / base).limit_denominator(max_denominator)
        if abs(float(frac) - v / base) > tol * max(1.0, abs(v / base)):
            return None
        ratios.append(frac)
    # delta = |base| / lcm of denominators, then scaled by gcd of numerators
    lcm = 1
    for f in ratios:
        lcm = lcm * f.denominator // math.gcd(lcm, f.denominator)
    g = 0
    for f in ratios:
        g = math.gcd(g, abs(f.numerator * (lcm // f.denominator)))
    return abs(base) * g / lcm


# ---------------------------------------------------------------------------
# assumption report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class A1Report:
    holds: bool
    q_plus: list
    q_minus: list
    sup_q: float
    sum_q_plus: float


@dataclass(frozen=True)
class A2Report:
    holds: bool
    beta_used: float
    sup_beta_moment: float


@dataclass(frozen=True)
class A3Report:
    holds: bool
    m_plus: list
    m_minus: list
    sup_m: float


@dataclass(frozen=True)
class A4Report:
    holds: bool
    note: str = "declared for the catalog: no M law accumulates mass at 0+"


@dataclass(frozen=True)
class KestenReport:
    bounds_hold: bool
    lattice_free: bool
    sign_change: bool
    lattice_span: float | None = None


@dataclass(frozen=True)
class AssumptionReport:
    alpha: float
    a1: A1Report
    a2: A2Report
    a3: A3Report
    a4: A4Report
    kesten: KestenReport

    @property
    def grey_regime(self) -> bool:
        return self.a1.holds and self.a2.holds and self.a3.holds and self.a4.holds


def check_assumptions(
    model: InducedModel, alpha: float, beta: float | None = None, beta_max: float = 16.0
) -> AssumptionReport:
    """Evaluate (A1)-(A4) at ``alpha`` and the Kesten-regime conditions, analytically."""
    if not alpha > 0:
        raise BadExponent(f"alpha must be positive, got {alpha}")
    beta = alpha + 1.0 if beta is None else beta
    if not beta > alpha:
        raise BadExponent("the (A2) exponent must exceed alpha")

    qp, qm = tail_vectors(model, alpha)
    sup_q = float(max(qp.max(), qm.max()))
    a1 = A1Report(
        holds=bool(np.isfinite(sup_q) and qp.sum() > 0),
        q_plus=qp.tolist(), q_minus=qm.tolist(), sup_q=sup_q, sum_q_plus=float(qp.sum()),
    )

    sup_beta = max(m_moment(law, beta) for law in model.ordered_laws)
    a2 = A2Report(holds=bool(math.isfinite(sup_beta)), beta_used=beta, sup_beta_moment=sup_beta)

    mp, mm = moment_vectors(model, alpha)
    sup_m = float((mp + mm).max())
    a3 = A3Report(holds=sup_m < 1.0, m_plus=mp.tolist(), m_minus=mm.tolist(), sup_m=sup_m)

    bounded_q = all(q_tail_params(law)[:2] == (0.0, 0.0) for law in model.ordered_laws)
    span = lattice_span(model)
    from .spectral import lambda_sign_change  # spectral builds on this module

    kesten = KestenReport(
        bounds_hold=bounded_q,
        lattice_free=span is None,
        sign_change=lambda_sign_change(model, beta_max),
        lattice_span=span,
    )
    return AssumptionReport(alpha=alpha, a1=a1, a2=a2, a3=a3, a4=A4Report(True), kesten=kesten)
