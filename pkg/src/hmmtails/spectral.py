"""Operators of the backward chain, the moment exponent and tail-constant vectors.

Everything here is finite-dimensional linear algebra on d x d nonnegative
matrices:

* ``H(i, j) = pi_j P(j, i) / pi_i`` -- the time-reversed kernel,
* ``G_eta(i, j) = m_i^(eta) H(i, j)`` with ``m_i^(eta) = E|M_i|^alpha 1{eta M_i > 0}``,
* ``H_beta(i, j) = H(i, j) E|M_j|^beta`` and ``Lambda(beta) = log rho(H_beta)``,
* ``Theta = H`` with column ``y*`` scaled by ``1 - r`` (the split kernel).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import model as _model
from .errors import (
    BadExponent,
    DegenerateStationary,
    HypothesisViolated,
    NoConvergence,
    NoKestenExponent,
    NotContracting,
    NumericalInconsistency,
    SingularSystem,
)
from .model import ChainSpec, InducedModel

log = logging.getLogger(__name__)

SPECTRAL_TOL = 1e-12
ROOT_TOL = 1e-10
RESIDUAL_TOL = 1e-9
CLAMP_TOL = 1e-10
NEUMANN_TOL = 1e-12
GRID_POINTS = 64


# ---------------------------------------------------------------------------
# Perron root
# ---------------------------------------------------------------------------

def spectral_radius(A, tol: float = SPECTRAL_TOL, max_iter: int = 200_000) -> float:
    """Perron root of a nonnegative matrix by power iteration with Collatz-Wielandt brackets.

    Iterates on ``A + c I`` (c = max row sum) so periodic matrices such as
    ``[[0, 2], [0.5, 0]]`` still converge; the shift is removed from the
    bracket.  Returns the bracket midpoint once its width is below
    ``tol * max(1, upper)``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    if np.any(A < 0):
        raise ValueError("spectral_radius needs a nonnegative matrix")
    d = A.shape[0]
    if d == 1:
        return float(A[0, 0])
    shift = float(A.sum(axis=1).max())
    if shift == 0.0:
        return 0.0
    B = A + shift * np.eye(d)
    v = np.ones(d)
    lo = hi = math.nan
    for _ in range(max_iter):
        w = B @ v
        ratio = w / v
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * max(1.0, hi - shift):
            return 0.5 * (lo + hi) - shift
        v = w / w.max()
        if v.min() <= 0.0:
            break
    raise NoConvergence(
        "power iteration did not close the Collatz-Wielandt bracket",
        bracket=(lo - shift, hi - shift),
    )


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def backward_matrix(chain: ChainSpec) -> np.ndarray:
    pi = np.asarray(chain.pi, dtype=float)
    if np.any(pi <= 0):
        raise DegenerateStationary("stationary law has a zero entry")
    H = chain.P.T * pi[None, :] / pi[:, None]
    return H / H.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class OperatorSet:
    H: np.ndarray
    G_plus: np.ndarray
    G_minus: np.ndarray
    G: np.ndarray
    alpha_used: float


def build_operators(model: InducedModel, alpha: float) -> OperatorSet:
    if not alpha > 0:
        raise BadExponent(f"alpha must be positive, got {alpha}")
    H = backward_matrix(model.chain)
    mp, mm = _model.moment_vectors(model, alpha)
    G_plus = mp[:, None] * H
    G_minus = mm[:, None] * H
    return OperatorSet(H=H, G_plus=G_plus, G_minus=G_minus, G=(mp + mm)[:, None] * H, alpha_used=alpha)


def weighted_kernel(model: InducedModel, beta: float, H: np.ndarray | None = None) -> np.ndarray:
    """``H_beta(i, j) = H(i, j) E|M_j|^beta``."""
    if H is None:
        H = backward_matrix(model.chain)
    w = np.array([_model.m_moment(law, beta) for law in model.ordered_laws])
    return H * w[None, :]


def lambda_beta(model: InducedModel, beta: float, tol: float = SPECTRAL_TOL) -> float:
    """``Lambda(beta) = log rho(H_beta)``: growth rate of ``E prod |M_i|^beta``."""
    if beta < 0:
        raise BadExponent("beta must be nonnegative")
    return math.log(spectral_radius(weighted_kernel(model, beta), tol))


def lambda_curve(model: InducedModel, betas, tol: float = SPECTRAL_TOL) -> list[tuple[float, float]]:
    H = backward_matrix(model.chain)
    return [(float(b), math.log(spectral_radius(weighted_kernel(model, b, H), tol))) for b in betas]


def _kesten_bracket(model: InducedModel, beta_max: float, tol: float):
    grid = [beta_max * k / GRID_POINTS for k in range(1, GRID_POINTS + 1)]
    curve = lambda_curve(model, grid, tol)
    neg = next((k for k, (_, v) in enumerate(curve) if v < 0), None)
    if neg is None:
        # the sign change may sit below the first grid point
        step = grid[0]
        for j in range(1, 40):
            b = step * 2.0 ** -j
            if lambda_beta(model, b, tol) < 0:
                return (b, step) if curve[0][1] > 0 else None, curve
        return None, curve
    pos = next((k for k in range(neg + 1, len(curve)) if curve[k][1] > 0), None)
    if pos is None:
        return None, curve
    # tightest bracket: last negative point before the first positive one
    last_neg = max(k for k in range(neg, pos) if curve[k][1] < 0)
    return (curve[last_neg][0], curve[pos][0]), curve


def lambda_sign_change(model: InducedModel, beta_max: float = 16.0, tol: float = SPECTRAL_TOL) -> bool:
    bracket, _ = _kesten_bracket(model, beta_max, tol)
    return bracket is not None


def convexity_defects(curve, slack: float = 1e-9) -> list[float]:
    """Betas on an equispaced curve where midpoint convexity fails by more than ``slack``."""
    bad = []
    for k in range(1, len(curve) - 1):
        (b0, l0), (b1, l1), (b2, l2) = curve[k - 1], curve[k], curve[k + 1]
        if abs((b2 - b1) - (b1 - b0)) < 1e-12 and l1 > 0.5 * (l0 + l2) + slack:
            bad.append(b1)
    return bad


def solve_alpha(model: InducedModel, beta_max: float = 16.0, tol: float = ROOT_TOL,
                spectral_tol: float = SPECTRAL_TOL) -> float:
    """Positive root of Lambda by bisection on a grid bracket in ``(0, beta_max]``."""
    bracket, curve = _kesten_bracket(model, beta_max, spectral_tol)
    if bracket is None:
        raise NoKestenExponent(f"Lambda does not change sign on (0, {beta_max}]")
    defects = convexity_defects(curve)
    if defects:
        warnings.warn(f"Lambda is not midpoint-convex near beta={defects}", RuntimeWarning)
    lo, hi = bracket
    while True:
        mid = 0.5 * (lo + hi)
        val = lambda_beta(model, mid, spectral_tol)
        if abs(val) < tol or hi - lo <= 4 * np.finfo(float).eps * hi:
            return mid
        if val < 0:
            lo = mid
        else:
            hi = mid


# ---------------------------------------------------------------------------
# tail constants
# ---------------------------------------------------------------------------

class TailConstants(NamedTuple):
    K: np.ndarray
    K_neumann: np.ndarray
    neumann_terms: int
    rho_G: float


class SignedConstants(NamedTuple):
    K_plus: np.ndarray
    K_minus: np.ndarray


def _finite_tail_vectors(model: InducedModel, alpha: float):
    qp, qm = _model.tail_vectors(model, alpha)
    if not (np.all(np.isfinite(qp)) and np.all(np.isfinite(qm))):
        raise BadExponent(f"some Q law has a heavier tail than t^-{alpha}")
    return qp, qm


def _clamp(K: np.ndarray, what: str) -> np.ndarray:
    if np.any(K < -CLAMP_TOL):
        raise NumericalInconsistency(f"{what} has negative entries {K.min():.3e}")
    return np.maximum(K, 0.0)


def _solve(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if np.linalg.cond(A) > 1e13:
        raise SingularSystem(f"{what}: system matrix is numerically singular")
    x = np.linalg.solve(A, b)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if np.abs(A @ x - b).max() > RESIDUAL_TOL * scale:
        raise NumericalInconsistency(f"{what}: residual check failed")
    return x


def neumann_sum(G: np.ndarray, q: np.ndarray, tol: float = NEUMANN_TOL, max_terms: int = 1_000_000):
    """Partial sums of ``sum_k G^k q`` until the sup-norm increment drops below tol."""
    total = np.array(q, dtype=float)
    term = total.copy()
    n = 0
    while np.abs(term).max(initial=0.0) >= tol:
        if n >= max_terms:
            raise NotContracting("Neumann series did not settle")
        term = G @ term
        total += term
        n += 1
    return total, n


def solve_tail_constants(model: InducedModel, alpha: float, spectral_tol: float = SPECTRAL_TOL) -> TailConstants:
    """``K = (I - G)^-1 q^(+1)`` for models with M > 0 almost surely."""
    ops = build_operators(model, alpha)
    if np.any(ops.G_minus > 0):
        raise HypothesisViolated("some state has P(M < 0) > 0; use solve_signed_constants")
    qp, _ = _finite_tail_vectors(model, alpha)
    rho = spectral_radius(ops.G, spectral_tol)
    if rho >= 1.0:
        raise NotContracting(f"rho(G) = {rho:.6g} >= 1")
    I = np.eye(model.d)
    K = _clamp(_solve(I - ops.G, qp, "I - G"), "K")
    K_neu, n = neumann_sum(ops.G, qp)
    return TailConstants(K=K, K_neumann=K_neu, neumann_terms=n, rho_G=rho)


def solve_signed_constants(model: InducedModel, alpha: float, spectral_tol: float = SPECTRAL_TOL) -> SignedConstants:
    """Signed tail constants ``K^(+1)``, ``K^(-1)`` without sign restrictions on M."""
    ops = build_operators(model, alpha)
    qp, qm = _finite_tail_vectors(model, alpha)
    rho = spectral_radius(ops.G, spectral_tol)
    if rho >= 1.0:
        raise NotContracting(f"rho(G) = {rho:.6g} >= 1")
    I = np.eye(model.d)
    even = _solve(I - ops.G, qp + qm, "I - G")
    odd = _solve(I - ops.G_plus + ops.G_minus, qp - qm, "I - G_plus + G_minus")
    K_plus = _clamp(0.5 * (even + odd), "K_plus")
    K_minus = _clamp(0.5 * (even - odd), "K_minus")
    return SignedConstants(K_plus, K_minus)


# ---------------------------------------------------------------------------
# splitting kernel
# ---------------------------------------------------------------------------

def split_kernel(H: np.ndarray, y_star: int, r: float) -> np.ndarray:
    """``Theta(x, y) = (1 - r 1{y = y*}) H(x, y)``: transitions that do not regenerate."""
    if not 0 < r < 1:
        raise ValueError("coin probability r must lie in (0, 1)")
    theta = np.array(H, dtype=float)
    theta[:, y_star] *= 1.0 - r
    return theta


def theta_matrix(model: InducedModel, alpha: float, y_star, r: float,
                 spectral_tol: float = SPECTRAL_TOL) -> tuple[np.ndarray, float]:
    """Moment-weighted split kernel ``Theta_alpha`` and its Perron root."""
    y = model.chain.index(y_star)
    theta = split_kernel(backward_matrix(model.chain), y, r)
    w = np.array([_model.m_moment(law, alpha) for law in model.ordered_laws])
    theta_alpha = theta * w[None, :]
    return theta_alpha, spectral_radius(theta_alpha, spectral_tol)


# ---------------------------------------------------------------------------
# degeneracy
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Degeneracy:
    is_degenerate: bool
    c: float | None = None
    Gamma: np.ndarray | None = None


def detect_degenerate(model: InducedModel) -> Degeneracy:
    """Look for Gamma with ``Q_i + Gamma(i) M_i = Gamma(j)`` a.s. on every transition i -> j.

    Each state contributes linear constraints on Gamma, decided exactly from
    its law: constant pairs give ``Gamma(j) - m Gamma(i) = q``; a
    degenerate-line(c) pair with random M forces ``Gamma(i) = Gamma(j) = c``;
    constant Q with random M forces ``Gamma(i) = 0`` and ``Gamma(j) = q``; a
    random Q independent of M admits no solution.
    """
    d = model.d
    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def constrain(coefs: list[tuple[int, float]], value: float):
        row = np.zeros(d)
        for k, v in coefs:
            row[k] += v
        rows.append(row)
        rhs.append(value)

    P = model.chain.P
    for i, law in enumerate(model.ordered_laws):
        succ = np.flatnonzero(P[i] > 0)
        m = law.m_law.constant_value()
        q = law.q_constant()
        if m is not None and q is not None:
            for j in succ:
                constrain([(int(j), 1.0), (i, -m)], q)
        elif law.degenerate_line:
            c = law.coupling.c
            constrain([(i, 1.0)], c)
            for j in succ:
                constrain([(int(j), 1.0)], c)
        elif q is not None:
            constrain([(i, 1.0)], 0.0)
            for j in succ:
                constrain([(int(j), 1.0)], q)
        else:
            return Degeneracy(False)

    A = np.array(rows)
    b = np.array(rhs)
    gamma, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ gamma - b).max() > RESIDUAL_TOL * max(1.0, float(np.abs(b).max())):
        return Degeneracy(False)
    c = float(gamma[0]) if np.allclose(gamma, gamma[0], rtol=1e-12, atol=1e-12) else None
    return Degeneracy(True, c, gamma)


# ---------------------------------------------------------------------------
# theory report
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TheoryReport:
    regime: str
    alpha: float | None
    lambda_samples: list
    rho_G: float | None
    rho_H_alpha: float | None
    rho_Theta_alpha: float | None
    K: np.ndarray | None
    K_plus: np.ndarray | None
    K_minus: np.ndarray | None
    degenerate: Degeneracy
    notes: list


def grey_exponent(model: InducedModel) -> float | None:
    """Smallest Pareto index among states with a nonzero power tail."""
    indices = [
        _model.q_tail_params(law)[2]
        for law in model.ordered_laws
        if sum(_model.q_tail_params(law)[:2]) > 0
    ]
    return min(indices) if indices else None


def theory_report(model: InducedModel, *, beta_max: float = 16.0, y_star=None, r: float = 0.5,
                  spectral_tol: float = SPECTRAL_TOL, root_tol: float = ROOT_TOL,
                  curve_points: int = 33) -> TheoryReport:
    """Regime classification plus every closed-form quantity available for it.

    Grey regime when (A1)-(A4) hold at the Pareto index (the hint, if set, wins);
    otherwise Kesten regime when Lambda changes sign; degenerate models get
    zero constants.
    """
    notes: list[str] = []
    degen = detect_degenerate(model)
    alpha = model.exponent_hint if model.exponent_hint is not None else grey_exponent(model)
    regime = "none"
    if alpha is not None and _model.check_assumptions(model, alpha, beta_max=beta_max).grey_regime:
        regime = "grey"
    else:
        try:
            alpha = solve_alpha(model, beta_max, root_tol, spectral_tol)
            regime = "kesten"
        except NoKestenExponent as exc:
            notes.append(str(exc))

    K = K_plus = K_minus = None
    rho_G = rho_H = rho_T = None
    if alpha is not None:
        ops = build_operators(model, alpha)
        rho_G = spectral_radius(ops.G, spectral_tol)
        rho_H = spectral_radius(weighted_kernel(model, alpha, ops.H), spectral_tol)
        y = model.chain.states[0] if y_star is None else y_star
        rho_T = theta_matrix(model, alpha, y, r, spectral_tol)[1]
    if degen.is_degenerate:
        K = K_plus = K_minus = np.zeros(model.d)
        notes.append("degenerate model: R takes finitely many values, all tail constants vanish")
    elif regime == "grey":
        signed = solve_signed_constants(model, alpha, spectral_tol)
        K_plus, K_minus = signed
        if not np.any(build_operators(model, alpha).G_minus > 0):
            K = solve_tail_constants(model, alpha, spectral_tol).K
        else:
            K = K_plus + K_minus
            notes.append("signed M: K reported as K_plus + K_minus")
    elif regime == "kesten":
        notes.append("Kesten regime: tail constants have no closed form; compare by simulation")

    top = beta_max if alpha is None else max(2.0 * alpha, 1.0)
    betas = np.linspace(0.0, top, curve_points)
    return TheoryReport(
        regime=regime, alpha=alpha, lambda_samples=lambda_curve(model, betas, spectral_tol),
        rho_G=rho_G, rho_H_alpha=rho_H, rho_Theta_alpha=rho_T,
        K=K, K_plus=K_plus, K_minus=K_minus, degenerate=degen, notes=notes,
    )
