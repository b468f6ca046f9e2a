"""End-to-end acceptance checks: theory against Monte Carlo at desk scale.

Each test records one ``PASS``/``FAIL`` line; the lines are echoed as they
happen and again in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from hmmtails import spectral
from hmmtails.estimate import empirical_tail, hill, k_constant_estimate, symmetry_check
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
from hmmtails.simulate import (
    block_moment_check,
    forward_path,
    regeneration_blocks,
    stationary_sample,
)

N_MC = 10_000_000
RESULTS: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


def kesten_variant() -> InducedModel:
    """Non-lattice Kesten model: symmetric bounded Q, log-uniform |M| with random sign."""
    law = CoefficientLaw(BoundedUniform(-1.0, 1.0), SignedLogUniform(math.exp(-2.0), math.e, 0.25))
    return InducedModel.build([[1.0]], [law])


@pytest.fixture(scope="module")
def kesten_run():
    model = kesten_variant()
    alpha = spectral.solve_alpha(model)
    start = time.perf_counter()
    sample = stationary_sample(model, N_MC, seed=14)
    return model, alpha, sample, time.perf_counter() - start


def test_criterion_1_iid_reduction():
    start = time.perf_counter()
    model = InducedModel.build([[1.0]], [CoefficientLaw(TwoSidedPareto(1.5, 1.0, 1.0, 0.0), Constant(0.5))])
    closed = 1.0 / (1.0 - 0.5**1.5)
    sol = spectral.solve_tail_constants(model, 1.5)
    agree = abs(sol.K[0] - sol.K_neumann[0]) < 1e-10 and abs(sol.K[0] - closed) < 1e-10
    sample = stationary_sample(model, N_MC, seed=11)
    k_hat = k_constant_estimate(sample.r, 1.5)["all"].value
    elapsed = time.perf_counter() - start
    rel = abs(k_hat - closed) / closed
    ok = record(
        "1", agree and rel < 0.10 and elapsed < 120,
        f"K direct={sol.K[0]:.12f} neumann={sol.K_neumann[0]:.12f} closed={closed:.12f}; "
        f"K_hat={k_hat:.4f} rel.err={rel:.3%} (<10%); {elapsed:.0f}s (<120s)",
    )
    assert ok


def test_criterion_2_markov_modulated():
    start = time.perf_counter()
    model = InducedModel.build(
        [[0.5, 0.5], [0.5, 0.5]],
        [CoefficientLaw(TwoSidedPareto(1.0, 1.0, 1.0, 0.0), Constant(0.5)),
         CoefficientLaw(TwoSidedPareto(1.0, 2.0, 2.0, 0.0), Constant(0.25))],
    )
    np.testing.assert_allclose(spectral.backward_matrix(model.chain), 0.5)
    K = spectral.solve_tail_constants(model, 1.0).K
    sample = stationary_sample(model, N_MC, seed=12)
    est = k_constant_estimate(sample.r, 1.0, states=sample.states, per_state=True)
    k_hat = np.array([est[0].value, est[1].value])
    rel = np.abs(k_hat - [2.2, 2.6]) / [2.2, 2.6]
    elapsed = time.perf_counter() - start
    ok = record(
        "2", bool(np.allclose(K, [2.2, 2.6], rtol=1e-12) and np.all(rel < 0.15) and elapsed < 300),
        f"K={K.round(12).tolist()}; K_hat=({k_hat[0]:.4f}, {k_hat[1]:.4f}) "
        f"rel.err=({rel[0]:.2%}, {rel[1]:.2%}) (<15%); {elapsed:.0f}s (<300s)",
    )
    assert ok


def test_criterion_3_signed_constants():
    model = InducedModel.build([[1.0]], [CoefficientLaw(TwoSidedPareto(1.0, 1.0, 1.0, 0.0), Constant(-0.5))])
    kp, km = spectral.solve_signed_constants(model, 1.0)
    theory_ok = abs(kp[0] - 4 / 3) < 1e-12 and abs(km[0] - 2 / 3) < 1e-12
    sample = stationary_sample(model, N_MC, seed=13)
    hp = k_constant_estimate(sample.r, 1.0, sign=1)["all"].value
    hm = k_constant_estimate(sample.r, 1.0, sign=-1)["all"].value
    rel = (abs(hp - 4 / 3) / (4 / 3), abs(hm - 2 / 3) / (2 / 3))
    ok = record(
        "3", theory_ok and max(rel) < 0.15,
        f"(K+, K-)=({kp[0]:.12f}, {km[0]:.12f}); MC=({hp:.4f}, {hm:.4f}) "
        f"rel.err=({rel[0]:.2%}, {rel[1]:.2%}) (<15%)",
    )
    assert ok


def test_criterion_4_kesten_exponent(kesten_run):
    lattice = InducedModel.build([[1.0]], [CoefficientLaw(Constant(1.0), TwoPoint(2.0, 0.5, 0.25))])
    alpha_lattice = spectral.solve_alpha(lattice)
    err = abs(alpha_lattice - math.log2(3))
    model, alpha, sample, elapsed = kesten_run
    h = hill(sample.r)
    ok = record(
        "4", err < 1e-8 and abs(h.alpha_hat - alpha) < 0.1,
        f"two-point alpha={alpha_lattice:.12f} |err|={err:.1e} (<1e-8); non-lattice alpha={alpha:.8f}, "
        f"Hill={h.alpha_hat:.4f} (k={h.k}, +-0.1); sampling {elapsed:.0f}s",
    )
    assert ok


def test_criterion_5_block_law():
    model = kesten_variant()
    alpha = spectral.solve_alpha(model)
    blocks = regeneration_blocks(model, 0, 0.8, 100_000, seed=15)
    chk = block_moment_check(blocks, alpha)
    ok = record(
        "5", abs(chk.mean - 1) < 3 * chk.std_err,
        f"E|B|^alpha={chk.mean:.4f} std_err={chk.std_err:.4f} |z|={abs(chk.z()):.2f} (<3) over {chk.n} blocks",
    )
    assert ok


def test_criterion_6_sign_symmetry(kesten_run):
    model, alpha, sample, _ = kesten_run
    chk = symmetry_check(sample.r, alpha)
    ok = record(
        "6", abs(chk.z) < 4,
        f"K+_hat={chk.k_plus:.4f} K-_hat={chk.k_minus:.4f} z={chk.z:.2f} (|z|<4) at {len(sample.r):.0e} samples",
    )
    assert ok


def test_criterion_7_degeneracy():
    law = CoefficientLaw(None, LogUniform(0.5, 1.5), DegenerateLine(2.0))
    model = InducedModel.build([[0.7, 0.3], [0.4, 0.6]], [law, law])
    deg = spectral.detect_degenerate(model)
    back = stationary_sample(model, 1_000_000, seed=16)
    fwd = stationary_sample(model, 100_000, method="burnin", seed=16)
    exact = bool(np.all(back.r == 2.0) and np.all(fwd.r == 2.0))
    tails = [empirical_tail(back.r, t, sign) for t in (2.0, 2.5, 10.0, 1e6) for sign in (1, -1)]
    ok = record(
        "7", deg.is_degenerate and deg.c == pytest.approx(2.0, abs=1e-12) and exact and max(tails) == 0.0,
        f"degenerate={deg.is_degenerate} c={deg.c}; all samples == 2: {exact}; "
        f"max tail beyond t=2: {max(tails)}",
    )
    assert ok


def _random_catalog_model(rng: np.random.Generator) -> InducedModel:
    d = int(rng.integers(1, 6))
    P = rng.uniform(0.05, 1.0, size=(d, d))
    P /= P.sum(axis=1, keepdims=True)
    laws = []
    for _ in range(d):
        kind = rng.integers(4)
        lo = rng.uniform(0.1, 1.0)
        if kind == 0:
            m = Constant(float(rng.uniform(0.1, 3.0)))
        elif kind == 1:
            m = TwoPoint(float(rng.uniform(0.1, 3)), float(rng.uniform(0.1, 3)), float(rng.random()))
        elif kind == 2:
            m = LogUniform(lo, lo * rng.uniform(1.05, 3.0))
        else:
            m = SignedLogUniform(lo, lo * rng.uniform(1.05, 3.0), float(rng.random()))
        laws.append(CoefficientLaw(BoundedUniform(-1.0, 1.0), m))
    return InducedModel.build(P, laws)


def test_criterion_8_invariants():
    start = time.perf_counter()
    rng = np.random.default_rng(18)
    failures = []

    models = [_random_catalog_model(rng) for _ in range(50)]
    worst_l0 = max(abs(spectral.lambda_beta(m, 0.0)) for m in models)
    if worst_l0 >= 1e-10:
        failures.append("Lambda(0)")

    grid = np.linspace(0.0, 4.0, 17)
    worst_convex = -math.inf
    for m in models:
        lam = [spectral.lambda_beta(m, b) for b in grid]
        for i in range(len(grid)):
            for j in range(i + 2, len(grid), 2):
                mid = spectral.lambda_beta(m, 0.5 * (grid[i] + grid[j]))
                worst_convex = max(worst_convex, mid - 0.5 * (lam[i] + lam[j]))
    if worst_convex > 1e-9:
        failures.append("convexity")

    worst_fixed = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 6))
        P = rng.uniform(0.05, 1.0, size=(d, d))
        P /= P.sum(axis=1, keepdims=True)
        laws = [CoefficientLaw(TwoSidedPareto(1.2, 2.0, float(rng.random()), 0.0),
                               LogUniform(0.05, float(rng.uniform(0.2, 1.0)))) for _ in range(d)]
        model = InducedModel.build(P, laws)
        sol = spectral.solve_tail_constants(model, 1.2)
        G = spectral.build_operators(model, 1.2).G
        q = np.array([law.q_law.q_plus for law in laws])
        worst_fixed = max(worst_fixed, float(np.abs(sol.K - (q + G @ sol.K)).max()))
    if worst_fixed >= 1e-9:
        failures.append("fixed point")

    worst_rho = 0.0
    for _ in range(200):
        A = rng.uniform(0.0, 5.0, size=(2, 2))
        tr, det = np.trace(A), np.linalg.det(A)
        closed = 0.5 * (tr + math.sqrt(tr * tr - 4 * det))
        worst_rho = max(worst_rho, abs(spectral.spectral_radius(A) - closed) / max(1.0, closed))
    if worst_rho >= 1e-12:
        failures.append("spectral radius")

    ks_model = InducedModel.build(
        [[0.6, 0.4], [0.3, 0.7]],
        [CoefficientLaw(TwoSidedPareto(1.5, 2.0, 1.0, 1.0), LogUniform(0.2, 0.9)),
         CoefficientLaw(BoundedUniform(-1.0, 2.0), SignedLogUniform(0.3, 1.1, 0.4))],
    )
    n = 100_000
    ks = stats.ks_2samp(stationary_sample(ks_model, n, seed=1).r,
                        stationary_sample(ks_model, n, method="burnin", seed=2).r).statistic
    ks_crit = 1.36 * math.sqrt(2.0 / n)
    if ks >= 4 * ks_crit:
        failures.append("KS")

    replay = all(
        a.tobytes() == b.tobytes()
        for a, b in [
            (stationary_sample(ks_model, 20_000, seed=3, shards=3).r,
             stationary_sample(ks_model, 20_000, seed=3, shards=3).r),
            (forward_path(ks_model, 0.0, 20_000, seed=3).r_values,
             forward_path(ks_model, 0.0, 20_000, seed=3).r_values),
            (regeneration_blocks(ks_model, 0, 0.5, 5_000, seed=3).a,
             regeneration_blocks(ks_model, 0, 0.5, 5_000, seed=3).a),
        ]
    )
    if not replay:
        failures.append("replay")

    elapsed = time.perf_counter() - start
    if elapsed >= 180:
        failures.append("runtime")
    ok = record(
        "8", not failures,
        f"max|Lambda(0)|={worst_l0:.1e}; convexity slack={worst_convex:.1e}; fixed point={worst_fixed:.1e}; "
        f"2x2 rho err={worst_rho:.1e}; KS={ks:.4f} (<{4 * ks_crit:.4f}); replay={replay}; {elapsed:.0f}s (<180s)"
        + (f"; failed: {failures}" if failures else ""),
    )
    assert ok
