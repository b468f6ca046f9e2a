"""Sample paths, stationary samples and regeneration blocks of ``R_n = Q_n + M_n R_{n-1}``.

Random streams are Philox generators keyed by ``(seed, stream_id)``; a shard
only ever touches its own stream, so results do not depend on how shards are
scheduled.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from . import model as _model
from . import spectral
from .errors import BadChain, BlockOverflow, Diverged, NoKestenExponent, NotCChain
from .model import ChainSpec, DegenerateLine, InducedModel

CHUNK = 1 << 16
DEPTH_TARGET = 1e-6
DEFAULT_THIN = 16
MAX_BLOCK_LENGTH = 1_000_000


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator for one (seed, stream) pair."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


def _cdf(P: np.ndarray) -> np.ndarray:
    c = np.cumsum(P, axis=1)
    c[:, -1] = 1.0
    return c


def _draw_initial(pi: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    c = np.cumsum(pi)
    c[-1] = 1.0
    return np.minimum(np.searchsorted(c, rng.random(size), side="right"), len(pi) - 1)


def _check_contracting(model: InducedModel) -> None:
    gamma = _model.lyapunov_exponent(model)
    if gamma >= 0 and not spectral.detect_degenerate(model).is_degenerate:
        raise Diverged(f"E_pi log|M| = {gamma:.4g} >= 0: the recursion has no stationary solution")


def common_line_constant(model: InducedModel) -> float | None:
    """c when every state is coupled as ``Q = c (1 - M)`` with one shared c."""
    cs = {law.coupling.c for law in model.ordered_laws if isinstance(law.coupling, DegenerateLine)}
    if len(cs) == 1 and all(law.degenerate_line for law in model.ordered_laws):
        return cs.pop()
    return None


# ---------------------------------------------------------------------------
# forward paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathSample:
    states: np.ndarray          # state indices of the whole path, burn-in included
    r_values: np.ndarray        # R after the burn-in
    burn_in: int
    seed: int
    state_ids: tuple

    @property
    def recorded_states(self) -> np.ndarray:
        return self.states[self.burn_in:]


def forward_path(model: InducedModel, r0: float, n: int, burn_in: int = 0, seed: int = 0,
                 stream: int = 0) -> PathSample:
    """Run the recursion forward from ``r0`` along a stationary path of the chain.

    ``states[t]`` drives ``(Q, M)`` at step t and ``r_values[k]`` is R after
    step ``burn_in + k``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_contracting(model)
    rng = rng_stream(seed, stream)
    cdf = _cdf(model.chain.P)
    total = burn_in + n
    states = np.empty(total, dtype=np.int64)
    r_values = np.empty(n)
    r = float(r0)
    s = int(_draw_initial(model.chain.pi, rng, 1)[0])
    pos = 0
    while pos < total:
        size = min(CHUNK * 16, total - pos)
        u = rng.random(size)
        chunk_states = np.empty(size, dtype=np.int64)
        chunk_states[0] = s if pos == 0 else _kernels.walk(cdf, s, u[:1])[0]
        chunk_states[1:] = _kernels.walk(cdf, chunk_states[0], u[1:])
        q, m = model.sample_coefficients(chunk_states, rng)
        rs = _kernels.affine(q, m, r)
        states[pos:pos + size] = chunk_states
        lo = max(burn_in - pos, 0)
        if lo < size:
            r_values[pos + lo - burn_in:pos + size - burn_in] = rs[lo:]
        r = float(rs[-1])
        s = int(chunk_states[-1])
        if not np.isfinite(r):
            raise Diverged("R overflowed to a non-finite value")
        pos += size
    return PathSample(states, r_values, burn_in, seed, model.chain.states)


# ---------------------------------------------------------------------------
# stationary samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StationarySample:
    """Draws of R tagged with their conditioning state (X_0 for the backward method)."""

    states: np.ndarray
    r: np.ndarray
    shard: np.ndarray
    index: np.ndarray
    state_ids: tuple
    method: str
    depth: int | None = None
    burn_in: int | None = None
    thin: int | None = None

    def __len__(self):
        return len(self.r)


def working_exponent(model: InducedModel) -> float | None:
    if model.exponent_hint is not None:
        return model.exponent_hint
    alpha = spectral.grey_exponent(model)
    if alpha is not None:
        return alpha
    try:
        return spectral.solve_alpha(model)
    except NoKestenExponent:
        return None


def default_depth(model: InducedModel, alpha: float | None = None, target: float = DEPTH_TARGET) -> int:
    """Backward truncation depth N with ``theta^N < target``, ``theta = max_i E|M_i|^s``, s = min(1, alpha/2).

    Falls back to ``theta = rho(H_s)`` when the per-state maximum is not below 1.
    """
    if alpha is None:
        alpha = working_exponent(model)
    s = 1.0 if alpha is None else min(1.0, alpha / 2.0)
    theta = max(_model.m_moment(law, s) for law in model.ordered_laws)
    if theta >= 1.0:
        theta = math.exp(spectral.lambda_beta(model, s))
    if theta >= 1.0:
        raise Diverged(f"no s-moment contraction at s = {s:g}; cannot choose a truncation depth")
    return int(min(max(math.ceil(math.log(target) / math.log(theta)), 1), 100_000))


def _backward_shard(model: InducedModel, count: int, depth: int, seed: int, shard: int,
                    terminal: float) -> tuple[np.ndarray, np.ndarray]:
    rng = rng_stream(seed, shard)
    H_cdf = _cdf(spectral.backward_matrix(model.chain))
    out_states = np.empty(count, dtype=np.int64)
    out_r = np.empty(count)
    for start in range(0, count, CHUNK):
        size = min(CHUNK, count - start)
        path = np.empty((depth, size), dtype=np.int64)
        path[0] = _draw_initial(model.chain.pi, rng, size)
        for n in range(1, depth):
            path[n] = _kernels.step_many(H_cdf, path[n - 1], rng.random(size))
        # Horner from the deepest term outwards: R = Q_0 + M_0 (Q_-1 + M_-1 (...))
        r = np.full(size, terminal)
        for n in range(depth - 1, -1, -1):
            q, m = model.sample_coefficients(path[n], rng)
            r = q + m * r
        out_states[start:start + size] = path[0]
        out_r[start:start + size] = r
    return out_states, out_r


def _burnin_shard(model: InducedModel, count: int, burn_in: int, thin: int, seed: int,
                  shard: int, r0: float) -> tuple[np.ndarray, np.ndarray]:
    path = forward_path(model, r0, count * thin, burn_in=burn_in, seed=seed, stream=shard)
    keep = np.arange(thin - 1, count * thin, thin)
    return path.states[burn_in + keep], path.r_values[keep]


def shard_sizes(count: int, shards: int) -> list[int]:
    base, extra = divmod(count, shards)
    return [base + (1 if s < extra else 0) for s in range(shards)]


def stationary_sample(model: InducedModel, count: int, method: str = "backward", seed: int = 0, *,
                      depth: int | None = None, burn_in: int = 1000, thin: int = DEFAULT_THIN,
                      shards: int = 1, threads: int = 1, terminal: float | None = None) -> StationarySample:
    """Approximate draws from the stationary law of R, paired with their state.

    ``backward``: each draw runs the backward chain ``depth`` steps from
    ``X_0 ~ pi`` and evaluates the truncated series; the innermost value is
    ``terminal`` (default 0, or c for common degenerate-line models, which
    makes those samples exactly c).  ``burnin``: one long forward path per
    shard started from the same value, recorded every ``thin`` steps after
    ``burn_in`` steps.
    """
    if count < 1 or shards < 1:
        raise ValueError("count and shards must be positive")
    _check_contracting(model)
    sizes = shard_sizes(count, shards)
    if terminal is None:
        c = common_line_constant(model)
        terminal = 0.0 if c is None else c
    if method == "backward":
        if depth is None:
            depth = default_depth(model)
        if depth < 1:
            raise ValueError("depth must be at least 1")
        work = lambda s: _backward_shard(model, sizes[s], depth, seed, s, terminal)  # noqa: E731
    elif method in ("burnin", "burn_in"):
        if burn_in < 1 or thin < 1:
            raise ValueError("burn_in and thin must be positive")
        method = "burnin"
        work = lambda s: _burnin_shard(model, sizes[s], burn_in, thin, seed, s, terminal)  # noqa: E731
    else:
        raise ValueError(f"unknown method {method!r}")

    if threads > 1 and shards > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(shards)))
    else:
        parts = [work(s) for s in range(shards)]
    r = np.concatenate([p[1] for p in parts])
    if not np.all(np.isfinite(r)):
        raise Diverged("non-finite stationary sample")
    return StationarySample(
        states=np.concatenate([p[0] for p in parts]),
        r=r,
        shard=np.concatenate([np.full(n, s, dtype=np.int64) for s, n in enumerate(sizes)]),
        index=np.concatenate([np.arange(n, dtype=np.int64) for n in sizes]),
        state_ids=model.chain.states,
        method=method,
        depth=depth if method == "backward" else None,
        burn_in=burn_in if method == "burnin" else None,
        thin=thin if method == "burnin" else None,
    )


# ---------------------------------------------------------------------------
# order-k lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LiftedModel:
    base_alphabet: tuple
    order: int
    lifted: InducedModel
    projection: dict
    words: tuple

    def project(self, state_idx: np.ndarray) -> np.ndarray:
        """Map lifted state indices to base-alphabet indices (last symbol of the word)."""
        last = np.array([w[-1] for w in self.words])
        return last[np.asarray(state_idx)]


def _word_id(word: tuple):
    return word[0] if len(word) == 1 else "|".join(map(str, word))


def lift_order_k(alphabet: Sequence, order: int, kernel, laws: Mapping) -> LiftedModel:
    """Markov lift of an order-k chain onto k-blocks; word states carry the law of their last symbol.

    ``kernel`` gives ``P(X_n = y | last k symbols)`` either as a mapping from
    k-tuples to probability rows or as an array with ``d**k`` rows in
    lexicographic word order (``itertools.product`` order).
    """
    alphabet = tuple(alphabet)
    d = len(alphabet)
    if order < 1:
        raise ValueError("order must be at least 1")
    words = list(itertools.product(range(d), repeat=order))
    if isinstance(kernel, Mapping):
        rows = []
        for w in words:
            key = tuple(alphabet[i] for i in w)
            if key not in kernel and order == 1 and key[0] in kernel:
                key = key[0]
            rows.append(np.asarray(kernel[key], dtype=float))
        table = np.array(rows)
    else:
        table = np.asarray(kernel, dtype=float).reshape(d**order, d)
    if np.any(table <= 0):
        raise NotCChain("conditional probabilities must be strictly positive")
    if np.max(np.abs(table.sum(axis=1) - 1.0)) > _model.STOCHASTIC_TOL:
        raise BadChain("kernel rows must sum to 1")

    index = {w: k for k, w in enumerate(words)}
    P = np.zeros((len(words), len(words)))
    for k, w in enumerate(words):
        for y in range(d):
            P[k, index[w[1:] + (y,)]] = table[k, y]
    ids = tuple(_word_id(tuple(alphabet[i] for i in w)) for w in words)
    lifted = InducedModel(ChainSpec(ids, P), {wid: laws[alphabet[w[-1]]] for wid, w in zip(ids, words)})
    projection = {wid: alphabet[w[-1]] for wid, w in zip(ids, words)}
    return LiftedModel(alphabet, order, lifted, projection, tuple(words))


# ---------------------------------------------------------------------------
# regeneration blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockSample:
    a: float
    b: float
    length: int
    start_state: object


@dataclass(frozen=True, eq=False)
class BlockSet:
    """Regeneration blocks i >= 1 as parallel arrays; iterates as BlockSample."""

    a: np.ndarray
    b: np.ndarray
    length: np.ndarray
    start_state: object
    y_star: object
    r: float
    seed: int

    def __len__(self):
        return len(self.a)

    def __getitem__(self, i) -> BlockSample:
        return BlockSample(float(self.a[i]), float(self.b[i]), int(self.length[i]), self.start_state)

    def __iter__(self) -> Iterator[BlockSample]:
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True, eq=False)
class BlockPath:
    """The raw backward path behind a block run (kept for replay checks)."""

    states: np.ndarray
    cut: np.ndarray
    q: np.ndarray
    m: np.ndarray


def _block_run(model: InducedModel, y_star, r: float, n_blocks: int, seed: int,
               max_length: int, keep_path: bool):
    if not 0 < r < 1:
        raise ValueError("coin probability r must lie in (0, 1)")
    y = model.chain.index(y_star)
    rng = rng_stream(seed, 0)
    H_cdf = _cdf(spectral.backward_matrix(model.chain))
    expected_len = 1.0 / (r * model.chain.pi[y])
    chunk = int(min(max(1024, 1.2 * (n_blocks + 1) * expected_len), 1 << 20))

    a_parts, b_parts, l_parts, raw = [], [], [], []
    a, b, length = 0.0, 1.0, 0
    have = 0
    state = y
    first = True
    while have < n_blocks + 1:
        u = rng.random(chunk)
        coins = rng.random(chunk) < r
        states = _kernels.walk(H_cdf, state, u)
        if first:
            # Z_0 = y* right after a regeneration
            states = np.concatenate(([y], states[:-1]))
            coins[0] = True
            first = False
        cut = coins & (states == y)
        q, m = model.sample_coefficients(states, rng)
        ao, bo, lo, a, b, length, overflow = _kernels.accumulate_blocks(
            cut, q, m, a, b, length, max_length
        )
        if overflow:
            raise BlockOverflow(f"a block exceeded {max_length} steps (r too small or chain nearly reducible)")
        a_parts.append(ao)
        b_parts.append(bo)
        l_parts.append(lo)
        if keep_path:
            raw.append((states, cut, q, m))
        have += len(ao)
        state = int(states[-1])

    a_all = np.concatenate(a_parts)[1:n_blocks + 1]
    b_all = np.concatenate(b_parts)[1:n_blocks + 1]
    l_all = np.concatenate(l_parts)[1:n_blocks + 1]
    blocks = BlockSet(a_all, b_all, l_all, y_star, y_star, r, seed)
    path = None
    if keep_path:
        path = BlockPath(*(np.concatenate([p[k] for p in raw]) for k in range(4)))
    return blocks, path


def regeneration_blocks(model: InducedModel, y_star, r: float, n_blocks: int, seed: int = 0,
                        max_length: int = MAX_BLOCK_LENGTH) -> BlockSet:
    """Blocks ``(A_i, B_i)`` of the backward chain cut at coin-marked visits to ``y_star``.

    The chain starts at ``y_star`` as if a regeneration had just happened; the
    first block is still discarded, so every returned block has index >= 1.
    States are in backward time.
    """
    return _block_run(model, y_star, r, n_blocks, seed, max_length, keep_path=False)[0]


def regeneration_run(model: InducedModel, y_star, r: float, n_blocks: int, seed: int = 0,
                     max_length: int = MAX_BLOCK_LENGTH) -> tuple[BlockSet, BlockPath]:
    """Same draws as :func:`regeneration_blocks`, plus the underlying path."""
    return _block_run(model, y_star, r, n_blocks, seed, max_length, keep_path=True)


@dataclass(frozen=True)
class MomentCheck:
    mean: float
    std_err: float
    n: int

    def z(self, target: float = 1.0) -> float:
        if self.std_err == 0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.std_err


def block_moment_check(blocks, alpha: float) -> MomentCheck:
    """Sample mean and standard error of ``|B|^alpha`` over the blocks."""
    b = blocks.b if isinstance(blocks, BlockSet) else np.array([blk.b for blk in blocks])
    if len(b) < 2:
        raise ValueError("need at least two blocks")
    x = np.abs(b) ** alpha
    return MomentCheck(float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))), len(x))
