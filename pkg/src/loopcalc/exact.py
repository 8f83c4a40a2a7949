"""Exact enumeration of the tilted posterior on small codes.

Only codewords carry weight (the check factor is 0/1), so every sum runs
over the GF(2) null space instead of all 2^n spin configurations. A
codeword is encoded by its support: bit i set means sigma_i = -1.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp, xlogy

from .channel import CORRUPTED_SYMBOL, ChannelRealization, ChannelSpec, transition_prob
from .errors import DomainError, ParameterError, SizeGuardError
from .tanner import NULL_SPACE_GUARD, TannerGraph, enumerate_codewords, null_space

EXACT_GUARD = NULL_SPACE_GUARD
PATTERN_GUARD = 14
MC_CHUNK = 2048
_PATTERN_BLOCK = 1024


@lru_cache(maxsize=128)
def codewords(g: TannerGraph, guard: int = EXACT_GUARD) -> np.ndarray:
    """Codeword supports as a read-only (K, n) float array (1.0 where sigma=-1)."""
    if g.n > guard:
        raise SizeGuardError(f"n={g.n} exceeds exact-enumeration guard {guard}", "n_le_guard")
    c = enumerate_codewords(null_space(g, guard)).astype(float)
    c.setflags(write=False)
    return c


def _log_weights(cw: np.ndarray, lq_plus: np.ndarray, lq_minus: np.ndarray,
                 eta: float) -> np.ndarray:
    """ln of q(s|sigma) e^{eta(sigma-1)} products for each codeword.

    ``lq_plus``/``lq_minus`` may be 2-D (patterns x n); the result is then
    (patterns x K). Zero likelihoods (BEC q(1|-1)) stay exact -inf.
    """
    diff = lq_minus - lq_plus - 2.0 * eta
    dead = np.isneginf(diff)
    finite = np.where(dead, 0.0, diff)
    out = lq_plus.sum(axis=-1)[..., None] + finite @ cw.T
    killed = dead.astype(float) @ cw.T
    return np.where(killed > 0, -np.inf, out)


@dataclass(frozen=True)
class ExactPosterior:
    graph: TannerGraph
    realization: ChannelRealization
    eta: float
    log_Z: float
    marginals: np.ndarray

    @property
    def phi(self) -> float:
        return self.log_Z / self.graph.n

    @property
    def magnetization(self) -> float:
        return float(np.mean(self.marginals))


def _check_sizes(g: TannerGraph, s: ChannelRealization):
    if s.n != g.n:
        raise ParameterError(f"realization length {s.n} != n={g.n}", "realization_length")


def solve_exact(g: TannerGraph, s: ChannelRealization, eta: float = 0.0,
                guard: int = EXACT_GUARD) -> ExactPosterior:
    _check_sizes(g, s)
    cw = codewords(g, guard)
    lw = _log_weights(cw, s.log_q_plus, s.log_q_minus, eta)
    if not np.isfinite(lw).any():
        raise DomainError("every codeword has zero weight", "nonzero_partition_function")
    log_z = float(logsumexp(lw))
    post = np.exp(lw - log_z)
    marg = 1.0 - 2.0 * (post @ cw)
    return ExactPosterior(g, s, float(eta), log_z, marg)


def partition_function(g: TannerGraph, s: ChannelRealization, eta: float = 0.0,
                       guard: int = EXACT_GUARD) -> float:
    """ln Z(g, s, eta) by codeword enumeration."""
    return solve_exact(g, s, eta, guard).log_Z


def free_entropy(g: TannerGraph, s: ChannelRealization, eta: float = 0.0,
                 guard: int = EXACT_GUARD) -> float:
    return solve_exact(g, s, eta, guard).phi


def marginals(g: TannerGraph, s: ChannelRealization, eta: float = 0.0,
              guard: int = EXACT_GUARD) -> np.ndarray:
    return solve_exact(g, s, eta, guard).marginals


# --- averages over channel outputs -------------------------------------------------

def _symbol_logs(spec: ChannelSpec) -> tuple[np.ndarray, np.ndarray]:
    """ln q(.|+1) and ln q(.|-1) indexed by [clean, corrupted]."""
    bad = CORRUPTED_SYMBOL[spec.family]
    lp, lm = [], []
    for sym in (1, bad):
        qp, qm = transition_prob(spec, sym, 1), transition_prob(spec, sym, -1)
        lp.append(math.log(qp) if qp > 0 else -math.inf)
        lm.append(math.log(qm) if qm > 0 else -math.inf)
    return np.array(lp), np.array(lm)


def pattern_stats(g: TannerGraph, spec: ChannelSpec, corrupt: np.ndarray,
                  eta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Per corruption pattern: (ln Z, posterior mean number of flipped bits).

    ``corrupt`` is a boolean (patterns x n) array; every pattern must have
    positive probability under ``spec``.
    """
    cw = codewords(g)
    lp_tab, lm_tab = _symbol_logs(spec)
    idx = np.asarray(corrupt, dtype=np.intp)
    log_z = np.empty(len(idx))
    flips = np.empty(len(idx))
    weight = cw.sum(axis=1)
    for start in range(0, len(idx), _PATTERN_BLOCK):
        blk = idx[start:start + _PATTERN_BLOCK]
        lw = _log_weights(cw, lp_tab[blk], lm_tab[blk], eta)
        lz = logsumexp(lw, axis=1)
        log_z[start:start + len(blk)] = lz
        flips[start:start + len(blk)] = np.exp(lw - lz[:, None]) @ weight
    return log_z, flips


def all_patterns(spec: ChannelSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Every corruption pattern with nonzero probability and its probability."""
    if n > PATTERN_GUARD:
        raise SizeGuardError(f"n={n} exceeds pattern-enumeration guard {PATTERN_GUARD}",
                             "n_le_pattern_guard")
    ints = np.arange(2**n, dtype=np.int64)
    bits = ((ints[:, None] >> np.arange(n)) & 1).astype(bool)
    k = bits.sum(axis=1)
    e = spec.noise
    logp = xlogy(k, e) + xlogy(n - k, 1.0 - e)
    keep = np.isfinite(logp)
    return bits[keep], np.exp(logp[keep])


@dataclass(frozen=True)
class BitSamplingResult:
    p_bit: float
    stderr: float
    mode: str
    samples: int


def _mc_chunk(args) -> np.ndarray:
    g, spec, eta, seed, chunk, size = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
    corrupt = rng.random((size, g.n)) < spec.noise
    _, flips = pattern_stats(g, spec, corrupt, eta)
    return flips / g.n


def _mc_values(g: TannerGraph, spec: ChannelSpec, samples: int, seed: int,
               eta: float, workers: int) -> np.ndarray:
    """Per-draw (1 - magnetization)/2 values.

    Draws are generated in fixed-size chunks with seeds derived from
    (seed, chunk index), so the output does not depend on ``workers``.
    """
    jobs = []
    for c, start in enumerate(range(0, samples, MC_CHUNK)):
        jobs.append((g, spec, eta, seed, c, min(MC_CHUNK, samples - start)))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_mc_chunk, jobs))
    else:
        parts = [_mc_chunk(j) for j in jobs]
    return np.concatenate(parts)


def bit_sampling_error(g: TannerGraph, spec: ChannelSpec, mode: str = "exact-average",
                       samples: int = 0, seed: int = 0, eta: float = 0.0,
                       workers: int = 1) -> BitSamplingResult:
    """Bit-error probability of the bit-sampling decoder, (1 - E_s[m]) / 2."""
    if mode == "exact-average":
        corrupt, prob = all_patterns(spec, g.n)
        _, flips = pattern_stats(g, spec, corrupt, eta)
        p = math.fsum(prob * flips) / g.n
        return BitSamplingResult(p, 0.0, mode, len(prob))
    if mode == "monte-carlo":
        if samples < 1:
            raise ParameterError("monte-carlo needs samples >= 1", "samples_ge_1")
        vals = _mc_values(g, spec, samples, seed, eta, workers)
        mean = math.fsum(vals) / samples
        var = math.fsum((vals - mean) ** 2) / max(samples - 1, 1)
        return BitSamplingResult(mean, math.sqrt(var / samples), mode, samples)
    raise ParameterError(f"unknown mode {mode!r}", "mode")


@dataclass(frozen=True)
class DerivativeIdentityReport:
    fd_derivative: float
    minus_two_p_bit: float
    gap: float
    h: float
    mode: str


def average_free_entropy(g: TannerGraph, spec: ChannelSpec, eta: float,
                         corrupt: np.ndarray, prob: np.ndarray | None) -> float:
    """E_s[phi] over the given patterns (weights ``prob``, or uniform if None)."""
    log_z, _ = pattern_stats(g, spec, corrupt, eta)
    if prob is None:
        return math.fsum(log_z) / (len(log_z) * g.n)
    return math.fsum(prob * log_z) / g.n


def free_entropy_derivative_identity_check(g: TannerGraph, spec: ChannelSpec,
                                           samples: int | None = None, seed: int = 0,
                                           h: float = 1e-5) -> DerivativeIdentityReport:
    """Compare d/deta E_s[phi] at 0 (central difference) with -2 P_bit.

    ``samples=None`` averages exactly over all output patterns; otherwise the
    same Monte-Carlo draws are reused for every evaluation.
    """
    if samples is None:
        corrupt, prob = all_patterns(spec, g.n)
        mode = "exact-average"
    else:
        rng = np.random.default_rng(seed)
        corrupt = rng.random((samples, g.n)) < spec.noise
        prob = None
        mode = "monte-carlo"
    up = average_free_entropy(g, spec, h, corrupt, prob)
    down = average_free_entropy(g, spec, -h, corrupt, prob)
    fd = (up - down) / (2 * h)
    _, flips = pattern_stats(g, spec, corrupt, 0.0)
    if prob is None:
        p_bit = math.fsum(flips) / (len(flips) * g.n)
    else:
        p_bit = math.fsum(prob * flips) / g.n
    return DerivativeIdentityReport(fd, -2 * p_bit, abs(fd + 2 * p_bit), h, mode)
