"""Generalized loops, loop-series weights and loop-type bookkeeping.

An edge subset of a Tanner graph is encoded as an integer bitmask over edge
indices. A loop is a nonempty subset in which every touched node has
induced degree at least two.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .bp import MessageSet, bethe_free_entropy, bp_residual, ferromagnetic_messages
from .channel import ChannelRealization
from .errors import (ConsistencyError, DegenerateWeightError, NumericalError,
                     ParameterError, SizeGuardError)
from .exact import codewords, free_entropy
from .tanner import ParityBasis, TannerGraph, codeword_masks, sample_graph

LOOP_EDGE_GUARD = 24
_MASK_CHUNK = 1 << 20


@dataclass(frozen=True)
class LoopSubgraph:
    mask: int
    edge_subset: tuple[tuple[int, int], ...]
    var_degrees: dict
    chk_degrees: dict

    @classmethod
    def from_mask(cls, g: TannerGraph, mask: int) -> "LoopSubgraph":
        edges = tuple(e for k, e in enumerate(g.edges) if mask >> k & 1)
        vd: dict[int, int] = {}
        cd: dict[int, int] = {}
        for v, c in edges:
            vd[v] = vd.get(v, 0) + 1
            cd[c] = cd.get(c, 0) + 1
        return cls(int(mask), edges, vd, cd)

    @property
    def var_nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.var_degrees))

    @property
    def chk_nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.chk_degrees))

    def is_loop(self) -> bool:
        return bool(self.edge_subset) and min(
            list(self.var_degrees.values()) + list(self.chk_degrees.values())) >= 2

    def is_ferromagnetic(self, l: int) -> bool:
        return (all(d == l for d in self.var_degrees.values())
                and all(d % 2 == 0 for d in self.chk_degrees.values()))


def _node_masks(g: TannerGraph) -> list[int]:
    """Edge bitmask of every node: variables first, then checks."""
    out = [0] * (g.n + g.m)
    for k, (v, c) in enumerate(g.edges):
        out[v] |= 1 << k
        out[g.n + c] |= 1 << k
    return out


@lru_cache(maxsize=32)
def loop_masks(g: TannerGraph, guard: int = LOOP_EDGE_GUARD) -> np.ndarray:
    """Sorted bitmasks of every loop of ``g`` (brute force over edge subsets)."""
    E = g.num_edges
    if E > guard:
        raise SizeGuardError(f"|E|={E} exceeds loop-enumeration guard {guard}",
                             "edges_le_guard")
    nodes = [np.int64(x) for x in _node_masks(g) if x]
    # most constraining nodes first prunes the candidate list fastest
    nodes.sort(key=lambda x: -int(x).bit_length())
    found = []
    for start in range(1, 1 << E, _MASK_CHUNK):
        cand = np.arange(start, min(start + _MASK_CHUNK, 1 << E), dtype=np.int64)
        for nm in nodes:
            deg = np.bitwise_count(cand & nm)
            cand = cand[deg != 1]
            if not cand.size:
                break
        found.append(cand)
    out = np.concatenate(found) if found else np.zeros(0, dtype=np.int64)
    out.setflags(write=False)
    return out


def enumerate_loops(g: TannerGraph, guard: int = LOOP_EDGE_GUARD) -> list[LoopSubgraph]:
    return [LoopSubgraph.from_mask(g, int(x)) for x in loop_masks(g, guard)]


# --- general loop weights ------------------------------------------------------

def _kappa_tables(g: TannerGraph, msgs: MessageSet, s: ChannelRealization,
                  eta: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """kappa for every subset of each node's incident edges.

    Entry ``L`` of a node's table is kappa when the loop uses the node's
    local edges whose positions are the set bits of ``L``.
    """
    nu, nuhat = msgs.var_to_chk, msgs.chk_to_var
    qp, qm = np.exp(s.log_q_plus), np.exp(s.log_q_minus - 2.0 * eta)
    var_tabs = []
    for i, edges in enumerate(g.var_edges()):
        d = len(edges)
        den = qp[i] * math.prod(nuhat[k] for k in edges) + \
            qm[i] * math.prod(1.0 - nuhat[k] for k in edges)
        if den == 0.0:
            raise DegenerateWeightError(f"zero kappa denominator at variable {i}",
                                        "kappa_i_denominator")
        tab = np.empty(1 << d)
        for L in range(1 << d):
            plus, minus = qp[i], qm[i]
            for j, k in enumerate(edges):
                if L >> j & 1:
                    plus *= 1.0 - nu[k]
                    minus *= -nu[k]
                else:
                    plus *= nuhat[k]
                    minus *= 1.0 - nuhat[k]
            tab[L] = (plus + minus) / den
        var_tabs.append(tab)
    chk_tabs = []
    for a, edges in enumerate(g.chk_edges()):
        d = len(edges)
        den = 1.0 + math.prod(2.0 * nu[k] - 1.0 for k in edges)
        if den == 0.0:
            raise DegenerateWeightError(f"zero kappa denominator at check {a}",
                                        "kappa_a_denominator")
        tab = np.empty(1 << d)
        for L in range(1 << d):
            inside = math.prod(1.0 - 2.0 * nuhat[k] for j, k in enumerate(edges) if L >> j & 1)
            outside = math.prod(2.0 * nu[k] - 1.0 for j, k in enumerate(edges)
                                if not L >> j & 1)
            tab[L] = (inside + outside) / den
        chk_tabs.append(tab)
    return var_tabs, chk_tabs


def _weights_from_tables(g: TannerGraph, masks: np.ndarray, var_tabs, chk_tabs) -> np.ndarray:
    w = np.ones(len(masks))
    for edges, tab in zip(g.var_edges() + g.chk_edges(), var_tabs + chk_tabs):
        local = np.zeros(len(masks), dtype=np.int64)
        for j, k in enumerate(edges):
            local |= ((masks >> k) & 1) << j
        w *= tab[local]
    return w


def loop_weight_general(g: TannerGraph, loop: LoopSubgraph, msgs: MessageSet,
                        s: ChannelRealization, eta: float) -> float:
    """K(g) = prod kappa_i * prod kappa_a over the nodes of the loop."""
    var_tabs, chk_tabs = _kappa_tables(g, msgs, s, eta)
    return float(_weights_from_tables(g, np.array([loop.mask], dtype=np.int64),
                                      var_tabs, chk_tabs)[0])


@dataclass(frozen=True)
class LoopSeriesReport:
    log_z_loop: float
    phi: float
    phi_bethe: float
    gap: float
    num_loops: int
    bp_residual: float

    @property
    def loop_correction(self) -> float:
        return self.log_z_loop


def loop_series_general(g: TannerGraph, msgs: MessageSet, s: ChannelRealization,
                        eta: float, residual_tol: float = 1e-9,
                        guard: int = LOOP_EDGE_GUARD) -> LoopSeriesReport:
    """ln(1 + sum over loops of K), checked against phi - phi_Bethe.

    ``gap`` is |phi - phi_Bethe - (1/n) ln Z_loop|.
    """
    res = bp_residual(g, s, eta, msgs)
    if res > residual_tol:
        raise ParameterError(f"messages are not a BP fixed point (residual {res:.3g})",
                             "bp_fixed_point")
    masks = loop_masks(g, guard)
    var_tabs, chk_tabs = _kappa_tables(g, msgs, s, eta)
    w = _weights_from_tables(g, masks, var_tabs, chk_tabs)
    z_loop = math.fsum([1.0, *w.tolist()])
    if z_loop <= 0.0:
        raise NumericalError(f"non-positive loop sum {z_loop}", "z_loop_positive")
    log_z_loop = math.log(z_loop)
    phi = free_entropy(g, s, eta)
    phi_b = bethe_free_entropy(g, s, eta, msgs).value
    return LoopSeriesReport(log_z_loop, phi, phi_b,
                            abs(phi - phi_b - log_z_loop / g.n), len(masks), res)


# --- ferromagnetic loops -------------------------------------------------------

def support_edge_mask(g: TannerGraph, support: Iterable[int]) -> int:
    sup = set(support)
    return sum(1 << k for k, (v, _) in enumerate(g.edges) if v in sup)


def enumerate_ferro_loops(g: TannerGraph, basis: ParityBasis) -> list[LoopSubgraph]:
    """One ferromagnetic loop per nonzero codeword: all edges touching its support."""
    out = []
    for word in codeword_masks(basis)[1:].tolist():
        support = [i for i in range(g.n) if word >> i & 1]
        lp = LoopSubgraph.from_mask(g, support_edge_mask(g, support))
        if any(d % 2 for d in lp.chk_degrees.values()):
            raise ConsistencyError("codeword support with odd check degree", "even_checks")
        out.append(lp)
    return out


def ferro_masks_from_enumeration(g: TannerGraph, l: int | None = None) -> set[int]:
    """Loops from the subset search that satisfy the ferromagnetic conditions."""
    l = g.l if l is None else l
    masks = loop_masks(g)
    keep = np.ones(len(masks), dtype=bool)
    node_masks = _node_masks(g)
    for i in range(g.n):
        d = np.bitwise_count(masks & np.int64(node_masks[i]))
        keep &= (d == 0) | (d == l)
    for a in range(g.m):
        d = np.bitwise_count(masks & np.int64(node_masks[g.n + a]))
        keep &= d % 2 == 0
    return set(masks[keep].tolist())


def log_ferro_weight(support: Sequence[int], s: ChannelRealization, eta: float) -> float:
    sup = list(support)
    lam = s.lam[sup]
    if np.isposinf(lam).any():
        return -math.inf
    return -2.0 * eta * len(sup) - 2.0 * math.fsum(lam.tolist())


def ferro_weight(support: Sequence[int], s: ChannelRealization, eta: float) -> float:
    """exp(-2 eta |S| - 2 sum_{i in S} lambda_i); exactly 0 if any lambda is +inf."""
    return math.exp(log_ferro_weight(support, s, eta))


@dataclass(frozen=True)
class FerroSeriesReport:
    log_z_loop: float
    phi: float
    phi_bethe_plus: float
    gap: float
    num_loops: int
    min_weight: float


def ferro_loop_series(g: TannerGraph, basis: ParityBasis, s: ChannelRealization,
                      eta: float) -> FerroSeriesReport:
    """ln(1 + sum of ferromagnetic loop weights) and its identity check."""
    cw = codewords(g)[1:]
    lam = s.lam
    dead = np.isposinf(lam)
    logw = -2.0 * eta * cw.sum(axis=1) - 2.0 * (cw @ np.where(dead, 0.0, lam))
    logw = np.where(cw @ dead.astype(float) > 0, -np.inf, logw)
    value = float(logsumexp(np.concatenate([[0.0], logw])))
    phi = free_entropy(g, s, eta)
    phi_b = bethe_free_entropy(g, s, eta, ferromagnetic_messages(g, eta)).value
    min_w = float(np.exp(logw).min()) if len(logw) else 0.0
    return FerroSeriesReport(value, phi, phi_b, abs(phi - phi_b - value / g.n),
                             len(logw), min_w)


# --- loop types ----------------------------------------------------------------

@dataclass(frozen=True)
class LoopType:
    """Integer type of a ferromagnetic loop.

    ``n_corrupt`` is |V_c|; ``n0``/``nc`` count loop variables among correct
    and corrupted bits; ``m_counts[t-1]`` counts checks of induced degree 2t.
    Fractions are taken relative to |V_0|, |V_c| and m respectively, which
    makes the edge-count identity read sum (2t/r) y_t = (1-rho) x0 + rho xc.
    """

    l: int
    r: int
    n: int
    m: int
    n_corrupt: int
    n0: int
    nc: int
    m_counts: tuple[int, ...]

    @property
    def rho(self) -> Fraction:
        return Fraction(self.n_corrupt, self.n)

    @property
    def x0(self) -> Fraction:
        clean = self.n - self.n_corrupt
        return Fraction(self.n0, clean) if clean else Fraction(0)

    @property
    def xc(self) -> Fraction:
        return Fraction(self.nc, self.n_corrupt) if self.n_corrupt else Fraction(0)

    @property
    def y(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.m) for c in self.m_counts)

    @property
    def size(self) -> int:
        return self.n0 + self.nc

    def in_domain(self) -> bool:
        y = self.y
        lhs = sum(Fraction(2 * t, self.r) * yt for t, yt in enumerate(y, start=1))
        rhs = (1 - self.rho) * self.x0 + self.rho * self.xc
        return sum(y) <= 1 and lhs == rhs and all(0 <= v <= 1 for v in (self.x0, self.xc))

    @classmethod
    def from_fractions(cls, l: int, r: int, n: int, rho, x0, xc, y) -> "LoopType":
        """Build a type from fractions, insisting every implied count is an integer."""
        if (n * l) % r:
            raise ParameterError("n*l not divisible by r", "nl_divisible_by_r")
        m = n * l // r
        def as_int(x, what):
            q = Fraction(x).limit_denominator(10**9)
            if q.denominator != 1 or q < 0:
                raise ParameterError(f"{what}={x} is not a nonnegative integer", "integral_counts")
            return int(q)
        nc_tot = as_int(Fraction(rho) * n, "rho*n")
        n0 = as_int(Fraction(x0) * (n - nc_tot), "n*x0*(1-rho)")
        nc = as_int(Fraction(xc) * nc_tot, "n*xc*rho")
        counts = tuple(as_int(Fraction(v) * m, f"m*y_{t}") for t, v in enumerate(y, start=1))
        if len(counts) != r // 2:
            raise ParameterError(f"y must have {r // 2} entries", "y_length")
        return cls(l, r, n, m, nc_tot, n0, nc, counts)


def loop_type(loop, s: ChannelRealization, g: TannerGraph) -> LoopType:
    """Type of a ferromagnetic loop given as a LoopSubgraph or a support set."""
    if g.l is None or g.r is None:
        raise ParameterError("loop types need a regular graph", "regular_graph")
    if isinstance(loop, LoopSubgraph):
        if not loop.is_ferromagnetic(g.l):
            raise ParameterError("loop is not ferromagnetic", "ferromagnetic_loop")
        support = loop.var_nodes
    else:
        support = sorted(set(int(i) for i in loop))
    if not support:
        raise ParameterError("empty loop", "nonempty_loop")
    sup = set(support)
    counts = [0] * (g.r // 2)
    for vars_ in g.chk_adj:
        d = sum(1 for v in vars_ if v in sup)
        if d % 2:
            raise ParameterError("support has an odd check degree", "ferromagnetic_loop")
        if d:
            counts[d // 2 - 1] += 1
    corrupted = s.corrupted
    nc = int(sum(1 for i in support if corrupted[i]))
    t = LoopType(g.l, g.r, g.n, g.m, int(corrupted.sum()), len(support) - nc, nc,
                 tuple(counts))
    if not t.in_domain():
        raise ConsistencyError(f"loop type {t} outside D(rho)", "type_in_domain")
    return t


def _validate_type(t: LoopType):
    if t.size == 0:
        raise ParameterError("the empty loop has no type", "nonempty_loop")
    if not t.in_domain():
        raise ParameterError("type violates the domain constraints", "type_in_domain")


def _count_type(args) -> int:
    l, r, n, t, graph_seed = args
    g = sample_graph(l, r, n, graph_seed)
    from .tanner import null_space
    words = codeword_masks(null_space(g))[1:]
    clean_mask = np.int64(((1 << n) - 1) ^ ((1 << t.n_corrupt) - 1))
    bad_mask = np.int64((1 << t.n_corrupt) - 1)
    ok = (np.bitwise_count(words & clean_mask) == t.n0) & \
        (np.bitwise_count(words & bad_mask) == t.nc)
    rows = g.parity_rows()
    for tt, want in enumerate(t.m_counts, start=1):
        have = np.zeros(len(words), dtype=np.int64)
        for row in rows:
            have += np.bitwise_count(words & np.int64(row)) == 2 * tt
        ok &= have == want
    return int(ok.sum())


@dataclass(frozen=True)
class CountEstimate:
    mean: float
    stderr: float
    trials: int
    counts: tuple[int, ...]


def trial_graph_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(trial,)).generate_state(1)[0])


def expected_type_count_mc(l: int, r: int, n: int, t: LoopType, trials: int,
                           seed: int, workers: int = 1) -> CountEstimate:
    """Monte-Carlo estimate of E_graph |Omega(type)|.

    The corrupted set is fixed to the first ``t.n_corrupt`` variables, which
    is without loss of generality for an exchangeable graph ensemble.
    """
    if n > 16:
        raise SizeGuardError(f"n={n} exceeds 16", "n_le_16")
    if trials < 1:
        raise ParameterError("trials must be >= 1", "trials_ge_1")
    if (t.l, t.r, t.n) != (l, r, n):
        raise ParameterError("type was built for different (l, r, n)", "type_matches_ensemble")
    _validate_type(t)
    jobs = [(l, r, n, t, trial_graph_seed(seed, k)) for k in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            counts = list(ex.map(_count_type, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        counts = [_count_type(j) for j in jobs]
    arr = np.array(counts, dtype=float)
    mean = math.fsum(arr) / trials
    var = math.fsum((arr - mean) ** 2) / max(trials - 1, 1)
    return CountEstimate(mean, math.sqrt(var / trials), trials, tuple(counts))


def _log_binom(N, K) -> float:
    return float(gammaln(N + 1) - gammaln(K + 1) - gammaln(N - K + 1))


def mckay_log_bound(l: int, r: int, n: int, rho, t: LoopType) -> float:
    """ln of McKay's estimate for E|Omega(type)|, without the n^delta prefactor."""
    if (t.l, t.r, t.n) != (l, r, n):
        raise ParameterError("type was built for different (l, r, n)", "type_matches_ensemble")
    if Fraction(rho).limit_denominator(10**9) * n != t.n_corrupt:
        raise ParameterError("rho*n does not match the type", "integral_counts")
    m = t.m
    edges = l * (t.n0 + t.nc)
    if sum(2 * k * c for k, c in enumerate(t.m_counts, start=1)) != edges:
        raise ParameterError("check degrees do not match the loop edge count", "type_in_domain")
    used = sum(t.m_counts)
    if used > m:
        raise ParameterError("more loop checks than checks", "type_in_domain")
    val = -_log_binom(n * l, edges)
    val += _log_binom(n - t.n_corrupt, t.n0) + _log_binom(t.n_corrupt, t.nc)
    val += float(gammaln(m + 1) - gammaln(m - used + 1)
                 - sum(gammaln(c + 1) for c in t.m_counts))
    val += sum(c * _log_binom(r, 2 * k) for k, c in enumerate(t.m_counts, start=1))
    return val


@dataclass(frozen=True)
class GrowthRow:
    n: int
    log_bound_per_n: float
    f: float
    gap: float


def mckay_growth_rows(l: int, r: int, rho, x0, xc, y, n_values: Sequence[int]) -> list[GrowthRow]:
    """Compare (1/n) ln McKay with the rate function f along a scaled type."""
    from .thresholds import f_value
    f = f_value(float(x0), float(xc), [float(v) for v in y], float(rho), l, r)
    rows = []
    for n in n_values:
        t = LoopType.from_fractions(l, r, n, rho, x0, xc, y)
        b = mckay_log_bound(l, r, n, rho, t) / n
        rows.append(GrowthRow(n, b, f, abs(b - f)))
    return rows


def brute_force_kappa_i(spec_q: Sequence[float], eta: float, nuhat: Sequence[float],
                        nu: Sequence[float], in_loop: Sequence[bool]) -> float:
    """Term-by-term kappa_i from its defining sums (test oracle helper).

    ``spec_q`` is (q(s|+1), q(s|-1)); messages are probabilities of +1.
    """
    def pm(p, sig):
        return p if sig == 1 else 1.0 - p
    num = den = 0.0
    for sig in (1, -1):
        base = (spec_q[0] if sig == 1 else spec_q[1]) * math.exp(eta * (sig - 1))
        den += base * math.prod(pm(h, sig) for h in nuhat)
        term = base
        for h, v, inside in zip(nuhat, nu, in_loop):
            term *= sig * pm(v, -sig) if inside else pm(h, sig)
        num += term
    return num / den


def brute_force_kappa_a(nu: Sequence[float], nuhat: Sequence[float],
                        in_loop: Sequence[bool]) -> float:
    def pm(p, sig):
        return p if sig == 1 else 1.0 - p
    num = den = 0.0
    for sigs in product((1, -1), repeat=len(nu)):
        par = 1 + math.prod(sigs)
        den += par * math.prod(pm(v, x) for v, x in zip(nu, sigs))
        term = par
        for v, h, inside, x in zip(nu, nuhat, in_loop, sigs):
            term *= x * pm(h, -x) if inside else pm(v, x)
        num += term
    return num / den
