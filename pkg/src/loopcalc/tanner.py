"""Regular bipartite Tanner graphs and their GF(2) parity-check structure."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, SamplingError, SizeGuardError

NULL_SPACE_GUARD = 24
CODEWORD_GUARD = 2**20
# Number of configuration-model matchings drawn per vectorized batch. Changing
# it changes which graph a given seed produces.
_SAMPLE_BATCH = 256


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite factor graph with ``n`` variables and ``m`` checks.

    ``edges`` is kept sorted by (variable, check). ``l`` and ``r`` are the
    common variable and check degrees, or ``None`` for hand-built irregular
    fixtures.
    """

    n: int
    m: int
    l: int | None
    r: int | None
    edges: tuple[tuple[int, int], ...]
    var_adj: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)
    chk_adj: tuple[tuple[int, ...], ...] = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, n: int, m: int, edges: Iterable[Sequence[int]],
                   l: int | None = None, r: int | None = None) -> "TannerGraph":
        es = sorted((int(v), int(c)) for v, c in edges)
        if len(set(es)) != len(es):
            raise ParameterError("parallel edges are not allowed", "simple_graph")
        var_adj: list[list[int]] = [[] for _ in range(n)]
        chk_adj: list[list[int]] = [[] for _ in range(m)]
        for v, c in es:
            if not (0 <= v < n and 0 <= c < m):
                raise ParameterError(f"edge ({v}, {c}) out of range", "edge_range")
            var_adj[v].append(c)
            chk_adj[c].append(v)
        vdeg = {len(a) for a in var_adj}
        cdeg = {len(a) for a in chk_adj}
        inferred_l = vdeg.pop() if len(vdeg) == 1 else None
        inferred_r = cdeg.pop() if len(cdeg) == 1 else None
        if l is not None and l != inferred_l:
            raise ParameterError(f"variable degrees are not all {l}", "variable_degree")
        if r is not None and r != inferred_r:
            raise ParameterError(f"check degrees are not all {r}", "check_degree")
        return cls(n, m, inferred_l, inferred_r, tuple(es),
                   tuple(tuple(a) for a in var_adj), tuple(tuple(a) for a in chk_adj))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    def var_edges(self) -> list[list[int]]:
        """Edge indices incident to each variable, in check order."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for k, (v, _) in enumerate(self.edges):
            out[v].append(k)
        return out

    def chk_edges(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.m)]
        for k, (_, c) in enumerate(self.edges):
            out[c].append(k)
        return out

    def parity_rows(self) -> list[int]:
        """Parity-check matrix rows as integer bitmasks over variables."""
        rows = [0] * self.m
        for v, c in self.edges:
            rows[c] |= 1 << v
        return rows

    def parity_matrix(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        for v, c in self.edges:
            h[c, v] = 1
        return h

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "m": self.m, "l": self.l, "r": self.r,
                           "edges": [list(e) for e in self.edges]})

    @classmethod
    def from_json(cls, text: str) -> "TannerGraph":
        d = json.loads(text)
        return cls.from_edges(d["n"], d["m"], d["edges"], d.get("l"), d.get("r"))


def design_rate(l: int, r: int) -> Fraction:
    if not (r > l >= 1):
        raise ParameterError("design rate needs r > l >= 1", "r_gt_l")
    return 1 - Fraction(l, r)


def check_degrees(l: int, r: int, n: int) -> int:
    """Validate (l, r, n) for sampling and return the check count m."""
    if l < 3:
        raise ParameterError(f"l={l} must be >= 3", "l_ge_3")
    if r <= l:
        raise ParameterError(f"r={r} must exceed l={l}", "r_gt_l")
    if n < r:
        raise ParameterError(f"n={n} must be >= r={r}", "n_ge_r")
    if (n * l) % r:
        raise ParameterError(f"n*l={n * l} not divisible by r={r}", "nl_divisible_by_r")
    return n * l // r


def sample_graph(l: int, r: int, n: int, seed: int,
                 max_attempts: int = 10**6) -> TannerGraph:
    """Uniformly random simple (l, r)-regular bipartite graph.

    Configuration model: half-edges are matched by a uniform permutation and
    any matching that produces a parallel edge is rejected. Conditioned on
    simplicity every labelled simple graph has the same number of matchings,
    so the accepted sample is uniform.
    """
    m = check_degrees(l, r, n)
    rng = np.random.default_rng(seed)
    var_sockets = np.repeat(np.arange(n, dtype=np.int64), l)
    chk_sockets = np.repeat(np.arange(m, dtype=np.int64), r)
    tried = 0
    while tried < max_attempts:
        b = min(_SAMPLE_BATCH, max_attempts - tried)
        perms = rng.permuted(np.tile(chk_sockets, (b, 1)), axis=1)
        keys = np.sort(var_sockets * m + perms, axis=1)
        simple = np.flatnonzero(~(np.diff(keys, axis=1) == 0).any(axis=1))
        if simple.size:
            k = keys[simple[0]]
            edges = zip((k // m).tolist(), (k % m).tolist())
            return TannerGraph.from_edges(n, m, edges, l, r)
        tried += b
    raise SamplingError(f"no simple graph after {max_attempts} attempts", "rejection_cap")


@dataclass(frozen=True)
class ParityBasis:
    """Null-space basis of a parity-check matrix over GF(2).

    Basis words are stored as integer bitmasks (bit ``i`` is variable ``i``).
    """

    n: int
    rank: int
    masks: tuple[int, ...]

    @property
    def codeword_count(self) -> int:
        return 2 ** len(self.masks)

    @property
    def basis(self) -> np.ndarray:
        return masks_to_bits(np.array(self.masks, dtype=np.int64), self.n)


def masks_to_bits(masks: np.ndarray, n: int) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def bits_to_masks(bits: np.ndarray) -> np.ndarray:
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int64))
    return (bits << np.arange(bits.shape[1], dtype=np.int64)).sum(axis=1)


def gf2_rref(rows: list[int], n_cols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form of bitmask rows.

    Columns are scanned left to right; the pivot is the first remaining row
    with a one in that column. Returns (reduced nonzero rows, pivot columns).
    """
    work = list(rows)
    pivots: list[int] = []
    top = 0
    for col in range(n_cols):
        bit = 1 << col
        hit = next((i for i in range(top, len(work)) if work[i] & bit), None)
        if hit is None:
            continue
        work[top], work[hit] = work[hit], work[top]
        for i in range(len(work)):
            if i != top and work[i] & bit:
                work[i] ^= work[top]
        pivots.append(col)
        top += 1
        if top == len(work):
            break
    return work[:top], pivots


def null_space(g: TannerGraph, guard: int = NULL_SPACE_GUARD) -> ParityBasis:
    if g.n > guard:
        raise SizeGuardError(f"n={g.n} exceeds null-space guard {guard}", "n_le_guard")
    reduced, pivots = gf2_rref(g.parity_rows(), g.n)
    pivot_set = set(pivots)
    basis = []
    for free in range(g.n):
        if free in pivot_set:
            continue
        word = 1 << free
        for row, pc in zip(reduced, pivots):
            if row >> free & 1:
                word |= 1 << pc
        basis.append(word)
    return ParityBasis(g.n, len(pivots), tuple(basis))


def codeword_masks(basis: ParityBasis, guard: int = CODEWORD_GUARD) -> np.ndarray:
    """All codewords as bitmasks; index 0 is the all-zero word."""
    if basis.codeword_count > guard:
        raise SizeGuardError(f"{basis.codeword_count} codewords exceed guard {guard}",
                             "codeword_count_le_guard")
    words = np.zeros(1, dtype=np.int64)
    for b in basis.masks:
        words = np.concatenate([words, words ^ b])
    return words


def enumerate_codewords(basis: ParityBasis, guard: int = CODEWORD_GUARD) -> np.ndarray:
    """All codewords as a (count, n) uint8 array in the {0, 1} alphabet."""
    return masks_to_bits(codeword_masks(basis, guard), basis.n)


def satisfies_checks(g: TannerGraph, word: int) -> bool:
    return all(bin(row & word).count("1") % 2 == 0 for row in g.parity_rows())
