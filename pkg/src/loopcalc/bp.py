"""Belief propagation and the Bethe free entropy for tilted LDPC posteriors.

A message is stored as its probability of +1, one float per directed edge,
indexed like ``TannerGraph.edges``. Exact 0 and 1 are legal and represent
point masses; the ferromagnetic fixed point is all ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import expit

from .channel import ChannelRealization, ChannelSpec, transition_prob
from .errors import DegenerateFixedPointError, DegenerateMessageError, ParameterError
from .tanner import TannerGraph


@dataclass(frozen=True)
class MessageSet:
    var_to_chk: np.ndarray
    chk_to_var: np.ndarray
    eta: float

    def __post_init__(self):
        for arr in (self.var_to_chk, self.chk_to_var):
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ParameterError("messages must lie in [0, 1]", "message_range")
            arr.setflags(write=False)


@dataclass(frozen=True)
class BPResult:
    messages: MessageSet
    converged: bool
    iters: int
    residual: float


@dataclass(frozen=True)
class BetheResult:
    value: float
    F_a_terms: np.ndarray
    F_i_terms: np.ndarray
    F_ia_terms: np.ndarray


def check_update(incoming: Sequence[float]) -> float:
    """Parity-check message: (1 + prod(2 m_j - 1)) / 2."""
    return 0.5 * (1.0 + math.prod(2.0 * x - 1.0 for x in incoming))


def variable_update(spec: ChannelSpec, s_i: int, eta: float,
                    incoming: Sequence[float]) -> float:
    with np.errstate(divide="ignore"):
        qp, qm = transition_prob(spec, s_i, 1), transition_prob(spec, s_i, -1)
        lp = np.log(qp) + sum(np.log(x) for x in incoming)
        lm = np.log(qm) - 2.0 * eta + sum(np.log1p(-x) for x in incoming)
    if lp == -np.inf and lm == -np.inf:
        raise DegenerateMessageError("both spin values annihilated", "nonzero_normalization")
    return float(expit(lp - lm))


@lru_cache(maxsize=128)
def _layout(g: TannerGraph) -> tuple[np.ndarray, np.ndarray]:
    """Padded edge-index tables (n x dmax_var, m x dmax_chk), -1 for padding."""
    def pad(lists):
        width = max((len(x) for x in lists), default=0)
        out = np.full((len(lists), max(width, 1)), -1, dtype=np.intp)
        for k, row in enumerate(lists):
            out[k, :len(row)] = row
        return out
    return pad(g.var_edges()), pad(g.chk_edges())


def _leave_one_out(vals: np.ndarray, op: str) -> np.ndarray:
    """For each column j, the product/sum over the row excluding column j."""
    if op == "prod":
        unit, acc = 1.0, np.cumprod
        combine = np.multiply
    else:
        unit, acc = 0.0, np.cumsum
        combine = np.add
    ones = np.full((vals.shape[0], 1), unit)
    left = acc(np.concatenate([ones, vals[:, :-1]], axis=1), axis=1)
    right = acc(np.concatenate([ones, vals[:, :0:-1]], axis=1), axis=1)[:, ::-1]
    return combine(left, right)


def _check_step(g: TannerGraph, nu: np.ndarray) -> np.ndarray:
    _, chk = _layout(g)
    vals = np.where(chk >= 0, 2.0 * nu[chk] - 1.0, 1.0)
    loo = _leave_one_out(vals, "prod")
    out = np.empty(g.num_edges)
    mask = chk >= 0
    out[chk[mask]] = 0.5 * (1.0 + loo[mask])
    return out


def _variable_step(g: TannerGraph, s: ChannelRealization, eta: float,
                   nuhat: np.ndarray) -> np.ndarray:
    var, _ = _layout(g)
    mask = var >= 0
    with np.errstate(divide="ignore"):
        lp = np.where(mask, np.log(nuhat[var]), 0.0)
        lm = np.where(mask, np.log1p(-nuhat[var]), 0.0)
    lp = _leave_one_out(lp, "sum") + s.log_q_plus[:, None]
    lm = _leave_one_out(lm, "sum") + (s.log_q_minus - 2.0 * eta)[:, None]
    dead = mask & np.isneginf(lp) & np.isneginf(lm)
    if dead.any():
        k = var[dead][0]
        raise DegenerateMessageError(f"zero normalization on edge {g.edges[k]}",
                                     "nonzero_normalization")
    out = np.empty(g.num_edges)
    with np.errstate(invalid="ignore"):
        out[var[mask]] = expit(lp[mask] - lm[mask])
    return out


def bp_residual(g: TannerGraph, s: ChannelRealization, eta: float,
                msgs: MessageSet) -> float:
    """Max-norm violation of both BP equations by ``msgs``."""
    if g.num_edges == 0:
        return 0.0
    r1 = np.abs(_check_step(g, msgs.var_to_chk) - msgs.chk_to_var).max()
    r2 = np.abs(_variable_step(g, s, eta, msgs.chk_to_var) - msgs.var_to_chk).max()
    return float(max(r1, r2))


def ferromagnetic_messages(g: TannerGraph, eta: float = 0.0) -> MessageSet:
    ones = np.ones(g.num_edges)
    return MessageSet(ones, ones.copy(), eta)


def uniform_messages(g: TannerGraph, eta: float = 0.0) -> MessageSet:
    half = np.full(g.num_edges, 0.5)
    return MessageSet(half, half.copy(), eta)


def random_messages(g: TannerGraph, seed: int, eta: float = 0.0) -> MessageSet:
    rng = np.random.default_rng(seed)
    return MessageSet(rng.random(g.num_edges), rng.random(g.num_edges), eta)


def bp_solve(g: TannerGraph, s: ChannelRealization, eta: float = 0.0,
             init: str = "uniform", damping: float = 0.0, max_iters: int = 10_000,
             tol: float = 1e-10, seed: int = 0) -> BPResult:
    """Damped flooding iteration of the BP equations.

    ``init`` is one of "ferromagnetic", "uniform" or "random" (uses ``seed``).
    Each sweep updates all check-to-variable messages from the current
    variable-to-check messages, then all variable-to-check messages.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive", "tol_positive")
    if not 0.0 <= damping < 1.0:
        raise ParameterError("damping must lie in [0, 1)", "damping_range")
    if s.n != g.n:
        raise ParameterError("realization length does not match graph", "realization_length")
    if init == "ferromagnetic":
        start = ferromagnetic_messages(g, eta)
    elif init == "uniform":
        start = uniform_messages(g, eta)
    elif init == "random":
        start = random_messages(g, seed, eta)
    else:
        raise ParameterError(f"unknown init {init!r}", "init")
    nu = np.array(start.var_to_chk)
    nuhat = np.array(start.chk_to_var)
    res = bp_residual(g, s, eta, start)
    it = 0
    while res > tol and it < max_iters:
        new_hat = _check_step(g, nu)
        nuhat = (1 - damping) * new_hat + damping * nuhat
        new_nu = _variable_step(g, s, eta, nuhat)
        nu = (1 - damping) * new_nu + damping * nu
        it += 1
        res = bp_residual(g, s, eta, MessageSet(nu.copy(), nuhat.copy(), eta))
    msgs = MessageSet(np.clip(nu, 0.0, 1.0), np.clip(nuhat, 0.0, 1.0), eta)
    return BPResult(msgs, res <= tol, it, res)


def bethe_free_entropy(g: TannerGraph, s: ChannelRealization, eta: float,
                       msgs: MessageSet) -> BetheResult:
    """(1/n)(sum F_a + sum F_i - sum F_ia) at the given messages."""
    nu, nuhat = msgs.var_to_chk, msgs.chk_to_var
    f_a = np.empty(g.m)
    for a, edges in enumerate(g.chk_edges()):
        z = 0.5 * (1.0 + math.prod(2.0 * nu[k] - 1.0 for k in edges))
        if z <= 0.0:
            raise DegenerateFixedPointError(f"F_a = ln 0 at check {a}", "F_a_finite")
        f_a[a] = math.log(z)
    f_i = np.empty(g.n)
    with np.errstate(divide="ignore"):
        for i, edges in enumerate(g.var_edges()):
            lp = s.log_q_plus[i] + sum(math.log(nuhat[k]) if nuhat[k] > 0 else -math.inf
                                       for k in edges)
            lm = s.log_q_minus[i] - 2.0 * eta + sum(
                math.log1p(-nuhat[k]) if nuhat[k] < 1 else -math.inf for k in edges)
            if lp == -math.inf and lm == -math.inf:
                raise DegenerateFixedPointError(f"F_i = ln 0 at variable {i}", "F_i_finite")
            f_i[i] = np.logaddexp(lp, lm)
    z_ia = nu * nuhat + (1.0 - nu) * (1.0 - nuhat)
    if (z_ia <= 0).any():
        k = int(np.flatnonzero(z_ia <= 0)[0])
        raise DegenerateFixedPointError(f"F_ia = ln 0 on edge {g.edges[k]}", "F_ia_finite")
    f_ia = np.log(z_ia)
    value = (math.fsum(f_a) + math.fsum(f_i) - math.fsum(f_ia)) / g.n
    return BetheResult(value, f_a, f_i, f_ia)


def bp_marginals(g: TannerGraph, s: ChannelRealization, eta: float,
                 msgs: MessageSet) -> np.ndarray:
    """BP estimates of <sigma_i> from the full incoming check messages."""
    nuhat = msgs.chk_to_var
    out = np.empty(g.n)
    with np.errstate(divide="ignore"):
        for i, edges in enumerate(g.var_edges()):
            lp = s.log_q_plus[i] + np.log(nuhat[edges]).sum()
            lm = s.log_q_minus[i] - 2.0 * eta + np.log1p(-nuhat[edges]).sum()
            if lp == -np.inf and lm == -np.inf:
                raise DegenerateFixedPointError(f"belief of variable {i} vanishes",
                                                "nonzero_belief")
            out[i] = np.tanh(0.5 * (lp - lm)) if np.isfinite(lp - lm) else np.sign(lp - lm)
    return out
