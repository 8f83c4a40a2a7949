"""Growth-rate exponents of the averaged ferromagnetic loop series and thresholds.

The objective over loop types (x0, xc, y) is reduced analytically in two
steps. For a fixed variable fraction X = (1-rho) x0 + rho xc the y-part is a
Gibbs maximization with closed form in a parameter z, and for the BSC the
best split of X between correct and corrupted bits satisfies
odds(xc) = odds(x0) * ((1-p)/p)^2, a quadratic in x0. Everything else is a
one-dimensional profile F(X) maximized on a grid with Brent refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammaln, logsumexp, xlogy

from .channel import BEC, BSC
from .errors import CertificationError, ParameterError, ResolutionError

DELTA_BALL = 1e-3
TOL_GAP = 1e-6
ALPHA_TOL = 1e-12
GRID = 400
NEAR_ORIGIN_POINTS = 200
_ENTROPY_SLACK = 1e-12

# Reference thresholds for display only, never recomputed. BP and MAP values
# are from Mezard and Montanari, "Information, Physics, and Computation"
# (2009); "loop" is the literature value of the loop threshold; Shannon is
# 1 - R on the BEC and h2^-1(1 - R) on the BSC.
REFERENCE = {
    BEC: {
        (3, 4): {"bp": 0.64743, "loop": 0.7442, "map": 0.74601, "shannon": 0.75},
        (3, 5): {"bp": 0.51757, "loop": 0.5872, "map": 0.59098, "shannon": 0.6},
        (3, 6): {"bp": 0.42944, "loop": 0.4833, "map": 0.48815, "shannon": 0.5},
        (4, 6): {"bp": 0.50613, "loop": 0.5767, "map": 0.66565, "shannon": 0.66667},
    },
    BSC: {
        (3, 4): {"bp": 0.16692, "loop": 0.2014, "map": 0.21011, "shannon": 0.21450},
        (3, 5): {"bp": 0.11382, "loop": 0.1146, "map": 0.13841, "shannon": 0.14610},
        (3, 6): {"bp": 0.08402, "loop": 0.0678, "map": 0.10101, "shannon": 0.11003},
        (4, 6): {"bp": 0.11692, "loop": 0.1705, "map": 0.17261, "shannon": 0.17395},
    },
}


def _clamp_unit(x, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < -_ENTROPY_SLACK) or np.any(x > 1 + _ENTROPY_SLACK):
        raise ParameterError(f"{name} outside [0, 1]", f"{name}_in_unit_interval")
    return np.clip(x, 0.0, 1.0)


def h2(x):
    """Binary entropy in nats with 0 ln 0 = 0."""
    x = _clamp_unit(x, "entropy_argument")
    out = -xlogy(x, x) - xlogy(1 - x, 1 - x)
    return float(out) if out.ndim == 0 else out


def _log_binoms(r: int) -> np.ndarray:
    """ln C(r, 2t) for t = 0..floor(r/2)."""
    t = np.arange(r // 2 + 1)
    return gammaln(r + 1) - gammaln(2 * t + 1) - gammaln(r - 2 * t + 1)


def x_max(r: int) -> float:
    return 2 * (r // 2) / r


def f_value(x0: float, xc: float, y: Sequence[float], rho: float, l: int, r: int) -> float:
    """The rate function f of a loop type, in nats."""
    y = np.asarray(y, dtype=float)
    if y.shape != (r // 2,):
        raise ParameterError(f"y must have {r // 2} entries", "y_length")
    _clamp_unit(rho, "rho")
    x0, xc = float(_clamp_unit(x0, "x0")), float(_clamp_unit(xc, "xc"))
    y = _clamp_unit(y, "y")
    total = float(_clamp_unit(y.sum(), "sum_y"))
    X = (1 - rho) * x0 + rho * xc
    lc = _log_binoms(r)[1:]
    ent_y = -xlogy(1 - total, 1 - total) - float(xlogy(y, y).sum())
    return (-l * h2(X) + (1 - rho) * h2(x0) + rho * h2(xc)
            + l / r * (ent_y + float(y @ lc)))


def k_value(x0: float, xc: float, rho: float, p: float) -> float:
    if not 0.0 < p <= 0.5:
        raise ParameterError(f"p={p} outside (0, 1/2]", "p_in_open_half")
    return (rho * xc - (1 - rho) * x0) * math.log((1 - p) / p)


@dataclass(frozen=True)
class DomainProjection:
    X: float
    feasible: bool
    x_max: float


def project_domain(x0: float, xc: float, l: int, r: int, rho: float) -> DomainProjection:
    """Whether some admissible y realizes the variable fraction of (x0, xc)."""
    X = (1 - rho) * x0 + rho * xc
    return DomainProjection(X, 0.0 <= X <= x_max(r) + 1e-15, x_max(r))


# --- inner y maximization ------------------------------------------------------

def _solve_u(X: np.ndarray, r: int, iters: int = 200) -> np.ndarray:
    """ln z with mean induced degree / r equal to X (safeguarded Newton)."""
    L = _log_binoms(r)
    deg = 2.0 * np.arange(len(L))
    lo = np.full(X.shape, -400.0)
    hi = np.full(X.shape, 400.0)
    u = np.clip(0.5 * np.log(np.maximum(X, 1e-300) * r / (2 * math.exp(L[1]))), -399, 399)
    for _ in range(iters):
        w = L + deg * u[..., None]
        w -= w.max(axis=-1, keepdims=True)
        pr = np.exp(w)
        pr /= pr.sum(axis=-1, keepdims=True)
        mean = (pr * deg).sum(axis=-1)
        var = (pr * deg**2).sum(axis=-1) - mean**2
        g = mean / r - X
        lo = np.where(g < 0, u, lo)
        hi = np.where(g > 0, u, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g * r / var
        nxt = u - step
        bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - u) <= 1e-13 * np.maximum(1.0, np.abs(u))
        u = nxt
        if done.all():
            break
    return u


def inner_h(X, r: int) -> np.ndarray:
    """max over admissible y of H(y) + sum y_t ln C(r,2t) at variable fraction X."""
    X = np.asarray(X, dtype=float)
    xm = x_max(r)
    if np.any(X < -1e-15) or np.any(X > xm + 1e-12):
        raise ParameterError(f"X outside [0, {xm}]", "X_feasible")
    L = _log_binoms(r)
    out = np.empty(X.shape)
    low = X <= 0
    top = X >= xm - 1e-14
    mid = ~(low | top)
    out[low] = 0.0
    out[top] = L[-1]
    if mid.any():
        Xm = X[mid]
        u = _solve_u(Xm, r)
        deg = 2.0 * np.arange(len(L))
        out[mid] = logsumexp(L + deg * u[:, None], axis=-1) - r * Xm * u
    return out


def inner_max_y(X: float, l: int, r: int) -> tuple[np.ndarray, float]:
    """Maximizing y and the value (l/r)[H(y) + sum y_t ln C(r,2t)] at fixed X."""
    X = float(X)
    T = r // 2
    val = float(inner_h(np.array([X]), r)[0])
    if X <= 0:
        return np.zeros(T), 0.0
    if X >= x_max(r) - 1e-14:
        y = np.zeros(T)
        y[-1] = 1.0
        return y, l / r * val
    u = float(_solve_u(np.array([X]), r)[0])
    L = _log_binoms(r)
    w = L + 2 * np.arange(T + 1) * u
    pr = np.exp(w - logsumexp(w))
    return pr[1:], l / r * val


def degree_map(z, r: int) -> np.ndarray:
    """sum_t 2t y_t(z): mean induced check degree of the Gibbs family."""
    z = np.asarray(z, dtype=float)
    t = np.arange(r // 2 + 1)
    L = _log_binoms(r)
    with np.errstate(divide="ignore"):
        w = L + 2 * t * np.log(z)[..., None]
    pr = np.exp(w - logsumexp(w, axis=-1, keepdims=True))
    return (pr * 2 * t).sum(axis=-1)


# --- one-dimensional profile ---------------------------------------------------

def bsc_split(X, rho: float, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Optimal (x0, xc) with (1-rho) x0 + rho xc = X for the f + k objective."""
    X = np.asarray(X, dtype=float)
    kappa = ((1 - p) / p) ** 2
    a = (1 - rho) * (kappa - 1)
    b = (1 - rho) + rho * kappa - X * (kappa - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        x0 = np.where(X > 0, 2 * X / (b + np.sqrt(b * b + 4 * a * X)), 0.0)
    x0 = np.clip(x0, 0.0, 1.0)
    xc = np.clip(kappa * x0 / (1 + (kappa - 1) * x0), 0.0, 1.0)
    return x0, xc


def x_upper(family: str, rho: float, r: int) -> float:
    return min(rho, x_max(r)) if family == BEC else x_max(r)


def profile(family: str, X, rho: float, p: float | None, l: int, r: int) -> np.ndarray:
    """F(X): max of the eta = 0 objective over types with variable fraction X."""
    X = np.asarray(X, dtype=float)
    H = inner_h(X, r)
    if family == BEC:
        xc = np.clip(X / rho, 0.0, 1.0) if rho > 0 else np.zeros_like(X)
        return -l * h2(X) + rho * h2(xc) + l / r * H
    if family != BSC:
        raise ParameterError(f"unknown channel family {family!r}", "channel_family")
    x0, xc = bsc_split(X, rho, p)
    Lp = math.log((1 - p) / p)
    return (-l * h2(X) + (1 - rho) * h2(x0) + rho * h2(xc) + l / r * H
            + (rho * xc - (1 - rho) * x0) * Lp)


def objective_grid(family: str, x0, xc, rho: float, p: float | None, eta: float,
                   l: int, r: int) -> np.ndarray:
    """Objective with the inner y already maximized, on arbitrary (x0, xc) arrays.

    Points outside the domain get -inf. Used as a brute-force cross-check of
    the one-dimensional reduction.
    """
    x0 = np.asarray(x0, dtype=float)
    xc = np.asarray(xc, dtype=float)
    X = (1 - rho) * x0 + rho * xc
    ok = X <= x_max(r)
    Xs = np.where(ok, X, 0.0)
    val = -l * h2(Xs) + (1 - rho) * h2(x0) + rho * h2(xc) + l / r * inner_h(Xs, r) - 2 * eta * Xs
    if family == BSC:
        val = val + (rho * xc - (1 - rho) * x0) * math.log((1 - p) / p)
    elif np.any(x0 != 0):
        raise ParameterError("BEC objective needs x0 = 0", "x0_zero")
    return np.where(ok, val, -np.inf)


def g_value(x0: float, xc: float, y: Sequence[float], rho: float, p: float, eta: float,
            l: int, r: int) -> float:
    """f + k - 2 eta X at an explicit type."""
    X = (1 - rho) * x0 + rho * xc
    return f_value(x0, xc, y, rho, l, r) + k_value(x0, xc, rho, p) - 2 * eta * X


# --- certificates --------------------------------------------------------------

@dataclass(frozen=True)
class MaximizerCertificate:
    arg: tuple
    value: float
    origin_gap: float
    near_origin_ok: bool
    family: str = ""
    rho: float = 0.0
    noise: float = 0.0
    eta: float = 0.0
    gap_arg_X: float = 0.0
    details: dict = field(default_factory=dict, compare=False)

    @property
    def unique_at_origin(self) -> bool:
        return self.origin_gap < -TOL_GAP and self.near_origin_ok

    def to_dict(self) -> dict:
        x0, xc, y = self.arg
        return {"arg": {"x0": x0, "xc": xc, "y": list(y)}, "value": self.value,
                "origin_gap": self.origin_gap, "near_origin_ok": self.near_origin_ok,
                "unique_at_origin": self.unique_at_origin, "family": self.family,
                "rho": self.rho, "noise": self.noise, "eta": self.eta,
                "gap_arg_X": self.gap_arg_X}


def _split(family: str, X: float, rho: float, p: float | None) -> tuple[float, float]:
    if family == BEC:
        return 0.0, (min(X / rho, 1.0) if rho > 0 else 0.0)
    x0, xc = bsc_split(np.array([X]), rho, p)
    return float(x0[0]), float(xc[0])


def _maximize(fun, lo: float, hi: float, grid: int) -> tuple[float, float]:
    """Grid plus bounded Brent refinement of a 1-D function on [lo, hi]."""
    if hi <= lo:
        return lo, float(fun(np.array([lo]))[0])
    xs = np.unique(np.concatenate([np.linspace(lo, hi, grid),
                                   np.geomspace(lo, hi, max(grid // 4, 2))]))
    vals = fun(xs)
    k = int(np.argmax(vals))
    best_x, best = float(xs[k]), float(vals[k])
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
    if b > a:
        res = minimize_scalar(lambda t: -float(fun(np.array([t]))[0]), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        if -res.fun > best:
            best_x, best = float(res.x), float(-res.fun)
    return best_x, best


def _gap_floor(family: str, rho: float, delta_ball: float) -> float:
    """Smallest X reachable outside the (x0, xc) ball of radius delta_ball."""
    if family == BEC:
        return rho * delta_ball
    return min(rho, 1 - rho) * delta_ball if 0 < rho < 1 else delta_ball


def near_origin_check(family: str, rho: float, p: float | None, l: int, r: int,
                      upto: float, eta_tilde: float = 0.0,
                      points: int = NEAR_ORIGIN_POINTS) -> tuple[bool, float]:
    """Negativity of the objective on (0, upto].

    (0, delta] is covered by the upper bound gbar; [delta, upto] by sampling
    the exact profile on a geometric grid. Returns (ok, delta).
    """
    noise = rho if family == BEC else p
    try:
        d = find_delta(l, r, noise, eta_tilde, family)
    except CertificationError:
        return False, 0.0
    if d >= upto:
        return True, d
    xs = np.geomspace(d, upto, points)
    vals = profile(family, xs, rho, p, l, r) - 2 * eta_tilde * xs
    return bool((vals < 0).all()), d


def _certificate(family: str, rho: float, p: float | None, eta: float, l: int, r: int,
                 delta_ball: float, grid: int) -> MaximizerCertificate:
    hi = x_upper(family, rho, r)
    lo = min(_gap_floor(family, rho, delta_ball), hi)

    def fun(xs):
        return profile(family, xs, rho, p, l, r) - 2 * eta * xs

    gx, gap = _maximize(fun, lo, hi, grid)
    ok, d = near_origin_check(family, rho, p, l, r, lo, eta_tilde=min(eta, 0.0))
    if gap > 0:
        x0, xc = _split(family, gx, rho, p)
        y, _ = inner_max_y(gx, l, r)
        arg, value = (x0, xc, tuple(float(v) for v in y)), gap
    else:
        arg, value = (0.0, 0.0, (0.0,) * (r // 2)), 0.0
    noise = rho if family == BEC else p
    return MaximizerCertificate(arg, value, gap, ok, family, rho, noise, eta, gx,
                                {"delta_gbar": d, "gap_floor": lo})


def alpha_bec(rho: float, eta: float, l: int, r: int, delta_ball: float = DELTA_BALL,
              grid: int = GRID) -> MaximizerCertificate:
    if not 0.0 < rho <= 1.0:
        raise ParameterError(f"rho={rho} outside (0, 1]", "rho_range")
    return _certificate(BEC, rho, None, eta, l, r, delta_ball, grid)


def alpha_bsc(rho: float, p: float, eta: float, l: int, r: int,
              delta_ball: float = DELTA_BALL, grid: int = GRID) -> MaximizerCertificate:
    if not 0.0 < p <= 0.5:
        raise ParameterError(f"p={p} outside (0, 1/2]", "p_in_open_half")
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho={rho} outside (0, 1)", "rho_range")
    return _certificate(BSC, rho, p, eta, l, r, delta_ball, grid)


def certify(family: str, noise: float, l: int, r: int, eta: float = 0.0,
            delta_ball: float = DELTA_BALL, grid: int = GRID) -> MaximizerCertificate:
    """Certificate at rho equal to the channel noise."""
    if family == BEC:
        return alpha_bec(noise, eta, l, r, delta_ball, grid)
    return alpha_bsc(noise, noise, eta, l, r, delta_ball, grid)


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    bracket: tuple[float, float]
    certificates: tuple[MaximizerCertificate, MaximizerCertificate]
    family: str = ""
    l: int = 0
    r: int = 0
    trace: tuple = ()

    def to_dict(self) -> dict:
        return {"family": self.family, "l": self.l, "r": self.r,
                "threshold": self.threshold, "bracket": list(self.bracket),
                "certificates": [c.to_dict() for c in self.certificates],
                "trace": [list(t) for t in self.trace]}


def threshold_bisect(family: str, l: int, r: int, tol_noise: float = 1e-4,
                     grid: int = GRID, delta_ball: float = DELTA_BALL) -> ThresholdResult:
    """Largest noise whose eta = 0 certificate is unique at the origin.

    Every probe is evaluated at ``grid`` and ``2 * grid``; disagreement raises
    ResolutionError.
    """
    if tol_noise < 1e-5:
        raise ParameterError("tol_noise must be >= 1e-5", "tol_ge_1e-5")
    if family not in (BEC, BSC):
        raise ParameterError(f"unknown channel family {family!r}", "channel_family")

    def probe(x):
        c1 = certify(family, x, l, r, 0.0, delta_ball, grid)
        c2 = certify(family, x, l, r, 0.0, delta_ball, 2 * grid)
        if c1.unique_at_origin != c2.unique_at_origin:
            raise ResolutionError(f"certificate at noise {x} changes under grid refinement",
                                  "grid_resolution")
        return c1

    lo, hi = 1e-3, (0.999 if family == BEC else 0.5)
    c_lo, c_hi = probe(lo), probe(hi)
    if not c_lo.unique_at_origin or c_hi.unique_at_origin:
        raise CertificationError("bisection bracket is not valid", "bracket_valid")
    trace = [(lo, True), (hi, False)]
    while hi - lo > tol_noise:
        mid = 0.5 * (lo + hi)
        c = probe(mid)
        trace.append((mid, c.unique_at_origin))
        if c.unique_at_origin:
            lo, c_lo = mid, c
        else:
            hi, c_hi = mid, c
    return ThresholdResult(lo, (lo, hi), (c_lo, c_hi), family, l, r, tuple(trace))


# --- near-origin bound ---------------------------------------------------------

def gbar_constant(l: int, r: int, p: float | None, eta_tilde: float,
                  family: str = BSC) -> float:
    """Slope constant M of the near-origin upper bound.

    Uses the largest ln C(r, 2t) over t, which is what bounds the
    sum y_t ln C(r, 2t) term for every y.
    """
    max_lc = float(_log_binoms(r)[1:].max())
    M = l * max_lc + l * math.log(r // 2) - 2 * eta_tilde
    if family == BSC:
        M += 2 * math.log((1 - p) / p)
    return M


def gbar_near_origin(X: float, l: int, r: int, p: float | None, eta_tilde: float,
                     family: str = BSC) -> float:
    if l < 3:
        raise ParameterError("l must be >= 3", "l_ge_3")
    if not 0.0 < X <= 1 / (3 * r):
        raise ParameterError(f"X={X} outside (0, 1/(3r)]", "X_in_ball")
    M = gbar_constant(l, r, p, eta_tilde, family)
    return l / r * h2(r * X / 2) - (l - 1) * h2(X) + M * X


def find_delta(l: int, r: int, p: float | None, eta_tilde: float,
               family: str = BSC) -> float:
    """Largest delta <= 1/(3r) with gbar < 0 on (0, delta].

    gbar(X)/X is strictly increasing on (0, 1/(3r)] for l >= 3 (its derivative
    is [(l/r) ln(1 - rX/2) - (l-1) ln(1-X)] / X^2 > 0), so the negative set is
    an interval starting at 0 and its end is the root of gbar(X)/X.
    """
    if l < 3:
        raise ParameterError("l must be >= 3", "l_ge_3")
    top = 1 / (3 * r)

    def ratio(logx):
        x = math.exp(logx)
        return gbar_near_origin(x, l, r, p, eta_tilde, family) / x

    if ratio(math.log(top)) < 0:
        return top
    floor = math.log(1e-300)
    if ratio(floor) >= 0:
        raise CertificationError("no negative region for gbar above 1e-300", "delta_positive")
    root = brentq(ratio, floor, math.log(top), xtol=1e-14)
    return math.exp(root) * (1 - 1e-9)


# --- lemma checks --------------------------------------------------------------

def _require_unique(family, noise, l, r, delta_ball, grid):
    c = certify(family, noise, l, r, 0.0, delta_ball, grid)
    if not c.unique_at_origin:
        raise CertificationError(f"eta = 0 certificate fails at noise {noise}",
                                 "unique_at_origin")
    return c


@dataclass(frozen=True)
class EtaWindow:
    eta_tilde: float
    eta_tilde_1: float
    lam: float
    delta: float
    exact_edge: float
    alpha_at_half: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _max_away(family, rho, p, l, r, x_lo, grid):
    hi = x_upper(family, rho, r)
    _, v = _maximize(lambda xs: profile(family, xs, rho, p, l, r), min(x_lo, hi), hi, grid)
    return v


def lemma1_eta_window(family: str, l: int, r: int, noise: float,
                      delta_ball: float = DELTA_BALL, grid: int = GRID,
                      candidates: Sequence[float] | None = None) -> EtaWindow:
    """Certified eta_tilde < 0 such that alpha(rho, eta) = 0 for eta > eta_tilde.

    For each trial eta_tilde_1 the near-origin ball radius comes from
    find_delta, lambda is the maximum of the eta = 0 objective outside that
    ball and the window is max(eta_tilde_1, lambda / 2). The best trial wins.
    """
    _require_unique(family, noise, l, r, delta_ball, grid)
    rho, p = noise, (noise if family == BSC else None)
    if candidates is None:
        candidates = -np.geomspace(1e-4, 1.0, 17)
    scale = math.sqrt(1 / (1 - rho) ** 2 + 1 / rho ** 2 + r * r / 4) if family == BSC \
        else math.sqrt(1 / rho ** 2 + r * r / 4)
    best = None
    for e1 in candidates:
        d = find_delta(l, r, p, float(e1), family)
        lam = _max_away(family, rho, p, l, r, d / scale, grid)
        if lam >= 0:
            continue
        et = max(float(e1), lam / 2)
        if best is None or et < best[0]:
            best = (et, float(e1), lam, d)
    if best is None:
        raise CertificationError("no negative window found", "eta_window")
    hi = x_upper(family, rho, r)
    xs = np.geomspace(1e-12, hi, 4000)
    edge = float(np.max(profile(family, xs, rho, p, l, r) / (2 * xs)))
    half = certify(family, noise, l, r, best[0] / 2, delta_ball, grid)
    return EtaWindow(best[0], best[1], best[2], best[3], edge, half.value)


def hoeffding_window(n: float, confidence_exponent: float = 2.0) -> tuple[float, float]:
    """Half-width sqrt(ln n / n) of the typical-output event and its failure bound 2 n^-c."""
    if n < 2 and not math.isclose(n, math.e):
        raise ParameterError("n must be >= 2", "n_ge_2")
    return math.sqrt(math.log(n) / n), 2.0 * n ** (-confidence_exponent)


@dataclass(frozen=True)
class StabilityRow:
    n: int
    shift: float
    rho: float
    alpha: float
    origin_gap: float
    unique: bool
    gap_change: float
    shift_bound: float
    skipped: bool = False


@dataclass(frozen=True)
class StabilityReport:
    family: str
    l: int
    r: int
    noise: float
    rows: tuple[StabilityRow, ...]

    @property
    def passed(self) -> bool:
        return all(row.skipped or row.alpha <= ALPHA_TOL for row in self.rows)

    @property
    def shift_bound_ok(self) -> bool:
        return all(row.skipped or row.gap_change <= row.shift_bound for row in self.rows)

    def to_dict(self) -> dict:
        return {"family": self.family, "l": self.l, "r": self.r, "noise": self.noise,
                "passed": self.passed, "shift_bound_ok": self.shift_bound_ok,
                "rows": [dict(row.__dict__) for row in self.rows]}


def lemma2_rho_stability(family: str, l: int, r: int, noise: float,
                         n_values: Sequence[int], delta_ball: float = DELTA_BALL,
                         grid: int = GRID) -> StabilityReport:
    """Re-maximize at rho = noise +- sqrt(ln n / n) with the channel noise held fixed.

    A row passes when the perturbed exponent is zero (within ALPHA_TOL).
    Shifts that leave (0, 1) are reported as skipped.
    """
    base = _require_unique(family, noise, l, r, delta_ball, grid)
    Lp = math.log((1 - noise) / noise) if family == BSC else 0.0
    rows = []
    for n in n_values:
        w, _ = hoeffding_window(n)
        for sgn in (-1, 1):
            rho = noise + sgn * w
            if not 0.0 < rho < 1.0:
                # not a realizable corrupted fraction
                rows.append(StabilityRow(int(n), sgn * w, rho, 0.0, 0.0, True, 0.0,
                                         2 * w * (math.log(2) + Lp), skipped=True))
                continue
            if family == BEC:
                c = alpha_bec(rho, 0.0, l, r, delta_ball, grid)
            else:
                c = alpha_bsc(rho, noise, 0.0, l, r, delta_ball, grid)
            rows.append(StabilityRow(int(n), sgn * w, rho, c.value, c.origin_gap,
                                     c.unique_at_origin, abs(c.origin_gap - base.origin_gap),
                                     2 * w * (math.log(2) + Lp)))
    return StabilityReport(family, l, r, noise, tuple(rows))
