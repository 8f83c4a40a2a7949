import itertools
import math

import numpy as np
import pytest

from loopcalc.channel import ChannelSpec, sample_output, transition_prob
from loopcalc.tanner import TannerGraph

ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, label: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {label} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def naive_log_z(g: TannerGraph, s, eta: float) -> float:
    """ln Z summed over all 2^n spin configurations with the 0/1 parity factor."""
    n = g.n
    spins = np.array(list(itertools.product((1, -1), repeat=n)))
    logw = np.zeros(len(spins))
    for i in range(n):
        qp = transition_prob(s.spec, s.s[i], 1)
        qm = transition_prob(s.spec, s.s[i], -1)
        q = np.where(spins[:, i] == 1, qp, qm)
        with np.errstate(divide="ignore"):
            logw += np.log(q) + eta * (spins[:, i] - 1)
    for vars_ in g.chk_adj:
        ok = np.prod(spins[:, list(vars_)], axis=1) == 1
        logw = np.where(ok, logw, -np.inf)
    finite = logw[np.isfinite(logw)]
    top = finite.max()
    return float(top + math.log(np.exp(finite - top).sum()))


def brute_codewords(g: TannerGraph) -> set[int]:
    rows = g.parity_rows()
    return {w for w in range(2**g.n) if all(bin(w & r).count("1") % 2 == 0 for r in rows)}


def tree_graph() -> TannerGraph:
    # two checks joined through variable 2; cycle-free, irregular
    return TannerGraph.from_edges(5, 2, [(0, 0), (1, 0), (2, 0), (2, 1), (3, 1), (4, 1)])


def cycle_graph() -> TannerGraph:
    # variables 0..2 and checks 0..2 on a hexagon
    return TannerGraph.from_edges(3, 3, [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (0, 2)])


def empty_graph(n: int = 4) -> TannerGraph:
    return TannerGraph.from_edges(n, 0, [])


@pytest.fixture
def bsc():
    return ChannelSpec("bsc", 0.1)


@pytest.fixture
def bec():
    return ChannelSpec("bec", 0.3)


def realization(family: str, noise: float, n: int, seed: int):
    return sample_output(ChannelSpec(family, noise), n, seed)
