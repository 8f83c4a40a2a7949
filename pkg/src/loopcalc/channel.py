"""BEC and BSC channel models under all-zero transmission.

Spins use the {-1, +1} alphabet with +1 for the transmitted bit. Channel
outputs are integers: BEC in {-1, 0, 1} (0 is an erasure), BSC in {-1, 1}.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DomainError, ParameterError

BEC = "bec"
BSC = "bsc"
ALPHABETS = {BEC: (-1, 0, 1), BSC: (-1, 1)}
CORRUPTED_SYMBOL = {BEC: 0, BSC: -1}


@dataclass(frozen=True)
class ChannelSpec:
    family: str
    noise: float

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in ALPHABETS:
            raise ParameterError(f"unknown channel family {self.family!r}", "channel_family")
        object.__setattr__(self, "family", fam)
        upper = 1.0 if fam == BEC else 0.5
        if not (0.0 <= self.noise <= upper):
            raise ParameterError(f"{fam} noise {self.noise} outside [0, {upper}]", "noise_range")

    @property
    def alphabet(self) -> tuple[int, ...]:
        return ALPHABETS[self.family]


def transition_prob(spec: ChannelSpec, s: int, sigma: int) -> float:
    """q(s | sigma), extended to sigma = -1 through q(s|sigma) = q(-s|-sigma)."""
    if sigma not in (-1, 1):
        raise DomainError(f"spin {sigma} not in {{-1, 1}}", "spin_alphabet")
    if s not in spec.alphabet:
        raise DomainError(f"symbol {s} not in {spec.family} alphabet", "symbol_alphabet")
    if sigma == -1:
        s = -s
    e = spec.noise
    if spec.family == BEC:
        return {1: 1.0 - e, 0: e, -1: 0.0}[s]
    return 1.0 - e if s == 1 else e


def half_log_likelihood(spec: ChannelSpec, s: int) -> float:
    """(1/2) ln(q(s|+1)/q(s|-1)); +inf when only +1 can produce ``s``."""
    qp = transition_prob(spec, s, 1)
    qm = transition_prob(spec, s, -1)
    if qp == 0.0 and qm == 0.0:
        raise DomainError(f"symbol {s} impossible under both inputs", "likelihood_defined")
    if qm == 0.0:
        return math.inf
    if qp == 0.0:
        return -math.inf
    return 0.5 * math.log(qp / qm)


@dataclass(frozen=True)
class ChannelRealization:
    spec: ChannelSpec
    s: tuple[int, ...]

    def __post_init__(self):
        alpha = self.spec.alphabet
        for x in self.s:
            if x not in alpha:
                raise DomainError(f"symbol {x} not in {self.spec.family} alphabet",
                                  "symbol_alphabet")
            if transition_prob(self.spec, x, 1) == 0.0:
                raise DomainError(f"symbol {x} cannot occur when +1 is sent",
                                  "all_zero_transmission")

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def corrupted_count(self) -> int:
        bad = CORRUPTED_SYMBOL[self.spec.family]
        return sum(1 for x in self.s if x == bad)

    @property
    def rho(self) -> Fraction:
        return Fraction(self.corrupted_count, self.n)

    @cached_property
    def corrupted(self) -> np.ndarray:
        return np.array(self.s) == CORRUPTED_SYMBOL[self.spec.family]

    @cached_property
    def lam(self) -> np.ndarray:
        table = {x: half_log_likelihood(self.spec, x) for x in set(self.s)}
        return np.array([table[x] for x in self.s], dtype=float)

    @cached_property
    def log_q_plus(self) -> np.ndarray:
        """ln q(s_i | +1); always finite for symbols that can occur."""
        return np.array([math.log(transition_prob(self.spec, x, 1)) for x in self.s])

    @cached_property
    def log_q_minus(self) -> np.ndarray:
        """ln q(s_i | -1), with -inf where the flipped input is impossible."""
        out = np.empty(self.n)
        for i, x in enumerate(self.s):
            q = transition_prob(self.spec, x, -1)
            out[i] = math.log(q) if q > 0 else -math.inf
        return out

    def to_json(self) -> str:
        return json.dumps({"family": self.spec.family, "noise": self.spec.noise,
                           "s": list(self.s)})

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        d = json.loads(text)
        return cls(ChannelSpec(d["family"], float(d["noise"])), tuple(int(x) for x in d["s"]))


def realization_from_corruption(spec: ChannelSpec, corrupted) -> ChannelRealization:
    """Build the realization whose corrupted positions are the truthy entries."""
    bad = CORRUPTED_SYMBOL[spec.family]
    return ChannelRealization(spec, tuple(bad if c else 1 for c in corrupted))


def sample_output(spec: ChannelSpec, n: int, seed: int) -> ChannelRealization:
    if n < 1:
        raise ParameterError("n must be >= 1", "n_ge_1")
    rng = np.random.default_rng(seed)
    flips = rng.random(n) < spec.noise
    return realization_from_corruption(spec, flips)
