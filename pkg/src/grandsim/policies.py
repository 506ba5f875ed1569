"""GRAND placement policies.

Every GRAND variant is defined by its zero-server count ``X_0 = f(X)``.  An
arriving type-``i`` customer joins, uniformly at random, one of the zero
servers or one of the occupied servers that can still fit it.  If no such
server exists it opens a fresh empty server.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .packing import ConfigSet

__all__ = [
    "GrandAZ",
    "GrandConst",
    "GrandPower",
    "Policy",
    "PlacementDistribution",
    "zero_servers",
    "placement_distribution",
    "policy_from_dict",
    "policy_to_dict",
]


@dataclass(frozen=True)
class GrandAZ:
    """GRAND(aZ): ``X_0 = ceil(a * Z)``.  ``a = 0`` is GRAND(0)."""

    a: float
    _num: int = field(init=False, repr=False, compare=False)
    _den: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ValueError(f"GRAND(aZ) needs a >= 0, got {self.a}")
        # exact decimal value of `a`, so that ceil(0.07 * 100) == 7
        frac = Fraction(repr(float(self.a)))
        object.__setattr__(self, "_num", frac.numerator)
        object.__setattr__(self, "_den", frac.denominator)

    def zero_servers(self, Z: int) -> int:
        return -((-self._num * Z) // self._den)

    @property
    def name(self) -> str:
        return "GRAND(0)" if self.a == 0 else f"GRAND({self.a:g}Z)"


@dataclass(frozen=True)
class GrandConst:
    """GRAND(c): a fixed number ``c`` of zero servers."""

    c: int

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 0:
            raise ValueError(f"GRAND(c) needs a non-negative integer c, got {self.c}")
        object.__setattr__(self, "c", int(self.c))

    def zero_servers(self, Z: int) -> int:
        return self.c

    @property
    def name(self) -> str:
        return f"GRAND({self.c})"


@dataclass(frozen=True)
class GrandPower:
    """GRAND(Z^p): ``X_0 = ceil(Z ** p)`` with ``0 < p < 1``."""

    p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError(f"GRAND(Z^p) needs 0 < p < 1, got {self.p}")

    def zero_servers(self, Z: int) -> int:
        if Z <= 0:
            return 0
        v = Z**self.p
        n = round(v)
        # guard against 10000 ** 0.5 landing a hair above 100
        if abs(v - n) <= 1e-9 * max(1.0, v):
            return int(n)
        return math.ceil(v)

    @property
    def name(self) -> str:
        return f"GRAND(Z^{self.p:g})"


Policy = Union[GrandAZ, GrandConst, GrandPower]


def zero_servers(policy: Policy, Z: int) -> int:
    """Number of designated zero servers when ``Z`` customers are present."""
    return policy.zero_servers(int(Z))


@dataclass
class PlacementDistribution:
    """Where the next type-``i`` arrival goes.

    ``probabilities`` maps the configuration a customer joins (the zero
    configuration stands for a zero server) to its probability.  When
    ``fallback`` is set no server is available and the customer opens a new
    empty server.
    """

    type_index: int
    available: int
    zero_servers: int
    probabilities: dict
    fallback: bool = False


def placement_distribution(
    policy: Policy,
    config_set: ConfigSet,
    X: Sequence[int],
    Z: int | None,
    i: int,
) -> PlacementDistribution:
    """Placement law for a type-``i`` arrival in state ``X`` (a vector over K)."""
    if not 0 <= i < config_set.n_types:
        raise ValueError(f"type index {i} out of range")
    X = np.asarray(X)
    if X.shape != (config_set.n_configs,):
        raise ValueError("X must be a vector over the non-zero configurations")
    if Z is None:
        Z = int(config_set.type_totals(X).sum())
    x0 = zero_servers(policy, Z)
    counts = np.concatenate([[x0], X])
    fits = config_set.fits[i]
    weights = counts[fits]
    total = int(weights.sum())
    if total == 0:
        zero = tuple([0] * config_set.n_types)
        return PlacementDistribution(i, 0, x0, {zero: 1.0}, fallback=True)
    probs = {
        tuple(int(v) for v in config_set.configs[n]): w / total
        for n, w in zip(fits, weights)
        if w > 0
    }
    return PlacementDistribution(i, total, x0, probs)


def policy_from_dict(spec: dict) -> Policy:
    """Parse ``{"grand_az": a}``, ``{"grand_const": c}`` or ``{"grand_power": p}``."""
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError("policy must be an object with exactly one key")
    ((kind, value),) = spec.items()
    if kind == "grand_az":
        return GrandAZ(float(value))
    if kind == "grand_const":
        return GrandConst(value)
    if kind == "grand_power":
        return GrandPower(float(value))
    raise ValueError(f"unknown policy kind {kind!r}")


def policy_to_dict(policy: Policy) -> dict:
    if isinstance(policy, GrandAZ):
        return {"grand_az": policy.a}
    if isinstance(policy, GrandConst):
        return {"grand_const": policy.c}
    return {"grand_power": policy.p}
