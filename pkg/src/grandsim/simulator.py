"""Event-driven simulation of the server-count Markov chain under GRAND.

The state is the vector ``X`` of server counts per non-zero configuration.
Events are drawn from competing exponential clocks aggregated per class:
type-``i`` arrivals fire at rate ``r * lambda_i`` and type-``i`` departures at
rate ``mu_i * Y_i``.  A departing type-``i`` customer sits in a configuration
``k`` with probability ``k_i X_k / Y_i``; an arriving one is placed according
to :func:`grandsim.policies.placement_distribution`, drawn as one categorical
sample instead of the retry loop a real implementation would use.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .packing import ConfigSet
from .policies import Policy, policy_to_dict
from .trajectory import Trajectory

__all__ = [
    "SystemSpec",
    "SimState",
    "EventRNG",
    "initial_state",
    "step",
    "check_state",
    "run",
    "replicate",
]


@dataclass(frozen=True)
class SystemSpec:
    """System parameters at scale ``r``.

    ``lam`` holds the normalized arrival rates; the actual type-``i`` arrival
    rate is ``lam[i] * r``.
    """

    config_set: ConfigSet
    lam: np.ndarray
    mu: np.ndarray
    r: float
    policy: Policy

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        n = self.config_set.n_types
        if lam.shape != (n,):
            raise ValueError(f"lambda must have length {n}")
        if mu.shape != (n,):
            raise ValueError(f"mu must have length {n}")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("arrival rates must be finite and non-negative")
        if np.any(mu <= 0) or not np.all(np.isfinite(mu)):
            raise ValueError("service rates must be positive")
        if not self.r > 0:
            raise ValueError("scale r must be positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def rho(self) -> np.ndarray:
        return self.lam / self.mu

    @property
    def is_normalized(self) -> bool:
        return math.isclose(float(self.rho.sum()), 1.0, rel_tol=1e-12)

    def normalized(self) -> "SystemSpec":
        """Equivalent spec with ``sum(rho) == 1`` and ``r`` rescaled."""
        total = float(self.rho.sum())
        if total <= 0:
            raise ValueError("cannot normalize a system with zero load")
        return SystemSpec(
            self.config_set, self.lam / total, self.mu, self.r * total, self.policy
        )

    def describe(self) -> dict:
        return {
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "r": self.r,
            "policy": policy_to_dict(self.policy),
            "maximal": [list(k) for k in self.config_set.maximal()],
        }


@dataclass
class SimState:
    """Mutable simulation state.

    ``X`` is a list over the non-zero configurations (canonical order).
    ``arrivals[e]`` and ``departures[e]`` count events along edge ``e`` of the
    configuration set since time 0; ``X0`` keeps the initial counts so the
    telescoping identity can be checked.
    """

    X: list
    Y: list
    Z: int
    t: float
    arrivals: list
    departures: list
    X0: tuple
    n_events: int = 0

    @property
    def occupied(self) -> int:
        return sum(self.X)

    def copy(self) -> "SimState":
        return SimState(
            list(self.X),
            list(self.Y),
            self.Z,
            self.t,
            list(self.arrivals),
            list(self.departures),
            self.X0,
            self.n_events,
        )


class EventRNG:
    """Buffered uniform stream on top of :class:`numpy.random.Generator`.

    ``EventRNG(seed)`` is reproducible; :meth:`spawn` derives independent
    child streams through :class:`numpy.random.SeedSequence`.
    """

    def __init__(self, seed=None, block: int = 8192):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))
        self._block = block
        self._buf: list = []
        self._pos = 0

    def spawn(self, n: int) -> list["EventRNG"]:
        return [EventRNG(s, self._block) for s in self._seq.spawn(n)]

    def uniform(self) -> float:
        """A draw from [0, 1)."""
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class _Plan:
    """Per-spec lookup tables in plain Python lists (hot loop friendly)."""

    def __init__(self, spec: SystemSpec):
        cs = spec.config_set
        self.n_types = cs.n_types
        self.arrival_rates = [float(v) * spec.r for v in spec.lam]
        self.mu = [float(v) for v in spec.mu]
        self.total_arrival = sum(self.arrival_rates)
        self.zero_servers = spec.policy.zero_servers

        edge_of = {}
        for e, (top, i) in enumerate(zip(cs.edge_top, cs.edge_type)):
            edge_of[(int(top), int(i))] = e

        # arrivals[i]: list of (source X index or -1 for a zero server,
        #                        edge index, target X index)
        self.arrivals = []
        self.fallback = []
        for i in range(cs.n_types):
            rows = []
            for src in cs.fits[i]:
                k = cs.configs[src].copy()
                k[i] += 1
                dst = cs.index(k) - 1
                rows.append((int(src) - 1, edge_of[(dst, i)], dst))
            self.arrivals.append(rows)
            unit = [0] * cs.n_types
            unit[i] = 1
            dst = cs.nonzero_index(unit)
            self.fallback.append((-1, edge_of[(dst, i)], dst))

        # departures[i]: list of (X index, k_i, edge index, bottom X index or -1)
        self.departures = [[] for _ in range(cs.n_types)]
        for e, (top, i, bottom) in enumerate(zip(cs.edge_top, cs.edge_type, cs.edge_bottom)):
            k_i = int(cs.nonzero[top][i])
            self.departures[int(i)].append((int(top), k_i, e, int(bottom) - 1))


def _plan(spec: SystemSpec) -> _Plan:
    plan = spec.__dict__.get("_plan")
    if plan is None:
        plan = _Plan(spec)
        object.__setattr__(spec, "_plan", plan)
    return plan


def initial_state(spec: SystemSpec, init: Mapping | Sequence | None = None) -> SimState:
    """State at time 0 from ``{configuration: server count}`` or a vector over K."""
    cs = spec.config_set
    if init is None:
        X = np.zeros(cs.n_configs, dtype=np.int64)
    elif isinstance(init, Mapping):
        X = cs.to_vector(init)
    else:
        X = np.asarray(init)
        if X.shape != (cs.n_configs,):
            raise ValueError("initial vector must have one entry per non-zero configuration")
    if np.any(X < 0) or np.any(X != np.round(X)):
        raise ValueError("initial server counts must be non-negative integers")
    X = [int(v) for v in X]
    Y = [int(v) for v in np.asarray(X, dtype=np.int64) @ cs.nonzero]
    n_edges = cs.n_edges
    return SimState(X, Y, sum(Y), 0.0, [0] * n_edges, [0] * n_edges, tuple(X))


def _pick(weights, target):
    """Index of the categorical bin containing ``target``; skips empty bins."""
    acc = 0
    last = None
    for n, w in enumerate(weights):
        if w:
            acc += w
            last = n
            if target < acc:
                return n
    return last


def _draw(state: SimState, plan: _Plan, rng: EventRNG):
    """Next event on the current state: ``(time, kind, type, row)`` or None.

    ``kind`` is 0 for an arrival and 1 for a departure.
    """
    Y = state.Y
    mu = plan.mu
    dep_rates = [mu[i] * Y[i] for i in range(plan.n_types)]
    total = plan.total_arrival + sum(dep_rates)
    if total <= 0:
        return None
    t_next = state.t - math.log(1.0 - rng.uniform()) / total
    pick = rng.uniform() * total
    u = rng.uniform()
    X = state.X

    if pick < plan.total_arrival:
        i = _pick(plan.arrival_rates, pick)
        rows = plan.arrivals[i]
        x0 = plan.zero_servers(state.Z)
        weights = [x0 if src < 0 else X[src] for src, _, _ in rows]
        available = sum(weights)
        if available == 0:
            return t_next, 0, i, plan.fallback[i]
        return t_next, 0, i, rows[_pick(weights, u * available)]

    # pick >= total_arrival implies some departure rate is positive
    i = _pick(dep_rates, pick - plan.total_arrival)
    rows = plan.departures[i]
    weights = [X[row[0]] * row[1] for row in rows]
    return t_next, 1, i, rows[_pick(weights, u * Y[i])]


def _apply(state: SimState, event) -> None:
    t_next, kind, i, row = event
    X = state.X
    if kind == 0:
        src, e, dst = row
        if src >= 0:
            X[src] -= 1
        X[dst] += 1
        state.Y[i] += 1
        state.Z += 1
        state.arrivals[e] += 1
    else:
        top, _, e, bottom = row
        X[top] -= 1
        if bottom >= 0:
            X[bottom] += 1
        state.Y[i] -= 1
        state.Z -= 1
        state.departures[e] += 1
    state.t = t_next
    state.n_events += 1


def check_state(state: SimState, config_set: ConfigSet) -> list[str]:
    """Violated state invariants, as messages (empty when consistent).

    Checks the per-type totals, non-negativity, occupied servers against
    customers and that the edge counters telescope to the current ``X``.
    """
    problems = []
    X = np.asarray(state.X, dtype=np.int64)
    if np.any(X < 0):
        problems.append("negative server count")
    Y = X @ config_set.nonzero
    if list(Y) != list(state.Y):
        problems.append(f"Y {list(state.Y)} != sum_k k X_k {Y.tolist()}")
    if sum(state.Y) != state.Z:
        problems.append(f"Z {state.Z} != sum Y {sum(state.Y)}")
    if X.sum() > state.Z:
        problems.append("more occupied servers than customers")
    net = np.asarray(state.arrivals, dtype=np.int64) - np.asarray(state.departures, dtype=np.int64)
    n = config_set.n_configs
    flow = np.bincount(config_set.edge_top, weights=net, minlength=n)
    below = config_set.edge_bottom > 0
    flow -= np.bincount(config_set.edge_bottom[below] - 1, weights=net[below], minlength=n)
    if not np.array_equal(np.asarray(state.X0, dtype=np.int64) + flow.astype(np.int64), X):
        problems.append("edge counters do not telescope to X")
    return problems


def step(state: SimState, spec: SystemSpec, rng: EventRNG) -> SimState:
    """Advance ``state`` in place to its next event and return it.

    If no event can ever happen (no arrivals and an empty system) the clock is
    set to infinity.
    """
    event = _draw(state, _plan(spec), rng)
    if event is None:
        state.t = math.inf
    else:
        _apply(state, event)
    return state


def _sample_times(horizon: float, sample_dt: float) -> np.ndarray:
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if not sample_dt > 0:
        raise ValueError("sample_dt must be positive")
    n = int(math.floor(horizon / sample_dt + 1e-9))
    return np.arange(n + 1) * sample_dt


def run(
    spec: SystemSpec,
    init=None,
    horizon: float = 15.0,
    sample_dt: float = 0.01,
    seed: Optional[int] = None,
    rng: Optional[EventRNG] = None,
) -> Trajectory:
    """Simulate up to ``horizon`` and sample the state every ``sample_dt``.

    The sampled value at time ``s`` is the state in force at ``s`` (paths are
    right-continuous).  Two calls with the same seed return identical
    trajectories.
    """
    if rng is None:
        rng = EventRNG(seed)
    plan = _plan(spec)
    state = init if isinstance(init, SimState) else initial_state(spec, init)
    state = state.copy()
    times = _sample_times(horizon, sample_dt)
    n_samples = len(times)
    n_types = plan.n_types

    counts = np.empty((n_samples, spec.config_set.n_configs), dtype=np.int64)
    Ys = np.empty((n_samples, n_types), dtype=np.int64)
    Zs = np.empty(n_samples, dtype=np.int64)

    n = 0
    while n < n_samples:
        event = _draw(state, plan, rng)
        t_event = math.inf if event is None else event[0]
        while n < n_samples and times[n] < t_event:
            counts[n] = state.X
            Ys[n] = state.Y
            Zs[n] = state.Z
            n += 1
        if event is None or n >= n_samples:
            break
        _apply(state, event)

    return Trajectory(
        config_set=spec.config_set,
        times=times,
        x=counts / spec.r,
        occupied=counts.sum(axis=1),
        Z=Zs,
        Y=Ys,
        kind="simulation",
        r=spec.r,
        counts=counts,
        seed=seed,
        meta={"system": spec.describe(), "horizon": horizon, "sample_dt": sample_dt},
    )


def _run_star(args):
    return run(*args)


def replicate(
    spec: SystemSpec,
    init,
    horizon: float,
    sample_dt: float,
    seeds: Sequence[int],
    n_jobs: int = 1,
) -> list[Trajectory]:
    """Independent runs, one per seed, returned in the order of ``seeds``."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    jobs = [(spec, init, horizon, sample_dt, s) for s in seeds]
    if n_jobs == 1 or len(seeds) == 1:
        return [_run_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_star, jobs))
