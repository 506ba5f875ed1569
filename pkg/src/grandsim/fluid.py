"""Fluid-limit dynamics of GRAND(aZ) and its entropy-like Lyapunov function.

Along an edge ``(k, i)`` fluid arrives at rate
``v = lambda_i * x_{k-e_i} / x_(i)`` and departs at rate ``w = k_i mu_i x_k``,
where ``x_0 = a * z`` is the zero-server mass and ``x_(i)`` the total mass
able to take one more type-``i`` customer.  ``dx_k/dt`` is the net flow over
the edges touching ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .packing import ConfigSet
from .policies import GrandAZ
from .trajectory import Trajectory

__all__ = [
    "FluidSystem",
    "FluidState",
    "FluidIntegrationError",
    "drift",
    "edge_rates",
    "integrate",
    "lyapunov",
    "lyapunov_gradient",
    "lyapunov_derivative",
    "lyapunov_derivative_pairwise",
    "pairwise_terms",
]


class FluidIntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FluidSystem:
    """Config set, normalized rates and the zero-server parameter ``a > 0``."""

    config_set: ConfigSet
    lam: np.ndarray
    mu: np.ndarray
    a: float

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        n = self.config_set.n_types
        if lam.shape != (n,) or mu.shape != (n,):
            raise ValueError(f"lambda and mu must have length {n}")
        if np.any(lam <= 0) or np.any(mu <= 0):
            raise ValueError("rates must be positive")
        if not self.a > 0:
            raise ValueError("the fluid model needs GRAND(aZ) with a > 0")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

    @property
    def rho(self) -> np.ndarray:
        return self.lam / self.mu

    @classmethod
    def from_spec(cls, spec) -> "FluidSystem":
        """Build from a :class:`~grandsim.simulator.SystemSpec` using GRAND(aZ)."""
        if not isinstance(spec.policy, GrandAZ) or spec.policy.a <= 0:
            raise ValueError("fluid dynamics are defined for GRAND(aZ) with a > 0 only")
        return cls(spec.config_set, spec.lam, spec.mu, spec.policy.a)


def _as_system(system) -> FluidSystem:
    return system if isinstance(system, FluidSystem) else FluidSystem.from_spec(system)


@dataclass
class FluidState:
    """A fluid vector with its derived totals (recomputed on access)."""

    x: np.ndarray
    system: FluidSystem

    @property
    def y(self) -> np.ndarray:
        return self.system.config_set.type_totals(self.x)

    @property
    def z(self) -> float:
        return float(self.y.sum())

    @property
    def x0(self) -> float:
        return self.system.a * self.z

    @property
    def available(self) -> np.ndarray:
        cs = self.system.config_set
        xbar = np.concatenate([[self.x0], self.x])
        return np.array([xbar[f].sum() for f in cs.fits])


def edge_rates(x, system) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrival rates ``v``, departure rates ``w`` per edge and ``x_(i)``."""
    system = _as_system(system)
    cs = system.config_set
    x = np.asarray(x, dtype=float)
    z = float(x @ cs.nonzero.sum(axis=1))
    xbar = np.concatenate([[system.a * z], x])
    avail = np.array([xbar[f].sum() for f in cs.fits])
    typ = cs.edge_type
    k_i = cs.nonzero[cs.edge_top, typ]
    w = k_i * system.mu[typ] * x[cs.edge_top]
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(
            avail[typ] > 0,
            system.lam[typ] * xbar[cs.edge_bottom] / avail[typ],
            # nowhere to go: the whole type-i flow opens new e_i servers
            np.where(cs.edge_bottom == 0, system.lam[typ], 0.0),
        )
    return v, w, avail


def _drift(x: np.ndarray, system: FluidSystem) -> np.ndarray:
    cs = system.config_set
    v, w, _ = edge_rates(x, system)
    flow = v - w
    n = cs.n_configs
    dx = np.bincount(cs.edge_top, weights=flow, minlength=n)
    below = cs.edge_bottom > 0
    dx -= np.bincount(cs.edge_bottom[below] - 1, weights=flow[below], minlength=n)
    return dx


def drift(x, system) -> np.ndarray:
    """``dx/dt`` at ``x`` (a vector over K)."""
    system = _as_system(system)
    x = np.asarray(x, dtype=float)
    if x.shape != (system.config_set.n_configs,):
        raise ValueError("x must be a vector over the non-zero configurations")
    if np.any(x < 0):
        raise ValueError("fluid masses must be non-negative")
    return _drift(x, system)


def _rk4(x: np.ndarray, h: float, system: FluidSystem) -> np.ndarray:
    k1 = _drift(x, system)
    k2 = _drift(x + 0.5 * h * k1, system)
    k3 = _drift(x + 0.5 * h * k2, system)
    k4 = _drift(x + h * k3, system)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rate_bound(x: np.ndarray, system: FluidSystem, max_service: float) -> float:
    """Upper bound on the relative rates in the vector field at ``x``."""
    _, _, avail = edge_rates(x, system)
    with np.errstate(divide="ignore"):
        return float(np.max(system.lam / avail)) + max_service


def _advance(x, h, system, max_service, negative_tol, depth, max_depth, stiffness):
    if depth < max_depth and h * _rate_bound(x, system, max_service) > stiffness:
        x = _advance(x, h / 2, system, max_service, negative_tol, depth + 1, max_depth, stiffness)
        return _advance(x, h / 2, system, max_service, negative_tol, depth + 1, max_depth, stiffness)
    out = _rk4(x, h, system)
    low = out.min()
    if low < -negative_tol or not np.isfinite(low):
        if depth < max_depth:
            x = _advance(x, h / 2, system, max_service, negative_tol, depth + 1, max_depth, stiffness)
            return _advance(x, h / 2, system, max_service, negative_tol, depth + 1, max_depth, stiffness)
        j = int(np.argmin(out))
        raise FluidIntegrationError(
            f"x_{system.config_set.labels()[j]} = {low:.3e} after a step of {h:.3g}; step too large"
        )
    if low < 0:
        out[out < 0] = 0.0
    return out


def integrate(
    x0,
    system,
    horizon: float,
    dt: float = 1e-3,
    sample_dt: Optional[float] = None,
    negative_tol: float = 1e-12,
    max_halvings: int = 60,
    stiffness: float = 0.5,
) -> Trajectory:
    """Classical RK4 solution of the fluid ODE on a fixed grid of step ``dt``.

    A grid step is split in halves (recursively, at most ``max_halvings``
    times) while ``h * (max_i lambda_i / x_(i) + max_k sum_i k_i mu_i)``
    exceeds ``stiffness`` or the step drives a component below
    ``-negative_tol``.  This only triggers in the short transient after
    starting with ``x_(i)`` close to ``a``; ``max_halvings=0`` gives plain
    fixed-step RK4.  Small negatives within tolerance are set to zero; larger
    ones abort with :class:`FluidIntegrationError`.

    ``sample_dt`` (default ``10 * dt``) must be a multiple of ``dt``.
    """
    system = _as_system(system)
    cs = system.config_set
    if isinstance(x0, dict):
        x = cs.to_vector(x0)
    else:
        x = np.array(x0, dtype=float)
    if x.shape != (cs.n_configs,) or np.any(x < 0):
        raise ValueError("initial state must be a non-negative vector over K")
    if horizon < 0 or not dt > 0:
        raise ValueError("need horizon >= 0 and dt > 0")
    if sample_dt is None:
        sample_dt = 10 * dt
    every = max(1, int(round(sample_dt / dt)))
    if not math.isclose(every * dt, sample_dt, rel_tol=1e-9):
        raise ValueError("sample_dt must be a multiple of dt")
    n_steps = int(math.floor(horizon / dt + 1e-9))
    max_service = float(np.max(cs.nonzero @ system.mu))

    samples = [x.copy()]
    times = [0.0]
    for n in range(1, n_steps + 1):
        x = _advance(x, dt, system, max_service, negative_tol, 0, max_halvings, stiffness)
        if n % every == 0:
            samples.append(x.copy())
            times.append(n * dt)

    xs = np.array(samples)
    Y = cs.type_totals(xs)
    return Trajectory(
        config_set=cs,
        times=np.array(times),
        x=xs,
        occupied=xs.sum(axis=1),
        Z=Y.sum(axis=1),
        Y=Y,
        kind="fluid",
        r=None,
        meta={
            "system": {
                "lambda": system.lam.tolist(),
                "mu": system.mu.tolist(),
                "a": system.a,
                "maximal": [list(k) for k in cs.maximal()],
            },
            "horizon": horizon,
            "dt": dt,
            "sample_dt": sample_dt,
        },
    )


def _check_lyapunov_a(a: float) -> float:
    a = float(a)
    if not 0 < a < 1:
        raise ValueError(f"the Lyapunov function needs 0 < a < 1, got {a}")
    return a


def lyapunov(x, config_set: ConfigSet, a: float) -> float:
    """``(1/b) * sum_k x_k log(x_k c_k / (e a))`` with ``b = -log a``; ``0 log 0 = 0``."""
    a = _check_lyapunov_a(a)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("fluid masses must be non-negative")
    b = -math.log(a)
    pos = x > 0
    terms = x[pos] * (np.log(x[pos]) + config_set.log_factorial_weights[pos] - 1.0 - math.log(a))
    return float(terms.sum() / b)


def lyapunov_gradient(x, config_set: ConfigSet, a: float) -> np.ndarray:
    a = _check_lyapunov_a(a)
    x = np.asarray(x, dtype=float)
    b = -math.log(a)
    with np.errstate(divide="ignore"):
        return (np.log(x) + config_set.log_factorial_weights - math.log(a)) / b


def lyapunov_derivative(x, system) -> float:
    """Time derivative of the Lyapunov function along the fluid dynamics.

    Sum over edges of ``(v - w) * (f(k) - f(k - e_i))`` where ``f`` is the
    gradient and the zero configuration contributes nothing.  Returns
    ``-inf`` when some ``x_k`` is zero.
    """
    system = _as_system(system)
    cs = system.config_set
    x = np.asarray(x, dtype=float)
    if np.any(x <= 1e-300):
        return -math.inf
    f = lyapunov_gradient(x, cs, system.a)
    fbar = np.concatenate([[0.0], f])
    v, w, _ = edge_rates(x, system)
    return float(np.sum((v - w) * (f[cs.edge_top] - fbar[cs.edge_bottom])))


def pairwise_terms(x, system) -> list[np.ndarray]:
    """Per type ``i``, the matrix of coupled contributions over edge pairs.

    Entry ``[e, e']`` is the contribution of departures along ``e`` that
    re-enter along ``e'``; both edges carry type ``i``.  Only meaningful for
    ``x`` on the load polytope, where ``x_0 = a``.
    """
    system = _as_system(system)
    cs = system.config_set
    x = np.asarray(x, dtype=float)
    b = -math.log(system.a)
    z = float(x @ cs.nonzero.sum(axis=1))
    xbar = np.concatenate([[system.a * z], x])
    out = []
    for i in range(cs.n_types):
        sel = np.flatnonzero(cs.edge_type == i)
        top = cs.edge_top[sel]
        bottom = cs.edge_bottom[sel]
        k_i = cs.nonzero[top, i].astype(float)
        x_top = x[top]
        x_bot = xbar[bottom]
        avail = xbar[cs.fits[i]].sum()
        # rows: departing edge (k, i); columns: receiving edge (k', i)
        gain = np.log(np.outer(x_bot, k_i * x_top))
        loss = np.log(np.outer(k_i * x_top, x_bot))
        rate = system.mu[i] * np.outer(k_i * x_top, x_bot) / avail
        out.append((gain - loss) * rate / b)
    return out


def lyapunov_derivative_pairwise(x, system) -> float:
    """Same derivative assembled from coupled edge pairs (valid on the polytope)."""
    if np.any(np.asarray(x) <= 1e-300):
        return -math.inf
    return float(sum(m.sum() for m in pairwise_terms(x, system)))
