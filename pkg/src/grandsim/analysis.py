"""Steady-state estimates and comparisons built on sampled trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .optimal import OperatingPoint, distance_to_optimal, solve_lp
from .packing import ConfigSet
from .policies import GrandConst, GrandPower
from .simulator import SystemSpec, replicate
from .trajectory import Trajectory

__all__ = [
    "SteadyStateEstimate",
    "steady_state",
    "SimFluidGap",
    "compare_sim_fluid",
    "TypeMoments",
    "type_moments",
    "ConjectureRow",
    "conjecture_experiment",
    "scaled_init",
]


@dataclass
class SteadyStateEstimate:
    """Time averages over ``[burn_in, horizon]`` with batch-means standard errors.

    Values are on the scale of the trajectory: raw counts for a simulation,
    fluid masses for a fluid path.  ``x`` is always fluid-scaled.
    """

    burn_in: float
    horizon: float
    n_samples: int
    n_batches: int
    occupied: float
    occupied_se: float
    Z: float
    Z_se: float
    Y: np.ndarray
    Y_se: np.ndarray
    x: np.ndarray
    x_se: np.ndarray

    def as_dict(self, config_set: ConfigSet | None = None) -> dict:
        out = {
            "burn_in": self.burn_in,
            "horizon": self.horizon,
            "n_samples": self.n_samples,
            "n_batches": self.n_batches,
            "occupied": self.occupied,
            "occupied_se": self.occupied_se,
            "Z": self.Z,
            "Z_se": self.Z_se,
            "Y": self.Y.tolist(),
            "Y_se": self.Y_se.tolist(),
        }
        if config_set is not None:
            out["x"] = dict(zip(config_set.labels(), self.x.tolist()))
            out["x_se"] = dict(zip(config_set.labels(), self.x_se.tolist()))
        else:
            out["x"] = self.x.tolist()
            out["x_se"] = self.x_se.tolist()
        return out


def _batch_means(values: np.ndarray, n_batches: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and batch-means standard error along axis 0."""
    mean = values.mean(axis=0)
    batches = np.array_split(values, n_batches, axis=0)
    bm = np.array([b.mean(axis=0) for b in batches])
    se = bm.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return mean, se


def steady_state(
    traj: Trajectory,
    burn_in: Optional[float] = None,
    n_batches: int = 10,
) -> SteadyStateEstimate:
    """Estimate stationary means from the samples at or after ``burn_in``.

    The default burn-in is two thirds of the trajectory's time span.  Samples
    lie on a uniform grid, so the time average is the sample mean.  At least
    two samples per batch are required.
    """
    if n_batches < 2:
        raise ValueError("need at least two batches")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    t0, t1 = float(traj.times[0]), float(traj.times[-1])
    if burn_in is None:
        burn_in = t0 + 2.0 * (t1 - t0) / 3.0
    if burn_in >= t1:
        raise ValueError(f"burn_in {burn_in} must be below the horizon {t1}")
    w = traj.window(burn_in)
    if len(w) < 2 * n_batches:
        raise ValueError(
            f"only {len(w)} samples after burn-in; need at least {2 * n_batches} for {n_batches} batches"
        )
    occ, occ_se = _batch_means(np.asarray(w.occupied, dtype=float), n_batches)
    Z, Z_se = _batch_means(np.asarray(w.Z, dtype=float), n_batches)
    Y, Y_se = _batch_means(np.asarray(w.Y, dtype=float), n_batches)
    x, x_se = _batch_means(np.asarray(w.x, dtype=float), n_batches)
    return SteadyStateEstimate(
        burn_in=float(burn_in),
        horizon=t1,
        n_samples=len(w),
        n_batches=n_batches,
        occupied=float(occ),
        occupied_se=float(occ_se),
        Z=float(Z),
        Z_se=float(Z_se),
        Y=Y,
        Y_se=Y_se,
        x=x,
        x_se=x_se,
    )


@dataclass
class SimFluidGap:
    times: np.ndarray
    gap: np.ndarray
    first: np.ndarray
    second: np.ndarray

    @property
    def sup(self) -> float:
        return float(self.gap.max()) if self.gap.size else 0.0

    @property
    def argsup(self) -> float:
        return float(self.times[int(np.argmax(self.gap))])

    def to_dict(self) -> dict:
        return {
            "sup_gap": self.sup,
            "t_at_sup": self.argsup,
            "times": self.times.tolist(),
            "gap": self.gap.tolist(),
        }


def compare_sim_fluid(
    first: Trajectory,
    second: Trajectory,
    t_max: Optional[float] = None,
) -> SimFluidGap:
    """Gap between the occupied fractions of two trajectories.

    Either argument may be a simulation (divided by its ``r``) or a fluid
    path.  Both are linearly interpolated onto the union of their sample
    times inside the common range, optionally cut at ``t_max``.
    """
    lo = max(first.times[0], second.times[0])
    hi = min(first.times[-1], second.times[-1])
    if t_max is not None:
        hi = min(hi, t_max)
    if hi < lo:
        raise ValueError("trajectories have disjoint time ranges")
    grid = np.union1d(first.times, second.times)
    grid = grid[(grid >= lo) & (grid <= hi)]
    f = np.interp(grid, first.times, first.occupied_fraction)
    s = np.interp(grid, second.times, second.occupied_fraction)
    return SimFluidGap(times=grid, gap=np.abs(f - s), first=f, second=s)


@dataclass
class TypeMoments:
    """Across-replication estimates of the stationary mean and variance of ``Y_i``."""

    mean: np.ndarray
    mean_se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    per_replication_mean: np.ndarray
    per_replication_variance: np.ndarray


def type_moments(trajectories: Sequence[Trajectory], burn_in: float) -> TypeMoments:
    """Mean and variance of per-type totals from independent replications.

    Each replication contributes its time-averaged ``Y_i`` and its
    time-averaged squared deviation from the pooled mean.  Centring on the
    pooled mean rather than each run's own mean keeps the autocorrelation
    bias of the variance estimate small.  Errors are the spread across runs.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least two replications")
    windows = [np.asarray(t.window(burn_in).Y, dtype=float) for t in trajectories]
    if any(len(w) == 0 for w in windows):
        raise ValueError("a replication has no samples after burn-in")
    means = np.array([w.mean(axis=0) for w in windows])
    pooled = means.mean(axis=0)
    variances = np.array([((w - pooled) ** 2).mean(axis=0) for w in windows])
    n = len(windows)
    return TypeMoments(
        mean=pooled,
        mean_se=means.std(axis=0, ddof=1) / np.sqrt(n),
        variance=variances.mean(axis=0),
        variance_se=variances.std(axis=0, ddof=1) / np.sqrt(n),
        per_replication_mean=means,
        per_replication_variance=variances,
    )


def scaled_init(config_set: ConfigSet, init: dict, r: float) -> dict:
    """Turn a fluid-scaled initial state into server counts ``floor(r * x_k)``."""
    out = {}
    for key, value in init.items():
        out[key] = int(np.floor(r * float(value) + 1e-9))
    config_set.to_vector(out)
    return out


@dataclass
class ConjectureRow:
    r: float
    mean_distance: float
    distance_se: float
    distances: list = field(default_factory=list)
    occupied_fraction: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "mean_distance": self.mean_distance,
            "distance_se": self.distance_se,
            "distances": list(self.distances),
            "occupied_fraction": self.occupied_fraction,
        }


def conjecture_experiment(
    config_set: ConfigSet,
    lam,
    mu,
    policy,
    r_list: Sequence[float],
    seeds: Sequence[int],
    init: dict,
    horizon: float = 15.0,
    burn_in: Optional[float] = None,
    sample_dt: float = 0.01,
    lp: OperatingPoint | None = None,
    n_jobs: int = 1,
) -> list[ConjectureRow]:
    """Distance of the time-averaged fluid-scaled state to the LP optimum set.

    Only reports numbers: whether the distance shrinks with ``r`` is for the
    reader to judge.  ``init`` is fluid-scaled and converted with
    :func:`scaled_init` for every ``r``.
    """
    if isinstance(policy, GrandConst):
        if policy.c != 0:
            raise ValueError("the experiment is meant for GRAND(0) or GRAND(Z^p)")
    elif not isinstance(policy, GrandPower):
        raise ValueError("the experiment is meant for GRAND(0) or GRAND(Z^p)")
    if burn_in is None:
        burn_in = 2.0 * horizon / 3.0
    rho = np.asarray(lam, dtype=float) / np.asarray(mu, dtype=float)
    if lp is None:
        lp = solve_lp(config_set, rho)
    rows = []
    for r in r_list:
        spec = SystemSpec(config_set, lam, mu, r, policy)
        trajs = replicate(spec, scaled_init(config_set, init, r), horizon, sample_dt, seeds, n_jobs=n_jobs)
        dists, occ = [], []
        for tr in trajs:
            est = steady_state(tr, burn_in)
            dists.append(distance_to_optimal(est.x, config_set, rho, lp=lp))
            occ.append(est.occupied / r)
        d = np.array(dists)
        se = float(d.std(ddof=1) / np.sqrt(len(d))) if len(d) > 1 else float("nan")
        rows.append(
            ConjectureRow(
                r=float(r),
                mean_distance=float(d.mean()),
                distance_se=se,
                distances=d.tolist(),
                occupied_fraction=float(np.mean(occ)),
            )
        )
    return rows
