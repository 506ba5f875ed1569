"""Fluid-scale operating points.

* :func:`solve_lp` -- minimum number of occupied servers over the polytope
  ``{x >= 0 : sum_k k_i x_k = rho_i}``, with a dual vector ``eta``.
* :func:`solve_entropy` -- the unique minimizer ``x^{*,a}`` of the
  entropy-like objective, obtained by Newton's method on the multipliers
  ``nu`` of its product form ``x_k = a^(1 - k.nu) / c_k``.
* :func:`solve_fixed_point` -- the same point reached from the loss-system
  side: input rates ``lam_hat`` such that the loss-queue product form with
  ``x_0 = a`` satisfies ``lam_hat_i * x_(i) = lambda_i``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .linprog import SolverError, project_onto_polytope, simplex
from .packing import ConfigSet

__all__ = [
    "OperatingPoint",
    "SweepRow",
    "SolverError",
    "solve_lp",
    "solve_entropy",
    "solve_fixed_point",
    "distance_to_optimal",
    "a_sweep",
    "write_sweep_csv",
    "random_interior_point",
]


@dataclass
class OperatingPoint:
    """A point ``x`` over K together with its multipliers.

    ``nu`` and ``hat_lambda`` are set for entropy / fixed-point solutions,
    ``eta`` for the LP.  ``a`` is ``None`` for the LP.
    """

    config_set: ConfigSet
    x: np.ndarray
    kind: str
    a: Optional[float] = None
    nu: Optional[np.ndarray] = None
    eta: Optional[np.ndarray] = None
    hat_lambda: Optional[np.ndarray] = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        """Total fluid mass of occupied servers, ``sum_k x_k``."""
        return float(self.x.sum())

    def feasibility_residual(self, rho) -> float:
        return float(np.max(np.abs(self.config_set.type_totals(self.x) - np.asarray(rho))))

    def as_dict(self) -> dict:
        return self.config_set.to_dict(self.x, skip_zero=False)


def _check_rho(config_set: ConfigSet, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (config_set.n_types,):
        raise ValueError(f"rho must have length {config_set.n_types}")
    if np.any(rho <= 0):
        raise ValueError("offered loads must be positive")
    return rho


def _check_a(a: float) -> float:
    a = float(a)
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    return a


def solve_lp(config_set: ConfigSet, rho) -> OperatingPoint:
    """One optimal vertex of ``min sum_k x_k`` s.t. ``sum_k k_i x_k = rho_i``.

    The returned ``eta`` solves the dual of the relaxed (``>=``) problem, so
    ``eta >= 0``, ``k . eta <= 1`` for every ``k`` and ``k . eta == 1``
    wherever ``x_k > 0``.
    """
    rho = _check_rho(config_set, rho)
    K = config_set.nonzero.astype(float)
    n = len(K)
    primal = simplex(np.ones(n), K.T, rho)
    # relaxed LP with surplus columns gives sign-constrained duals
    relaxed = simplex(
        np.concatenate([np.ones(n), np.zeros(len(rho))]),
        np.hstack([K.T, -np.eye(len(rho))]),
        rho,
    )
    eta = np.maximum(relaxed.duals, 0.0)
    if abs(primal.value - relaxed.value) > 1e-9 * max(1.0, primal.value):
        raise SolverError(
            "equality and relaxed LPs disagree",
            {"primal": primal.value, "relaxed": relaxed.value},
        )
    return OperatingPoint(
        config_set,
        primal.x,
        "lp",
        eta=eta,
        iterations=primal.iterations,
        info={"value": primal.value, "basis": primal.basis},
    )


def _newton_product_form(
    K: np.ndarray,
    log_weight: np.ndarray,
    rho: np.ndarray,
    tol: float = 1e-14,
    max_iter: int = 500,
):
    """Find ``theta`` with ``K.T @ exp(log_weight + K @ theta) == rho``.

    Newton's method started from the uniform ``theta`` that makes the largest
    ``x_k`` equal to one (starting at zero stalls when the weights are tiny);
    a step is halved until the residual norm decreases.  Returns
    ``(theta, x, iterations)``.
    """
    sizes = K.sum(axis=1)
    theta = np.full(K.shape[1], float(np.min(-log_weight / sizes)))
    scale = max(1.0, float(np.max(rho)))

    def evaluate(th):
        with np.errstate(over="ignore", invalid="ignore"):
            x = np.exp(log_weight + K @ th)
            res = K.T @ x - rho
        return x, res

    x, res = evaluate(theta)
    norm = float(np.max(np.abs(res)))
    for it in range(max_iter):
        if norm <= tol * scale:
            return theta, x, it
        J = (K.T * x) @ K
        try:
            delta = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular Newton system", {"theta": theta.tolist()}) from exc
        t = 1.0
        for _ in range(80):
            x_new, res_new = evaluate(theta + t * delta)
            new_norm = float(np.max(np.abs(res_new)))
            if np.isfinite(new_norm) and new_norm < norm:
                break
            t *= 0.5
        else:
            # no decrease even for a tiny step: accept if already at round-off
            if norm <= 1e-11 * scale:
                return theta, x, it
            raise SolverError(
                "Newton step failed to reduce the residual",
                {"theta": theta.tolist(), "residual": norm},
            )
        theta = theta + t * delta
        x, res, norm = x_new, res_new, new_norm
    raise SolverError("Newton iteration limit", {"theta": theta.tolist(), "residual": norm})


def solve_entropy(config_set: ConfigSet, rho, a: float, mu=None) -> OperatingPoint:
    """Minimizer ``x^{*,a}`` of the entropy-like objective over the polytope.

    Parameters
    ----------
    config_set : ConfigSet
    rho : array_like
        Offered loads per type.
    a : float
        Zero-server parameter in (0, 1).
    mu : array_like, optional
        Service rates; only used to report ``hat_lambda = mu * a**-nu``.
    """
    rho = _check_rho(config_set, rho)
    a = _check_a(a)
    b = -math.log(a)
    K = config_set.nonzero.astype(float)
    log_weight = math.log(a) - config_set.log_factorial_weights
    theta, x, iters = _newton_product_form(K, log_weight, rho)
    nu = theta / b

    units = [config_set.nonzero_index(np.eye(config_set.n_types, dtype=int)[i]) for i in range(config_set.n_types)]
    nu_check = 1.0 - np.log(x[units]) / math.log(a)
    hat_lambda = None if mu is None else np.asarray(mu, float) * np.exp(b * nu)
    return OperatingPoint(
        config_set,
        x,
        "entropy",
        a=a,
        nu=nu,
        hat_lambda=hat_lambda,
        iterations=iters,
        info={"nu_from_units": nu_check},
    )


def solve_fixed_point(
    config_set: ConfigSet,
    rho,
    mu,
    a: float,
    tol: float = 1e-14,
    max_iter: int = 500,
) -> OperatingPoint:
    """Equilibrium as the stationary measure of a single-server loss queue.

    A server receives type-``i`` customers at rate ``lam_hat_i`` while it has
    room and serves each independently at rate ``mu_i``; its stationary
    measure with ``x_0 = a`` is ``x_k = a / c_k * prod_i (lam_hat_i/mu_i)^k_i``.
    The rates must reproduce the fluid arrival split, ``lam_hat_i =
    lambda_i / x_(i)``.  Solved by Newton's method on ``u = log lam_hat``
    for ``u + log x_(i)(u) - log lambda_i = 0``; if a Newton step cannot
    reduce the residual, a halving-damped plain fixed-point step is used.
    """
    rho = _check_rho(config_set, rho)
    a = _check_a(a)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != rho.shape or np.any(mu <= 0):
        raise ValueError("mu must be positive with one entry per type")
    lam = rho * mu
    n_types = config_set.n_types
    configs = config_set.configs.astype(float)
    log_c = np.concatenate([[0.0], config_set.log_factorial_weights])
    fits = config_set.fits
    log_mu = np.log(mu)

    def evaluate(u):
        with np.errstate(over="ignore", invalid="ignore"):
            xbar = a * np.exp(configs @ (u - log_mu) - log_c)
            avail = np.array([xbar[f].sum() for f in fits])
            G = u + np.log(avail) - np.log(lam)
        return xbar, avail, G

    u = log_mu.copy()
    xbar, avail, G = evaluate(u)
    norm = float(np.max(np.abs(G)))
    iters = 0
    fallback_steps = 0
    while norm > tol:
        if iters >= max_iter:
            raise SolverError("fixed point iteration limit", {"log_hat_lambda": u.tolist(), "residual": norm})
        iters += 1
        D = np.array([(configs[f].T @ xbar[f]) / avail[i] for i, f in enumerate(fits)])
        J = np.eye(n_types) + D
        try:
            delta = np.linalg.solve(J, -G)
        except np.linalg.LinAlgError:
            delta = -G
        accepted = False
        for direction in (delta, -G):
            t = 1.0
            for _ in range(60):
                cand = evaluate(u + t * direction)
                cand_norm = float(np.max(np.abs(cand[2])))
                if np.isfinite(cand_norm) and cand_norm < norm:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                fallback_steps += direction is not delta
                break
        if not accepted:
            if norm <= 1e-11:
                break
            raise SolverError("fixed point iteration diverged", {"log_hat_lambda": u.tolist(), "residual": norm})
        u = u + t * direction
        xbar, avail, G = cand
        norm = cand_norm

    hat_lambda = np.exp(u)
    nu = (u - log_mu) / -math.log(a)
    return OperatingPoint(
        config_set,
        xbar[1:],
        "fixed_point",
        a=a,
        nu=nu,
        hat_lambda=hat_lambda,
        iterations=iters,
        info={"availability": avail, "fallback_steps": fallback_steps},
    )


def distance_to_optimal(x, config_set: ConfigSet, rho, lp: OperatingPoint | None = None) -> float:
    """Euclidean distance from ``x`` to the set of LP optimizers."""
    rho = _check_rho(config_set, rho)
    if lp is None:
        lp = solve_lp(config_set, rho)
    K = config_set.nonzero.astype(float)
    A = np.vstack([K.T, np.ones(len(K))])
    b = np.concatenate([rho, [lp.objective]])
    x = np.asarray(x, dtype=float)
    u = project_onto_polytope(x, A, b, lp.x)
    return float(np.linalg.norm(x - u))


@dataclass
class SweepRow:
    a: float
    point: Optional[OperatingPoint]
    distance: float = math.nan
    error: Optional[str] = None

    @property
    def objective(self) -> float:
        return math.nan if self.point is None else self.point.objective


def a_sweep(config_set: ConfigSet, rho, mu, a_list: Sequence[float]) -> list[SweepRow]:
    """Entropy optimum and its distance to the LP optimum for each ``a``.

    Rows are sorted by ``a`` descending.  A failure for one ``a`` is recorded
    in that row and the sweep continues.
    """
    a_list = sorted((float(a) for a in a_list), reverse=True)
    if not a_list:
        raise ValueError("a_list is empty")
    lp = solve_lp(config_set, rho)
    rows = []
    for a in a_list:
        try:
            point = solve_entropy(config_set, rho, a, mu=mu)
            dist = distance_to_optimal(point.x, config_set, rho, lp=lp)
            rows.append(SweepRow(a, point, dist))
        except (SolverError, ValueError) as exc:
            rows.append(SweepRow(a, None, error=str(exc)))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], config_set: ConfigSet, path, comment: str | None = None) -> None:
    """Columns ``a,objective,distance,nu_1..nu_I,x_<k>...``."""
    n_types = config_set.n_types
    with Path(path).open("w", newline="") as fh:
        if comment:
            fh.write("# " + comment + "\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["a", "objective", "distance"]
            + [f"nu_{i + 1}" for i in range(n_types)]
            + [f"x_{lab}" for lab in config_set.labels()]
        )
        for row in rows:
            if row.point is None:
                values = [math.nan] * (2 + n_types + config_set.n_configs)
            else:
                values = [row.point.objective, row.distance, *row.point.nu, *row.point.x]
            writer.writerow([repr(row.a)] + [repr(float(v)) for v in values])


def random_interior_point(config_set: ConfigSet, rho, rng: np.random.Generator, spread: float = 2.0) -> np.ndarray:
    """A strictly positive feasible point with random log-weights.

    Points have the form ``exp(w_k + k . theta)`` with ``w_k`` drawn
    ``N(0, spread^2)`` and ``theta`` fitted to the load constraints, so they
    are generically not of the equilibrium product form.
    """
    rho = _check_rho(config_set, rho)
    K = config_set.nonzero.astype(float)
    w = rng.normal(0.0, spread, size=len(K))
    _, x, _ = _newton_product_form(K, w, rho)
    return x
