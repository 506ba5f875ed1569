import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grandsim import (
    ConfigSet,
    a_sweep,
    build_vector_packing,
    distance_to_optimal,
    solve_entropy,
    solve_fixed_point,
    solve_lp,
)
from grandsim.fluid import lyapunov, lyapunov_gradient
from grandsim.optimal import random_interior_point, write_sweep_csv

from oracles import entropy_minimiser, lp_value, single_type_two_slots

RHO = [0.5, 0.5]
MU = [1.0, 1.0]
PAIR = ConfigSet([(1,), (2,)])


def test_lp_system_a(system_a):
    lp = solve_lp(system_a, RHO)
    assert lp.objective == pytest.approx(1 / 6, abs=1e-12)
    assert lp.objective == pytest.approx(lp_value(system_a.nonzero, RHO), abs=1e-12)
    known_optimum = system_a.to_vector({(3, 3): 1 / 6})
    assert distance_to_optimal(known_optimum, system_a, RHO, lp=lp) == pytest.approx(0.0, abs=1e-9)


def test_lp_system_b(system_b):
    lp = solve_lp(system_b, RHO)
    assert lp.objective == pytest.approx(1 / 9, abs=1e-12)
    x = system_b.to_dict(lp.x)
    assert x == pytest.approx({(8, 1): 1 / 18, (1, 8): 1 / 18})
    assert lp.eta == pytest.approx([1 / 9, 1 / 9])


def test_lp_single_type():
    cs = build_vector_packing([1], 3)
    lp = solve_lp(cs, [1.0])
    assert lp.objective == pytest.approx(1 / 3)
    assert cs.to_dict(lp.x) == pytest.approx({(3,): 1 / 3})


def test_lp_duals_satisfy_optimality_conditions(both_systems):
    cs = both_systems
    lp = solve_lp(cs, RHO)
    load = cs.nonzero @ lp.eta
    assert np.all(lp.eta >= 0)
    assert np.all(load <= 1 + 1e-12)
    assert np.all(np.abs(load[lp.x > 0] - 1) < 1e-12)
    assert float(np.dot(RHO, lp.eta)) == pytest.approx(lp.objective, abs=1e-12)


def test_lp_rejects_bad_rho(system_a):
    with pytest.raises(ValueError):
        solve_lp(system_a, [0.5])
    with pytest.raises(ValueError):
        solve_lp(system_a, [0.5, 0.0])


def test_single_type_quadratic_oracle():
    a = 0.01
    x1, x2 = single_type_two_slots(a)
    p = solve_entropy(PAIR, [1.0], a, mu=[1.0])
    assert p.x == pytest.approx([x1, x2], rel=1e-10)
    assert p.x == pytest.approx([0.0951249, 0.4524376], abs=1e-7)
    assert p.objective == pytest.approx(x1 + x2, rel=1e-10)
    # the quoted rounded total 0.5475626 is off in the last digit; x1 + x2 = 0.54756246...
    assert p.objective == pytest.approx(0.5475626, abs=2e-7)
    fp = solve_fixed_point(PAIR, [1.0], [1.0], a)
    u = (-1 + math.sqrt(1 + 4 / a)) / 2
    assert fp.hat_lambda == pytest.approx([u], rel=1e-12)
    assert u == pytest.approx(9.5124922, abs=1e-7)


@pytest.mark.parametrize("a", [1e-2, 1e-4, 1e-6])
def test_entropy_matches_generic_minimiser(both_systems, a):
    p = solve_entropy(both_systems, RHO, a)
    ref = entropy_minimiser(both_systems.nonzero, np.array(RHO), a)
    L = lambda x: lyapunov(x, both_systems, a)
    # the reference is a general-purpose optimiser: ours must be at least as good
    assert L(p.x) <= L(ref) + 1e-12
    assert p.x == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("a", [1e-2, 1e-4])
def test_entropy_and_fixed_point_agree(both_systems, a):
    e = solve_entropy(both_systems, RHO, a, mu=MU)
    f = solve_fixed_point(both_systems, RHO, MU, a)
    assert np.max(np.abs(e.x - f.x)) < 1e-8
    for p in (e, f):
        assert p.hat_lambda == pytest.approx(np.asarray(MU) * a ** (-p.nu), rel=1e-10)
    assert e.info["nu_from_units"] == pytest.approx(e.nu, rel=1e-10)


@pytest.mark.parametrize("a", [0.5, 1e-2, 1e-9, 1e-50, 1e-300])
def test_entropy_point_invariants(both_systems, a):
    p = solve_entropy(both_systems, RHO, a)
    assert p.feasibility_residual(RHO) < 1e-9
    assert np.all(p.x > 0)
    # product form x_k = a^(1 - k.nu) / c_k, compared in log space
    log_pf = (1 - both_systems.nonzero @ p.nu) * math.log(a) - both_systems.log_factorial_weights
    assert np.log(p.x) == pytest.approx(log_pf, rel=1e-8, abs=1e-8)


def test_pairwise_product_identity_at_equilibrium(system_b):
    a = 1e-3
    x = solve_entropy(system_b, RHO, a).x
    xbar = np.concatenate([[a], x])
    cs = system_b
    for i in range(2):
        sel = np.flatnonzero(cs.edge_type == i)
        top, bottom = cs.edge_top[sel], cs.edge_bottom[sel]
        k_i = cs.nonzero[top, i]
        lhs = np.outer(k_i * x[top], xbar[bottom])
        assert lhs == pytest.approx(lhs.T, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), a=st.sampled_from([0.3, 1e-2, 1e-5]))
def test_entropy_point_beats_random_feasible_points(system_a, seed, a):
    x_star = solve_entropy(system_a, RHO, a).x
    y = random_interior_point(system_a, RHO, np.random.default_rng(seed))
    assert system_a.type_totals(y) == pytest.approx(RHO, abs=1e-12)
    assert lyapunov(y, system_a, a) >= lyapunov(x_star, system_a, a) - 1e-12


def test_gradient_matches_finite_differences(system_b):
    a = 1e-3
    x = random_interior_point(system_b, RHO, np.random.default_rng(3))
    g = lyapunov_gradient(x, system_b, a)
    checked = 0
    for k in np.flatnonzero(x > 1e-3):
        checked += 1
        h = 1e-4 * x[k]
        up, down = x.copy(), x.copy()
        up[k] += h
        down[k] -= h
        fd = (lyapunov(up, system_b, a) - lyapunov(down, system_b, a)) / (2 * h)
        assert fd == pytest.approx(g[k], rel=1e-6, abs=1e-9)
    assert checked >= 5


def test_distance_single_type_example():
    cs = build_vector_packing([1], 2)
    assert distance_to_optimal([1.0, 0.0], cs, [1.0]) == pytest.approx(math.sqrt(1.25), abs=1e-9)
    assert distance_to_optimal([0.0, 0.5], cs, [1.0]) == pytest.approx(0.0, abs=1e-12)


def test_distance_is_projection_onto_optimal_face(system_a):
    lp = solve_lp(system_a, RHO)
    x = solve_entropy(system_a, RHO, 1e-2).x
    d = distance_to_optimal(x, system_a, RHO, lp=lp)
    known_optimum = system_a.to_vector({(3, 3): 1 / 6})
    assert np.linalg.norm(x - known_optimum) >= d - 1e-12
    # any mixture of the tight configurations meeting the loads is in X*
    mix = system_a.to_vector({(0, 5): 1 / 36, (3, 3): 1 / 9, (6, 1): 1 / 36})
    assert system_a.type_totals(mix) == pytest.approx(RHO)
    assert mix.sum() == pytest.approx(1 / 6)
    assert np.linalg.norm(x - mix) >= d - 1e-12


def test_sweep_system_a(system_a, tmp_path):
    rows = a_sweep(system_a, RHO, MU, [1e-8, 1e-2, 1e-6, 1e-4])
    assert [r.a for r in rows] == [1e-2, 1e-4, 1e-6, 1e-8]
    obj = [r.point.objective for r in rows]
    dist = [r.distance for r in rows]
    assert all(u > v for u, v in zip(obj, obj[1:]))
    assert all(u > v for u, v in zip(dist, dist[1:]))
    assert abs(obj[-1] - 1 / 6) < 1e-2
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, system_a, path, comment="test")
    lines = path.read_text().splitlines()
    assert lines[1].startswith("a,objective,distance,nu_1,nu_2,x_0-1")
    assert len(lines) == 2 + 4


def test_sweep_system_b_distance_decreasing(system_b):
    rows = a_sweep(system_b, RHO, MU, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9])
    dist = [r.distance for r in rows]
    assert all(u > v for u, v in zip(dist, dist[1:]))


def test_sweep_single_entry_delegates():
    (row,) = a_sweep(PAIR, [1.0], [1.0], [0.5])
    assert row.point.x == pytest.approx(solve_entropy(PAIR, [1.0], 0.5).x, rel=1e-14)


def test_sweep_rejects_empty_list(system_a):
    with pytest.raises(ValueError):
        a_sweep(system_a, RHO, MU, [])


def test_load_bound_on_multipliers_tightens(both_systems):
    tail = [1e-9, 1e-20, 1e-50, 1e-100, 1e-300]
    peaks = [float(np.max(both_systems.nonzero @ solve_entropy(both_systems, RHO, a).nu)) for a in tail]
    assert all(u > v for u, v in zip(peaks, peaks[1:]))
    assert peaks[-1] <= 1.02


@pytest.mark.parametrize("a", [0.0, 1.0, -0.5, 2.0])
def test_entropy_rejects_bad_a(system_a, a):
    with pytest.raises(ValueError):
        solve_entropy(system_a, RHO, a)
