import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grandsim import GrandAZ, GrandConst, GrandPower, SystemSpec, replicate, run, solve_entropy
from grandsim.analysis import compare_sim_fluid, conjecture_experiment, steady_state, type_moments
from grandsim.fluid import FluidSystem, integrate
from grandsim.trajectory import Trajectory

LAM = [0.5, 0.5]
MU = [1.0, 1.0]


def constant_trajectory(cs, n=200, value=3.0, dt=0.1):
    times = np.arange(n) * dt
    x = np.full((n, cs.n_configs), value)
    Y = x @ cs.nonzero
    return Trajectory(cs, times, x, x.sum(axis=1), Y.sum(axis=1), Y, kind="fluid")


def test_constant_trajectory_has_zero_error(system_a):
    tr = constant_trajectory(system_a)
    est = steady_state(tr, burn_in=5.0)
    assert est.occupied == pytest.approx(3.0 * system_a.n_configs)
    assert est.occupied_se == 0.0 and np.all(est.Y_se == 0) and np.all(est.x_se == 0)
    assert est.n_batches == 10


def test_default_burn_in_is_two_thirds(system_a):
    tr = constant_trajectory(system_a, n=301, dt=0.05)
    assert steady_state(tr).burn_in == pytest.approx(10.0)


def test_too_few_samples(system_a):
    tr = constant_trajectory(system_a, n=30)
    with pytest.raises(ValueError, match="samples"):
        steady_state(tr, burn_in=2.5)
    with pytest.raises(ValueError, match="below the horizon"):
        steady_state(tr, burn_in=100.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000))
def test_mean_is_invariant_to_reordering(system_a, seed):
    rng = np.random.default_rng(seed)
    n = 100
    x = rng.random((n, system_a.n_configs))
    Y = x @ system_a.nonzero
    times = np.arange(n) * 0.1
    tr = Trajectory(system_a, times, x, x.sum(axis=1), Y.sum(axis=1), Y, kind="fluid")
    perm = rng.permutation(n)
    shuffled = Trajectory(system_a, times, x[perm], x.sum(axis=1)[perm], Y.sum(axis=1)[perm], Y[perm], kind="fluid")
    a, b = steady_state(tr, 0.0), steady_state(shuffled, 0.0)
    assert a.occupied == pytest.approx(b.occupied, rel=1e-12)
    assert a.x == pytest.approx(b.x, rel=1e-12)


def test_simulated_occupancy_matches_equilibrium(system_a):
    """Scale 10000, a = 0.01: time average over [10, 15] against r * sum x^{*,a}."""
    spec = SystemSpec(system_a, LAM, MU, 10000, GrandAZ(0.01))
    tr = run(spec, {(1, 1): 5000}, horizon=15, seed=2024)
    est = steady_state(tr, 10.0)
    target = 10000 * solve_entropy(system_a, LAM, 0.01).objective
    # the remaining approach to equilibrium is a small bias; allow 3 SE plus 1%
    assert abs(est.occupied - target) <= 3 * est.occupied_se + 0.01 * target
    # Z is an M/M/infinity count with Poisson(r) law; its time average over a
    # window of length T has variance about 2 r / T when mu = 1
    assert abs(est.Z - 10000) <= 3 * np.sqrt(2 * 10000 / 5.0)


def test_compare_identical_and_symmetric(system_b):
    fl = integrate({(3, 3): 1 / 6}, FluidSystem(system_b, LAM, MU, 1e-3), 2.0, dt=1e-3)
    assert compare_sim_fluid(fl, fl).sup == 0.0
    sim = run(SystemSpec(system_b, LAM, MU, 1000, GrandConst(1)), {(3, 3): 166}, 2.0, 0.01, seed=1)
    ab, ba = compare_sim_fluid(sim, fl), compare_sim_fluid(fl, sim)
    assert ab.sup == ba.sup and np.array_equal(ab.gap, ba.gap)
    assert ab.sup > 0


def test_compare_interpolates_between_grids(system_b):
    cs = system_b
    a = constant_trajectory(cs, n=11, value=1.0, dt=1.0)
    b = constant_trajectory(cs, n=21, value=1.0, dt=0.5)
    gap = compare_sim_fluid(a, b)
    assert len(gap.times) == 21 and gap.sup == 0.0


def test_compare_disjoint_ranges(system_b):
    a = constant_trajectory(system_b, n=10)
    b = constant_trajectory(system_b, n=10)
    b.times = b.times + 100
    with pytest.raises(ValueError, match="disjoint"):
        compare_sim_fluid(a, b)


def test_gap_shrinks_with_scale(system_b):
    """Law of large numbers: matched a = c / r, gap at r = 10000 below r = 1000 for most seeds."""
    wins = 0
    seeds = [1, 2, 3]
    for seed in seeds:
        gaps = {}
        for r in (1000, 10000):
            fl = integrate({(3, 3): 1 / 6}, FluidSystem(system_b, LAM, MU, 1 / r), 5.0, dt=1e-3)
            sim = run(SystemSpec(system_b, LAM, MU, r, GrandConst(1)), {(3, 3): r // 6}, 5.0, 0.01, seed=seed)
            gaps[r] = compare_sim_fluid(sim, fl).sup
        wins += gaps[10000] < gaps[1000]
    assert wins >= 2


def test_type_moments_small(system_a):
    spec = SystemSpec(system_a, LAM, MU, 200, GrandAZ(0.1))
    trajs = replicate(spec, {(1, 1): 100}, 6.0, 0.05, [1, 2, 3, 4, 5, 6])
    m = type_moments(trajs, 2.0)
    assert m.per_replication_mean.shape == (6, 2)
    assert np.all(np.abs(m.mean - 100) < 5 * m.mean_se + 5)
    with pytest.raises(ValueError):
        type_moments(trajs[:1], 2.0)


def test_conjecture_single_row(system_a):
    rows = conjecture_experiment(system_a, LAM, MU, GrandConst(0), [100], [1], {(1, 1): 0.5}, horizon=3.0)
    assert len(rows) == 1 and rows[0].r == 100
    assert rows[0].mean_distance >= 0 and np.isnan(rows[0].distance_se)


def test_conjecture_reports_both_policies(system_a):
    out = {}
    for policy in (GrandConst(0), GrandPower(0.5)):
        rows = conjecture_experiment(system_a, LAM, MU, policy, [200, 800], [1, 2], {(1, 1): 0.5}, horizon=4.0)
        out[policy.name] = [r.mean_distance for r in rows]
    assert set(out) == {"GRAND(0)", "GRAND(Z^0.5)"}
    assert all(len(v) == 2 and all(d >= 0 for d in v) for v in out.values())


def test_conjecture_rejects_other_policies(system_a):
    with pytest.raises(ValueError):
        conjecture_experiment(system_a, LAM, MU, GrandAZ(0.1), [100], [1], {(1, 1): 0.5})
    with pytest.raises(ValueError):
        conjecture_experiment(system_a, LAM, MU, GrandConst(2), [100], [1], {(1, 1): 0.5})
