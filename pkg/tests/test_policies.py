import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grandsim import ConfigSet, GrandAZ, GrandConst, GrandPower, placement_distribution, zero_servers
from grandsim.policies import policy_from_dict, policy_to_dict


@pytest.mark.parametrize(
    "policy,Z,expected",
    [
        (GrandAZ(0.01), 10000, 100),
        (GrandAZ(0.1), 1, 1),
        (GrandPower(0.5), 10000, 100),
        (GrandConst(3), 0, 3),
        (GrandAZ(0.0), 12345, 0),
        (GrandAZ(0.1), 30, 3),  # 0.1 * 30 is 3.0000000000000004 in floating point
        (GrandPower(0.5), 0, 0),
    ],
)
def test_zero_server_counts(policy, Z, expected):
    assert zero_servers(policy, Z) == expected


@settings(max_examples=200)
@given(a=st.sampled_from([0.1, 0.01, 0.001, 0.3, 1e-9]), Z=st.integers(0, 10**9))
def test_grand_az_is_exact_ceiling(a, Z):
    assert zero_servers(GrandAZ(a), Z) == math.ceil(Fraction(repr(a)) * Z)


@pytest.mark.parametrize("bad", [lambda: GrandAZ(-0.1), lambda: GrandConst(-1), lambda: GrandConst(1.5),
                                 lambda: GrandPower(0.0), lambda: GrandPower(1.0)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        bad()


def test_policy_dict_round_trip():
    for p in (GrandAZ(0.01), GrandConst(1), GrandPower(0.5)):
        assert policy_from_dict(policy_to_dict(p)) == p
    with pytest.raises(ValueError):
        policy_from_dict({"best_fit": 1})


def test_single_type_grand_zero_only_fitting_servers():
    cs = ConfigSet([(1,), (2,)])
    d = placement_distribution(GrandConst(0), cs, [3, 0], None, 0)
    assert d.available == 3
    assert d.probabilities == {(1,): 1.0}
    assert not d.fallback


def test_empty_system_with_one_zero_server():
    cs = ConfigSet([(1,), (2,)])
    d = placement_distribution(GrandConst(1), cs, [0, 0], 0, 0)
    assert d.available == 1
    assert d.probabilities == {(0,): 1.0}


def test_grand_zero_empty_system_falls_back_to_fresh_server():
    cs = ConfigSet([(1,), (2,)])
    d = placement_distribution(GrandConst(0), cs, [0, 0], 0, 0)
    assert d.fallback
    assert d.probabilities == {(0,): 1.0}


def test_system_b_mixed_state(system_b):
    X = system_b.to_vector({(1, 0): 5, (0, 1): 5}).astype(int)
    d = placement_distribution(GrandAZ(0.1), system_b, X, 10, 0)
    assert d.zero_servers == 1
    assert d.available == 11
    assert d.probabilities == pytest.approx({(0, 0): 1 / 11, (1, 0): 5 / 11, (0, 1): 5 / 11})


def test_full_servers_get_no_weight(system_b):
    X = system_b.to_vector({(3, 3): 4, (2, 3): 2}).astype(int)
    d = placement_distribution(GrandConst(0), system_b, X, None, 0)
    # (3, 3) + e_1 = (4, 3) is infeasible; only the (2, 3) servers can take a type-1 customer
    assert d.probabilities == {(2, 3): 1.0}


state_st = st.lists(st.integers(0, 6), min_size=35, max_size=35)
policy_st = st.one_of(
    st.builds(GrandAZ, st.sampled_from([0.0, 0.01, 0.1, 0.5])),
    st.builds(GrandConst, st.integers(0, 3)),
    st.builds(GrandPower, st.sampled_from([0.25, 0.5, 0.75])),
)


@settings(max_examples=300, deadline=None)
@given(X=state_st, policy=policy_st, i=st.integers(0, 1))
def test_placement_law_properties(system_b, X, policy, i):
    X = np.array(X)
    Z = int(system_b.type_totals(X).sum())
    d = placement_distribution(policy, system_b, X, Z, i)
    unit = np.eye(2, dtype=int)[i]
    for k, p in d.probabilities.items():
        assert p > 0
        assert tuple(np.add(k, unit)) in system_b
    assert math.isclose(sum(d.probabilities.values()), 1.0, abs_tol=1e-12)
    if d.fallback:
        assert d.available == 0
    else:
        # weight of each source is its count over the available total
        for k, p in d.probabilities.items():
            count = d.zero_servers if sum(k) == 0 else X[system_b.nonzero_index(k)]
            assert p == pytest.approx(count / d.available)
    if isinstance(policy, GrandAZ) and policy.a > 0 and Z > 0:
        assert d.zero_servers >= 1 and not d.fallback
