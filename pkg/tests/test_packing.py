import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grandsim import ConfigSet, build_from_maximal, build_vector_packing, edges
from grandsim.packing import config_label, parse_config_label

from oracles import downward_closure, edge_set, lattice_points


def test_system_a_matches_brute_force_lattice(system_a):
    expected = lattice_points([2, 3], 15)
    assert set(system_a) == expected
    # brute force gives 27 points including zero (the build contract quoted 28)
    assert len(system_a) == 27
    assert system_a.n_configs == 26


def test_system_b_matches_closure(system_b):
    expected = downward_closure([(8, 1), (3, 3), (1, 8)])
    assert set(system_b) == expected
    assert len(system_b) == 36


def test_edge_counts_match_brute_force(system_a, system_b):
    assert set(edges(system_a)) == edge_set(set(system_a))
    assert set(edges(system_b)) == edge_set(set(system_b))
    assert system_a.n_edges == 40
    assert system_b.n_edges == 54


@pytest.mark.parametrize(
    "sizes,capacity,expected",
    [([1], 1, [(0,), (1,)]), ([5], 15, [(0,), (1,), (2,), (3,)])],
)
def test_single_type_bins(sizes, capacity, expected):
    assert list(build_vector_packing(sizes, capacity)) == expected


def test_oversized_type_rejected():
    with pytest.raises(ValueError, match="never fits"):
        build_vector_packing([2, 16], 15)


def test_non_monotone_set_rejected():
    with pytest.raises(ValueError, match="not monotone"):
        ConfigSet([(1, 0), (0, 1), (2, 1)])


def test_missing_unit_vector_rejected():
    with pytest.raises(ValueError, match="cannot be served"):
        ConfigSet([(1, 0), (2, 0)])


def test_dominated_maximal_entry_warns():
    with pytest.warns(UserWarning, match="dominated"):
        cs = build_from_maximal([(2, 1), (1, 1)])
    assert set(cs) == downward_closure([(2, 1)])


def test_zero_is_first_and_order_is_lexicographic(system_b):
    rows = [tuple(k) for k in system_b.configs]
    assert rows[0] == (0, 0)
    assert rows == sorted(rows)


def test_factorial_weights(system_b):
    k = system_b.nonzero_index((3, 3))
    assert system_b.factorial_weights[k] == 36.0
    assert system_b.factorial_weights[system_b.nonzero_index((1, 0))] == 1.0


def test_fits_lists_configurations_with_room(system_a):
    for i in range(2):
        unit = np.eye(2, dtype=int)[i]
        got = {tuple(system_a.configs[n]) for n in system_a.fits[i]}
        want = {k for k in system_a if tuple(np.add(k, unit)) in system_a}
        assert got == want


def test_labels_round_trip(system_b):
    for lab in system_b.labels():
        assert config_label(parse_config_label(lab)) == lab
    v = system_b.to_vector({"3-3": 2.0, (1, 0): 1.0})
    assert v[system_b.nonzero_index((3, 3))] == 2.0
    with pytest.raises(ValueError):
        system_b.to_vector({(4, 4): 1})
    with pytest.raises(ValueError):
        system_b.to_vector({(0, 0): 1})


def test_arrays_are_read_only(system_a):
    with pytest.raises(ValueError):
        system_a.configs[0, 0] = 5


sizes_st = st.lists(st.integers(1, 6), min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(sizes=sizes_st, extra=st.integers(0, 10))
def test_vector_packing_round_trips_through_maximal(sizes, extra):
    capacity = max(sizes) + extra
    cs = build_vector_packing(sizes, capacity)
    assert set(cs) == lattice_points(sizes, capacity)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        again = build_from_maximal(cs.maximal())
    assert again == cs


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=4))
def test_closure_is_monotone_and_edges_consistent(maximal):
    maximal = [m for m in maximal if sum(m) > 0] + [(1, 1)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cs = build_from_maximal(maximal)
    members = set(cs)
    for k in members:
        for i in range(2):
            if k[i] > 0:
                assert k[:i] + (k[i] - 1,) + k[i + 1 :] in members
    assert set(edges(cs)) == edge_set(members)
    # edge count is sum over configurations of the number of non-zero entries
    assert cs.n_edges == sum(sum(1 for v in k if v > 0) for k in members)
    assert math.isclose(len(cs), len(members))
