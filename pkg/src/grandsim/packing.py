"""Server configurations and monotone feasible sets.

A configuration is a vector ``k`` of non-negative integers, ``k[i]`` being the
number of type-``i`` customers held by one server.  A :class:`ConfigSet` is a
finite, downward-closed collection of configurations that always contains the
empty configuration and every unit vector.

Configurations are stored in lexicographic order of their counts, so the zero
configuration always has index 0.  Every vector "over K" used elsewhere in the
package (fluid states, simulator counts, CSV columns) follows the order of
``ConfigSet.nonzero``, i.e. the canonical order with the zero configuration
dropped.
"""

from __future__ import annotations

import itertools
import math
import warnings
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ConfigSet",
    "build_vector_packing",
    "build_from_maximal",
    "edges",
    "config_label",
    "parse_config_label",
]


def config_label(k: Sequence[int]) -> str:
    """Render a configuration as ``"k1-k2-..."`` (used for CSV column names)."""
    return "-".join(str(int(v)) for v in k)


def parse_config_label(label: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in label.split("-"))
    except ValueError as exc:
        raise ValueError(f"bad configuration label {label!r}") from exc


class ConfigSet:
    """Immutable monotone set of server configurations plus its edge structure.

    Parameters
    ----------
    members : iterable of int sequences
        The configurations.  Must be downward closed and contain every unit
        vector; the zero configuration is added if missing.

    Attributes
    ----------
    configs : ndarray, shape (n_all, n_types)
        All configurations (including zero), lexicographically sorted.
    nonzero : ndarray, shape (n_configs, n_types)
        ``configs[1:]``; the canonical order of every vector over K.
    factorial_weights : ndarray, shape (n_configs,)
        ``c_k = prod_i k_i!`` for the non-zero configurations.
    edge_top, edge_type, edge_bottom : ndarray, shape (n_edges,)
        Edge ``(k, i)`` joins ``k`` (index into ``nonzero``) to ``k - e_i``
        (index into ``configs``, 0 meaning the empty server).
    """

    def __init__(self, members: Iterable[Sequence[int]]):
        members = {tuple(int(v) for v in k) for k in members}
        if not members:
            raise ValueError("configuration set is empty")
        lengths = {len(k) for k in members}
        if len(lengths) != 1:
            raise ValueError("configurations have inconsistent lengths")
        (n_types,) = lengths
        if n_types == 0:
            raise ValueError("need at least one customer type")
        if any(v < 0 for k in members for v in k):
            raise ValueError("configuration counts must be non-negative")
        zero = (0,) * n_types
        members.add(zero)

        for k in members:
            for i in range(n_types):
                if k[i] > 0:
                    below = k[:i] + (k[i] - 1,) + k[i + 1 :]
                    if below not in members:
                        raise ValueError(
                            f"set is not monotone: {k} present but {below} missing"
                        )
        for i in range(n_types):
            unit = tuple(int(j == i) for j in range(n_types))
            if unit not in members:
                raise ValueError(f"type {i + 1} cannot be served: e_{i + 1} not in set")

        ordered = sorted(members)
        self.n_types = n_types
        self.configs = np.array(ordered, dtype=np.int64)
        self.configs.setflags(write=False)
        self.nonzero = self.configs[1:]
        self._index = {k: n for n, k in enumerate(ordered)}

        fact = [math.prod(math.factorial(v) for v in k) for k in ordered[1:]]
        self.factorial_weights = np.array(fact, dtype=float)
        self.log_factorial_weights = np.log(self.factorial_weights)

        top, typ, bottom = [], [], []
        for n, k in enumerate(ordered[1:]):
            for i in range(n_types):
                if k[i] > 0:
                    top.append(n)
                    typ.append(i)
                    bottom.append(self._index[k[:i] + (k[i] - 1,) + k[i + 1 :]])
        self.edge_top = np.array(top, dtype=np.intp)
        self.edge_type = np.array(typ, dtype=np.intp)
        self.edge_bottom = np.array(bottom, dtype=np.intp)

        # fits[i]: indices into `configs` of configurations that can take one
        # more type-i customer (zero configuration included).
        self.fits = []
        for i in range(n_types):
            unit = np.zeros(n_types, dtype=np.int64)
            unit[i] = 1
            self.fits.append(
                np.array(
                    [n for n, k in enumerate(ordered) if tuple(np.add(k, unit)) in self._index],
                    dtype=np.intp,
                )
            )
        for arr in (
            self.factorial_weights,
            self.log_factorial_weights,
            self.edge_top,
            self.edge_type,
            self.edge_bottom,
            *self.fits,
        ):
            arr.setflags(write=False)

    # -- lookup -----------------------------------------------------------

    @property
    def n_configs(self) -> int:
        """Number of non-zero configurations, ``|K|``."""
        return len(self.nonzero)

    @property
    def n_edges(self) -> int:
        return len(self.edge_top)

    def __len__(self) -> int:
        return len(self.configs)

    def __contains__(self, k) -> bool:
        return tuple(int(v) for v in k) in self._index

    def __iter__(self):
        return (tuple(int(v) for v in k) for k in self.configs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConfigSet):
            return NotImplemented
        return self.configs.shape == other.configs.shape and bool(
            np.all(self.configs == other.configs)
        )

    def __hash__(self) -> int:
        return hash(self.configs.tobytes())

    def __repr__(self) -> str:
        return f"ConfigSet(n_types={self.n_types}, size={len(self)}, maximal={self.maximal()})"

    def index(self, k: Sequence[int]) -> int:
        """Index of ``k`` in ``configs`` (0 is the empty configuration)."""
        key = tuple(int(v) for v in k)
        try:
            return self._index[key]
        except KeyError:
            raise KeyError(f"configuration {key} is not feasible") from None

    def nonzero_index(self, k: Sequence[int]) -> int:
        """Index of a non-zero ``k`` in ``nonzero``."""
        n = self.index(k)
        if n == 0:
            raise KeyError("the zero configuration has no index over K")
        return n - 1

    def labels(self) -> list[str]:
        return [config_label(k) for k in self.nonzero]

    def maximal(self) -> list[tuple[int, ...]]:
        """Configurations not dominated by any other member."""
        out = []
        for k in self.configs:
            dominated = False
            for i in range(self.n_types):
                up = k.copy()
                up[i] += 1
                if tuple(int(v) for v in up) in self._index:
                    dominated = True
                    break
            if not dominated:
                out.append(tuple(int(v) for v in k))
        return out

    def to_vector(self, counts: dict) -> np.ndarray:
        """Convert ``{configuration: value}`` to a vector over K.

        Keys may be tuples or ``"k1-k2"`` labels.  Zero-valued entries are
        allowed; the zero configuration itself is rejected.
        """
        x = np.zeros(self.n_configs)
        for k, v in counts.items():
            key = parse_config_label(k) if isinstance(k, str) else tuple(k)
            if len(key) != self.n_types:
                raise ValueError(f"configuration {key} has wrong length")
            if key not in self._index:
                raise ValueError(f"configuration {key} is outside the feasible set")
            if self._index[key] == 0:
                raise ValueError("the zero configuration cannot hold servers")
            x[self._index[key] - 1] += v
        return x

    def to_dict(self, x: Sequence[float], skip_zero: bool = True) -> dict:
        return {
            tuple(int(v) for v in k): val
            for k, val in zip(self.nonzero, x)
            if not (skip_zero and val == 0)
        }

    def type_totals(self, x: np.ndarray) -> np.ndarray:
        """``y_i = sum_k k_i x_k`` for a vector (or stack of vectors) over K."""
        return np.asarray(x) @ self.nonzero


def build_vector_packing(sizes: Sequence[float], capacity: float) -> ConfigSet:
    """All configurations whose total size fits into one bin.

    Parameters
    ----------
    sizes : sequence of float
        Size of one customer of each type.
    capacity : float
        Bin capacity.

    Returns
    -------
    ConfigSet
        ``{k : sum_i k_i * sizes[i] <= capacity}``.
    """
    sizes = [float(s) for s in sizes]
    capacity = float(capacity)
    if not sizes:
        raise ValueError("need at least one customer type")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    for i, s in enumerate(sizes):
        if s <= 0:
            raise ValueError(f"size of type {i + 1} must be positive")
        if s > capacity:
            raise ValueError(f"type {i + 1} (size {s}) never fits capacity {capacity}")

    # small slack so that e.g. 0.1 * 3 <= 0.3 behaves
    limit = capacity * (1 + 1e-12)
    members = []

    def extend(prefix, used):
        i = len(prefix)
        if i == len(sizes):
            members.append(tuple(prefix))
            return
        n = 0
        while used + n * sizes[i] <= limit:
            extend(prefix + [n], used + n * sizes[i])
            n += 1

    extend([], 0.0)
    return ConfigSet(members)


def build_from_maximal(maximal: Iterable[Sequence[int]]) -> ConfigSet:
    """Downward closure of a collection of maximal configurations.

    Dominated entries are accepted with a warning.
    """
    maximal = [tuple(int(v) for v in k) for k in maximal]
    if not maximal:
        raise ValueError("maximal set is empty")
    for a, b in itertools.permutations(maximal, 2):
        if a != b and all(u <= v for u, v in zip(a, b)):
            warnings.warn(f"configuration {a} is dominated by {b}", stacklevel=2)
            break
    members = set()
    for k in maximal:
        if any(v < 0 for v in k):
            raise ValueError(f"negative count in {k}")
        members.update(itertools.product(*(range(v + 1) for v in k)))
    return ConfigSet(members)


def edges(config_set: ConfigSet) -> list[tuple[tuple[int, ...], int]]:
    """Sorted list of edges ``(k, i)`` with ``k - e_i`` feasible.

    Type indices in the result are 0-based.
    """
    return [
        (tuple(int(v) for v in config_set.nonzero[t]), int(i))
        for t, i in zip(config_set.edge_top, config_set.edge_type)
    ]
