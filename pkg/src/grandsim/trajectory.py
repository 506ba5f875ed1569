"""Sampled trajectories shared by the simulator and the fluid integrator."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .packing import ConfigSet

__all__ = ["Trajectory"]


@dataclass
class Trajectory:
    """State of a system sampled on a time grid.

    For a simulated trajectory ``counts`` holds the integer server counts
    ``X_k`` and ``occupied``, ``Z``, ``Y`` are raw counts; ``x`` is always the
    fluid-scaled vector ``X / r``.  For a fluid trajectory ``r`` is ``None``,
    ``counts`` is ``None`` and every column is already on the fluid scale.
    """

    config_set: ConfigSet
    times: np.ndarray
    x: np.ndarray
    occupied: np.ndarray
    Z: np.ndarray
    Y: np.ndarray
    kind: str = "simulation"
    r: Optional[float] = None
    counts: Optional[np.ndarray] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def scale(self) -> float:
        return 1.0 if self.r is None else float(self.r)

    @property
    def occupied_fraction(self) -> np.ndarray:
        """Occupied servers on the fluid scale."""
        return self.occupied / self.scale

    def window(self, start: float, stop: float | None = None) -> "Trajectory":
        """Samples with ``start <= t <= stop``."""
        mask = self.times >= start
        if stop is not None:
            mask &= self.times <= stop
        return Trajectory(
            config_set=self.config_set,
            times=self.times[mask],
            x=self.x[mask],
            occupied=self.occupied[mask],
            Z=self.Z[mask],
            Y=self.Y[mask],
            kind=self.kind,
            r=self.r,
            counts=None if self.counts is None else self.counts[mask],
            seed=self.seed,
            meta=self.meta,
        )

    # -- export -----------------------------------------------------------

    def header(self) -> list[str]:
        n_types = self.config_set.n_types
        return (
            ["t", "occupied", "Z"]
            + [f"Y_{i + 1}" for i in range(n_types)]
            + [f"x_{lab}" for lab in self.config_set.labels()]
        )

    def rows(self):
        for n in range(len(self.times)):
            row = [repr(float(self.times[n]))]
            if self.counts is not None:
                row += [str(int(self.occupied[n])), str(int(self.Z[n]))]
                row += [str(int(v)) for v in self.Y[n]]
            else:
                row += [repr(float(self.occupied[n])), repr(float(self.Z[n]))]
                row += [repr(float(v)) for v in self.Y[n]]
            row += [repr(float(v)) for v in self.x[n]]
            yield row

    def provenance(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.r,
            "seed": self.seed,
            "configurations": self.config_set.labels(),
            **self.meta,
        }

    def to_csv(self, path) -> None:
        """Write CSV; provenance goes into leading ``#`` comment lines."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write("# " + json.dumps(self.provenance(), sort_keys=True) + "\n")
            writer = csv.writer(fh)
            writer.writerow(self.header())
            writer.writerows(self.rows())

    def to_dict(self) -> dict:
        out = self.provenance()
        out["columns"] = self.header()
        out["data"] = [[float(v) for v in row] for row in self.rows()]
        return out

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")
