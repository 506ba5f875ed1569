"""JSON scenario files: parsing, validation and the bundled examples.

A scenario is a flat JSON object.  Recognised keys::

    name          str, used as the output file prefix
    config_set    {"vector_packing": {"sizes": [...], "capacity": c}}
                  or {"maximal": [[...], ...]}
    lambda, mu    per-type rate vectors
    policy        {"grand_az": a} | {"grand_const": c} | {"grand_power": p}
    policies      list of policies (alternative to "policy")
    r             system scale; "r_list" for conjecture runs
    a, a_list     zero-server fraction(s) for fluid and optimal runs
    init          fluid-scaled initial state, {"k1-k2": value}; a simulation
                  at scale r starts from floor(r * value) servers
    init_counts   explicit initial server counts for simulations
    horizon, sample_dt, dt, seeds, burn_in, n_jobs

Every key that a command needs is checked before anything runs; problems
raise :class:`ScenarioError` naming the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .packing import ConfigSet, build_from_maximal, build_vector_packing, parse_config_label
from .policies import Policy, policy_from_dict, policy_to_dict

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario", "bundled_scenarios", "bundled_path"]

KNOWN_KEYS = {
    "name", "description", "config_set", "lambda", "mu", "policy", "policies",
    "r", "r_list", "a", "a_list", "init", "init_counts", "horizon", "sample_dt",
    "dt", "seeds", "burn_in", "n_jobs", "t_max",
}


class ScenarioError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class Scenario:
    raw: dict
    name: str
    config_set: ConfigSet
    lam: list
    mu: list
    policies: list = field(default_factory=list)
    r: Optional[float] = None
    r_list: list = field(default_factory=list)
    a_list: list = field(default_factory=list)
    init: Optional[dict] = None
    init_counts: Optional[dict] = None
    horizon: float = 15.0
    sample_dt: float = 0.01
    dt: float = 1e-3
    seeds: list = field(default_factory=lambda: [0])
    burn_in: Optional[float] = None
    n_jobs: int = 1
    t_max: Optional[float] = None
    source: Optional[str] = None

    def resolved(self) -> dict:
        """The scenario with every default filled in, for echoing into outputs."""
        out = dict(self.raw)
        out.update(
            {
                "name": self.name,
                "lambda": self.lam,
                "mu": self.mu,
                "policies": [policy_to_dict(p) for p in self.policies],
                "r": self.r,
                "r_list": self.r_list,
                "a_list": self.a_list,
                "init": self.init,
                "init_counts": self.init_counts,
                "horizon": self.horizon,
                "sample_dt": self.sample_dt,
                "dt": self.dt,
                "seeds": self.seeds,
                "burn_in": self.burn_in,
                "n_jobs": self.n_jobs,
                "t_max": self.t_max,
                "configurations": self.config_set.labels(),
            }
        )
        out.pop("policy", None)
        out.pop("a", None)
        return out

    def initial_counts(self, r: float) -> dict:
        """Server counts for a simulation at scale ``r``."""
        if self.init_counts is not None:
            return dict(self.init_counts)
        if self.init is None:
            return {}
        return {k: int(math.floor(r * v + 1e-9)) for k, v in self.init.items()}

    def require(self, *names: str) -> None:
        checks = {
            "policy": bool(self.policies),
            "r": self.r is not None,
            "r_list": bool(self.r_list),
            "a": bool(self.a_list),
            "a_list": bool(self.a_list),
            "init": self.init is not None,
        }
        for n in names:
            if not checks[n]:
                raise ScenarioError(n, "required for this command")


def _number(raw: dict, key: str, positive=False, nonneg=False, integer=False):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(key, f"expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ScenarioError(key, f"expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ScenarioError(key, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ScenarioError(key, f"must be non-negative, got {v!r}")
    return int(v) if integer else float(v)


def _config_set(spec: Any) -> ConfigSet:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ScenarioError("config_set", 'expected {"vector_packing": ...} or {"maximal": ...}')
    ((kind, body),) = spec.items()
    try:
        if kind == "vector_packing":
            if not isinstance(body, dict) or set(body) != {"sizes", "capacity"}:
                raise ScenarioError("config_set.vector_packing", "needs exactly 'sizes' and 'capacity'")
            return build_vector_packing(body["sizes"], body["capacity"])
        if kind == "maximal":
            if not isinstance(body, list) or not body:
                raise ScenarioError("config_set.maximal", "needs a non-empty list of configurations")
            return build_from_maximal([tuple(k) for k in body])
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"config_set.{kind}", str(exc)) from None
    raise ScenarioError("config_set", f"unknown kind {kind!r}")


def _rates(raw: dict, key: str, n: int) -> list:
    v = raw.get(key)
    if not isinstance(v, list) or len(v) != n:
        raise ScenarioError(key, f"expected a list of {n} numbers (one per type), got {v!r}")
    out = []
    for j, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not x > 0 or not math.isfinite(x):
            raise ScenarioError(f"{key}[{j}]", f"must be a positive number, got {x!r}")
        out.append(float(x))
    return out


def _state(raw: dict, key: str, cs: ConfigSet, integer: bool) -> dict:
    v = raw[key]
    if not isinstance(v, dict):
        raise ScenarioError(key, "expected an object keyed by configuration labels like '1-1'")
    out = {}
    for label, value in v.items():
        try:
            k = parse_config_label(label)
        except ValueError:
            raise ScenarioError(f"{key}.{label}", "not a configuration label") from None
        if len(k) != cs.n_types or k not in cs or sum(k) == 0:
            raise ScenarioError(f"{key}.{label}", "configuration is outside the feasible set")
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
            raise ScenarioError(f"{key}.{label}", f"must be a non-negative number, got {value!r}")
        if integer and int(value) != value:
            raise ScenarioError(f"{key}.{label}", f"must be an integer count, got {value!r}")
        out[label] = int(value) if integer else float(value)
    return out


def parse_scenario(raw: dict, source: Optional[str] = None) -> Scenario:
    """Validate a scenario dictionary."""
    if not isinstance(raw, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ScenarioError(unknown[0], "unknown key")
    if "config_set" not in raw:
        raise ScenarioError("config_set", "missing")
    cs = _config_set(raw["config_set"])
    lam = _rates(raw, "lambda", cs.n_types)
    mu = _rates(raw, "mu", cs.n_types)
    sc = Scenario(raw=raw, name=str(raw.get("name", "scenario")), config_set=cs, lam=lam, mu=mu, source=source)

    if "policy" in raw and "policies" in raw:
        raise ScenarioError("policies", "give either 'policy' or 'policies', not both")
    plist = [raw["policy"]] if "policy" in raw else raw.get("policies", [])
    if not isinstance(plist, list):
        raise ScenarioError("policies", "expected a list")
    for j, p in enumerate(plist):
        try:
            sc.policies.append(policy_from_dict(p))
        except (ValueError, TypeError) as exc:
            raise ScenarioError("policy" if "policy" in raw else f"policies[{j}]", str(exc)) from None

    if "r" in raw:
        sc.r = _number(raw, "r", positive=True)
    if "r_list" in raw:
        if not isinstance(raw["r_list"], list) or not raw["r_list"]:
            raise ScenarioError("r_list", "expected a non-empty list")
        sc.r_list = [_number({"r_list": v}, "r_list", positive=True) for v in raw["r_list"]]
    if "a" in raw and "a_list" in raw:
        raise ScenarioError("a_list", "give either 'a' or 'a_list', not both")
    if "a" in raw:
        sc.a_list = [_number(raw, "a", positive=True)]
    if "a_list" in raw:
        if not isinstance(raw["a_list"], list) or not raw["a_list"]:
            raise ScenarioError("a_list", "expected a non-empty list")
        sc.a_list = [_number({"a_list": v}, "a_list", positive=True) for v in raw["a_list"]]
    if any(a >= 1 for a in sc.a_list):
        raise ScenarioError("a_list", "values must lie in (0, 1)")

    if "init" in raw:
        sc.init = _state(raw, "init", cs, integer=False)
    if "init_counts" in raw:
        sc.init_counts = _state(raw, "init_counts", cs, integer=True)
    if "horizon" in raw:
        sc.horizon = _number(raw, "horizon", nonneg=True)
    if "sample_dt" in raw:
        sc.sample_dt = _number(raw, "sample_dt", positive=True)
    if "dt" in raw:
        sc.dt = _number(raw, "dt", positive=True)
    if "burn_in" in raw:
        sc.burn_in = _number(raw, "burn_in", nonneg=True)
        if sc.burn_in >= sc.horizon:
            raise ScenarioError("burn_in", "must be below the horizon")
    if "t_max" in raw:
        sc.t_max = _number(raw, "t_max", positive=True)
    if "n_jobs" in raw:
        sc.n_jobs = _number(raw, "n_jobs", positive=True, integer=True)
    if "seeds" in raw:
        s = raw["seeds"]
        if not isinstance(s, list) or not s:
            raise ScenarioError("seeds", "expected a non-empty list of integers")
        sc.seeds = [_number({"seeds": v}, "seeds", nonneg=True, integer=True) for v in s]
    return sc


def bundled_scenarios() -> list[str]:
    root = resources.files("grandsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    return resources.files("grandsim") / "scenarios" / f"{name}.json"


def load_scenario(path_or_name) -> Scenario:
    """Read a scenario from a file, or from the bundled set by bare name."""
    path = Path(path_or_name)
    if path.exists():
        text, source = path.read_text(), str(path)
    else:
        name = path.name[:-5] if path.name.endswith(".json") else path.name
        if path.parent != Path(".") or name not in bundled_scenarios():
            raise ScenarioError("--scenario", f"no such file or bundled scenario: {path_or_name}")
        text, source = bundled_path(name).read_text(), f"bundled:{name}"
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(raw, source=source)
