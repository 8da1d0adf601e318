"""Declarative experiment configuration: a TOML file mapped onto the
potential, ensemble, region, and budget parameters of the engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .lattice import CubeGrid, Region
from .partition import EnsembleParams
from .potential import Potential


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    potential: Potential
    ensemble: EnsembleParams
    length: float               # d=1 box extent; regions cover [~0, length)
    sweep: tuple                # strictly decreasing cube edges
    eta: tuple                  # anchor points for correlation runs
    n_max: int
    order: int                  # KS series cut N
    samples: int
    nodes: int                  # Gauss nodes per cube (discrete paths)
    quad_budget: int
    cutoff_radius: float
    xi: float
    seed: int
    out: str
    override_radius: bool
    dense_cap: int = 6

    def regions(self):
        """One box region per sweep edge, covering the configured length."""
        out = []
        for a in self.sweep:
            n = int(round(self.length / a))
            if abs(n * a - self.length) > 1e-9 * max(1.0, self.length):
                raise ConfigError(
                    f"edge_a sweep value {a} does not divide length "
                    f"{self.length}")
            out.append(Region.box(CubeGrid(a, self.potential.dimension), (n,)))
        return out


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing required key '{key}' in [{section}]")
    return table[key]


def _potential_from(table: dict) -> Potential:
    family = _require(table, "family", "potential")
    d = int(table.get("dimension", 1))
    try:
        if family == "pure-repulsive":
            return Potential.pure_repulsive(
                _require(table, "c_r", "potential"),
                _require(table, "s", "potential"), d)
        if family == "power-core-with-tail":
            return Potential.power_core_with_tail(
                _require(table, "c_r", "potential"),
                _require(table, "s", "potential"),
                _require(table, "c_a", "potential"),
                _require(table, "eps0", "potential"), d)
        if family == "lennard-jones":
            return Potential.lennard_jones(
                _require(table, "epsilon", "potential"),
                _require(table, "sigma", "potential"), d)
        if family == "zero":
            return Potential.zero(d, test_only=bool(table.get("test_only",
                                                              False)))
        if family == "hard-core":
            return Potential.hard_core(_require(table, "sigma", "potential"), d)
    except ValueError as exc:
        raise ConfigError(f"[potential] {exc}") from exc
    raise ConfigError(f"[potential] unknown family '{family}'")


def parse_config(path: str) -> ExperimentConfig:
    """Load and validate a TOML experiment file; every diagnostic names the
    offending section and key."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error in {path}: {exc}") from exc

    pot_tab = raw.get("potential")
    if not isinstance(pot_tab, dict):
        raise ConfigError("missing required table [potential]")
    potential = _potential_from(pot_tab)

    ens_tab = raw.get("ensemble")
    if not isinstance(ens_tab, dict):
        raise ConfigError("missing required table [ensemble]")
    try:
        ensemble = EnsembleParams(float(_require(ens_tab, "z", "ensemble")),
                                  float(_require(ens_tab, "beta", "ensemble")))
    except ValueError as exc:
        raise ConfigError(f"[ensemble] {exc}") from exc

    reg_tab = raw.get("region")
    if not isinstance(reg_tab, dict):
        raise ConfigError("missing required table [region]")
    length = float(_require(reg_tab, "length", "region"))
    if length <= 0:
        raise ConfigError("[region] length must be positive")
    if "sweep" in reg_tab:
        sweep = tuple(float(a) for a in reg_tab["sweep"])
    elif "edge_a" in reg_tab:
        sweep = (float(reg_tab["edge_a"]),)
    else:
        raise ConfigError("missing required key 'edge_a' (or 'sweep') "
                          "in [region]")
    if any(a <= 0 for a in sweep):
        raise ConfigError("[region] edges must be positive")
    if any(b >= a for a, b in zip(sweep, sweep[1:])):
        raise ConfigError("[region] sweep must be strictly decreasing")

    eta = tuple(float(x) for x in raw.get("eta", {}).get("points", ()))

    tr = raw.get("truncation", {})
    if not isinstance(tr, dict):
        raise ConfigError("[truncation] must be a table")

    def _count(key, default):
        v = tr.get(key, default)
        if not isinstance(v, int) or v < 0:
            raise ConfigError(f"[truncation] '{key}' must be a nonnegative "
                              "integer")
        return v

    cfg = ExperimentConfig(
        potential=potential, ensemble=ensemble, length=length, sweep=sweep,
        eta=eta,
        n_max=_count("n_max", 20), order=_count("order", 4),
        samples=max(1, _count("samples", 1000)),
        nodes=max(2, _count("nodes", 4)),
        quad_budget=max(1, _count("quad_budget", 2000)),
        cutoff_radius=float(tr.get("cutoff_radius", 0.0)),
        xi=float(tr.get("xi", 0.0)),
        seed=int(raw.get("seed", 0)),
        out=str(raw.get("out", "results")),
        override_radius=bool(raw.get("override_radius", False)),
        dense_cap=_count("dense_cap", 6) if "dense_cap" in tr else 6)
    if not math.isfinite(cfg.cutoff_radius) or cfg.cutoff_radius < 0:
        raise ConfigError("[truncation] cutoff_radius must be finite and "
                          "nonnegative")
    return cfg
