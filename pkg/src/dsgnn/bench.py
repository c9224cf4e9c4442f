"""Measure what the dual-scale cutoff buys: angle-input volume and
per-crystal inference time versus a single-cutoff scheme.

A sweep builds graphs for the same seeded crystals under both strategies
across a range of edge cutoffs (the dual strategy ties the angle cutoff to
the square root of the edge cutoff; the single strategy reuses the edge
cutoff). Each record carries the graph statistics, a median graph-build
time, and a median featurize+predict time with a fixed randomly
initialized model. The report fits log-log growth exponents of the angle
count against the mean edge-neighbor count for both strategies.
"""

from __future__ import annotations

import gc
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .crystal import Crystal, Lattice
from .errors import ConfigError, DataError
from .featurize import BasisConfig, featurize_graph
from .graph import CrystalGraph, CutoffConfig, build_graph, graph_stats
from .model import ModelConfig, ModelState, forward
from .synthetic import jittered_cell

LATTICE_TYPES = ("cubic", "orthorhombic-random")


@dataclass(frozen=True)
class BenchScenario:
    lattice_type: str = "cubic"
    atoms_per_cell: tuple[int, ...] = (2, 4, 8)
    density: float = 0.05  # atoms per A^3
    edge_cutoffs: tuple[float, ...] = (4.5, 5.5, 6.75, 8.0)
    crystals_per_point: int = 3
    repetitions: int = 5
    seed: int = 0
    hidden_dim: int = 32
    num_blocks: int = 2

    def __post_init__(self):
        if self.lattice_type not in LATTICE_TYPES:
            raise ConfigError(f"lattice_type must be one of {LATTICE_TYPES}")
        if not self.atoms_per_cell or any(n < 1 for n in self.atoms_per_cell):
            raise ConfigError(f"atoms_per_cell entries must be >= 1, got {self.atoms_per_cell}")
        if self.density <= 0:
            raise ConfigError(f"density must be positive, got {self.density}")
        if not self.edge_cutoffs or any(c <= 0 for c in self.edge_cutoffs):
            raise ConfigError(f"edge cutoffs must be positive, got {self.edge_cutoffs}")
        if self.repetitions < 3:
            raise ConfigError(f"repetitions must be >= 3, got {self.repetitions}")
        if self.crystals_per_point < 1:
            raise ConfigError("crystals_per_point must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["atoms_per_cell"] = list(self.atoms_per_cell)
        d["edge_cutoffs"] = list(self.edge_cutoffs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchScenario":
        kwargs = dict(d)
        if "atoms_per_cell" in kwargs:
            kwargs["atoms_per_cell"] = tuple(int(n) for n in kwargs["atoms_per_cell"])
        if "edge_cutoffs" in kwargs:
            kwargs["edge_cutoffs"] = tuple(float(c) for c in kwargs["edge_cutoffs"])
        unknown = set(kwargs) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass
class BenchRecord:
    strategy: str  # "dual" or "single"
    lattice_type: str
    n_atoms: int
    density: float
    crystal_index: int
    edge_cutoff: float
    angle_cutoff: float
    num_edges: int
    num_angles: int
    m_avg: float
    k_avg: float
    graph_build_ms: float  # median over repetitions
    inference_ms: float  # median featurize+predict over repetitions
    inference_ms_min: float
    inference_ms_max: float
    repetitions: int

    def as_row(self) -> dict:
        return asdict(self)


def generate_crystal(scenario: BenchScenario, n_atoms: int, seed: int) -> Crystal:
    """Seeded crystal at the scenario's density; volume = n/density."""
    rng = np.random.default_rng(seed)
    volume = n_atoms / scenario.density
    if scenario.lattice_type == "cubic":
        edges = np.full(3, volume ** (1.0 / 3.0))
    else:
        aspect = rng.uniform(0.75, 1.3, size=3)
        aspect /= aspect.prod() ** (1.0 / 3.0)
        edges = volume ** (1.0 / 3.0) * aspect
    lattice = Lattice(np.diag(edges))
    return jittered_cell(lattice, n_atoms, rng,
                         crystal_id=f"bench-{scenario.lattice_type}-n{n_atoms}-s{seed}")


def _median_time(fn, repetitions: int) -> tuple[float, float, float]:
    """(median, min, max) milliseconds over repetitions.

    One warm-up run is excluded, and the collector is paused so stray GC
    pauses do not pollute individual repetitions.
    """
    fn()
    times = []
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repetitions):
            t0 = time.perf_counter()
            fn()
            times.append((time.perf_counter() - t0) * 1e3)
    finally:
        if gc_was_enabled:
            gc.enable()
    return float(np.median(times)), float(min(times)), float(max(times))


def _strategy_cutoffs(strategy: str, edge_cutoff: float) -> CutoffConfig:
    if strategy == "dual":
        return CutoffConfig.paper_mode(edge_cutoff)
    return CutoffConfig(edge_cutoff, edge_cutoff)


def run_sweep(scenario: BenchScenario, log=None) -> list[BenchRecord]:
    """Build, time, and record every (crystal, edge cutoff, strategy) cell."""
    records: list[BenchRecord] = []
    crystals: list[tuple[int, int, Crystal]] = []
    for n_atoms in scenario.atoms_per_cell:
        for ci in range(scenario.crystals_per_point):
            seed = scenario.seed * 10_000 + n_atoms * 100 + ci
            crystals.append((n_atoms, ci, generate_crystal(scenario, n_atoms, seed)))

    _warm_up(scenario, crystals[-1][2])

    for edge_cutoff in scenario.edge_cutoffs:
        model_config = ModelConfig(
            hidden_dim=scenario.hidden_dim,
            num_blocks=scenario.num_blocks,
            basis=BasisConfig(edge_cutoff=edge_cutoff),
            cutoffs=CutoffConfig.paper_mode(edge_cutoff),
            seed=scenario.seed,
        )
        # Same seed -> identical weights for both strategies at this cutoff.
        state = ModelState.initialize(model_config)
        for strategy in ("dual", "single"):
            cutoffs = _strategy_cutoffs(strategy, edge_cutoff)
            basis = BasisConfig(edge_cutoff=edge_cutoff)
            for n_atoms, ci, crystal in crystals:
                build_ms, _, _ = _median_time(
                    lambda: build_graph(crystal, cutoffs), scenario.repetitions
                )
                graph = build_graph(crystal, cutoffs)
                stats = graph_stats(graph)

                def infer(graph=graph):
                    feat = featurize_graph(graph, basis)
                    forward(state, feat)

                infer_ms, infer_min, infer_max = _median_time(infer, scenario.repetitions)
                records.append(BenchRecord(
                    strategy=strategy,
                    lattice_type=scenario.lattice_type,
                    n_atoms=n_atoms,
                    density=scenario.density,
                    crystal_index=ci,
                    edge_cutoff=edge_cutoff,
                    angle_cutoff=cutoffs.angle_cutoff,
                    num_edges=stats["num_edges"],
                    num_angles=stats["num_angles"],
                    m_avg=stats["m_avg"],
                    k_avg=stats["k_avg"],
                    graph_build_ms=build_ms,
                    inference_ms=infer_ms,
                    inference_ms_min=infer_min,
                    inference_ms_max=infer_max,
                    repetitions=scenario.repetitions,
                ))
                if log is not None:
                    log(f"cutoff={edge_cutoff:g} {strategy:6s} n={n_atoms} #{ci}: "
                        f"edges={stats['num_edges']} angles={stats['num_angles']} "
                        f"build={build_ms:.2f}ms infer={infer_ms:.2f}ms")
    return records


def _warm_up(scenario: BenchScenario, crystal: Crystal) -> None:
    """Exercise the full measured path a few times before any timing, so
    allocator, BLAS, and CPU-frequency warm-up stay out of the records."""
    edge_cutoff = max(scenario.edge_cutoffs)
    config = ModelConfig(
        hidden_dim=scenario.hidden_dim,
        num_blocks=scenario.num_blocks,
        basis=BasisConfig(edge_cutoff=edge_cutoff),
        cutoffs=CutoffConfig.paper_mode(edge_cutoff),
        seed=scenario.seed,
    )
    state = ModelState.initialize(config)
    for strategy in ("dual", "single"):
        graph = build_graph(crystal, _strategy_cutoffs(strategy, edge_cutoff))
        for _ in range(3):
            forward(state, featurize_graph(graph, config.basis))


def fit_growth_exponent(records: list[BenchRecord]) -> dict:
    """Least-squares slope of log(num_angles) against log(m_avg)."""
    pts = [(r.m_avg, r.num_angles) for r in records if r.m_avg > 0 and r.num_angles > 0]
    if len(pts) < 2:
        return {"exponent": None, "points": len(pts)}
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return {"exponent": float(slope), "intercept": float(intercept), "points": len(pts)}


def summarize(records: list[BenchRecord], scenario: BenchScenario) -> dict:
    by_strategy = {s: [r for r in records if r.strategy == s] for s in ("dual", "single")}
    top_cutoff = max(r.edge_cutoff for r in records)
    at_top = {s: [r for r in by_strategy[s] if r.edge_cutoff == top_cutoff]
              for s in by_strategy}
    angles = {s: sum(r.num_angles for r in at_top[s]) for s in at_top}
    summary = {
        "scenario": scenario.to_dict(),
        "angle_growth": {s: fit_growth_exponent(by_strategy[s]) for s in by_strategy},
        "at_edge_cutoff": {
            "edge_cutoff": top_cutoff,
            "total_angles": angles,
            "angle_ratio_single_over_dual": (
                angles["single"] / angles["dual"] if angles["dual"] else math.inf
            ),
            "median_inference_ms": {
                s: float(np.median([r.inference_ms for r in at_top[s]])) for s in at_top
            },
            "median_graph_build_ms": {
                s: float(np.median([r.graph_build_ms for r in at_top[s]])) for s in at_top
            },
        },
    }
    gaps = summary["angle_growth"]
    if gaps["single"]["exponent"] is not None and gaps["dual"]["exponent"] is not None:
        summary["exponent_gap"] = gaps["single"]["exponent"] - gaps["dual"]["exponent"]
    return summary


def emit_report(records: list[BenchRecord], out_dir, scenario: BenchScenario) -> dict:
    """Write records.csv, summary.json, and the figures; returns the summary."""
    from . import reporting  # matplotlib import deferred to report time

    if not records:
        raise DataError("no bench records to report")
    out_dir = _ensure_dir(out_dir)
    _write_csv(records, out_dir / "records.csv")
    summary = summarize(records, scenario)
    (out_dir / "summary.json").write_text(
        _json_dumps(summary) + "\n", encoding="utf-8"
    )
    reporting.save_bench_figures(records, summary, out_dir)
    return summary


def _ensure_dir(path):
    from pathlib import Path

    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(records: list[BenchRecord], path) -> None:
    import csv

    rows = [r.as_row() for r in records]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _json_dumps(obj) -> str:
    import json

    return json.dumps(obj, indent=2, sort_keys=True)
