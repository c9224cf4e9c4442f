import csv
import json
import math

import numpy as np
import pytest

from dsgnn.bench import (
    BenchRecord,
    BenchScenario,
    emit_report,
    fit_growth_exponent,
    generate_crystal,
    run_sweep,
    summarize,
)
from dsgnn.errors import ConfigError, DataError, GenerationFailedError
from dsgnn.graph import CutoffConfig, build_graph, graph_stats
from dsgnn.synthetic import MIN_SEPARATION, _min_image_separation, jittered_cell
from dsgnn.crystal import Lattice

TINY = BenchScenario(
    atoms_per_cell=(2, 4),
    edge_cutoffs=(4.0, 6.0),
    crystals_per_point=2,
    repetitions=3,
    hidden_dim=8,
    num_blocks=1,
    seed=1,
)


@pytest.fixture(scope="module")
def tiny_records():
    return run_sweep(TINY)


class TestScenario:
    def test_validation(self):
        with pytest.raises(ConfigError):
            BenchScenario(repetitions=2)
        with pytest.raises(ConfigError):
            BenchScenario(atoms_per_cell=())
        with pytest.raises(ConfigError):
            BenchScenario(density=-1.0)
        with pytest.raises(ConfigError):
            BenchScenario(lattice_type="hexagonal")

    def test_round_trip(self):
        again = BenchScenario.from_dict(TINY.to_dict())
        assert again == TINY

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            BenchScenario.from_dict({"atoms": [1]})


class TestGenerateCrystal:
    def test_single_atom_at_origin(self):
        sc = BenchScenario(density=1 / 64.0, atoms_per_cell=(1,))
        c = generate_crystal(sc, 1, seed=0)
        assert c.num_atoms == 1
        assert np.allclose(c.cart_coords, 0.0)
        assert c.lattice.volume == pytest.approx(64.0)

    def test_same_seed_identical(self):
        a = generate_crystal(TINY, 4, seed=7)
        b = generate_crystal(TINY, 4, seed=7)
        assert np.array_equal(a.cart_coords, b.cart_coords)
        assert np.array_equal(a.atomic_numbers, b.atomic_numbers)

    def test_minimum_separation_enforced(self):
        for seed in range(5):
            c = generate_crystal(TINY, 8, seed=seed)
            assert _min_image_separation(c.cart_coords, c.lattice) >= MIN_SEPARATION

    def test_orthorhombic_volume(self):
        sc = BenchScenario(lattice_type="orthorhombic-random", density=0.05)
        c = generate_crystal(sc, 4, seed=3)
        assert c.lattice.volume == pytest.approx(4 / 0.05)
        edges = np.diag(c.lattice.matrix)
        assert not np.allclose(edges, edges[0])

    def test_impossible_density_fails(self):
        lattice = Lattice.cubic(1.5)
        rng = np.random.default_rng(0)
        with pytest.raises(GenerationFailedError):
            jittered_cell(lattice, 27, rng)


class TestRunSweep:
    def test_record_count(self, tiny_records):
        # N values x crystals x cutoffs x strategies
        assert len(tiny_records) == 2 * 2 * 2 * 2

    def test_counts_match_graph_stats(self, tiny_records):
        scenario = TINY
        for r in tiny_records[:4]:
            seed = scenario.seed * 10_000 + r.n_atoms * 100 + r.crystal_index
            crystal = generate_crystal(scenario, r.n_atoms, seed)
            cutoffs = (CutoffConfig.paper_mode(r.edge_cutoff) if r.strategy == "dual"
                       else CutoffConfig(r.edge_cutoff, r.edge_cutoff))
            stats = graph_stats(build_graph(crystal, cutoffs))
            assert stats["num_edges"] == r.num_edges
            assert stats["num_angles"] == r.num_angles
            assert stats["m_avg"] == r.m_avg
            assert stats["k_avg"] == r.k_avg

    def test_dual_never_more_angles(self, tiny_records):
        by_key = {}
        for r in tiny_records:
            by_key.setdefault((r.n_atoms, r.crystal_index, r.edge_cutoff), {})[r.strategy] = r
        for pair in by_key.values():
            assert pair["dual"].num_angles <= pair["single"].num_angles
            assert pair["dual"].k_avg <= pair["dual"].m_avg
            assert pair["single"].k_avg <= pair["single"].m_avg

    def test_times_positive(self, tiny_records):
        for r in tiny_records:
            assert r.graph_build_ms > 0
            assert r.inference_ms > 0
            assert r.inference_ms_min <= r.inference_ms <= r.inference_ms_max

    def test_counts_reproducible(self, tiny_records):
        again = run_sweep(TINY)
        for a, b in zip(tiny_records, again):
            assert (a.strategy, a.n_atoms, a.edge_cutoff, a.num_edges, a.num_angles) == \
                (b.strategy, b.n_atoms, b.edge_cutoff, b.num_edges, b.num_angles)


class TestFitAndSummary:
    def _fake_record(self, strategy, m_avg, num_angles):
        return BenchRecord(strategy=strategy, lattice_type="cubic", n_atoms=2,
                           density=0.05, crystal_index=0, edge_cutoff=8.0,
                           angle_cutoff=2.8, num_edges=10, num_angles=num_angles,
                           m_avg=m_avg, k_avg=1.0, graph_build_ms=1.0,
                           inference_ms=1.0, inference_ms_min=1.0,
                           inference_ms_max=1.0, repetitions=3)

    def test_exponent_recovered_from_power_law(self):
        records = [self._fake_record("dual", m, int(3 * m**1.5)) for m in (5, 10, 20, 40)]
        fit = fit_growth_exponent(records)
        assert fit["exponent"] == pytest.approx(1.5, abs=0.02)

    def test_zero_angle_points_skipped(self):
        records = [self._fake_record("dual", 5, 0), self._fake_record("dual", 10, 100)]
        assert fit_growth_exponent(records)["points"] == 1

    def test_summary_structure(self, tiny_records):
        summary = summarize(tiny_records, TINY)
        assert set(summary) >= {"scenario", "angle_growth", "at_edge_cutoff"}
        top = summary["at_edge_cutoff"]
        assert top["edge_cutoff"] == 6.0
        assert top["angle_ratio_single_over_dual"] >= 1.0


class TestEmitReport:
    def test_empty_records_error(self, tmp_path):
        with pytest.raises(DataError):
            emit_report([], tmp_path, TINY)

    def test_files_written(self, tiny_records, tmp_path):
        summary = emit_report(tiny_records, tmp_path, TINY)
        assert (tmp_path / "records.csv").exists()
        assert (tmp_path / "summary.json").exists()
        assert (tmp_path / "angle_growth.png").exists()
        assert (tmp_path / "inference_time.png").exists()
        with open(tmp_path / "records.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == len(tiny_records)
        assert set(rows[0]) >= {"strategy", "num_edges", "num_angles", "m_avg",
                                "k_avg", "inference_ms", "graph_build_ms"}
        loaded = json.loads((tmp_path / "summary.json").read_text())
        assert loaded["at_edge_cutoff"]["angle_ratio_single_over_dual"] == \
            summary["at_edge_cutoff"]["angle_ratio_single_over_dual"]
