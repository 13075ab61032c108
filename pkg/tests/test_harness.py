"""Tests for the experiment harness: bundles, records, determinism, CLI."""

import json
from pathlib import Path

import numpy as np
import pytest

from pilotseq import AlgorithmParams
from pilotseq import harness
from pilotseq.cli import main
from pilotseq.matio import export_cmat_csv, read_cmat, write_cmat


def small_config(**overrides):
    base = dict(
        num_antennas=8,
        num_users=3,
        num_scatterers=40,
        num_realizations=2,
        master_seed=11,
        epsilon_grid=(1e-4, 1e-3),
    )
    base.update(overrides)
    return harness.ScenarioConfig(**base)


def tree_digest(root, exclude=("timing.csv",)):
    """Map of relative path -> file bytes, skipping excluded names."""
    root = Path(root)
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name not in exclude:
            out[str(path.relative_to(root))] = path.read_bytes()
    return out


class TestMatio:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        m = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        path = tmp_path / "m.cmat"
        write_cmat(path, m)
        back = read_cmat(path)
        assert np.array_equal(m, back)

    def test_empty_matrix(self, tmp_path):
        path = tmp_path / "empty.cmat"
        write_cmat(path, np.zeros((0, 4)))
        assert read_cmat(path).shape == (0, 4)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.cmat"
        path.write_bytes(b"not a matrix file")
        with pytest.raises(ValueError):
            read_cmat(path)

    def test_truncated_payload_rejected(self, tmp_path, rng):
        path = tmp_path / "m.cmat"
        write_cmat(path, rng.standard_normal((4, 4)) + 0j)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError):
            read_cmat(path)

    def test_csv_export(self, tmp_path):
        path = tmp_path / "m.cmat"
        write_cmat(path, np.array([[1 + 2j, -0.5j]]))
        out = export_cmat_csv(path)
        assert out.exists()
        assert "1" in out.read_text()


class TestScenarioConfig:
    def test_json_round_trip(self):
        cfg = small_config(algorithm=AlgorithmParams(delta=2e-4, eps_s=1e-6))
        back = harness.ScenarioConfig.from_json(cfg.to_json())
        assert back == cfg

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            small_config(epsilon_grid=(1e-3, 1e-4))

    def test_grid_must_be_nonempty(self):
        with pytest.raises(ValueError):
            small_config(epsilon_grid=())

    def test_default_grid_matches_benchmark(self):
        cfg = harness.ScenarioConfig(num_antennas=16, num_users=5)
        grid = np.array(cfg.epsilon_grid)
        assert grid.size == 13
        assert np.allclose(grid, np.logspace(-5, -2, 13))
        assert cfg.num_realizations == 200
        assert cfg.noise_var == 1e-4
        assert cfg.algorithm.delta == 1e-4


class TestChildRng:
    def test_streams_differ(self):
        a = harness.child_rng(5, 0, harness.STREAM_GEOMETRY).standard_normal(4)
        b = harness.child_rng(5, 0, harness.STREAM_EMPIRICAL).standard_normal(4)
        c = harness.child_rng(5, 1, harness.STREAM_GEOMETRY).standard_normal(4)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_reproducible(self):
        a = harness.child_rng(5, 3, 0).standard_normal(4)
        b = harness.child_rng(5, 3, 0).standard_normal(4)
        assert np.array_equal(a, b)


class TestGenerate:
    def test_bundle_layout_and_determinism(self, tmp_path):
        cfg = small_config()
        b1 = harness.generate_bundle(cfg, tmp_path / "b1")
        b2 = harness.generate_bundle(cfg, tmp_path / "b2")
        assert (b1 / "scenario.json").exists()
        for idx in range(cfg.num_realizations):
            rdir = b1 / "realizations" / f"r{idx:04d}"
            assert (rdir / "meta.json").exists()
            for k in range(cfg.num_users):
                assert (rdir / f"user{k:02d}_factor.cmat").exists()
        assert tree_digest(b1) == tree_digest(b2)

    def test_factor_shapes_and_meta(self, tmp_path):
        cfg = small_config()
        bundle = harness.generate_bundle(cfg, tmp_path / "b")
        covs = harness.load_realization(bundle, 0)
        assert len(covs) == cfg.num_users
        meta = json.loads((bundle / "realizations" / "r0000" / "meta.json").read_text())
        for cov, user_meta in zip(covs, meta["users"]):
            assert cov.factor.shape == (cfg.num_antennas, user_meta["rank"])
            assert user_meta["captured_energy"] >= cfg.energy_threshold
            assert len(user_meta["scatterers"]) == cfg.num_scatterers

    def test_single_scatterer_gives_rank_one(self, tmp_path):
        cfg = small_config(num_scatterers=1)
        bundle = harness.generate_bundle(cfg, tmp_path / "b")
        covs = harness.load_realization(bundle, 0)
        assert all(c.retained_rank == 1 for c in covs)


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    cfg = small_config()
    return harness.generate_bundle(cfg, tmp_path_factory.mktemp("bundle"))


class TestDesignAndSweep:
    def test_design_writes_records_and_pilots(self, bundle):
        records = harness.design_bundle(bundle, 1e-4)
        assert len(records) == 2
        for record in records:
            assert record.status == "ok"
            assert record.within_budget
            assert 0 < record.pilot_length <= 3
            assert record.achieved_max_error > 0
            pilots = read_cmat(
                bundle / "designs" / "eps_1.000000e-04" / f"pilots_r{record.realization_index:04d}.cmat"
            )
            assert pilots.shape == (record.pilot_length, 3)
            assert len(record.pilot_energies) == 3

    def test_design_rerun_is_byte_identical(self, bundle):
        ddir = bundle / "designs" / "eps_1.000000e-04"
        harness.design_bundle(bundle, 1e-4)
        first = tree_digest(ddir)
        harness.design_bundle(bundle, 1e-4)
        assert tree_digest(ddir) == first

    def test_threads_do_not_change_output(self, bundle):
        harness.design_bundle(bundle, 1e-4, threads=1)
        single = tree_digest(bundle / "designs" / "eps_1.000000e-04")
        harness.design_bundle(bundle, 1e-4, threads=2)
        assert tree_digest(bundle / "designs" / "eps_1.000000e-04") == single

    def test_inactive_epsilon_gives_empty_pilots(self, bundle):
        records = harness.design_bundle(bundle, 2.0)
        assert all(r.pilot_length == 0 for r in records)

    def test_sweep_aggregates_recomputable(self, bundle):
        path = harness.sweep_bundle(bundle)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("epsilon,")
        assert len(lines) == 3
        for line, epsilon in zip(lines[1:], (1e-4, 1e-3)):
            cells = line.split(",")
            assert float(cells[0]) == epsilon
            runs = (
                bundle / "designs" / f"eps_{harness.eps_tag(epsilon)}" / "runs.csv"
            ).read_text().strip().splitlines()[1:]
            lengths = np.array([int(r.split(",")[5]) for r in runs], dtype=float)
            errors = np.array([float(r.split(",")[8]) for r in runs])
            assert abs(float(cells[1]) - lengths.mean()) < 1e-12
            assert abs(float(cells[2]) - lengths.std()) < 1e-12
            assert abs(float(cells[3]) - errors.mean()) < 1e-12

    def test_verify_round_trip(self, bundle):
        harness.design_bundle(bundle, 1e-4)
        rows = harness.verify_bundle(bundle, 1e-4, empirical_trials=500)
        assert len(rows) == 2
        for row in rows:
            assert row["within_budget"]
            assert row["identifiable"] in (True, False)
            assert float(row["empirical_max_dim_error"]) > 0
        assert (bundle / "designs" / "eps_1.000000e-04" / "verify.csv").exists()

    def test_verify_flags_zero_pilot(self, bundle, tmp_path):
        harness.design_bundle(bundle, 1e-4)
        ddir = bundle / "designs" / "eps_1.000000e-04"
        target = ddir / "pilots_r0000.cmat"
        original = target.read_bytes()
        try:
            write_cmat(target, np.zeros((1, 3)))
            rows = harness.verify_bundle(bundle, 1e-4)
            assert not rows[0]["within_budget"]
            assert not rows[0]["identifiable"]
        finally:
            target.write_bytes(original)

    def test_verify_missing_pilots_raises(self, bundle):
        with pytest.raises(FileNotFoundError):
            harness.verify_bundle(bundle, 5e-2)

    def test_report_histograms(self, bundle):
        harness.design_bundle(bundle, 1e-4)
        summary = harness.report_bundle(bundle, 1e-4, bins=10)
        assert summary["num_runs"] == 2
        ddir = bundle / "designs" / "eps_1.000000e-04"
        hist = (ddir / "hist_pilot_length.csv").read_text().strip().splitlines()
        counts = sum(int(line.split(",")[2]) for line in hist[1:])
        assert counts == 2
        assert (ddir / "hist_achieved_error.csv").exists()


class TestCli:
    def test_full_cli_cycle(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(small_config().to_json())
        bundle = tmp_path / "bundle"
        assert main(["generate", "--config", str(cfg_path), "--out", str(bundle)]) == 0
        assert (
            main(["design", "--bundle", str(bundle), "--epsilon", "1e-4", "--csv"]) == 0
        )
        assert (bundle / "designs" / "eps_1.000000e-04" / "pilots_r0000.csv").exists()
        assert (
            main(
                ["sweep", "--bundle", str(bundle), "--epsilon-grid", "1e-4,1e-3"]
            )
            == 0
        )
        assert main(["verify", "--bundle", str(bundle), "--epsilon", "1e-4"]) == 0
        assert main(["report", "--bundle", str(bundle), "--epsilon", "1e-4"]) == 0

    def test_generate_overrides(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(small_config().to_json())
        bundle = tmp_path / "bundle"
        rc = main(
            [
                "generate",
                "--config",
                str(cfg_path),
                "--out",
                str(bundle),
                "--realizations",
                "1",
                "--seed",
                "99",
            ]
        )
        assert rc == 0
        cfg = harness.load_config(bundle)
        assert cfg.num_realizations == 1
        assert cfg.master_seed == 99
        assert not (bundle / "realizations" / "r0001").exists()

    def test_missing_config_is_io_error(self, tmp_path):
        rc = main(
            ["generate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "b")]
        )
        assert rc == 1

    def test_unscaled_pilot_flag(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(small_config(num_realizations=1).to_json())
        bundle = tmp_path / "bundle"
        main(["generate", "--config", str(cfg_path), "--out", str(bundle)])
        rc = main(
            [
                "design",
                "--bundle",
                str(bundle),
                "--epsilon",
                "1e-3",
                "--unscaled-pilots",
            ]
        )
        assert rc in (0, 3)  # unscaled rows may miss the budget; flag propagates
        pilots = read_cmat(bundle / "designs" / "eps_1.000000e-03" / "pilots_r0000.cmat")
        if pilots.shape[0]:
            assert np.allclose(np.linalg.norm(pilots, axis=1), 1.0)


def test_sweep_rejects_empty_grid(tmp_path):
    cfg = small_config(num_realizations=1)
    b = harness.generate_bundle(cfg, tmp_path / "b")
    with pytest.raises(ValueError):
        harness.sweep_bundle(b, epsilon_grid=[])
