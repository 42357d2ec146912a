import csv
from pathlib import Path

import pytest

from mdiqkd.cli import main
from mdiqkd.config import (
    ConfigError,
    build_system,
    parse_config_text,
    render_manifest,
    resolve,
)
from mdiqkd.params import FixedAngles, GaussianMC


class TestConfigParsing:
    def test_comments_and_blanks_ignored(self):
        text = "# a comment\n\nsystem.eta_d = 0.2\n  system.y0 = 1e-5  \n"
        raw = parse_config_text(text)
        assert raw == {"system.eta_d": "0.2", "system.y0": "1e-5"}

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("system.eta_d 0.2")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            resolve({"system.bogus": "1"})

    def test_typed_values(self):
        resolved = resolve(
            {
                "system.eta_d": "0.2",
                "system.mc_samples": "128",
                "run.tie_parties": "true",
            }
        )
        assert resolved["system.eta_d"] == 0.2
        assert resolved["system.mc_samples"] == 128
        assert resolved["run.tie_parties"] is True

    def test_bad_float_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            resolve({"system.eta_d": "abc"})

    def test_build_system_modes(self):
        assert isinstance(
            build_system(resolve({})).misalignment_mode, GaussianMC
        )
        fixed = build_system(
            resolve({"system.misalignment": "fixed", "system.theta1": "0.1"})
        )
        assert isinstance(fixed.misalignment_mode, FixedAngles)
        reduction = build_system(resolve({"system.misalignment": "reduction"}))
        assert isinstance(reduction.misalignment_mode, FixedAngles)

    def test_manifest_contains_every_key(self):
        resolved = resolve({})
        manifest = render_manifest(resolved, {"run.command": "simulate"})
        for key in resolved:
            assert f"{key} = " in manifest
        assert "run.command = simulate" in manifest


def _read_csv(path: Path) -> list[dict[str, str]]:
    with path.open() as handle:
        return list(csv.DictReader(handle))


@pytest.fixture()
def fast_config(tmp_path: Path) -> Path:
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(
        "system.misalignment = reduction\n"
        "system.e_m = 0\n"
        "channel.l_ac_km = 10\n"
        "channel.l_bc_km = 10\n"
    )
    return cfg


class TestSubcommands:
    def test_simulate_writes_gain_table_and_manifest(self, fast_config, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(fast_config), "--out", str(out)]) == 0
        rows = _read_csv(out / "gain_table.csv")
        assert len(rows) == 18
        assert set(rows[0]) == {"basis", "q_a", "q_b", "Q", "EQ"}
        manifest = (out / "manifest.txt").read_text()
        assert "system.eta_d = 0.14499999999999999" in manifest
        assert "run.command = simulate" in manifest

    def test_decoy_bounds_outputs(self, fast_config, tmp_path):
        out = tmp_path / "out"
        assert main(["decoy-bounds", "--config", str(fast_config), "--out", str(out)]) == 0
        bounds = _read_csv(out / "bounds.csv")[0]
        assert float(bounds["y11_z_lower"]) > 0
        assert bounds["case_z"] == "Case1"
        rate = _read_csv(out / "rate.csv")[0]
        assert rate["mode"] == "TwoDecoyBounds"
        assert float(rate["rate"]) > 0

    def test_optimize_asymptotic(self, fast_config, tmp_path):
        cfg = fast_config.read_text() + "run.mode = asymptotic\nrun.tie_parties = true\n"
        cfg_path = tmp_path / "opt.cfg"
        cfg_path.write_text(cfg)
        out = tmp_path / "out"
        assert main(["optimize", "--config", str(cfg_path), "--out", str(out)]) == 0
        row = _read_csv(out / "optimum.csv")[0]
        assert float(row["rate"]) > 0
        assert row["converged"] == "true"

    def test_sweep_fig7_small(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text("sweep.y0_values = 1e-6, 1e-3\nsweep.l_total_values = 0\n")
        out = tmp_path / "out"
        assert main(["sweep", "--preset", "fig7", "--config", str(cfg), "--out", str(out)]) == 0
        rows = _read_csv(out / "fig7.csv")
        assert [r["y0"] for r in rows] == ["9.9999999999999995e-07", "0.001"]
        assert float(rows[0]["rate"]) > 0
        manifest = (out / "manifest.txt").read_text()
        assert "run.preset = fig7" in manifest
        assert "sweep.y0_values = 9.9999999999999995e-07,0.001" in manifest

    def test_sweep_rejects_foreign_sweep_key(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text("sweep.e_d_values = 0.01\n")
        out = tmp_path / "out"
        code = main(["sweep", "--preset", "fig7", "--config", str(cfg), "--out", str(out)])
        assert code == 2

    def test_missing_config_file_is_config_error(self, tmp_path):
        code = main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_selftest_passes(self, capsys):
        assert main(["selftest", "--out", None] if False else ["selftest"]) == 0
        output = capsys.readouterr().out
        assert "engine-vs-closed-form: PASS" in output
        assert "decoy-sandwich: PASS" in output
        assert "energy-conservation: PASS" in output

    def test_threads_give_identical_rows(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text("sweep.y0_values = 1e-6, 1e-4\nsweep.l_total_values = 0\n")
        outs = []
        for threads, name in ((1, "a"), (3, "b")):
            out = tmp_path / name
            assert main([
                "sweep", "--preset", "fig7", "--config", str(cfg),
                "--out", str(out), "--threads", str(threads),
            ]) == 0
            outs.append((out / "fig7.csv").read_bytes())
        assert outs[0] == outs[1]


class TestPresetSmoke:
    """Each preset runs end to end on a reduced grid and emits its files."""

    @pytest.mark.parametrize(
        "preset,overrides,expected",
        [
            (
                "fig5",
                "sweep.e_m_values = 0.0, 0.5\nsweep.l_total_values = 0\n",
                ["fig5.csv"],
            ),
            (
                "fig6-asymptotic",
                "sweep.l_total_values = 20\n",
                ["fig6_asymptotic.csv"],
            ),
            (
                "fig8",
                "sweep.l_bc_values = 0\nsweep.modes = asymptotic\n",
                ["fig8.csv"],
            ),
            (
                "fig9",
                "sweep.l_bc_values = 0.001\nsweep.l_ac_values = 20, 40\n",
                ["fig9.csv", "fig9_tolerable_x.csv"],
            ),
            (
                "fig10",
                "sweep.l_ac_values = 10, 30\nsweep.l_bc_values = 10\n",
                ["fig10.csv"],
            ),
            (
                "fig11",
                "sweep.x_values = 0.9\nsweep.l_bc_values = 0, 10\n"
                "sweep.modes = asymptotic\n",
                ["fig11.csv"],
            ),
            (
                "table4",
                "sweep.l_bc_values = 0\nsweep.modes = asymptotic\n",
                ["table4.csv"],
            ),
        ],
    )
    def test_preset_runs(self, tmp_path, preset, overrides, expected):
        cfg = tmp_path / "cfg"
        cfg.write_text(overrides)
        out = tmp_path / "out"
        assert main(["sweep", "--preset", preset, "--config", str(cfg), "--out", str(out)]) == 0
        for name in expected:
            rows = _read_csv(out / name)
            assert rows, name
            for row in rows:
                for value in row.values():
                    assert value != ""
        assert (out / "manifest.txt").exists()


class TestExternalGainTable:
    def test_measured_csv_feeds_estimator(self, tmp_path):
        # the estimator consumes only the 18 observables, so an externally
        # produced table loads from CSV and runs through the bounds
        from mdiqkd import ChannelGeometry, GainTable, SystemParams
        from mdiqkd import build_gain_table, decoy_bounds, reduction_angles
        from mdiqkd import symmetric_intensities

        params = SystemParams(misalignment_mode=reduction_angles(0.015), e_m=0.0)
        geometry = ChannelGeometry(15.0, 15.0)
        settings = symmetric_intensities(0.3, 0.1, 5e-4)
        text = build_gain_table(settings, geometry, params).to_csv()
        path = tmp_path / "measured.csv"
        path.write_text(text)
        loaded = GainTable.from_csv(path.read_text(), settings)
        bounds = decoy_bounds(loaded, settings)
        assert 0 < bounds.y11_z_lower <= 1
        assert 0 <= bounds.e11_x_upper <= 1


class TestDeterminism:
    def test_fig3_runs_byte_identical(self, tmp_path):
        cfg = tmp_path / "fig3.cfg"
        cfg.write_text(
            "sweep.e_d_values = 0.0, 0.04\n"
            "sweep.l_total_values = 0\n"
            "system.mc_samples = 64\n"
        )
        payloads = []
        for name in ("run1", "run2"):
            out = tmp_path / name
            assert main([
                "sweep", "--preset", "fig3", "--config", str(cfg),
                "--out", str(out), "--seed", "1",
            ]) == 0
            payloads.append(
                ((out / "fig3.csv").read_bytes(), (out / "manifest.txt").read_bytes())
            )
        assert payloads[0] == payloads[1]
