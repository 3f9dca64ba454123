import csv
import json
from pathlib import Path

import numpy as np
import pytest

from meandim.cli import main
from meandim.nn import save_network
from meandim.output import write_pgm16


def run(args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


ADDITIVE3 = {
    "kind": "additive",
    "mu": 0.0,
    "factors": [{"dist": {"kind": "uniform01"}, "g": {"form": "identity"}}] * 3,
}


@pytest.fixture
def additive_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"function": ADDITIVE3, "N": 10_000, "seed": 42}))
    return path


class TestEstimate:
    def test_all_strategies_near_one(self, tmp_path, additive_config, capsys):
        out = tmp_path / "out"
        assert run(["estimate", "--config", additive_config, "--out-dir", out]) == 0
        rows = read_csv(out / "estimates.csv")
        assert len(rows) == 4
        for row in rows:
            assert abs(float(row["nu_hat"]) - 1.0) < 0.05
        payload = json.loads((out / "estimates.json").read_text())
        assert len(payload["records"]) == 4

    def test_byte_reproducible(self, tmp_path, additive_config):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run(["estimate", "--config", additive_config, "--out-dir", out1])
        run(["estimate", "--config", additive_config, "--out-dir", out2])
        assert (out1 / "estimates.csv").read_bytes() == (out2 / "estimates.csv").read_bytes()
        assert (out1 / "estimates.json").read_bytes() == (out2 / "estimates.json").read_bytes()

    def test_missing_config_exits_2_no_output(self, tmp_path):
        out = tmp_path / "out"
        assert run(["estimate", "--config", tmp_path / "nope.json", "--out-dir", out]) == 2
        assert not out.exists()

    def test_missing_seed_exits_2(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"function": ADDITIVE3, "N": 100}))
        assert run(["estimate", "--config", cfg, "--out-dir", tmp_path / "o"]) == 2

    def test_bad_descriptor_exits_2(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"function": {"kind": "ridge"}, "N": 10, "seed": 1}))
        assert run(["estimate", "--config", cfg, "--out-dir", tmp_path / "o"]) == 2

    def test_model_override_from_mdhs_fixture(self, tmp_path, fixture_histograms):
        mdhs_dir = tmp_path / "mdhs"
        path = [p for p in fixture_histograms.save(mdhs_dir) if "combined" in p.name][0]
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "function": {
                "kind": "additive",
                "mu": 0.0,
                "factors": [{"dist": {"kind": "uniform01"},
                             "g": {"form": "identity"}}] * 100,
            },
            "model": {"mdhs": str(path), "mode": "atoms"},
            "N": 2000, "seed": 8,
        }))
        out = tmp_path / "out"
        assert run(["estimate", "--config", cfg, "--out-dir", out,
                    "--strategy", "winding-truncated"]) == 0
        rows = read_csv(out / "estimates.csv")
        assert abs(float(rows[0]["nu_hat"]) - 1.0) < 0.05

    def test_missing_mdhs_fixture_exits_2(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "function": ADDITIVE3,
            "model": {"mdhs": str(tmp_path / "missing.mdhs")},
            "N": 100, "seed": 1,
        }))
        out = tmp_path / "out"
        assert run(["estimate", "--config", cfg, "--out-dir", out]) == 2
        assert not out.exists()

    def test_strategy_override(self, tmp_path, additive_config):
        out = tmp_path / "out"
        assert run(["estimate", "--config", additive_config, "--out-dir", out,
                    "--strategy", "radial", "--N", "2000"]) == 0
        rows = read_csv(out / "estimates.csv")
        assert [r["strategy"] for r in rows] == ["radial"]
        assert rows[0]["N"] == "2000"


class TestCompareVariance:
    def test_oracle_columns_and_ratios(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "function": {
                "kind": "product",
                "factors": [{"dist": {"kind": "gaussian"},
                             "g": {"form": "identity"}}] * 2,
            },
            "N": 64, "R": 300, "seed": 5,
        }))
        out = tmp_path / "out"
        assert run(["compare-variance", "--config", cfg, "--out-dir", out]) == 0
        rows = read_csv(out / "variances.csv")
        assert len(rows) == 4
        for row in rows:
            ratio = float(row["ratio_emp_oracle"])
            assert 0.5 < ratio < 2.0
        summary = json.loads((out / "variances.json").read_text())
        assert "ratio_radial_over_naive" in summary
        assert "ratio_radial_over_truncated" in summary
        assert summary["kurtosis_flags"] == [True, True]

    def test_small_R_warns(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"function": ADDITIVE3, "N": 50, "R": 10, "seed": 2}))
        assert run(["compare-variance", "--config", cfg,
                    "--out-dir", tmp_path / "o"]) == 0
        assert "noisy" in capsys.readouterr().err


class TestOracles:
    def test_dump(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "function": {
                "kind": "product",
                "factors": [{"dist": {"kind": "gaussian"},
                             "g": {"form": "identity"}}] * 3,
            },
            "N": 1, "seed": 1,
        }))
        out = tmp_path / "out"
        assert run(["oracles", "--config", cfg, "--out-dir", out]) == 0
        rows = {r["strategy"]: float(r["n_times_variance"])
                for r in read_csv(out / "oracles.csv")}
        assert rows["naive"] == pytest.approx(78.0)
        assert rows["radial"] == pytest.approx(144.0)
        payload = json.loads((out / "oracles.json").read_text())
        assert payload["nu"] == pytest.approx(3.0)

    def test_two_norm_has_no_oracle(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"function": {"kind": "two_norm", "d": 2},
                                   "N": 4, "seed": 1}))
        assert run(["oracles", "--config", cfg, "--out-dir", tmp_path / "o"]) == 2


class TestHistogramsCommand:
    def test_two_image_archive(self, tmp_path):
        from meandim.nn import write_idx_images, write_idx_labels

        write_idx_images(tmp_path / "imgs", np.stack([
            np.zeros((4, 4), dtype=np.uint8),
            np.full((4, 4), 255, dtype=np.uint8),
        ]))
        write_idx_labels(tmp_path / "lbls", np.array([0, 1], dtype=np.uint8))
        out = tmp_path / "out"
        assert run(["histograms", "--images", tmp_path / "imgs",
                    "--labels", tmp_path / "lbls", "--levels", "2",
                    "--out-dir", out]) == 0
        from meandim.nn import load_histograms

        class_id, hists = load_histograms(out / "h_combined.mdhs")
        assert class_id == -1
        for h in hists:
            assert np.allclose(h.probs, [0.5, 0.5])

    def test_unreadable_archive_exits_2(self, tmp_path):
        assert run(["histograms", "--images", tmp_path / "none",
                    "--labels", tmp_path / "none2", "--out-dir", tmp_path / "o"]) == 2


class TestMapsCommand:
    def test_constant_net_all_black_pgm(self, tmp_path, constant_net):
        net_path = tmp_path / "net.mdnn"
        save_network(constant_net, net_path)
        out = tmp_path / "out"
        assert run(["maps", "--net", net_path, "--y", "0", "--N", "100",
                    "--seed", "3", "--out-dir", out]) == 0
        pgm = (out / "map_total_g0_uniform.pgm").read_bytes()
        header, pixels = pgm.split(b"65535\n", 1)
        assert header == b"P5\n10 10\n"
        assert pixels == b"\x00" * 200

    def test_missing_net_exits_2(self, tmp_path):
        assert run(["maps", "--net", tmp_path / "none.mdnn", "--y", "0",
                    "--seed", "1", "--out-dir", tmp_path / "o"]) == 2

    def test_nonfinite_weights_exit_3(self, tmp_path):
        import numpy as np

        from meandim.nn import Dense, Flatten, NetworkSpec

        w = np.zeros((100, 10), dtype=np.float32)
        w[0, 0] = np.inf
        net = NetworkSpec((10, 10, 1), [Flatten(), Dense(w, np.zeros(10, dtype=np.float32))])
        net_path = tmp_path / "inf.mdnn"
        save_network(net, net_path)
        assert run(["maps", "--net", net_path, "--y", "0", "--N", "50",
                    "--seed", "1", "--out-dir", tmp_path / "o"]) == 3

    def test_map_reproducible(self, tmp_path, single_pixel_net):
        net_path = tmp_path / "net.mdnn"
        save_network(single_pixel_net, net_path)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run(["maps", "--net", net_path, "--y", "0", "--N", "300",
                        "--seed", "7", "--out-dir", out]) == 0
            outs.append((out / "map_total_g0_uniform.pgm").read_bytes())
        assert outs[0] == outs[1]


class TestReportCommand:
    def test_identity_net_near_one(self, tmp_path, identity_net):
        net_path = tmp_path / "net.mdnn"
        save_network(identity_net, net_path)
        out = tmp_path / "out"
        assert run(["report", "--net", net_path, "--samplers", "uniform",
                    "--targets", "g", "--y", "0", "1", "--N", "8000",
                    "--seed", "9", "--out-dir", out]) == 0
        rows = read_csv(out / "report.csv")
        assert len(rows) == 2
        for row in rows:
            assert abs(float(row["nu_hat"]) - 1.0) < 0.05
            assert row["degenerate"] == "false"

    def test_schema_stable(self, tmp_path, identity_net):
        net_path = tmp_path / "net.mdnn"
        save_network(identity_net, net_path)
        out = tmp_path / "out"
        run(["report", "--net", net_path, "--samplers", "binary", "--targets", "g",
             "--y", "0", "--N", "500", "--seed", "1", "--out-dir", out])
        rows = read_csv(out / "report.csv")
        assert set(rows[0]) == {
            "sampler", "target", "y", "nu_hat", "delta_hat", "sigma2_hat",
            "se_delta", "degenerate", "n_evals", "strategy", "N", "seed",
        }

    def test_pivot_tables(self, tmp_path, identity_net, constant_net):
        net_path = tmp_path / "net.mdnn"
        save_network(identity_net, net_path)
        out = tmp_path / "out"
        run(["report", "--net", net_path, "--samplers", "binary", "uniform",
             "--targets", "g", "--y", "0", "1", "2", "--N", "500", "--seed", "1",
             "--out-dir", out])
        pivot = read_csv(out / "report_g.csv")
        assert [r["sampler"] for r in pivot] == ["binary", "uniform"]
        assert set(pivot[0]) == {"sampler", "0", "1", "2"}
        float(pivot[0]["1"])  # numeric cells parse
        # degenerate cells are marked, not numeric
        const_path = tmp_path / "const.mdnn"
        save_network(constant_net, const_path)
        run(["report", "--net", const_path, "--samplers", "uniform",
             "--targets", "g", "--y", "0", "--N", "200", "--seed", "1",
             "--out-dir", tmp_path / "out2"])
        pivot2 = read_csv(tmp_path / "out2" / "report_g.csv")
        assert pivot2[0]["0"] == "degenerate"


class TestPgmWriter:
    def test_gradient_encoding(self, tmp_path):
        values = np.array([[0.0, 0.5], [1.0, 2.0]])
        path = write_pgm16(tmp_path / "g.pgm", values)
        data = path.read_bytes()
        assert data.startswith(b"P5\n2 2\n65535\n")
        pix = np.frombuffer(data.split(b"65535\n", 1)[1], dtype=">u2").reshape(2, 2)
        assert pix[1, 1] == 65535  # max
        assert pix[0, 1] == round(0.5 / 2.0 * 65535)
        assert pix[0, 0] == 0
