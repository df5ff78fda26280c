import hashlib
import json

import numpy as np
import pytest

from cvqkd.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = text.strip().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    columns = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return meta, columns, rows


class TestRate:
    def test_preset_short_distance_positive(self, capsys):
        code, out, _ = run(capsys, "rate", "--preset", "fig5", "--loss-db", "2")
        assert code == 0
        obj = json.loads(out)
        assert obj["positive"] is True
        assert obj["rate_bits_per_symbol"] > 0
        assert obj["meta"]["t_q_star"] < 10 ** (-0.2)
        assert obj["distance_km"] == pytest.approx(10.0)

    def test_preset_long_distance_negative(self, capsys):
        code, out, _ = run(capsys, "rate", "--preset", "fig5", "--loss-db", "12")
        assert code == 0
        obj = json.loads(out)
        assert obj["positive"] is False

    def test_invalid_beta_exits_2(self, capsys):
        code, _, err = run(capsys, "rate", "--preset", "fig5", "--loss-db", "2",
                           "--beta", "1.5")
        assert code == 2
        assert "beta" in err

    def test_unsolvable_parameters_exit_3(self, capsys):
        code, _, err = run(capsys, "rate", "--mu", "31", "--kappa-p", "0.0001",
                           "--eta", "0.99", "--loss-db", "2")
        assert code == 3
        assert "no real solution" in err

    def test_distance_flag_matches_loss_flag(self, capsys):
        _, out1, _ = run(capsys, "rate", "--preset", "fig5", "--loss-db", "2")
        _, out2, _ = run(capsys, "rate", "--preset", "fig5", "--distance-km", "10")
        assert json.loads(out1)["rate_bits_per_symbol"] == \
            json.loads(out2)["rate_bits_per_symbol"]

    def test_missing_channel_point_exits_2(self, capsys):
        code, _, err = run(capsys, "rate", "--preset", "fig5")
        assert code == 2
        assert "loss-db" in err


class TestRegionAndSweep:
    def test_region_csv_shape(self, capsys):
        code, out, _ = run(capsys, "region", "--preset", "fig2a",
                           "--grid-points", "11")
        assert code == 0
        meta, columns, rows = parse_csv(out)
        assert columns == ["t_p", "t_q", "physical", "rate"]
        assert len(rows) == 121
        assert meta["scenario"] == "fig2a"
        physical = [r for r in rows if r[2] == "1"]
        assert 0 < len(physical) < len(rows)

    def test_sweep_csv(self, capsys):
        code, out, _ = run(capsys, "sweep", "--preset", "fig5",
                           "--loss-grid", "1:3:1")
        assert code == 0
        meta, columns, rows = parse_csv(out)
        assert columns == ["loss_db", "distance_km", "mu", "rate"]
        assert [float(r[0]) for r in rows] == [1.0, 2.0, 3.0]
        assert [float(r[1]) for r in rows] == [5.0, 10.0, 15.0]
        rates = [float(r[3]) for r in rows]
        assert rates[0] > rates[1] > rates[2]

    def test_optimize_kappa_p(self, capsys):
        code, out, _ = run(capsys, "optimize", "--preset", "fig4b",
                           "--loss-db", "2", "--variable", "kappa_p",
                           "--bounds", "0:10")
        assert code == 0
        obj = json.loads(out)
        assert obj["argmax"] > 0.5
        assert obj["boundary_hit"] is False


class TestSimulateAndEstimate:
    def test_simulate_deterministic_output(self, capsys):
        hashes = []
        for _ in range(2):
            code, out, _ = run(capsys, "simulate", "--preset", "fig5",
                               "--loss-db", "3", "--samples", "5000",
                               "--seed", "7")
            assert code == 0
            hashes.append(hashlib.sha256(out.encode()).hexdigest())
        assert hashes[0] == hashes[1]

    def test_simulate_header_and_columns(self, capsys):
        _, out, _ = run(capsys, "simulate", "--preset", "fig5", "--loss-db", "3",
                        "--samples", "10", "--seed", "1")
        meta, columns, rows = parse_csv(out)
        assert meta["seed"] == 1
        assert meta["source"]["mu"] == 31.2
        assert columns == ["index", "basis", "alice_p", "bob_q", "bob_p"]
        assert len(rows) == 10

    def test_estimate_round_trip(self, tmp_path, capsys):
        common = ["--preset", "fig5", "--samples", "150000"]
        files = {}
        for name, loss, seed, extra in (
                ("data", "3.0103", 21, []),
                ("cal", "0", 22, []),
                ("vac", "0", 23, ["--mu", "1", "--kappa-p", "0", "--kappa-q", "0"])):
            path = tmp_path / f"{name}.csv"
            code, _, _ = run(capsys, "simulate", *common, "--loss-db", loss,
                             "--seed", str(seed), *extra, "--out", str(path))
            assert code == 0
            files[name] = str(path)
        code, out, _ = run(capsys, "estimate",
                           "--data", files["data"],
                           "--calibration", files["cal"],
                           "--vacuum", files["vac"],
                           "--preset", "fig5", "--rate")
        assert code == 0
        obj = json.loads(out)
        assert obj["estimate"]["t_p_hat"] == pytest.approx(0.5, abs=0.02)
        assert obj["estimate"]["mu_hat"] == pytest.approx(31.2, rel=0.05)
        assert "rate_bits_per_symbol" in obj["rate"]

    def test_ndjson_output(self, capsys):
        code, out, _ = run(capsys, "simulate", "--preset", "fig5", "--loss-db", "3",
                           "--samples", "5", "--seed", "1", "--format", "ndjson")
        assert code == 0
        lines = out.strip().splitlines()
        assert json.loads(lines[0])["_meta"]["seed"] == 1
        assert json.loads(lines[1])["basis"] == "B"


class TestScenarioFile:
    def test_ini_scenario(self, tmp_path, capsys):
        path = tmp_path / "run.ini"
        path.write_text("""
[scenario]
name = custom-run

[source]
mu = 31.2
kappa_p = 0.025
kappa_q = 0.07

[channel]
loss_db = 2.0
w_p = 1.005
w_q = 1.004

[config]
detection = heterodyne
reconciliation = reverse
beta = 0.97
""")
        code, out, _ = run(capsys, "rate", "--scenario", str(path))
        assert code == 0
        obj = json.loads(out)
        assert obj["meta"]["scenario"] == "custom-run"
        assert obj["positive"] is True

    def test_unknown_key_rejected(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[source]\nmu = 4\nbogus = 1\n")
        code, _, err = run(capsys, "rate", "--scenario", str(path))
        assert code == 2
        assert "bogus" in err


class TestFigure:
    def test_fig2a_bundle(self, tmp_path, capsys):
        code, out, _ = run(capsys, "figure", "fig2a", "--grid-points", "21",
                           "--out", str(tmp_path))
        assert code == 0
        path = out.strip()
        meta, columns, rows = parse_csv(open(path).read())
        assert columns == ["t_p", "t_q", "physical", "rate"]
        # positive cells form a band containing the diagonal
        positive = {(float(r[0]), float(r[1])) for r in rows
                    if r[2] == "1" and float(r[3]) > 0}
        assert positive
        diag = [t for (tp, tq) in positive for t in (tp,) if tp == tq and tp >= 0.3]
        assert diag
        assert all(abs(tp - tq) < 0.2 for tp, tq in positive)

    def test_fig4b_has_interior_kappa_maximum(self, tmp_path, capsys):
        code, out, _ = run(capsys, "figure", "fig4b", "--out", str(tmp_path))
        assert code == 0
        meta, columns, rows = parse_csv(open(out.strip()).read())
        assert columns == ["loss_db", "distance_km", "kappa_p", "rate"]
        two_db = [(float(r[2]), float(r[3])) for r in rows if float(r[0]) == 2.0]
        kappas = [k for k, _ in two_db]
        rates = [r for _, r in two_db]
        best = int(np.argmax(rates))
        assert 0 < best < len(rates) - 1
        assert kappas[best] > 0

    def test_out_dir_from_environment(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("CVQKD_OUT_DIR", str(tmp_path))
        code, out, _ = run(capsys, "figure", "fig2a", "--grid-points", "5")
        assert code == 0
        assert out.strip().startswith(str(tmp_path))
