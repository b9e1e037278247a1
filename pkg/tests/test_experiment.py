import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oldroydb import cli
from oldroydb import diagnostics as dg
from oldroydb.errors import ConfigurationError
from oldroydb.experiment import (emit_outputs, parse_config, parse_text, resolve_threads,
                                 run_scenario)
from oldroydb.snapshot import read_snapshot

TINY = "n = 16\ndt = 0.01\nt_end = 0.1\noutput_stride = 2\ninit.kmax = 4\n"


class TestParse:
    def test_minimal_defaults(self, tmp_path):
        path = tmp_path / "s.cfg"
        path.write_text("kind = decay-smalldata\n")
        sc = parse_config(path)
        assert (sc.config.dim, sc.config.n, sc.config.dt) == (2, 64, 2e-3)
        assert sc.config.t_end == 20.0
        assert "dim = 2\nn = 64\ndt = 0.002\n" in sc.resolved_text()

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="foo"):
            parse_text("kind = besov-track\nfoo = 1\n")

    @pytest.mark.parametrize("text,key", [
        ("n = 32\n", "kind"),
        ("kind = nope\n", "kind"),
        ("kind = besov-track\nn = many\n", "n"),
        ("kind = besov-track\nn = 3.5\n", "n"),
        ("kind = besov-track\nnonlinear = maybe\n", "nonlinear"),
        ("kind = besov-track\nbesov = 1:2\n", "besov"),
        ("kind = besov-track\nsweep = 1, 2\n", "sweep"),
        ("kind = large-stress-probe\ninit.div_free_tau = false\n", "init.div_free_tau"),
        ("kind = besov-track\nn = 32\nn = 64\n", "n"),
        ("kind = besov-track\nband = 1\n", "band"),
    ])
    def test_errors_name_the_key(self, text, key):
        with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
            parse_text(text)

    def test_invalid_values(self):
        with pytest.raises(ConfigurationError):
            parse_text("kind = besov-track\ndt = -1\n")
        with pytest.raises(ConfigurationError):
            parse_text("kind = besov-track\nbesov = 0:3:1\n")

    def test_comments_and_overrides(self):
        sc = parse_text("# header\nkind = besov-track  # trailing\n\nseed = 4\n",
                        overrides={"seed": 9, "out_dir": "x"})
        assert sc.config.seed == 9 and sc.out_dir == "x"

    def test_kind_defaults(self):
        sc = parse_text("kind = large-stress-probe\n")
        assert sc.config.a == 1.0 and sc.config.init.div_free_tau
        assert sc.config.init.tau_h3 == 1.0 and sc.config.init.u_h3 == 1e-3

    @settings(max_examples=40, deadline=None)
    @given(kind=st.sampled_from(["decay-smalldata", "besov-track", "convergence-study",
                                 "large-stress-probe", "linear-verify"]),
           n=st.sampled_from([8, 16, 64]), dt=st.floats(1e-5, 1.0),
           alpha=st.floats(-1, 1), seed=st.integers(0, 2**31),
           sweep=st.lists(st.floats(1e-6, 1.0), max_size=3),
           s=st.floats(-2, 3), p=st.sampled_from([2.0, np.inf]))
    def test_round_trip(self, kind, n, dt, alpha, seed, sweep, s, p):
        lines = [f"kind = {kind}", f"n = {n}", f"dt = {dt!r}", f"alpha = {alpha!r}",
                 f"seed = {seed}", f"besov = {s!r}:{p}:1, 0:2:2:1"]
        if sweep and kind in ("large-stress-probe", "convergence-study"):
            lines.append("sweep = " + ", ".join(repr(x) for x in sweep))
        sc = parse_text("\n".join(lines) + "\n")
        again = parse_text(sc.resolved_text())
        assert again == sc
        assert again.resolved_text() == sc.resolved_text()


class TestThreads:
    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("OLDB_THREADS", "3")
        assert resolve_threads(1) == 3

    def test_default_and_flag(self, monkeypatch):
        monkeypatch.delenv("OLDB_THREADS", raising=False)
        assert resolve_threads() == 1
        assert resolve_threads(4) == 4

    @pytest.mark.parametrize("value", ["0", "x"])
    def test_invalid(self, monkeypatch, value):
        monkeypatch.setenv("OLDB_THREADS", value)
        with pytest.raises(ConfigurationError):
            resolve_threads()


class TestEmit:
    def test_manifest_only(self, tmp_path):
        manifest = emit_outputs({}, tmp_path / "o", seeds=[1], config_hash="h")
        assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["manifest.json"]
        assert manifest == {"files": {}, "seeds": [1], "config_hash": "h"}

    def test_hashes(self, tmp_path):
        import hashlib

        manifest = emit_outputs({"a.csv": "x,y\n", "b.bin": b"\x00\x01"}, tmp_path)
        assert manifest["files"]["a.csv"] == hashlib.sha256(b"x,y\n").hexdigest()
        assert (tmp_path / "b.bin").read_bytes() == b"\x00\x01"
        assert json.loads((tmp_path / "manifest.json").read_text()) == manifest

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            emit_outputs({"a": "b"}, blocker / "sub")


class TestScenarios:
    def test_linear_verify(self, tmp_path):
        sc = parse_text("kind = linear-verify\nn = 32\n", {"out_dir": str(tmp_path)})
        res = run_scenario(sc)
        assert res.status == 0
        assert res.summary["max_kernel_rel_err"] <= 1e-10
        assert {"kernels.csv", "decay.csv", "summary.json", "config.resolved",
                "manifest.json"} <= {p.name for p in tmp_path.iterdir()}

    def test_decay_deterministic(self, tmp_path):
        text = "kind = decay-smalldata\n" + TINY + "snapshots = true\n"
        a = run_scenario(parse_text(text, {"out_dir": str(tmp_path / "a")}))
        first = (tmp_path / "a" / "manifest.json").read_bytes()
        run_scenario(parse_text(text, {"out_dir": str(tmp_path / "a")}))
        assert (tmp_path / "a" / "manifest.json").read_bytes() == first
        # another directory changes only the echoed out_dir
        b = run_scenario(parse_text(text, {"out_dir": str(tmp_path / "b")}))
        assert a.manifest["config_hash"] == b.manifest["config_hash"]
        for name in a.manifest["files"]:
            if name != "config.resolved":
                assert a.manifest["files"][name] == b.manifest["files"][name]
        tau = read_snapshot(tmp_path / "a" / "tau_final.oldb")
        assert tau.symmetric and tau.coeffs.shape == (2, 2, 16, 16)
        data = dg.read_energy_csv(tmp_path / "a" / "energy.csv")
        assert list(data) == list(dg.CSV_COLUMNS) and data["t"][-1] == pytest.approx(0.1)

    def test_schema_stable_across_alpha(self, tmp_path):
        outs = []
        for i, alpha in enumerate((0.0, 0.5)):
            text = "kind = besov-track\n" + TINY + f"alpha = {alpha}\nbesov = 0:2:1, 1:inf:2\n"
            outs.append(run_scenario(parse_text(text, {"out_dir": str(tmp_path / str(i))})))
        assert set(outs[0].files) == set(outs[1].files)
        for name in ("energy.csv", "norms.csv"):
            heads = [(tmp_path / str(i) / name).read_text().splitlines()[0] for i in range(2)]
            assert heads[0] == heads[1]
        assert outs[0].files["norms.csv"] != outs[1].files["norms.csv"]
        assert outs[0].manifest["config_hash"] != outs[1].manifest["config_hash"]

    def test_besov_track_rows(self, tmp_path):
        text = "kind = besov-track\n" + TINY + "besov = 0:2:1\n"
        res = run_scenario(parse_text(text, {"out_dir": str(tmp_path)}), write=False)
        rows = res.files["norms.csv"].splitlines()
        assert rows[0] == "t,field,s,p,r,value"
        # 6 samples x 6 fields (u, tau and their low/high parts)
        assert len(rows) == 1 + 6 * 6
        assert res.summary["time_norms"][0]["chemin_lerner"] > 0

    def test_probe_sweep_with_threads(self, tmp_path):
        text = "kind = large-stress-probe\n" + TINY + "sweep = 0.001, 0.1\n"
        sc = parse_text(text, {"out_dir": str(tmp_path)})
        serial = run_scenario(sc, threads=1, write=False)
        threaded = run_scenario(sc, threads=2, write=False)
        assert serial.files == threaded.files
        members = serial.summary["members"]
        assert [m["u_h3"] for m in members] == [0.001, 0.1]
        assert all(m["horizon"] == pytest.approx(0.1) and m["blowup"] == 0 for m in members)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_probe_blowup_is_a_datum(self, tmp_path):
        text = ("kind = large-stress-probe\nn = 16\ndt = 0.5\nt_end = 20\ninit.kmax = 4\n"
                "init.tau_h3 = 1000\nsweep = 100\n")
        res = run_scenario(parse_text(text), write=False)
        assert res.status == 0
        assert res.summary["members"][0]["blowup"] == 1

    def test_convergence_study(self):
        text = "kind = convergence-study\nn = 16\nt_end = 0.2\ninit.kmax = 4\nsweep = 0.02, 0.01\n"
        res = run_scenario(parse_text(text), write=False)
        assert res.summary["dts"] == [0.02, 0.01]
        assert res.summary["errors"][0] > res.summary["errors"][1] > 0

    def test_convergence_bad_dt(self):
        text = "kind = convergence-study\nn = 16\nt_end = 0.1\nsweep = 0.03, 0.01\n"
        with pytest.raises(ConfigurationError):
            run_scenario(parse_text(text), write=False)


class TestCli:
    def write(self, tmp_path, text):
        path = tmp_path / "s.cfg"
        path.write_text(text)
        return str(path)

    def test_run(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "kind = besov-track\n" + TINY)
        out = tmp_path / "out"
        assert cli.main(["run", cfg, "--out", str(out), "--seed", "3", "--threads", "2"]) == 0
        assert "seed = 3" in (out / "config.resolved").read_text()
        assert "besov-track: PASS" in capsys.readouterr().out

    def test_config_error(self, tmp_path):
        cfg = self.write(tmp_path, "kind = besov-track\nfoo = 1\n")
        assert cli.main(["run", cfg]) == 2

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 3

    def test_bad_threads_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OLDB_THREADS", "zero")
        cfg = self.write(tmp_path, "kind = besov-track\n" + TINY)
        assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_usage_error(self):
        assert cli.main(["frobnicate"]) == 2

    def test_verify_linear(self, tmp_path):
        assert cli.main(["verify-linear", "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["passed"]

    def test_verify_linear_wrong_kind(self, tmp_path):
        cfg = self.write(tmp_path, "kind = besov-track\n")
        assert cli.main(["verify-linear", cfg]) == 2

    def test_fit(self, tmp_path, capsys):
        t = np.linspace(0, 10, 30)
        recs = [dg.EnergyRecord(s, *(np.exp(-0.4 * s) * np.ones(9))) for s in t]
        csv_path = tmp_path / "e.csv"
        dg.write_energy_csv(csv_path, recs)
        assert cli.main(["fit", str(csv_path), "--out", str(tmp_path)]) == 0
        fits = json.loads((tmp_path / "fits.json").read_text())
        assert [f["series"] for f in fits] == ["h3_u", "h2_grad_tau"]
        assert fits[0]["rate"] == pytest.approx(0.4)
        assert cli.main(["fit", str(csv_path), "--series", "nope"]) == 2

    def test_fit_growth_fails(self, tmp_path):
        t = np.linspace(0, 10, 30)
        recs = [dg.EnergyRecord(s, *(np.exp(0.1 * s) * np.ones(9))) for s in t]
        csv_path = tmp_path / "e.csv"
        dg.write_energy_csv(csv_path, recs)
        assert cli.main(["fit", str(csv_path)]) == 1

    def test_fit_unreadable(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,h3_u\n1,abc\n")
        assert cli.main(["fit", str(bad)]) == 3
        assert cli.main(["fit", str(tmp_path / "none.csv")]) == 3
