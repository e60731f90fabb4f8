import csv
import io

import numpy as np
import pytest

from coopcache.cli import main
from coopcache.config import load_config
from coopcache.model import average_delay


def run(tmp_path, *args):
    out = tmp_path / "out.csv"
    status = main([*args, "-o", str(out)])
    return status, (out.read_text() if out.exists() else "")


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def header(text):
    return [line for line in text.splitlines() if line.startswith("#")]


def summary(text):
    line = next(x for x in header(text) if x.startswith("# summary: "))
    return dict(kv.split("=", 1) for kv in line[len("# summary: "):].split())


# place --------------------------------------------------------------------------

def test_place_beats_baseline(tmp_path, capsys):
    status, text = run(tmp_path, "place")
    assert status == 0
    s = summary(text)
    assert float(s["delay_s"]) < float(s["baseline_s"])
    assert float(s["delay_s"]) == pytest.approx(float(s["wireless_s"]) + float(s["backhaul_s"]), rel=1e-12)
    assert len(s["omega"].split(";")) == 4 and len(s["phi"].split(";")) == 4
    rows = table(text)
    assert list(rows[0]) == ["file_id", "c_f", "s_f", "q_f"]
    assert sum(int(r["c_f"]) for r in rows) == int(s["used"]) == 50_000
    assert "delay_s=" in capsys.readouterr().err


def test_place_zero_budget(tmp_path):
    _, text = run(tmp_path, "place", "--set", "C=0")
    s = summary(text)
    assert s["delay_s"] == s["baseline_s"]


def test_place_hitmax_k1_matches_noncoop(tmp_path):
    _, a = run(tmp_path, "place", "--set", "K=1", "--set", "scheme=hitmax", "--set", "C=30000")
    _, b = run(tmp_path, "place", "--set", "K=1", "--set", "scheme=noncoop", "--set", "C=30000")

    def strip(text):
        return [line.replace("hitmax", "X").replace("noncoop", "X") for line in text.splitlines()]

    assert strip(a) == strip(b)


def test_place_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("F = 20\ns = 10\nC = 35\nK = 2\n")
    status, text = run(tmp_path, "place", "-c", str(cfg), "--set", "C=40")
    assert status == 0
    assert "# C = 40" in header(text)
    assert sum(int(r["c_f"]) for r in table(text)) == 40


# sweep --------------------------------------------------------------------------

def test_sweep_rows_and_reproducible_delays(tmp_path):
    status, text = run(tmp_path, "sweep", "--set", "K=2", "--set", "sweep_values=50000,1000,20000")
    assert status == 0
    rows = table(text)
    keys = [(float(r["C"]), r["scheme"]) for r in rows]
    assert keys == sorted(keys)
    assert [r["scheme"] for r in rows[:3]] == ["greedy", "hitmax", "noncoop"]
    cfg = load_config(None, ["K=2"])
    net, lib = cfg.network(), cfg.library()
    for r in rows:
        omega = np.array([float(x) for x in r["omega"].split(";")])
        tau = np.array([float(x) for x in r["tau"].split(";")])
        assert average_delay(omega, tau, lib, net).total_s == float(r["delay_s"])
        assert float(r["hit_ratio"]) == pytest.approx(omega[:-1].sum(), abs=1e-12)
        if r["scheme"] == "noncoop":
            assert float(r["spectral_proxy"]) == 1.0
    for c in {r["C"] for r in rows}:
        d = {r["scheme"]: float(r["delay_s"]) for r in rows if r["C"] == c}
        assert d["greedy"] <= min(d["hitmax"], d["noncoop"]) + 1e-9


def test_sweep_skewness_trend(tmp_path):
    """Greedy's gain over the non-cooperative scheme shrinks with skewness and grows with backhaul delay."""
    gains = {}
    for D in (200, 1000):
        _, text = run(tmp_path, "sweep", "--set", "sweep_var=nu", "--set", "sweep_values=0.5,0.8,1.1,1.5,2.0",
                      "--set", f"D_BH_ms={D}", "--set", "C=200000", "--set", "schemes=greedy,noncoop")
        by = {}
        for r in table(text):
            by.setdefault(float(r["nu"]), {})[r["scheme"]] = float(r["delay_s"])
        gains[D] = [1 - d["greedy"] / d["noncoop"] for _, d in sorted(by.items())]
    for g in gains.values():
        assert all(b < a for a, b in zip(g, g[1:]))
    assert all(hi > lo for lo, hi in zip(gains[200], gains[1000]))


def test_sweep_over_K(tmp_path):
    _, text = run(tmp_path, "sweep", "--set", "sweep_var=K", "--set", "sweep_values=1,2,4",
                  "--set", "schemes=greedy", "--set", "C=20000")
    rows = table(text)
    assert [r["K"] for r in rows] == ["1", "2", "4"]
    assert [len(r["omega"].split(";")) for r in rows] == [2, 3, 5]
    assert any("interference_extension = hold" in h for h in header(text))


# cluster ------------------------------------------------------------------------

def test_cluster_rows(tmp_path):
    status, text = run(tmp_path, "cluster", "--set", "K_range=1:6", "--set", "C=20000")
    assert status == 0
    rows = table(text)
    assert list(rows[0])[:3] == ["K", "admissible", "delay_s"]
    assert [int(r["K"]) for r in rows] == list(range(1, 7))
    flags = [int(r["admissible"]) for r in rows]
    assert flags == sorted(flags, reverse=True)
    k_opt = int(next(h for h in header(text) if h.startswith("# K_opt")).split("=")[1])
    delays = [float(r["delay_s"]) for r in rows]
    assert delays[k_opt - 1] == min(delays)


def test_cluster_backhaul_sweep(tmp_path):
    status, text = run(tmp_path, "cluster", "--set", "K_range=1:8", "--set", "C=20000",
                       "--set", "D_BH_sweep_ms=200,400,600,800,1000")
    assert status == 0
    rows = table(text)
    k_opt = [int(r["K_opt"]) for r in rows]
    assert k_opt == sorted(k_opt)
    opt = np.array([float(r["delay_opt_s"]) for r in rows])
    fixed = np.array([[float(r[f"fixed_K{k}_s"]) for k in range(1, 9)] for r in rows])
    assert np.all(opt[:, None] <= fixed + 1e-15)
    # K=1 is linear in the backhaul delay; the optimised curve bends downward
    assert np.allclose(np.diff(fixed[:, 0], 2), 0, atol=1e-12)
    assert np.all(np.diff(opt, 2) < 0)


# validate -----------------------------------------------------------------------

def test_validate_output_and_status(tmp_path, capsys):
    status, text = run(tmp_path, "validate", "--set", "sim_drops=20")
    rows = table(text)
    assert list(rows[0]) == ["lambda_per_km2", "rank", "simulated_rate_bps", "stderr_bps", "bound_rate_bps"]
    lams = sorted({float(r["lambda_per_km2"]) for r in rows})
    assert lams == [250.0, 500.0, 1000.0]
    for lam in lams:
        assert sorted(int(r["rank"]) for r in rows if float(r["lambda_per_km2"]) == lam) == [1, 2, 3]
    ok = all(float(r["bound_rate_bps"]) <= float(r["simulated_rate_bps"]) + 2 * float(r["stderr_bps"])
             for r in rows)
    assert status == (0 if ok else 3)
    if not ok:
        assert "bound violated" in capsys.readouterr().err


def test_validate_is_deterministic(tmp_path):
    _, a = run(tmp_path, "validate", "--set", "sim_drops=5", "--set", "seed=11")
    _, b = run(tmp_path, "validate", "--set", "sim_drops=5", "--set", "seed=11")
    _, c = run(tmp_path, "validate", "--set", "sim_drops=5", "--set", "seed=12")
    assert a == b
    assert table(a) != table(c)


# exit codes ---------------------------------------------------------------------

def test_config_error_exit(tmp_path, capsys):
    status, _ = run(tmp_path, "place", "--set", "nonsense=1")
    assert status == 1
    assert "nonsense" in capsys.readouterr().err
    status, _ = run(tmp_path, "sweep", "--set", "sweep_var=alpha")
    assert status == 1


def test_model_error_exit(tmp_path, capsys):
    status, text = run(tmp_path, "place", "--set", "interference_dbm_per_mhz=-30")
    assert status == 2
    assert text == ""
    assert "rank 1" in capsys.readouterr().err


def test_trace_error_exit(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,1\nb,x\n")
    status, _ = run(tmp_path, "place", "--set", "popularity=trace", "--set", f"trace_path={bad}")
    assert status == 1
