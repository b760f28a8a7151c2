import csv
import io
import time

import numpy as np
import pytest

from compact_splitting import cli
from compact_splitting.kernels import coefficient_set
from compact_splitting.operators import POTENTIALS, PotentialSpec
from compact_splitting.splitting import TAU_OPT, coefficients

SMALL = ["--n", "256", "--xmin", "-20", "--xmax", "20", "--tend", "0.1", "--h-list", "0.05,0.025", "--h-ref", "1e-3"]


def _table(text):
    rows = [line for line in text.splitlines() if line and not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(rows))))


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_coeffs_default_rows_are_bit_exact(capsys):
    code, out, _ = _run(capsys, "coeffs")
    assert code == 0
    rows = _table(out)
    assert float(rows[0]["tau"]) == TAU_OPT
    cs = coefficient_set(TAU_OPT)
    c = coefficients(TAU_OPT)
    assert float(rows[0]["P_a"]) == cs.P_a and float(rows[0]["R_b"]) == cs.R_b
    assert float(rows[0]["r"]) == c.r


def test_coeffs_tau_zero_row(capsys):
    _, out, _ = _run(capsys, "coeffs", "--tau", "0")
    (row,) = _table(out)
    assert float(row["p"]) == pytest.approx(1 / 6, abs=1e-15)
    assert float(row["q"]) == pytest.approx(2 / 3, abs=1e-15)
    assert float(row["r"]) == pytest.approx(1 / 72, abs=1e-15)


def test_coeffs_c_r1_zero_only_at_tau_opt(capsys):
    taus = [k * 1e-3 for k in range(491)] + [TAU_OPT]
    _, out, _ = _run(capsys, "coeffs", "--tau-list", ",".join(repr(t) for t in taus))
    zero = [float(r["tau"]) for r in _table(out) if abs(float(r["c_R1"])) < 1e-15]
    assert zero == [TAU_OPT]


def test_coeffs_rejects_tau(capsys):
    code, _, err = _run(capsys, "coeffs", "--tau", "0.6")
    assert code == 1 and "tau" in err


def test_unknown_subcommand_is_usage_error(capsys):
    assert _run(capsys, "nope")[0] == 1


def test_converge_header_and_rows(capsys):
    code, out, _ = _run(capsys, "converge", *SMALL, "--tau-list", "0,0.3")
    assert code == 0
    header = [l for l in out.splitlines() if not l.startswith("#")][0]
    assert header == "h,tau,error_l2,steps,runtime_s"
    rows = _table(out)
    assert [(float(r["tau"]), float(r["h"])) for r in rows] == [(0.0, 0.05), (0.0, 0.025), (0.3, 0.05), (0.3, 0.025)]
    assert [int(r["steps"]) for r in rows] == [2, 4, 2, 4]
    assert all(float(r["error_l2"]) > 0 for r in rows)


def _strip_runtime(text):
    out = []
    for line in text.splitlines():
        if line.startswith("#") or line.startswith("h,"):
            out.append(line)
        else:
            out.append(",".join(line.split(",")[:-1]))
    return out


def test_converge_is_deterministic(capsys):
    a = _run(capsys, "converge", *SMALL)[1]
    b = _run(capsys, "converge", *SMALL)[1]
    assert _strip_runtime(a) == _strip_runtime(b)


def test_converge_parallel_matches_serial(capsys):
    a = _run(capsys, "converge", *SMALL, "--tau-list", "0,0.2")[1]
    b = _run(capsys, "converge", *SMALL, "--tau-list", "0,0.2", "--jobs", "2")[1]
    assert [r["error_l2"] for r in _table(a)] == [r["error_l2"] for r in _table(b)]


def test_empty_tau_list_defaults_to_tau_opt(capsys):
    _, out, _ = _run(capsys, "converge", *SMALL, "--tau-list", "")
    assert {float(r["tau"]) for r in _table(out)} == {TAU_OPT}


def test_converge_writes_file(tmp_path, capsys):
    path = tmp_path / "conv.csv"
    code, out, _ = _run(capsys, "converge", *SMALL, "--out", str(path))
    assert code == 0 and out == ""
    assert path.read_text().startswith("# compact-splitting converge")


@pytest.mark.parametrize(
    "extra",
    [
        ["--h-list", "0.025,0.05"],
        ["--h-ref", "0.01"],
        ["--tau", "0.495"],
        ["--n", "255"],
        ["--tend", "-1"],
    ],
)
def test_converge_validation(capsys, extra):
    code, _, err = _run(capsys, "converge", *SMALL, *extra)
    assert code == 1 and err.startswith("error:")


def test_config_file_merge_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nn = 256\nxmin = -20\nxmax = 20\ntend = 0.1\nh-list = 1/20, 1/40\nh_ref = 1e-3\ntau = 0.3\n")
    _, out, _ = _run(capsys, "converge", "--config", str(cfg), "--tau", "0.2")
    rows = _table(out)
    assert {float(r["tau"]) for r in rows} == {0.2}
    assert [float(r["h"]) for r in rows] == [0.05, 0.025]
    assert "# n=256" in out


def test_config_file_rejects_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("speed = 3\n")
    assert _run(capsys, "coeffs", "--config", str(cfg))[0] == 1


def test_preset_resolution():
    cfg = cli.resolve_config(["converge", "--preset", "desk"])
    assert (cfg.n, cfg.xmin, cfg.xmax, cfg.tend) == (2048, -20.0, 20.0, 0.5)
    assert cfg.h_list == cli.H_LADDER and cfg.taus() == (0.0, 0.1127, 0.3, 0.4)
    cfg = cli.resolve_config(["converge", "--preset", "paper", "--n", "4096"])
    assert cfg.n == 4096 and cfg.xmax == 40.0
    assert cli.resolve_config(["converge"]).n == 10000


def test_divergence_exit_code(capsys, monkeypatch):
    huge = PotentialSpec("huge", lambda x, t: 0 * x, lambda x, t: np.full(np.shape(x), 1e200), lambda x, t: 0 * x)
    monkeypatch.setitem(POTENTIALS, "huge", lambda: huge)
    with np.errstate(all="ignore"):
        code, _, err = _run(capsys, "converge", *SMALL, "--potential", "huge")
    assert code == 3 and "divergence" in err


def test_tau_scan_single_tau(capsys):
    _, out, _ = _run(capsys, "tau-scan", *SMALL[:8], "--h", "0.025", "--h-ref", "1e-3", "--tau", "0.2")
    rows = _table(out)
    assert len(rows) == 1 and float(rows[0]["tau"]) == 0.2
    assert "# argmin tau=0.2" in out


def test_tau_scan_desk_preset(capsys):
    _, out, _ = _run(capsys, "tau-scan", "--preset", "desk")
    rows = {float(r["tau"]): float(r["error_l2"]) for r in _table(out)}
    assert sorted(rows) == [round(0.05 * k, 2) for k in range(10)]
    best = min(rows, key=rows.get)
    assert abs(best - TAU_OPT) <= 0.05
    assert rows[0.45] > rows[0.1]


def test_kernels_summary(tmp_path, capsys):
    path = tmp_path / "k.csv"
    assert _run(capsys, "kernels", "--out", str(path), "--tau-list", "0,0.25")[0] == 0
    rows = {(r["kernel"], r["norm"]): float(r["tau_min"]) for r in _table(path.read_text())}
    assert rows[("Peano1D", "L1")] == pytest.approx(0.117882, abs=1e-4)
    assert rows[("Peano1D", "L2")] == pytest.approx(0.11760, abs=1e-4)
    assert rows[("SardDelta21", "L1")] == pytest.approx(0.146447, abs=1e-5)
    assert rows[("SardDelta12", "L2")] == pytest.approx(0.146447, abs=1e-5)
    assert ("Sard30", "L1") in rows and ("Sard03", "L2") in rows
    samples = _table((tmp_path / "k_samples.csv").read_text())
    assert {r["tau"] for r in samples} == {"0.0", "0.25"}
    assert len(samples) == 4 * 2 * 201


def test_verify_fast_passes(capsys):
    start = time.perf_counter()
    code, out, _ = _run(capsys, "verify", "--fast")
    assert time.perf_counter() - start < 60
    assert code == 0, out
    assert out.count("PASS") == 7


def test_verify_flipped_sign_fails(capsys):
    code, out, _ = _run(capsys, "verify", "--fast", "--flip-sign")
    assert code == 2
    assert "FAIL commutator" in out


def test_verify_rejects_large_dense_grid(capsys):
    assert _run(capsys, "verify", "--n", "512")[0] == 1
