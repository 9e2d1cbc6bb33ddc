"""Batch front end: flag parsing, output formats, and exit codes."""

import csv
import json
import math

import pytest

from binoisy.cli import _parse_snr, main


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "-o", str(out)])
    return code, out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_snr_grid_parser():
    assert _parse_snr("0:30:2") == [float(v) for v in range(0, 31, 2)]
    assert _parse_snr("0:30:7") == [0.0, 7.0, 14.0, 21.0, 28.0]
    assert _parse_snr("5") == [5.0]
    assert _parse_snr("1,2.5,4") == [1.0, 2.5, 4.0]
    # a grid whose span is an exact multiple of the step includes the stop
    assert _parse_snr("0:1:0.1")[-1] == 1.0


def test_bad_grids_exit_with_usage_error():
    for bad in ("5:0:5", "0:10:0", "0:10:-1", "abc"):
        with pytest.raises(SystemExit) as err:
            main(["rate-sweep", "--snr", bad])
        assert err.value.code == 2


def test_rate_sweep_example_row_count(tmp_path):
    code, out = run(tmp_path, "rate-sweep", "--mode", "matched",
                    "--constellation", "qpsk", "--snr", "0:30:2", "--evm", "-10")
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 16
    header = out.read_text().splitlines()[0]
    assert header == ("mode,constellation,snr_db,evm_db,rate_bits_per_stream,"
                      "s_tilde_star,eta,xi,eps,eps_tilde,eta_prime,eps_prime,"
                      "converged,iterations")
    assert all(r["converged"] == "true" for r in rows)
    assert rows[0]["mode"] == "matched"
    # matched rows leave the mismatched-only diagnostics empty
    assert rows[0]["s_tilde_star"] == ""
    assert rows[0]["xi"] == ""


def test_reruns_are_byte_identical(tmp_path):
    args = ("rate-sweep", "--mode", "both", "--constellation", "gaussian",
            "--snr", "0:10:5", "--evm", "-10")
    _, a = run(tmp_path, *args, name="a.csv")
    _, b = run(tmp_path, *args, name="b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_thread_pool_does_not_change_output(tmp_path, monkeypatch):
    args = ("rate-sweep", "--mode", "both", "--constellation", "gaussian,qpsk",
            "--snr", "0:10:10", "--evm", "-10")
    monkeypatch.setenv("BINOISY_THREADS", "4")
    _, a = run(tmp_path, *args, name="par.csv")
    monkeypatch.setenv("BINOISY_THREADS", "1")
    _, b = run(tmp_path, *args, name="ser.csv")
    assert a.read_bytes() == b.read_bytes()


def test_timing_column_is_opt_in(tmp_path):
    base = ("rate-sweep", "--mode", "matched", "--constellation", "gaussian",
            "--snr", "5", "--evm", "-10")
    _, plain = run(tmp_path, *base, name="p.csv")
    _, timed = run(tmp_path, *base, "--timing", name="t.csv")
    assert "wall_ms" not in plain.read_text()
    assert plain.read_text().splitlines()[0] + ",wall_ms" == timed.read_text().splitlines()[0]


def test_json_output_structure(tmp_path):
    code, out = run(tmp_path, "rate-sweep", "--mode", "matched",
                    "--constellation", "gaussian", "--snr", "5",
                    "--format", "json", name="out.json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["command"] == "rate-sweep"
    assert doc["columns"][0] == "mode"
    row = doc["rows"][0]
    assert row["converged"] is True
    assert isinstance(row["rate_bits_per_stream"], float)
    # default ideal hardware: non-finite EVM serialized as a string
    assert row["evm_db"] == "-inf"


def test_nats_flag_renames_and_rescales(tmp_path):
    _, bits = run(tmp_path, "rate-sweep", "--mode", "matched",
                  "--constellation", "gaussian", "--snr", "5", "--evm", "-10",
                  name="bits.csv")
    _, nats = run(tmp_path, "rate-sweep", "--mode", "matched",
                  "--constellation", "gaussian", "--snr", "5", "--evm", "-10",
                  "--nats", name="nats.csv")
    rb = float(read_rows(bits)[0]["rate_bits_per_stream"])
    rn = float(read_rows(nats)[0]["rate_nats_per_stream"])
    assert rb == pytest.approx(rn / math.log(2.0), rel=1e-9)


def test_highsnr_mode_emits_one_row_per_limit(tmp_path):
    code, out = run(tmp_path, "rate-sweep", "--mode", "highsnr",
                    "--constellation", "gaussian", "--evm", "-20",
                    "--snr", "0:30:5")
    assert code == 0
    rows = read_rows(out)
    assert [r["mode"] for r in rows] == ["highsnr-matched", "highsnr-mismatched"]
    assert all(r["snr_db"] == "inf" for r in rows)
    matched = float(rows[0]["rate_bits_per_stream"])
    assert matched == pytest.approx(math.log2(101.0), rel=1e-9)  # %.10g output
    assert float(rows[1]["rate_bits_per_stream"]) < matched


def test_highsnr_mode_rejects_bad_combinations(tmp_path):
    code, _ = run(tmp_path, "rate-sweep", "--mode", "highsnr",
                  "--constellation", "qpsk", "--evm", "-20")
    assert code == 2
    code, _ = run(tmp_path, "rate-sweep", "--mode", "highsnr",
                  "--constellation", "gaussian")
    assert code == 2


def test_config_file_round_trip(tmp_path):
    conf = tmp_path / "sweep.conf"
    conf.write_text("mode = matched\nconstellation = qpsk\n"
                    "snr = 0:10:5\nevm = -10\n# trailing comment\n")
    code, out = run(tmp_path, "rate-sweep", "--config", str(conf))
    assert code == 0
    assert len(read_rows(out)) == 3
    # explicit flags win over file values
    code, out2 = run(tmp_path, "rate-sweep", "--config", str(conf),
                     "--snr", "20", name="o2.csv")
    assert code == 0
    rows = read_rows(out2)
    assert len(rows) == 1 and rows[0]["snr_db"] == "20"


def test_config_file_rejects_unknown_keys(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("frobnicate = yes\n")
    code, _ = run(tmp_path, "rate-sweep", "--config", str(conf))
    assert code == 2


def test_nonconvergence_exit_code_and_allow_partial(tmp_path):
    args = ("rate-sweep", "--mode", "matched", "--constellation", "qpsk",
            "--snr", "10", "--evm", "-10", "--max-iter", "2")
    code, _ = run(tmp_path, *args)
    assert code == 1
    code, out = run(tmp_path, *args, "--allow-partial", name="p.csv")
    assert code == 0
    assert read_rows(out)[0]["converged"] == "false"


def test_validate_columns_and_determinism(tmp_path):
    args = ("validate", "--M", "2", "--N", "2", "--constellation", "gaussian",
            "--evm", "-10", "--snr", "10", "--seed", "7", "--n-channels", "200")
    code, out = run(tmp_path, *args)
    assert code == 0
    row = read_rows(out)[0]
    assert row["decoder"] == "matched"
    assert float(row["abs_diff_bits"]) < 0.3
    assert float(row["mc_stderr_bits"]) > 0.0
    assert int(row["n_channels"]) == 200
    _, again = run(tmp_path, *args, name="again.csv")
    assert out.read_bytes() == again.read_bytes()


def test_validate_rejects_discrete_mismatched(tmp_path):
    code, _ = run(tmp_path, "validate", "--constellation", "qpsk",
                  "--decoder", "mismatched", "--snr", "10")
    assert code == 2


def test_evm_plan_output(tmp_path):
    code, out = run(tmp_path, "evm-plan", "--loss", "0.05",
                    "--constellation", "gaussian", "--snr", "0:10:10")
    assert code == 0
    rows = read_rows(out)
    assert [r["snr_db"] for r in rows] == ["0", "10"]
    for row in rows:
        assert float(row["max_evm_db"]) >= float(row["rule_of_thumb_db"])
    assert float(rows[0]["rule_of_thumb_db"]) == -13.0


def test_stdout_default_output(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code = main(["rate-sweep", "--mode", "matched", "--constellation",
                 "gaussian", "--snr", "5", "--evm", "-10"])
    assert code == 0
    captured = capsys.readouterr().out
    assert captured.startswith("mode,constellation")
    assert len(captured.splitlines()) == 2
