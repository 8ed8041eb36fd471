import json
import subprocess
import sys

import numpy as np
import pytest

from towerbox import cli, experiment, iso, leakage

KEY_HEX = "000102030405060708090a0b0c0d0e0f"


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def catalog_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cat") / "catalog.json"
    assert run("search-iso", "--out", path) == 0
    return path


def test_search_iso_output(catalog_file, capsys):
    recs = json.loads(catalog_file.read_text())
    assert len(recs) == 32 and recs[0]["id"] == 0
    assert iso.load_catalog(catalog_file) == iso.default_catalog(32)


def test_search_iso_top(tmp_path, capsys):
    assert run("search-iso", "--out", tmp_path / "c.json", "--top", 5) == 0
    assert len(json.loads((tmp_path / "c.json").read_text())) == 5
    assert "128 isomorphisms" in capsys.readouterr().out


def test_check_published_sets_command(capsys):
    assert run("check-paper-sets") == 0
    out = capsys.readouterr().out
    assert "canonical phi=2 lambda=12: valid isomorphism" in out
    assert "set 1 phi=2 lambda=15: valid as rows" in out


@pytest.mark.parametrize("mode", ["lut", "composite", "randomized"])
def test_encrypt_decrypt(tmp_path, catalog_file, mode):
    pt = tmp_path / "pt.bin"
    pt.write_bytes(bytes.fromhex("00112233445566778899aabbccddeeff") * 4)
    extra = ["--catalog", catalog_file, "--seed", "12345678", "--set-id", "9"]
    assert run("encrypt", "--key", KEY_HEX, "--in", pt, "--out", tmp_path / "ct",
               "--mode", mode, *extra) == 0
    ct = (tmp_path / "ct").read_bytes()
    assert ct == bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a") * 4
    assert run("decrypt", "--key", KEY_HEX, "--in", tmp_path / "ct", "--out", tmp_path / "back",
               "--mode", mode, *extra) == 0
    assert (tmp_path / "back").read_bytes() == pt.read_bytes()


def test_usage_errors(tmp_path, capsys):
    pt = tmp_path / "pt.bin"
    pt.write_bytes(bytes(15))
    assert run("encrypt", "--key", KEY_HEX, "--in", pt, "--out", tmp_path / "o") == 1
    pt.write_bytes(bytes(16))
    assert run("encrypt", "--key", KEY_HEX, "--in", pt, "--mode", "randomized") == 1
    assert run("encrypt", "--key", KEY_HEX, "--in", pt, "--mode", "composite",
               "--set-id", 99) == 1
    for argv in (["encrypt", "--key", "zz", "--in", pt],
                 ["gen-traces", "--n", 0, "--out", tmp_path / "t"],
                 ["gen-traces", "--n", 5, "--seed", "00001234", "--out", tmp_path / "t"],
                 ["gen-traces", "--n", 5, "--sigma", -1, "--out", tmp_path / "t"],
                 ["attack", "--in", pt, "--selection", "monobit:9"],
                 ["nope"], []):
        with pytest.raises(SystemExit) as exc:
            run(*argv)
        assert exc.value.code == 1


def test_io_errors(tmp_path):
    assert run("attack", "--in", tmp_path / "missing.bin") == 2
    (tmp_path / "junk.bin").write_bytes(b"junk" * 20)
    assert run("attack", "--in", tmp_path / "junk.bin") == 2
    assert run("gen-traces", "--n", 5, "--out", tmp_path / "no" / "dir" / "t.bin") == 2


def test_bad_catalog(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("gen-traces", "--n", 5, "--mode", "protected", "--catalog", bad,
               "--out", tmp_path / "t.bin") == 1


def test_invariant_violation_exit_code(tmp_path, monkeypatch):
    pt = tmp_path / "pt.bin"
    pt.write_bytes(bytes(32))
    real = cli.aes.encrypt_blocks

    def broken(blocks, key, backend="lut", set_idx=None):
        out = real(blocks, key, backend, set_idx)
        return out if backend == "lut" else out ^ 1

    monkeypatch.setattr(cli.aes, "encrypt_blocks", broken)
    assert run("encrypt", "--key", KEY_HEX, "--in", pt, "--out", tmp_path / "o",
               "--mode", "composite") == 3


def test_gen_attack_mtd_pipeline(tmp_path, capsys):
    tr = tmp_path / "t.bin"
    assert run("gen-traces", "--n", 800, "--sigma", 2, "--byte", 3, "--out", tr) == 0
    ts = leakage.read_traces(tr)
    assert len(ts) == 800 and ts.config.target_byte == 3
    assert run("attack", "--in", tr, "--method", "cpa", "--report", tmp_path / "r.csv") == 0
    rows = experiment.read_report(tmp_path / "r.csv")
    key = experiment.DEFAULT_KEY
    assert len(rows) == 256 and [r for r in rows if r[3] == 1][0][0] == key[3]
    curves = (tmp_path / "r_curves.csv").read_text().splitlines()
    assert curves[0] == "guess,rank,s0,s1" and len(curves) == 6
    assert run("attack", "--in", tr, "--method", "dom", "--selection", "monobit:1") == 0
    assert run("mtd", "--in", tr, "--key", key.hex(), "--out", tmp_path / "m.csv") == 0
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "prefix_size,rank_of_true_key" and len(lines) == 17
    assert run("mtd", "--in", tr, "--key", KEY_HEX, "--out", tmp_path / "m2.csv") == 1


def test_run_experiment_cli(tmp_path, capsys):
    out = tmp_path / "exp"
    assert run("run-experiment", "--n-unprotected", 300, "--n-protected", 300,
               "--out-dir", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["arms"]) == {"unprotected", "protected"}
    assert run("run-experiment", "--n-unprotected", 0, "--out-dir", out) == 1
    assert run("run-experiment", "--catalog", tmp_path / "missing.json",
               "--out-dir", out) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "towerbox", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0
    for cmd in ("search-iso", "check-paper-sets", "encrypt", "decrypt", "gen-traces",
                "attack", "mtd", "run-experiment"):
        assert cmd in r.stdout
