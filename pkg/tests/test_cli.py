import json
import os

import numpy as np
import pytest

from nlcheeger.cli import main
from nlcheeger.geometry import GridDomain, GridSpec, save_mask_file


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_perimeter_interval(tmp_path):
    out = str(tmp_path / "run")
    rc = main(
        ["perimeter", "--shape", "interval", "--len", "1", "--s", "0.5", "--cells", "16", "--out", out]
    )
    assert rc == 0
    payload = json.loads(read(os.path.join(out, "perimeter.json")))
    assert abs(payload["P_s"] - 16.0) < 1e-4 * 16.0


def test_cheeger_matches_brute_force(tmp_path):
    out = str(tmp_path / "run")
    rc = main(
        ["cheeger", "--shape", "interval", "--len", "1", "--s", "0.5", "--cells", "3", "--out", out]
    )
    assert rc == 0
    payload = json.loads(read(os.path.join(out, "cheeger.json")))
    from nlcheeger.geometry import GridDomain, GridSpec
    from nlcheeger.kernel import covering_params, build_table
    from nlcheeger.cheeger import brute_force_cheeger

    grid = GridSpec(1, (3,), 1.0 / 3, (0.0,))
    dom = GridDomain(grid, np.ones(3, dtype=bool))
    tab = build_table(covering_params(grid, 0.5, 1.0), grid)
    hb, _, _ = brute_force_cheeger(dom, tab)
    assert abs(payload["h"] - hb) < 1e-9 * hb


def test_byte_identical_reruns(tmp_path):
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    args = ["eigen", "--shape", "interval", "--len", "1", "--s", "0.5", "--p", "2",
            "--cells", "6", "--seed", "7", "--out"]
    assert main(args + [out1]) == 0
    assert main(args + [out2]) == 0
    for name in ("eigen.json", "eigenfield.csv", "eigenfield.csv.json"):
        assert read(os.path.join(out1, name)) == read(os.path.join(out2, name))


def test_sweep_s_csv(tmp_path):
    out = str(tmp_path / "run")
    rc = main(
        ["sweep-s", "--shape", "interval", "--len", "1", "--cells", "8",
         "--s-list", "0.5,0.75,0.9", "--out", out]
    )
    assert rc == 0
    lines = read(os.path.join(out, "sweep_s.csv")).decode().strip().splitlines()
    assert lines[0] == "s,value,target"
    assert len(lines) == 4


def test_mask_file_input(tmp_path):
    grid = GridSpec(1, (5,), 0.2, (0.0,))
    dom = GridDomain(grid, np.array([True, True, True, False, True]))
    mask_path = str(tmp_path / "dom.mask")
    save_mask_file(dom, mask_path)
    out = str(tmp_path / "run")
    rc = main(["perimeter", "--mask-file", mask_path, "--s", "0.5", "--out", out])
    assert rc == 0


def test_config_error_exit_code(tmp_path, capsys):
    rc = main(["perimeter", "--shape", "square", "--s", "0.5", "--out", str(tmp_path)])
    assert rc == 2
    err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert "error" in err


def test_verify_suite_exit_zero(tmp_path):
    out = str(tmp_path / "run")
    rc = main(["verify", "--suite", "pointwise", "--trials", "2000", "--out", out])
    assert rc == 0
    report = json.loads(read(os.path.join(out, "verify.json")))
    assert report["passed"] is True
