# Copyright 2026 The tilegene Authors
# SPDX-License-Identifier: Apache-2.0
import json
import struct

import numpy as np
import pytest

import tilegene


def write_trnb1(path, rows, label=0, genes=(), slide_id="s0", case_id="c0"):
    rows = np.ascontiguousarray(rows, dtype="<f4")
    k, d = rows.shape
    trailer = json.dumps({"slide_id": slide_id, "case_id": case_id}).encode()
    with open(path, "wb") as f:
        f.write(tilegene.BAG_MAGIC)
        f.write(struct.pack("<4I", k, d, len(genes), label))
        f.write(rows.tobytes())
        f.write(np.asarray(genes, dtype="<f4").tobytes())
        f.write(trailer)


def test_repeated_tile_bag_is_valid(tmp_path):
    tile = np.random.default_rng(0).normal(size=1024).astype(np.float32)
    path = tmp_path / "repeat.trnb"
    write_trnb1(path, np.tile(tile, (49, 1)), label=1, genes=[0.5, 1.5])
    assert tilegene.validate_bag(str(path), k=49, d=1024, genes=2, classes=3) == []
    bag = tilegene.read_bag(str(path))
    assert bag["instances"].shape == (49, 1024)
    assert np.all(bag["instances"] == tile)
    assert bag["label"] == 1
    assert list(bag["gene_target"]) == [0.5, 1.5]


def test_round_trip_matches_python_writer(tmp_path):
    rows = np.arange(49 * 8, dtype=np.float32).reshape(49, 8)
    write_trnb1(tmp_path / "py.trnb", rows, label=2, genes=[1.0])
    tilegene.write_bag(str(tmp_path / "cc.trnb"), rows, "s0", "c0", 2, [1.0])
    a = tilegene.read_bag(str(tmp_path / "py.trnb"))
    b = tilegene.read_bag(str(tmp_path / "cc.trnb"))
    assert np.array_equal(a["instances"], b["instances"])
    assert (a["slide_id"], a["case_id"], a["label"]) == (b["slide_id"], b["case_id"], b["label"])


def test_validation_reports_problems(tmp_path):
    path = tmp_path / "short.trnb"
    write_trnb1(path, np.zeros((48, 4)), label=5)
    problems = tilegene.validate_bag(str(path), k=49, d=4, classes=3)
    assert len(problems) == 2
    (tmp_path / "bad.trnb").write_bytes(b"TRNB0" + bytes(16))
    assert tilegene.validate_bag(str(tmp_path / "bad.trnb"))
    with pytest.raises(tilegene.FormatError):
        tilegene.read_bag(str(tmp_path / "bad.trnb"))


def test_cli_validate_accepts_python_bag(tmp_path, run_cli):
    path = tmp_path / "repeat.trnb"
    write_trnb1(path, np.ones((49, 1024)))
    ok = run_cli("validate", path, "--k", 49, "--d", 1024)
    assert ok.returncode == 0, ok.stdout + ok.stderr
    bad = run_cli("validate", path, "--d", 512)
    assert bad.returncode == 1
