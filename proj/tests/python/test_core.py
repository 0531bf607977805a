# Copyright 2026 The tilegene Authors
# SPDX-License-Identifier: Apache-2.0
import json
import math

import numpy as np
import pytest

import tilegene

SMALL = {"slides_per_class": 4, "bags_per_slide": 3, "d": 8, "genes": 5, "fractions": [0.5, 0.25, 0.25]}


def test_model_infer_shapes():
    model = tilegene.Model({"instances": 49, "input_dim": 16, "width": 32, "heads": 2, "genes": 7, "classes": 3})
    model.initialize(0)
    x = np.random.default_rng(1).normal(size=(49, 16)).astype(np.float32)
    out = model.infer(x)
    assert out["c"].shape == (1, 32)
    assert out["logits"].shape == (1, 3)
    assert out["s"].shape == (7, 49)
    assert out["S"].shape == (1, 7)
    again = model.infer(x)
    assert np.array_equal(out["S"], again["S"])
    assert model.parameter_count == sum(p.size for p in model.parameters().values())
    with pytest.raises(Exception):
        model.infer(x[:10])


def test_model_config_errors():
    with pytest.raises(tilegene.ConfigError):
        tilegene.Model({"width": 30, "heads": 4})
    with pytest.raises(tilegene.ConfigError):
        tilegene.Model({"depth": 3})


def test_metrics():
    r, p = tilegene.pearson([1, 2, 3, 4], [2, 4, 6, 8])
    assert r == pytest.approx(1.0)
    rho, _ = tilegene.spearman([9, 4, 25], [2, 3, 5])
    assert rho == pytest.approx(0.5)
    assert tilegene.adjust_pvalues([0.05, 0.04, 0.03, 0.02, 0.01], "bh", 0.05) == [True] * 5
    assert tilegene.adjust_pvalues([0.05, 0.04, 0.03, 0.02, 0.01], "hs", 0.05) == [False] * 4 + [True]
    err = tilegene.prediction_errors(np.array([[1.0], [3.0]]), np.array([[2.0], [5.0]]))
    assert err["mae"][0] == pytest.approx(1.5)
    assert err["rmse"][0] == pytest.approx(math.sqrt(2.5))
    assert tilegene.average_precision_at([1, 0, 1], 3) == pytest.approx((1 + 2 / 3) / 3)
    assert tilegene.slide_vote([2, 1, 2, 0]) == 2


def test_synth_and_validate(tmp_path):
    info = tilegene.synth(str(tmp_path / "d"), SMALL)
    assert info == {"slides": 12, "bags": 36, "genes": 5}
    assert tilegene.validate_dataset(str(tmp_path / "d")) == []
    acc, lo, hi = tilegene.bayes_accuracy({"separation": 0.0}, 20000)
    assert lo <= acc <= hi
    assert acc == pytest.approx(1 / 3, abs=0.02)
    assert tilegene.default_config()["model"]["width"] == 384


def test_synth_train_eval_via_cli(tmp_path):
    data, run, report = tmp_path / "data", tmp_path / "run", tmp_path / "eval"
    args = ["synth", "--out", str(data), "--slides-per-class", "4", "--bags-per-slide", "3", "--dim", "8",
            "--genes", "5", "--set", "synth.fractions=[0.5,0.25,0.25]"]
    assert tilegene.cli(args) == 0
    assert tilegene.cli(["train", "--data", str(data), "--out", str(run), "--epochs", "1", "--batch", "8",
                         "--layers", "1", "--width", "16", "--heads", "2"]) == 0
    model, meta = tilegene.load_checkpoint(str(run / "best.ckpt"))
    assert model.config["width"] == 16
    assert len(meta["gene_ids"]) == 5
    assert tilegene.cli(["eval", "--checkpoint", str(run / "best.ckpt"), "--data", str(data),
                         "--out", str(report)]) == 0
    rep = json.loads((report / "report.json").read_text())
    assert rep["slides"] == 3
    assert 0.0 <= rep["classification"]["accuracy"] <= 1.0
    assert tilegene.cli(["train", "--data", str(data), "--out", str(run), "--layers", "0"]) == 2
