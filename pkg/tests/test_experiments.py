import json

import pytest

from neuid3.baselines import BaselineConfig
from neuid3.experiments import (
    POOL_ORDER,
    REUSE_CELLS,
    ExperimentSpec,
    format_table,
    pretrained_test,
    run_experiment,
)
from neuid3.induction import InductionConfig

TINY = dict(seeds=(0,), sizes=(30, 4, 20), induction=InductionConfig(epochs_per_test=1, min_examples=5),
            baseline=BaselineConfig(epochs=1))


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("nope")
    with pytest.raises(ValueError):
        ExperimentSpec("pools", seeds=())
    d = ExperimentSpec("pools", jobs=4).to_dict()
    assert "jobs" not in d and "jobs" not in d["induction"]


def test_eleusis_compare_shape(tmp_path):
    res = run_experiment(ExperimentSpec("eleusis_compare", concepts=("suit_order", "rank_order"), **TINY),
                         tmp_path)
    concepts = res["results"]["concepts"]
    assert set(concepts) == {"suit_order", "rank_order"}
    assert len(concepts["suit_order"]["nldt"]["runs"]) == 1
    assert json.loads((tmp_path / "results.json").read_text()) == json.loads(json.dumps(res))
    text = format_table(res)
    assert text == (tmp_path / "results.txt").read_text()
    assert text.splitlines()[0].split()[0] == "concept" and len(text.splitlines()) == 4


def test_pools_ratios():
    res = run_experiment(ExperimentSpec("pools", concepts=("suit_order",), **TINY))
    v = res["results"]["concepts"]["suit_order"]
    assert list(v["pools"]) == list(POOL_ORDER)
    opt = v["pools"]["opt"]["summary"]["f1_pos"]["mean"]
    if opt > 0:
        assert v["ratio_to_opt"]["opt"]["f1_pos"] == pytest.approx(1.0)
    assert len(format_table(res).splitlines()) == 2 + len(POOL_ORDER)


def test_reuse_grid_and_freezing():
    res = run_experiment(ExperimentSpec("reuse", **TINY))
    assert list(res["results"]["grid"]) == [f"rank_{r}/suit_{s}" for r, s in REUSE_CELLS]
    frozen = pretrained_test(ExperimentSpec("reuse", freeze_reused=True, **TINY), "suit_order", "gt_suit", 0)
    assert frozen.frozen and frozen.id == "gt_suit@reused"


def test_uci_compare_on_synthetic_table():
    spec = ExperimentSpec("uci_compare", folds=2, rows=40, n_features=3, **TINY)
    res = run_experiment(spec)
    models = res["results"]["models"]
    assert set(models) == {"nldt_symbolic", "nldt_glyph", "mlp_symbolic", "mlp_glyph"}
    assert all(len(m["runs"]) == 2 for m in models.values())
    assert "±" in format_table(res)
