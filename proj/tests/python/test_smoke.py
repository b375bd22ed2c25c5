import json
import math

import numpy as np
import pytest

import bessgnn


def test_power_flow_converges():
    res = bessgnn.power_flow(storage_kw=[20.0])
    assert res["converged"]
    assert res["vm"].shape == (18, 3)
    assert res["residual"] < 1e-8
    assert res["energy_mismatch"] < 1e-9
    assert np.allclose(res["vm"][0], 1.0)


def test_symmetric_feeder_is_balanced():
    res = bessgnn.power_flow(network_json=bessgnn.cigre18_json(phase_symmetric=True))
    vm = res["vm"]
    assert np.max(vm.max(axis=1) - vm.min(axis=1)) < 1e-10


def test_dispatch_matches_enumeration():
    prices = [0.1, 0.3, 0.05, 0.25]
    base = [-10.0, 5.0, 0.0, 12.0]
    dp = bessgnn.optimize_dispatch(prices, base, soc0=0.5, levels=9)
    en = bessgnn.optimize_dispatch(prices, base, soc0=0.5, levels=9, exhaustive=True)
    assert dp["objective"] == en["objective"]
    assert dp["power_kw"] == en["power_kw"]
    assert dp["violation"] == 0.0
    assert len(dp["soc"]) == 5


def test_bad_config_raises_usage_error():
    with pytest.raises(bessgnn.UsageError):
        bessgnn.generate_dataset('{"epochz": 1}', "unused.bin")
    with pytest.raises(bessgnn.Error):
        bessgnn.report("/nonexistent/run")


def test_pipeline_round_trip(tmp_path):
    cfg = bessgnn.config(train_samples=48, val_samples=24, grid_levels=41, epochs=3,
                         batch_size=16, model={"hidden": 8, "layers": 2})
    assert json.loads(cfg)["model"]["arch"] == "gcn"
    ds = tmp_path / "ds.bin"
    info = bessgnn.generate_dataset(cfg, ds)
    assert (info["train"], info["val"]) == (48, 24)

    oracle = bessgnn.evaluate(ds)
    assert oracle["mse_bus"]["max"] == 0.0
    assert oracle["viol_battery"]["max"] == 0.0

    run = tmp_path / "run"
    out = bessgnn.train(ds, cfg, run)
    assert set(out) == {"baseline", "physics"}
    again = bessgnn.evaluate(ds, run / "gcn" / "checkpoint_physics.bin")
    assert again == out["physics"]
    assert again["samples"] == 24
    assert math.isfinite(again["mse_vm"]["mean"])

    written = bessgnn.report(run)
    assert any(p.endswith("summary.md") for p in written)
    assert math.isinf(bessgnn.gain_ratio(1e-3, 0.0))
