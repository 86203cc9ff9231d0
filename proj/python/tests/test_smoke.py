import json
import math
import os

import numpy as np
import pytest

import hetmarket as hm


def tiny_config(**market):
    cfg = {
        "seed": 3,
        "market": {"n_agents": 6, "steps": 600, **market},
        "learning": {"hidden_width": 8, "rollout_length": 16, "max_episodes": 1},
    }
    return hm.Config.from_json(json.dumps(cfg))


def test_config_round_trip():
    cfg = tiny_config()
    again = hm.Config.from_json(cfg.to_json())
    assert again == cfg
    assert again.hash() == cfg.hash()


def test_unknown_key_is_rejected():
    with pytest.raises(Exception, match="market.typo"):
        hm.Config.from_json('{"market": {"n_agents": 2, "steps": 10, "typo": 1}}')


def test_shipped_configs_parse():
    root = os.environ.get("HETMARKET_CONFIGS")
    if not root:
        pytest.skip("config directory not provided")
    for name in sorted(os.listdir(root)):
        if name.endswith(".json"):
            hm.Config.load(os.path.join(root, name))


def test_train_and_simulate_are_deterministic(tmp_path):
    cfg = tiny_config()
    ck, log = hm.train(cfg)
    _, log2 = hm.train(cfg)
    assert log.shape[1] == 5
    np.testing.assert_array_equal(log, log2)

    path = str(tmp_path / "policy.bin")
    ck.save(path)
    loaded = hm.load_checkpoint(path)
    assert loaded.hidden_width == 8
    assert loaded.config_hash == cfg.hash()

    a = hm.simulate(cfg, checkpoint=loaded)
    b = hm.simulate(cfg, checkpoint=loaded)
    assert a["mid_prices"].shape == (601,)
    np.testing.assert_array_equal(a["mid_prices"], b["mid_prices"])
    np.testing.assert_array_equal(a["trades"], b["trades"])
    assert np.all(a["mid_prices"] > 0)


def test_zero_intelligence_population_needs_no_policy():
    cfg = hm.Config.from_json(json.dumps({
        "market": {"n_agents": 20, "steps": 400},
        "population": {"agent_type": "zi"},
    }))
    out = hm.simulate(cfg, seed=11)
    assert out["trades"].shape[1] == 5
    bars = hm.make_bars(out["mid_prices"], 20, 10)
    assert len(bars) == 2 and len(bars[0]) == 10


def test_transport_matches_sorted_coupling():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(7, 1))
    b = rng.normal(size=(7, 1))
    expected = np.mean((np.sort(a[:, 0]) - np.sort(b[:, 0])) ** 2)
    assert hm.ot_distance(a, b) == pytest.approx(expected, abs=1e-12)
    cost, plan = hm.solve_transport(rng.normal(size=(4, 9)), rng.normal(size=(6, 9)))
    np.testing.assert_allclose(plan.sum(axis=1), 1 / 4, atol=1e-12)
    np.testing.assert_allclose(plan.sum(axis=0), 1 / 6, atol=1e-12)
    assert cost > 0


def test_statistics():
    rng = np.random.default_rng(1)
    pareto = rng.pareto(3.0, size=100_000) + 1.0
    assert hm.hill_tail_exponent(pareto, 5000) == pytest.approx(3.0, abs=0.2)
    assert abs(hm.excess_kurtosis(rng.normal(size=200_000))) < 0.05
    assert hm.spearman_correlation([1, 2, 3, 4], [10, 20, 25, 100]) == pytest.approx(1.0)


def test_tail_cloud_indexing():
    cloud = hm.build_tail_cloud([[8.0, 4.0, 2.0, 1.0]], 2)
    np.testing.assert_allclose(cloud, [math.log(8 / 2), math.log(4 / 2)])
    literal = hm.build_tail_cloud([[8.0, 4.0, 2.0, 1.0]], 2, descending_indexing=True)
    np.testing.assert_allclose(literal, [math.log(1 / 4), math.log(2 / 4)])
