"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import iwsgd


def test_philox_matches_numpy_bit_generator():
    key = [0x123456789ABCDEF0, 0x0FEDCBA987654321]
    counter = [41, 7, 3, 11]
    ref = np.random.Philox(counter=counter, key=key).random_raw(8)
    mine = list(iwsgd.philox4x64([counter[0] + 1] + counter[1:], key))
    mine += list(iwsgd.philox4x64([counter[0] + 2] + counter[1:], key))
    assert [int(x) for x in ref] == mine


def test_log_sum_exp_and_softmax():
    assert iwsgd.log_sum_exp([0.0]) == 0.0
    assert iwsgd.log_sum_exp([-1000.0, -1001.0]) == pytest.approx(
        -1000.0 + math.log(1 + math.exp(-1)), abs=1e-12
    )
    out = iwsgd.log_softmax(np.array([math.log(1), math.log(3)]))
    assert out[0] == pytest.approx(math.log(0.25), abs=1e-12)
    assert np.exp(out).sum() == pytest.approx(1.0, abs=1e-12)


def test_matmul_against_numpy():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(5, 7))
    b = rng.normal(size=(7, 3))
    assert np.max(np.abs(iwsgd.matmul(a, b) - a @ b)) < 1e-12
    with pytest.raises(iwsgd.DimensionError):
        iwsgd.matmul(a, a)


def test_importance_weights():
    w = iwsgd.importance_weights([math.log(1), math.log(3)])
    assert w == pytest.approx([0.25, 0.75], abs=1e-12)
    assert iwsgd.importance_weights([-5.0]) == [1.0]
    with pytest.raises(iwsgd.DegenerateLikelihoodError):
        iwsgd.importance_weights([-math.inf, -math.inf])


def test_bound_chain_on_the_worked_instance():
    spec = iwsgd.mlp(1, [1], 2, noise_mode="bernoulli", keep_prob=0.5)
    params = iwsgd.init_params(spec, 1)
    # single hidden unit, p(y=0|kept)=0.8, p(y=0|dropped)=0.2
    params.set_dense(0, np.array([[1.0]]), np.array([0.0]))
    params.set_dense(1, np.array([[2 * math.log(4), 0.0]]),
                     np.array([math.log(0.2), math.log(0.8)]))
    x = np.array([1.0])
    l1 = iwsgd.lsgd_exact(spec, params, x, 0, 1)
    l2 = iwsgd.lsgd_exact(spec, params, x, 0, 2)
    marg = iwsgd.marginal_exact(spec, params, x, 0)
    assert l1 == pytest.approx(-0.916291, abs=1e-6)
    assert l2 == pytest.approx(-0.804719, abs=1e-6)
    assert marg == pytest.approx(math.log(0.5), abs=1e-12)
    assert l1 < l2 < marg

    value, std_error = iwsgd.lsgd_mc(spec, params, x, 0, 2, 20000, 9)
    assert abs(value - l2) < 4 * std_error


def test_gradcheck_binding():
    worst, passed = iwsgd.gradcheck(seed=2, trials=5)
    assert passed
    assert worst < 1e-6


def test_train_run_is_deterministic():
    config = {
        "dataset": "blobs",
        "blobs_per_class": 30,
        "blobs_classes": 3,
        "blobs_dim": 2,
        "data_seed": 5,
        "hidden": "6",
        "noise_mode": "bernoulli",
        "keep_prob": 0.5,
        "samples": 2,
        "learning_rate": 0.1,
        "momentum": 0.9,
        "batch_size": 7,
        "budget_kind": "updates",
        "budget": 25,
        "master_seed": 11,
        "eval_every": 10,
    }
    a = iwsgd.train_run(config)
    b = iwsgd.train_run(config)
    assert a["updates"] == 25
    assert a["forward_passes"] == 25 * 7 * 2
    assert a["final_test_error"] == b["final_test_error"]
    assert [s["objective"] for s in a["steps"]] == [s["objective"] for s in b["steps"]]
    assert all(0.5 <= s["max_weight"] <= 1.0 for s in a["steps"])


def test_train_run_rejects_unknown_keys():
    with pytest.raises(iwsgd.ConfigError):
        iwsgd.train_run({"dataset": "blobs", "lerning_rate": 0.1})
