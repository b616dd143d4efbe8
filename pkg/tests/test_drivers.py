import numpy as np
import pytest

from nsqn.config import OPTIMIZERS, parse_config
from nsqn.drivers import DRIVERS, AdamDriver, AsnaqDriver, NagDriver, build_driver
from nsqn.numkit import SeededRng
from nsqn.rnn_model import BatchOracle, init_params


def test_every_optimizer_has_a_driver():
    assert set(DRIVERS) == set(OPTIMIZERS)


@pytest.mark.parametrize("name", OPTIMIZERS)
def test_driver_steps_and_counts(name, counting_task):
    spec, batch = counting_task
    cfg = parse_config(f"optimizer = {name}")
    w0 = init_params(spec, SeededRng(0))
    driver = build_driver(cfg, w0)
    oracle = BatchOracle(spec, batch.take(slice(0, 20)))
    loss = driver.step(oracle)
    assert driver.k == 1
    assert np.isfinite(loss)
    assert not np.array_equal(driver.w, w0)
    expected_grads = 2 if name in ("asnaq", "naq", "bfgs") else 1
    assert oracle.grad_calls == expected_grads


def test_status_reports(counting_task):
    spec, batch = counting_task
    cfg = parse_config("nag.momentum = 0.7")
    w0 = init_params(spec, SeededRng(0))
    assert NagDriver(w0, cfg).status().mu == 0.7
    assert AdamDriver(w0, cfg).status().mu == 0.0
    asnaq = AsnaqDriver(w0, cfg)
    asnaq.step(BatchOracle(spec, batch.take(slice(0, 20))))
    status = asnaq.status()
    assert status.mu == cfg.hp.mu_min
    assert (status.n_pairs, status.n_fim) == (0, 1)
    assert asnaq.last_report.descent < 0


def test_driver_does_not_alias_initial_weights(counting_task):
    spec, batch = counting_task
    w0 = init_params(spec, SeededRng(0))
    keep = w0.copy()
    driver = build_driver(parse_config("optimizer = adagrad"), w0)
    driver.step(BatchOracle(spec, batch.take(slice(0, 20))))
    assert np.array_equal(w0, keep)
