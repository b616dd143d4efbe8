from fractions import Fraction

import pytest
from pydantic import ValidationError

from nsqn.cost_model import Algorithm, CostModelInput, cost_model, cost_table, format_cost, format_cost_table

PUBLISHED = dict(b=128, d=1000, m_L=10, m_F=100, L=5)


def test_asnaq_and_adaqn_published_settings():
    assert cost_model(CostModelInput(algorithm=Algorithm.ASNAQ, **PUBLISHED)).compute == 425_400
    assert cost_model(CostModelInput(algorithm=Algorithm.ADAQN, **PUBLISHED)).compute == 296_400


def test_limited_memory_storage():
    for alg in (Algorithm.ASNAQ, Algorithm.ADAQN):
        assert cost_model(CostModelInput(algorithm=alg, **PUBLISHED)).storage == 120_000


def test_dense_storage_and_compute():
    bfgs = cost_model(CostModelInput(algorithm=Algorithm.BFGS, n=100, d=1000, zeta=2))
    assert bfgs.storage == 1_000_000
    assert bfgs.compute == 100 * 1000 + 1000**2 + 2 * 100 * 1000
    naq = cost_model(CostModelInput(algorithm=Algorithm.NAQ, n=100, d=1000, zeta=2))
    assert naq.compute - bfgs.compute == 100 * 1000


@pytest.mark.parametrize(
    "dims",
    [
        dict(b=128, d=1000, m_L=10, m_F=100, L=5),
        dict(b=50, d=1149, m_L=10, m_F=100, L=5),
        dict(b=1, d=7, m_L=3, m_F=2, L=3),
        dict(b=127, d=1, m_L=1, m_F=1, L=2),
        dict(b=64, d=20_000, m_L=20, m_F=50, L=10),
    ],
)
def test_asnaq_minus_adaqn_is_bd_plus_d(dims):
    table = cost_table(**dims)
    b, d = dims["b"], dims["d"]
    assert table[Algorithm.ASNAQ].compute - table[Algorithm.ADAQN].compute == b * d + d


def test_hand_evaluated_tuples():
    table = cost_table(b=1, d=7, m_L=3, m_F=2, L=3)
    assert table[Algorithm.ADAQN].compute == 7 + 16 * 7 + Fraction(5 * 7, 3)
    assert table[Algorithm.ASNAQ].compute == 14 + 17 * 7 + Fraction(5 * 7, 3)


def test_fractional_cost_is_exact():
    cost = cost_model(CostModelInput(algorithm=Algorithm.ADAQN, b=127, d=1, m_L=1, m_F=1, L=2))
    assert cost.compute == Fraction(127 + 7) + Fraction(131, 2)
    assert format_cost(cost.compute) == "399/2"


def test_format():
    assert format_cost(Fraction(425400)) == "425,400"
    text = format_cost_table(cost_table(**PUBLISHED))
    assert "425,400" in text and "296,400" in text and "120,000" in text


def test_rejects_nonpositive_dimensions():
    with pytest.raises(ValidationError):
        CostModelInput(algorithm=Algorithm.ASNAQ, d=0)
