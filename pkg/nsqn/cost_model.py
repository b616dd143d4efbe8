"""
Per-iteration computational and storage cost of the four quasi-Newton methods.

n is the training-set size, b the mini-batch size, d the parameter count and
zeta the number of line-search function evaluations (full-batch methods only).
Costs are exact rationals; (b + 4) d / L need not be an integer.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from pydantic import BaseModel, ConfigDict, Field


class Algorithm(str, Enum):
    BFGS = "bfgs"
    NAQ = "naq"
    ADAQN = "adaqn"
    ASNAQ = "asnaq"


class CostModelInput(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    algorithm: Algorithm
    n: int = Field(60000, ge=1)
    b: int = Field(128, ge=1)
    d: int = Field(1000, ge=1)
    m_L: int = Field(10, ge=1)
    m_F: int = Field(100, ge=1)
    L: int = Field(5, ge=1)
    zeta: int = Field(1, ge=0)


@dataclass(frozen=True)
class Cost:
    compute: Fraction
    storage: int


def cost_model(inp: CostModelInput) -> Cost:
    n, b, d, L = inp.n, inp.b, inp.d, inp.L
    error_control = Fraction((b + 4) * d, L)
    match inp.algorithm:
        case Algorithm.BFGS:
            return Cost(Fraction(n * d + d * d + inp.zeta * n * d), d * d)
        case Algorithm.NAQ:
            return Cost(Fraction(2 * n * d + d * d + inp.zeta * n * d), d * d)
        case Algorithm.ADAQN:
            compute = b * d + (4 * inp.m_L + inp.m_F + 2) * d + error_control
        case Algorithm.ASNAQ:
            # second gradient (bd) and the normalization (d) on top of adaQN
            compute = 2 * b * d + (4 * inp.m_L + inp.m_F + 3) * d + error_control
    return Cost(compute, (2 * inp.m_L + inp.m_F) * d)


def cost_table(**dims) -> dict[Algorithm, Cost]:
    """Costs of every algorithm for one set of dimensions."""
    return {alg: cost_model(CostModelInput(algorithm=alg, **dims)) for alg in Algorithm}


def format_cost(value: Fraction) -> str:
    """Integers print with thousands separators; anything else as an exact fraction."""
    if value.denominator == 1:
        return f"{value.numerator:,}"
    return f"{value.numerator}/{value.denominator}"


def format_cost_table(table: dict[Algorithm, Cost]) -> str:
    lines = [f"{'algorithm':<10}{'compute':>20}{'storage':>16}"]
    for alg, cost in table.items():
        lines.append(f"{alg.value:<10}{format_cost(cost.compute):>20}{cost.storage:>16,}")
    return "\n".join(lines)
