import math

import numpy as np
import pytest

from winowise.bitgrowth import BitBudget, bit_budget, bit_growth, exhaustive_bits, integer_scaled, signed_bits
from winowise.errors import UnsupportedParameterError
from winowise.transforms import make_transform_set


def _mats(m):
    ts = make_transform_set(m)
    return {"input": integer_scaled(ts.BT)[0], "weight": integer_scaled(ts.G)[0], "output": integer_scaled(ts.AT)[0]}


def test_signed_bits():
    assert signed_bits(-128, 127) == 8
    assert signed_bits(-129, 0) == 9
    assert signed_bits(0, 128) == 9
    assert signed_bits(0, 0) == 1


def test_integer_scaled():
    mat, scale = integer_scaled(make_transform_set(2).G)
    assert scale == 2
    assert mat.tolist() == [[2, 0, 0], [1, 1, 1], [1, -1, 1], [0, 0, 2]]


def test_f2_input_two_extra_bits():
    assert bit_growth(_mats(2)["input"], 8) == 2


# The worst case over every signed 8-bit tile. The published budgets for
# the F2 weight and the F4 input/output transforms are checked in the
# acceptance suite; these values are the exact maxima.
@pytest.mark.parametrize("m,stage,extra", [
    (2, "weight", 4), (2, "output", 4), (4, "input", 7), (4, "weight", 10), (4, "output", 9),
])
def test_exact_budgets(m, stage, extra):
    assert bit_growth(_mats(m)[stage], 8) == extra


@pytest.mark.parametrize("m", [2, 4])
@pytest.mark.parametrize("stage", ["input", "weight", "output"])
@pytest.mark.parametrize("n", [2, 3, 8])
def test_matches_per_coordinate_search(m, stage, n):
    T = _mats(m)[stage]
    assert bit_growth(T, n) == exhaustive_bits(T, n)


def test_matches_full_enumeration_f2_weight():
    # 4**9 tiles; the 16-input transforms are covered per coordinate
    T = _mats(2)["weight"]
    assert bit_growth(T, 2) == exhaustive_bits(T, 2, brute=True)


def test_rejects_fractional_and_bad_bits():
    with pytest.raises(UnsupportedParameterError):
        bit_growth(make_transform_set(2).G, 8)
    with pytest.raises(UnsupportedParameterError):
        bit_growth(np.eye(2, dtype=int), 0)


def test_identity_has_no_growth():
    assert bit_growth(np.eye(3, dtype=int), 8) == 0


def test_bit_budget():
    b = bit_budget(make_transform_set(4), 8, c_in=256)
    assert isinstance(b, BitBudget)
    assert (b.input_extra, b.weight_extra, b.output_extra) == (7, 10, 9)
    assert b.product_extra == 17
    assert b.accumulation_extra == 8
    assert b.accumulator_bits == 16 + 17 + 8
    assert b.as_dict()["accumulator_bits"] == b.accumulator_bits
    assert bit_budget(make_transform_set(2), 8, c_in=1).accumulation_extra == 0
    assert bit_budget(make_transform_set(2), 8, c_in=3).accumulation_extra == math.ceil(math.log2(3))
