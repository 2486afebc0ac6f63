import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graspbench.errors import DimensionMismatch, ParseError
from graspbench.masks import decode_rle, encode_rle, mask_iou


def test_round_trip_simple():
    mask = np.zeros((4, 6), dtype=bool)
    mask[1:3, 2:5] = True
    assert np.array_equal(decode_rle(encode_rle(mask)), mask)


def test_counts_start_with_zero_run():
    mask = np.ones((2, 2), dtype=bool)
    rle = encode_rle(mask)
    assert rle["counts"].split()[0] == "0"


def test_column_major_order():
    # single set pixel at row 1, col 0 -> offset 1 in Fortran order
    mask = np.zeros((3, 2), dtype=bool)
    mask[1, 0] = True
    assert encode_rle(mask)["counts"] == "1 1 4"


@settings(max_examples=200)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_round_trip_property(mask):
    assert np.array_equal(decode_rle(encode_rle(mask)), mask)


def test_decode_length_mismatch():
    with pytest.raises(ParseError):
        decode_rle({"size": [2, 2], "counts": "1 1"})


def test_decode_malformed():
    with pytest.raises(ParseError):
        decode_rle({"counts": "4"})


def test_iou_identical():
    mask = np.zeros((10, 10), dtype=bool)
    mask[:5, :5] = True
    assert mask_iou(mask, mask) == 1.0


def test_iou_disjoint():
    a = np.zeros((10, 10), dtype=bool)
    b = np.zeros((10, 10), dtype=bool)
    a[:2, :2] = True
    b[5:, 5:] = True
    assert mask_iou(a, b) == 0.0


def test_iou_half():
    a = np.zeros((10, 10), dtype=bool)
    b = np.zeros((10, 10), dtype=bool)
    a[:, :] = True  # 10x10 square
    b[:, :5] = True  # its 10x5 half
    assert mask_iou(a, b) == 0.5


def test_iou_both_empty():
    z = np.zeros((4, 4), dtype=bool)
    assert mask_iou(z, z) == 0.0


def test_iou_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mask_iou(np.zeros((2, 2), dtype=bool), np.zeros((3, 3), dtype=bool))


@settings(max_examples=100)
@given(
    arrays(bool, (8, 8)),
    arrays(bool, (8, 8)),
)
def test_iou_symmetric_and_bounded(a, b):
    assert mask_iou(a, b) == mask_iou(b, a)
    assert 0.0 <= mask_iou(a, b) <= 1.0
