import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsolock.seeding import label_code, substream


def test_same_key_same_stream():
    a = substream(7, "x", 1, 2).random(100)
    b = substream(7, "x", 1, 2).random(100)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize(
    "other",
    [(8, "x", 1, 2), (7, "y", 1, 2), (7, "x", 2, 1), (7, "x", 1), (7, "x", 1, 2, 0)],
)
def test_different_keys_differ(other):
    a = substream(7, "x", 1, 2).random(16)
    b = substream(*other).random(16)
    assert not np.array_equal(a, b)


def test_stream_is_independent_of_draw_history():
    first = substream(3, "lbl", 5).random(4)
    for i in range(5):
        substream(3, "lbl", i).random(1000)
    np.testing.assert_array_equal(substream(3, "lbl", 5).random(4), first)


def test_seed_range():
    substream(0, "a")
    substream(2**64 - 1, "a")
    for bad in (-1, 2**64):
        with pytest.raises(ValueError):
            substream(bad, "a")


def test_label_code_is_stable():
    assert label_code("teleport-trials") == label_code("teleport-trials")
    assert label_code("a") != label_code("b")


@given(seed=st.integers(0, 2**64 - 1), idx=st.integers(0, 2**31))
def test_streams_look_uniform(seed, idx):
    x = substream(seed, "u", idx).random(2000)
    assert 0.0 <= x.min() and x.max() < 1.0
    assert abs(x.mean() - 0.5) < 5 * (1 / 12 / 2000) ** 0.5
