import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from treespect.errors import DataError
from treespect.panel import (
    TimeSeriesPanel,
    load_panel,
    save_panel,
    select_channels,
)


def make_panel(n=3, t=50, seed=0):
    rng = np.random.default_rng(seed)
    return TimeSeriesPanel(rng.standard_normal((n, t)), [f"n{i}" for i in range(n)])


def test_validation():
    with pytest.raises(DataError):
        TimeSeriesPanel(np.zeros((1, 10)), ["a"])
    with pytest.raises(DataError):
        TimeSeriesPanel(np.full((2, 4), np.nan), ["a", "b"])
    with pytest.raises(DataError):
        TimeSeriesPanel(np.zeros((2, 4)), ["a", "a"])


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_roundtrip(tmp_path, fmt):
    panel = make_panel()
    path = save_panel(panel, tmp_path / f"p.{fmt}", fmt)
    back = load_panel(path)
    assert back.labels == panel.labels
    np.testing.assert_allclose(back.data, panel.data, rtol=0, atol=0)


@settings(max_examples=25, deadline=None)
@given(
    arrays(
        np.float64,
        st.tuples(st.integers(2, 5), st.integers(1, 20)),
        elements=st.floats(-1e12, 1e12, allow_nan=False, width=64),
    )
)
def test_binary_roundtrip_bit_exact(tmp_path_factory, data):
    panel = TimeSeriesPanel(data, [f"c{i}" for i in range(data.shape[0])])
    path = tmp_path_factory.mktemp("panels") / "p.bin"
    save_panel(panel, path, "bin")
    back = load_panel(path)
    assert np.array_equal(back.data, panel.data)


def test_csv_size_limit(tmp_path):
    big = TimeSeriesPanel(np.zeros((2, 6 * 10**6)), ["a", "b"])
    with pytest.raises(DataError):
        save_panel(big, tmp_path / "p.csv", "csv")


def test_select_channels():
    panel = make_panel(4)
    sub = select_channels(panel, ["n2", "n0"])
    assert sub.labels == ("n2", "n0")
    np.testing.assert_array_equal(sub.data[1], panel.data[0])
