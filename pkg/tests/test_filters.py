import numpy as np
import pandas as pd
import pytest

from quadsim.filters import (
    apply_boolean_filter,
    apply_mask_filters,
    apply_range_filter,
    blackout_mask,
    blackout_rows,
    summarize_availability,
)


@pytest.fixture
def bitacora():
    return pd.DataFrame(
        {
            "t": [0.0, 0.01, 0.02, 0.03],
            "x": [3.0, 4.5, 5.5, 7.0],
            "mask_uwb": [True, False, False, True],
            "mask_yolo": [True, True, False, False],
            "mask_imu": [True, True, True, True],
        }
    )


def test_range_filter(bitacora):
    assert apply_range_filter(bitacora, "x", 4.0, 6.0)["x"].tolist() == [4.5, 5.5]
    assert len(apply_range_filter(bitacora, "x", min_val=5.0)) == 2
    assert apply_range_filter(bitacora, "falta", 0, 1) is bitacora


def test_boolean_filter(bitacora):
    assert len(apply_boolean_filter(bitacora, "mask_uwb", False)) == 2
    assert apply_boolean_filter(bitacora, "mask_uwb", None) is bitacora


def test_mask_filters(bitacora):
    out = apply_mask_filters(bitacora, {"UWB": False, "YOLO": True, "IMU": None})
    assert out["t"].tolist() == [0.01]


def test_blackout_helpers(bitacora):
    np.testing.assert_array_equal(blackout_mask(bitacora["x"], (4.0, 6.0)), [False, True, True, False])
    assert not blackout_mask(bitacora["x"], None).any()
    assert len(blackout_rows(bitacora, (4.0, 6.0))) == 2
    assert blackout_rows(bitacora, None).empty


def test_summarize_availability(bitacora):
    s = summarize_availability(bitacora)
    assert s["UWB"] == 0.5 and s["YOLO"] == 0.5 and s["IMU"] == 1.0
    assert summarize_availability(bitacora.iloc[0:0]).isna().all()
