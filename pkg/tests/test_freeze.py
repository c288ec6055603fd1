import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from livegate.freeze import (DimensionMismatch, FreezeState, freeze_score,
                             freeze_update)

from .conftest import make_frame


def brute_force_expected_mad() -> float:
    """Exact E|a-b| for iid uniform bytes, enumerated over all 256x256 pairs."""
    values = np.arange(256)
    return float(np.abs(values[:, None] - values[None, :]).mean())


def gray_frame(seq, fill=None, payload=None, size=64):
    if payload is None:
        payload = bytes([fill]) * (size * size)
    return make_frame(seq=seq, width=size, height=size, payload=payload)


def test_identical_frames_score_zero():
    frame = gray_frame(0, fill=37)
    assert freeze_score(frame, gray_frame(1, fill=37)) == 0.0


def test_opposite_frames_score_255():
    assert freeze_score(gray_frame(0, fill=0), gray_frame(1, fill=255)) == 255.0


def test_random_pair_matches_brute_force_expectation():
    expected = brute_force_expected_mad()
    assert abs(expected - 85.33203125) < 1e-12  # the oracle itself, pinned
    rng = np.random.default_rng(1234)
    a = gray_frame(0, payload=rng.integers(0, 256, 64 * 64, dtype=np.uint8).tobytes())
    b = gray_frame(1, payload=rng.integers(0, 256, 64 * 64, dtype=np.uint8).tobytes())
    score = freeze_score(a, b, downsample=64)
    assert abs(score - expected) <= 2.0


def test_score_symmetric_and_bounded():
    rng = np.random.default_rng(7)
    a = gray_frame(0, payload=rng.integers(0, 256, 64 * 64, dtype=np.uint8).tobytes())
    b = gray_frame(1, payload=rng.integers(0, 256, 64 * 64, dtype=np.uint8).tobytes())
    assert freeze_score(a, b) == freeze_score(b, a)
    assert 0.0 <= freeze_score(a, b) <= 255.0


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        freeze_score(gray_frame(0, fill=0, size=64), gray_frame(1, fill=0, size=32))


def test_bt601_weights_on_rgb():
    red = make_frame(seq=0, width=8, height=8, pixel_format="RGB8",
                     payload=bytes([255, 0, 0]) * 64)
    black = make_frame(seq=1, width=8, height=8, pixel_format="RGB8",
                       payload=bytes([0, 0, 0]) * 64)
    assert freeze_score(red, black) == pytest.approx(0.299 * 255, abs=1e-9)


def test_downsampling_preserves_extremes():
    big_lo = make_frame(seq=0, width=256, height=128, payload=bytes(256 * 128))
    big_hi = make_frame(seq=1, width=256, height=128, payload=b"\xff" * (256 * 128))
    assert freeze_score(big_lo, big_hi, downsample=64) == 255.0
    assert freeze_score(big_lo, big_lo, downsample=64) == 0.0


def test_jpeg_frames_scoreable():
    import cv2
    img = np.full((32, 32), 128, dtype=np.uint8)
    ok, buf = cv2.imencode(".jpg", img)
    assert ok
    a = make_frame(seq=0, width=32, height=32, pixel_format="JPEG", payload=buf.tobytes())
    b = make_frame(seq=1, width=32, height=32, pixel_format="JPEG", payload=buf.tobytes())
    assert freeze_score(a, b) == 0.0


# -- state machine ------------------------------------------------------------

def run_updates(scores, tau=2.0, k=5):
    state = FreezeState()
    history = []
    for score in scores:
        state = freeze_update(state, score, tau, k)
        history.append(state)
    return history


def test_freezes_after_exactly_k_low_scores():
    history = run_updates([0.0] * 5, k=5)
    assert [s.frozen for s in history] == [False, False, False, False, True]


def test_motion_resets_immediately():
    state = run_updates([0.0] * 5, k=5)[-1]
    assert state.frozen
    state = freeze_update(state, 50.0, 2.0, 5)
    assert state.frozen is False and state.consecutive_below == 0


def test_reset_mid_run_delays_freeze():
    # scores [0,0,0,9,0,0,0,0,0] with tau=2, k=5: frozen only after the final one
    history = run_updates([0, 0, 0, 9, 0, 0, 0, 0, 0], tau=2.0, k=5)
    assert [s.frozen for s in history] == [False] * 8 + [True]


def test_tau_is_inclusive():
    history = run_updates([2.0] * 5, tau=2.0, k=5)
    assert history[-1].frozen


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=255.0,
                          allow_nan=False), min_size=1, max_size=40),
       st.integers(min_value=1, max_value=8))
def test_frozen_iff_streak_reaches_k(scores, k):
    state = FreezeState()
    streak = 0
    for score in scores:
        state = freeze_update(state, score, 2.0, k)
        streak = streak + 1 if score <= 2.0 else 0
        assert state.consecutive_below == streak
        assert state.frozen == (streak >= k)
        assert state.last_score == score
