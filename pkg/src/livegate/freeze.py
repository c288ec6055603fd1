"""Frozen-screen detection.

The scanner UI freezes the image when the operator hits freeze; we infer that
purely from pixel change between consecutive frames: grayscale, area
downsample, mean absolute difference. A score at or below tau for k frames in
a row means frozen. Defaults (64 px, tau 2.0, k 5) tolerate JPEG noise from
the capture path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np

from .frames import Frame

DEFAULT_DOWNSAMPLE = 64
DEFAULT_TAU = 2.0
DEFAULT_K = 5

# ITU-R BT.601 luma weights; fixed so scores are reproducible everywhere
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class DimensionMismatch(ValueError):
    pass


@dataclass(slots=True)
class FreezeState:
    consecutive_below: int = 0
    frozen: bool = False
    last_score: Optional[float] = None


def to_gray(frame: Frame) -> np.ndarray:
    """Frame -> float64 grayscale array (height x width)."""
    if frame.pixel_format == "GRAY8":
        gray = np.frombuffer(frame.payload, dtype=np.uint8)
        return gray.reshape(frame.height, frame.width).astype(np.float64)
    if frame.pixel_format == "RGB8":
        rgb = np.frombuffer(frame.payload, dtype=np.uint8)
        rgb = rgb.reshape(frame.height, frame.width, 3).astype(np.float64)
        return rgb @ _LUMA
    bgr = cv2.imdecode(np.frombuffer(frame.payload, dtype=np.uint8), cv2.IMREAD_COLOR)
    if bgr is None:
        raise ValueError(f"JPEG decode failed for frame seq {frame.seq}")
    return bgr[:, :, ::-1].astype(np.float64) @ _LUMA


def area_downsample(gray: np.ndarray, target_edge: int) -> np.ndarray:
    """Area-average so max(width, height) == target_edge. Never upsamples."""
    h, w = gray.shape
    longest = max(h, w)
    if longest <= target_edge:
        return gray
    scale = target_edge / longest
    tw = max(1, round(w * scale))
    th = max(1, round(h * scale))
    return cv2.resize(gray.astype(np.float32), (tw, th),
                      interpolation=cv2.INTER_AREA).astype(np.float64)


def freeze_score(prev: Frame, curr: Frame, downsample: int = DEFAULT_DOWNSAMPLE) -> float:
    """Mean absolute gray-level difference of the downsampled frames, in [0, 255].
    Symmetric in its arguments."""
    if (prev.width, prev.height) != (curr.width, curr.height):
        raise DimensionMismatch(
            f"{prev.width}x{prev.height} vs {curr.width}x{curr.height}")
    a = area_downsample(to_gray(prev), downsample)
    b = area_downsample(to_gray(curr), downsample)
    return float(np.mean(np.abs(a - b)))


def freeze_update(state: FreezeState, score: float,
                  tau: float = DEFAULT_TAU, k: int = DEFAULT_K) -> FreezeState:
    """One observation step: scores <= tau accumulate, anything above resets."""
    below = state.consecutive_below + 1 if score <= tau else 0
    return FreezeState(consecutive_below=below, frozen=below >= k, last_score=score)
