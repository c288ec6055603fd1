"""Sample predict functions: what "messy research code" hands the adapter."""

import os

_CONSTANT = {
    "verdict": "standard_plane",
    "plane": "head",
    "concepts": [
        {"name": "skull", "present": True, "score": 0.97},
        {"name": "midline", "present": True, "score": 0.92},
    ],
}


def predict_constant(image):
    """Same answer for every frame; twin of the mock engine's one-entry script."""
    return dict(_CONSTANT)


def predict_mean_brightness(image):
    """A minimal real computation: call bright images standard planes."""
    mean = float(image.mean())
    bright = mean > 96
    return {
        "verdict": "standard_plane" if bright else "unknown_plane",
        "plane": "head" if bright else "other",
        "concepts": [{"name": "bright", "present": bright, "score": min(mean / 255, 1.0)}],
    }


_counter = {"n": 0}


def predict_dies_after_20(image):
    """Simulates research code that hard-crashes; for supervisor demos."""
    _counter["n"] += 1
    if _counter["n"] > 20:
        os._exit(3)
    return dict(_CONSTANT)
