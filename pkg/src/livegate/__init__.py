"""livegate: a gateway for running image-based AI models against live video.

Captures a video stream, broadcasts frames on a dual-mode bus (lossless for
the recorder, latest-wins for inference and viewers), routes the newest frame
through fault-isolated engine processes, records in parallel, and streams
predictions to any number of connected displays.
"""

from .bus import Bus, Closed, Overflow, Subscription
from .frames import Frame, SourceSpec, open_source, synthetic_pattern
from .wire import decode_frame, encode_frame

__version__ = "0.1.0"

__all__ = [
    "Bus",
    "Closed",
    "Frame",
    "Overflow",
    "SourceSpec",
    "Subscription",
    "decode_frame",
    "encode_frame",
    "open_source",
    "synthetic_pattern",
    "__version__",
]
