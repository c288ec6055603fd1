"""Binary wire format for frames.

Layout (all frames, every transport):

    bytes 0..3    magic "LGF1"
    bytes 4..7    header_len, unsigned 32-bit big-endian
    bytes 8..     UTF-8 JSON header {seq, t_capture_ns, t_wall_ns,
                                     width, height, pixel_format}
    rest          payload, raw

Total message length = 8 + header_len + payload length. The JSON header keeps
the wire debuggable; the payload stays binary.
"""

from __future__ import annotations

import json
import struct

from .frames import PIXEL_FORMATS, Frame, payload_len

MAGIC = b"LGF1"

_HEADER_KEYS = ("seq", "t_capture_ns", "t_wall_ns", "width", "height", "pixel_format")


class BadMagic(ValueError):
    pass


class HeaderParseError(ValueError):
    pass


class PayloadLengthMismatch(ValueError):
    pass


def encode_frame(frame: Frame) -> bytes:
    frame.validate()
    header = json.dumps(
        {
            "seq": frame.seq,
            "t_capture_ns": frame.t_capture_ns,
            "t_wall_ns": frame.t_wall_ns,
            "width": frame.width,
            "height": frame.height,
            "pixel_format": frame.pixel_format,
        },
        separators=(",", ":"),
    ).encode("utf-8")
    return b"".join((MAGIC, struct.pack(">I", len(header)), header, frame.payload))


def decode_frame(data: bytes) -> Frame:
    if len(data) < 8 or data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r} prefix")
    (header_len,) = struct.unpack(">I", data[4:8])
    if len(data) < 8 + header_len:
        raise HeaderParseError(f"header truncated: need {header_len} bytes, have {len(data) - 8}")
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderParseError(str(exc)) from exc
    if not isinstance(header, dict) or any(k not in header for k in _HEADER_KEYS):
        raise HeaderParseError(f"header missing fields, got {sorted(header) if isinstance(header, dict) else header}")
    if header["pixel_format"] not in PIXEL_FORMATS:
        raise HeaderParseError(f"unknown pixel_format {header['pixel_format']!r}")
    if not all(isinstance(header[k], int) for k in ("seq", "t_capture_ns", "t_wall_ns", "width", "height")):
        raise HeaderParseError("numeric header fields must be integers")
    if header["width"] < 1 or header["height"] < 1:
        raise HeaderParseError("width and height must be >= 1")

    payload = data[8 + header_len :]
    expected = payload_len(header["pixel_format"], header["width"], header["height"])
    if expected is not None and len(payload) != expected:
        raise PayloadLengthMismatch(
            f"{header['pixel_format']} {header['width']}x{header['height']} "
            f"needs {expected} payload bytes, got {len(payload)}"
        )
    return Frame(
        seq=header["seq"],
        t_capture_ns=header["t_capture_ns"],
        t_wall_ns=header["t_wall_ns"],
        width=header["width"],
        height=header["height"],
        pixel_format=header["pixel_format"],
        payload=payload,
    )
