"""Feature ingestion and fusion.

Per-frame features normally come from files produced by an external
extractor (deep features etc.); the binary container below is the exchange
format. A joint color histogram is provided as a reference extractor so the
whole pipeline can run without any external dependency.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import Camera, FeatureStream
from .media import Image

MAGIC = b"HCFT"
VERSION = 1

_CAMERA_CODE = {Camera.LEFT_HAND: 0, Camera.RIGHT_HAND: 1, Camera.HEAD: 2}
_CAMERA_FROM_CODE = {v: k for k, v in _CAMERA_CODE.items()}


class FeatureFileError(ValueError):
    """Malformed feature container."""


def write_features(stream: FeatureStream, path: str | Path) -> None:
    """Serialize a feature stream; payload is float32 little-endian, row-major."""
    vid = stream.video_id.encode("utf-8")
    if len(vid) > 0xFFFF:
        raise FeatureFileError("video_id too long")
    if stream.n_frames < 1 or stream.dim < 1:
        raise FeatureFileError("feature files require N >= 1 and D >= 1")
    header = MAGIC + struct.pack(
        "<IH", VERSION, len(vid)
    ) + vid + struct.pack(
        "<BdII", _CAMERA_CODE[stream.camera], stream.fps, stream.n_frames, stream.dim
    )
    payload = stream.values.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_features(path: str | Path) -> FeatureStream:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FeatureFileError(f"magic mismatch: {data[:4]!r}")
    pos = 4
    try:
        version, vid_len = struct.unpack_from("<IH", data, pos)
        pos += 6
        vid = data[pos : pos + vid_len].decode("utf-8")
        pos += vid_len
        camera_code, fps, n, d = struct.unpack_from("<BdII", data, pos)
        pos += struct.calcsize("<BdII")
    except struct.error as e:
        raise FeatureFileError(f"truncated header: {e}") from None
    if version != VERSION:
        raise FeatureFileError(f"unsupported version {version}")
    if camera_code not in _CAMERA_FROM_CODE:
        raise FeatureFileError(f"unknown camera code {camera_code}")
    if n < 1 or d < 1:
        raise FeatureFileError("header requires N >= 1 and D >= 1")
    expected = n * d * 4
    if len(data) - pos < expected:
        raise FeatureFileError("truncated payload")
    if len(data) - pos > expected:
        raise FeatureFileError("payload length mismatch: trailing bytes")
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=pos)
    values = values.reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FeatureFileError("non-finite values in payload")
    return FeatureStream(vid, _CAMERA_FROM_CODE[camera_code], fps, values)


def color_histogram(img: Image, bins_per_channel: int = 8) -> np.ndarray:
    """Joint RGB histogram, L1-normalized to sum 1.

    Bin index per channel is floor(value * bins / 256); the joint bin is
    (r_bin * bins + g_bin) * bins + b_bin, giving a bins**3 vector.
    """
    if not 2 <= bins_per_channel <= 16:
        raise ValueError("bins_per_channel must be in [2, 16]")
    if img.channels != 3:
        raise ValueError("color_histogram requires a 3-channel image")
    b = bins_per_channel
    idx = (img.pixels.astype(np.int64) * b) // 256
    flat = (idx[:, :, 0] * b + idx[:, :, 1]) * b + idx[:, :, 2]
    counts = np.bincount(flat.ravel(), minlength=b * b * b).astype(np.float64)
    return counts / counts.sum()


def histogram_stream(
    frames: list[Image],
    video_id: str,
    camera: Camera,
    fps: float = 6.0,
    bins_per_channel: int = 8,
) -> FeatureStream:
    """Apply the reference extractor to every frame of a video."""
    values = np.stack([color_histogram(f, bins_per_channel) for f in frames])
    return FeatureStream(video_id, camera, fps, values)


def fuse_concat(a: FeatureStream, b: FeatureStream) -> FeatureStream:
    """Concatenate two streams frame-wise: row i becomes [a_i, b_i].

    The fused stream keeps the identity of the first input. Order matters
    for the layout; downstream classifiers accept either order.
    """
    if a.n_frames != b.n_frames:
        raise ValueError(f"length mismatch: {a.n_frames} vs {b.n_frames} frames")
    if a.fps != b.fps:
        raise ValueError(f"fps mismatch: {a.fps} vs {b.fps}")
    values = np.concatenate([a.values, b.values], axis=1)
    return FeatureStream(a.video_id, a.camera, a.fps, values)
