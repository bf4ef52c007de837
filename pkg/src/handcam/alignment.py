"""Across-videos hand alignment.

Each video's per-pixel intensity history is summarized by a Laplace fit
(median center, mean-absolute-deviation diversity). Pixels whose diversity
stays below a threshold in every channel form the stable hand mask; the
video with the smallest stable region provides the template, which is then
located in every other video's median image by multiscale zero-normalized
cross-correlation. Frames are finally rescaled, cropped to the reference
resolution, and replicate-padded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.ndimage import label as cc_label
from scipy.signal import fftconvolve

from .media import Image, resize_to, to_gray


@dataclass(frozen=True)
class AlignmentParams:
    beta_threshold: float = 40.0
    scales: tuple[float, ...] = (0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", tuple(self.scales))
        if self.beta_threshold <= 0:
            raise ValueError("beta_threshold must be positive")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be non-empty and positive")


@dataclass(frozen=True)
class PixelStats:
    """Laplace fit per pixel and channel over time.

    median_image minimizes the sum of absolute deviations (sample median);
    diversity_image is the mean absolute deviation from it, zero wherever
    the pixel never changes.
    """

    median_image: np.ndarray
    diversity_image: np.ndarray


def compute_pixel_stats(frames: Sequence[Image]) -> PixelStats:
    if len(frames) < 1:
        raise ValueError("need at least one frame")
    shape = frames[0].pixels.shape
    for i, f in enumerate(frames):
        if f.pixels.shape != shape:
            raise ValueError(
                f"frame {i} has shape {f.pixels.shape}, expected {shape}"
            )
    stack = np.stack([f.pixels for f in frames]).astype(np.float64)
    median = np.median(stack, axis=0)  # even count: mean of the two middle values
    diversity = np.mean(np.abs(stack - median), axis=0)
    return PixelStats(median, diversity)


@dataclass(frozen=True)
class StableMask:
    """Stability mask plus the largest 4-connected stable component."""

    mask: np.ndarray
    bounding_box: tuple[int, int, int, int] | None  # (x0, y0, x1, y1), half-open
    component_size: int

    @property
    def is_empty(self) -> bool:
        return self.bounding_box is None


_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def stable_mask(stats: PixelStats, params: AlignmentParams) -> StableMask:
    """Pixels with diversity below the threshold in all three channels."""
    if stats.diversity_image.ndim != 3 or stats.diversity_image.shape[2] != 3:
        raise ValueError("stable_mask requires stats from a 3-channel video")
    mask = np.all(stats.diversity_image < params.beta_threshold, axis=2)
    if not mask.any():
        return StableMask(mask, None, 0)
    labels, n = cc_label(mask, structure=_CROSS)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    best = int(np.argmax(sizes))  # ties: first label in scan order
    ys, xs = np.nonzero(labels == best)
    box = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    return StableMask(mask, box, int(sizes[best]))


def _round_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def median_as_image(stats: PixelStats) -> Image:
    return Image(_round_u8(stats.median_image))


def select_reference(
    stats_by_video: Mapping[str, PixelStats],
    masks_by_video: Mapping[str, StableMask],
) -> tuple[str, Image]:
    """Choose the video with the smallest stable component; crop its template.

    Smallest is by stable-component pixel count; ties go to the
    lexicographically smaller video id. The template is the median image
    cropped to the component's bounding box.
    """
    eligible = sorted(
        vid for vid, m in masks_by_video.items() if not m.is_empty
    )
    if not eligible:
        raise ValueError("no stable region found")
    ref = min(eligible, key=lambda vid: (masks_by_video[vid].component_size, vid))
    x0, y0, x1, y1 = masks_by_video[ref].bounding_box
    template = _round_u8(stats_by_video[ref].median_image[y0:y1, x0:x1])
    return ref, Image(template)


@dataclass(frozen=True)
class NccMatch:
    scale: float
    dx: int
    dy: int
    peak: float


def _window_sums(arr: np.ndarray, th: int, tw: int) -> np.ndarray:
    # Exact rectangle sums via padded 2-d cumulative sums; exact in float64
    # because the inputs are small integers.
    c = np.pad(arr, ((1, 0), (1, 0))).cumsum(axis=0).cumsum(axis=1)
    return c[th:, tw:] - c[:-th, tw:] - c[th:, :-tw] + c[:-th, :-tw]


def zncc_map(template_gray: np.ndarray, target_gray: np.ndarray) -> np.ndarray:
    """Zero-normalized cross-correlation of the template at every placement.

    Output[y, x] scores the template with its top-left corner at (x, y) of
    the target. Windows with zero variance (and a zero-variance template)
    correlate as 0.
    """
    tpl = template_gray.astype(np.float64)
    tgt = target_gray.astype(np.float64)
    th, tw = tpl.shape
    n = th * tw
    t0 = tpl - tpl.mean()
    t_norm2 = float((t0 * t0).sum())
    num = fftconvolve(tgt, t0[::-1, ::-1], mode="valid")
    s1 = _window_sums(tgt, th, tw)
    s2 = _window_sums(tgt * tgt, th, tw)
    w_var = s2 - s1 * s1 / n  # exact 0 for constant windows
    denom2 = w_var * t_norm2
    with np.errstate(divide="ignore", invalid="ignore"):
        zncc = np.where(denom2 > 0, num / np.sqrt(np.maximum(denom2, 0)), 0.0)
    return np.clip(zncc, -1.0, 1.0)


def ncc_match(
    template: Image, target: Image, scales: Sequence[float]
) -> NccMatch:
    """Exhaustive multiscale template search over integer translations.

    The target is resized by each scale (template fixed), both reduced to
    luminance, and the peak placement returned. Scales where the template
    no longer fits are skipped. Deterministic tie-break on equal peaks:
    smaller scale, then smaller dy, then smaller dx.
    """
    tpl_gray = to_gray(template).pixels[:, :, 0]
    tgt_gray = to_gray(target)
    best: NccMatch | None = None
    for scale in sorted(scales):
        w = int(np.floor(scale * tgt_gray.width + 0.5))
        h = int(np.floor(scale * tgt_gray.height + 0.5))
        if w < tpl_gray.shape[1] or h < tpl_gray.shape[0]:
            continue
        scaled = resize_to(tgt_gray, w, h).pixels[:, :, 0]
        zncc = zncc_map(tpl_gray, scaled)
        flat = int(np.argmax(zncc))  # first max in row-major order: min dy, then dx
        dy, dx = divmod(flat, zncc.shape[1])
        peak = float(zncc[dy, dx])
        if best is None or peak > best.peak:
            best = NccMatch(scale, int(dx), int(dy), peak)
    if best is None:
        raise ValueError("template larger than the target at every scale")
    return best


@dataclass(frozen=True)
class VideoAlignment:
    video_id: str
    scale: float
    dx: int
    dy: int
    peak: float
    crop_window: tuple[int, int, int, int]  # (x0, y0, x1, y1) in scaled coords


@dataclass(frozen=True)
class AlignmentResult:
    reference_video_id: str
    reference_size: tuple[int, int]  # (width, height)
    template_box: tuple[int, int, int, int]
    per_video: dict[str, VideoAlignment]

    def __post_init__(self) -> None:
        for va in self.per_video.values():
            if not -1.0 <= va.peak <= 1.0:
                raise ValueError("peak NCC must lie in [-1, 1]")


def _clip_window(
    dx: int, dy: int, box: tuple[int, int, int, int], out_w: int, out_h: int,
    scaled_w: int, scaled_h: int,
) -> tuple[int, int, int, int]:
    x0 = dx - box[0]
    y0 = dy - box[1]
    return (
        max(0, x0),
        max(0, y0),
        min(scaled_w, x0 + out_w),
        min(scaled_h, y0 + out_h),
    )


def align_videos(
    stats_by_video: Mapping[str, PixelStats],
    params: AlignmentParams,
) -> AlignmentResult:
    """Run reference selection and per-video template matching."""
    masks = {vid: stable_mask(st, params) for vid, st in stats_by_video.items()}
    ref, template = select_reference(stats_by_video, masks)
    box = masks[ref].bounding_box
    ref_h, ref_w = stats_by_video[ref].median_image.shape[:2]
    per_video = {}
    for vid in sorted(stats_by_video):
        if vid == ref:
            match = NccMatch(1.0, box[0], box[1], 1.0)
        else:
            match = ncc_match(template, median_as_image(stats_by_video[vid]), params.scales)
        h, w = stats_by_video[vid].median_image.shape[:2]
        sw = int(np.floor(match.scale * w + 0.5))
        sh = int(np.floor(match.scale * h + 0.5))
        window = _clip_window(match.dx, match.dy, box, ref_w, ref_h, sw, sh)
        per_video[vid] = VideoAlignment(
            vid, match.scale, match.dx, match.dy, match.peak, window
        )
    return AlignmentResult(ref, (ref_w, ref_h), box, per_video)


def align_video(
    frames: Sequence[Image],
    entry: VideoAlignment,
    result: AlignmentResult,
) -> list[Image]:
    """Rescale, register to the template position, crop, replicate-pad.

    Every output frame has the reference resolution; pixels that fall
    outside the rescaled source replicate the nearest edge.
    """
    out_w, out_h = result.reference_size
    bx0, by0 = result.template_box[0], result.template_box[1]
    aligned = []
    for img in frames:
        sw = int(np.floor(entry.scale * img.width + 0.5))
        sh = int(np.floor(entry.scale * img.height + 0.5))
        scaled = img if (sw, sh) == (img.width, img.height) else resize_to(img, sw, sh)
        ys = np.clip(np.arange(out_h) - by0 + entry.dy, 0, sh - 1)
        xs = np.clip(np.arange(out_w) - bx0 + entry.dx, 0, sw - 1)
        aligned.append(Image(scaled.pixels[np.ix_(ys, xs)]))
    return aligned


def write_alignment_report(result: AlignmentResult, path: str | Path) -> None:
    doc = {
        "reference_video_id": result.reference_video_id,
        "reference_size": list(result.reference_size),
        "template_box": list(result.template_box),
        "videos": {
            vid: {
                "scale": va.scale,
                "dx": va.dx,
                "dy": va.dy,
                "peak": va.peak,
                "crop_window": list(va.crop_window),
            }
            for vid, va in sorted(result.per_video.items())
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_alignment_report(path: str | Path) -> AlignmentResult:
    doc = json.loads(Path(path).read_text())
    per_video = {
        vid: VideoAlignment(
            vid, v["scale"], v["dx"], v["dy"], v["peak"], tuple(v["crop_window"])
        )
        for vid, v in doc["videos"].items()
    }
    return AlignmentResult(
        doc["reference_video_id"],
        tuple(doc["reference_size"]),
        tuple(doc["template_box"]),
        per_video,
    )
