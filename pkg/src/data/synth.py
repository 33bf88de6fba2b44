"""
Synthetic polyp scenes: textured background with elliptical or mildly deformed blobs and exact masks
Image scenes and drifting-blob video sequences, deterministic given the seed
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from tqdm import tqdm

from core.exceptions import ContractError
from core.geometry import Frame
from core.masks import BinaryMask
from core.raster_io import save_frame, save_mask

from .manifest import DatasetManifest
from .scanner import scan_dataset

logger = logging.getLogger(__name__)

META_FILE = "synth_meta.json"

BACKGROUND_RGB = (150.0, 90.0, 80.0)
BLOB_RGB = (235.0, 160.0, 140.0)
TEXTURE_AMPLITUDE = 25.0
BOUNDARY_SAMPLES = 2048
MAX_PLACEMENT_TRIES = 200
MIN_IMAGE_SIZE = 16


@dataclass(frozen=True)
class BlobSpec:
    """Ellipse with semi-axes (a, b) rotated by angle, radius modulated by 1 + deform * sin(lobes * t + phase)"""
    cx: float
    cy: float
    a: float
    b: float
    angle: float
    deform: float = 0.0
    lobes: int = 3
    phase: float = 0.0

    def shifted(self, dx: int, dy: int) -> "BlobSpec":
        return BlobSpec(self.cx + dx, self.cy + dy, self.a, self.b, self.angle, self.deform, self.lobes, self.phase)

    def _radius(self, theta: np.ndarray) -> np.ndarray:
        return 1.0 + self.deform * np.sin(self.lobes * theta + self.phase)

    def rasterize(self, height: int, width: int) -> np.ndarray:
        """Pixels whose centres fall inside the blob"""
        ys, xs = np.mgrid[0:height, 0:width] + 0.5
        dx, dy = xs - self.cx, ys - self.cy
        cos, sin = math.cos(self.angle), math.sin(self.angle)
        u = (dx * cos + dy * sin) / self.a
        v = (-dx * sin + dy * cos) / self.b
        return np.hypot(u, v) <= self._radius(np.arctan2(v, u))

    def analytic_box(self) -> List[float]:
        """[x_min, y_min, x_max, y_max] of the continuous boundary"""
        theta = np.linspace(0.0, 2.0 * math.pi, BOUNDARY_SAMPLES, endpoint=False)
        r = self._radius(theta)
        u, v = self.a * r * np.cos(theta), self.b * r * np.sin(theta)
        cos, sin = math.cos(self.angle), math.sin(self.angle)
        xs = self.cx + u * cos - v * sin
        ys = self.cy + u * sin + v * cos
        return [float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())]


def render_background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma=3.0)
    noise /= max(float(np.abs(noise).max()), 1e-12)
    texture = np.stack([noise * TEXTURE_AMPLITUDE * k for k in (1.0, 0.7, 0.6)], axis=-1)
    return np.asarray(BACKGROUND_RGB) + texture


def _overlaps(box: Sequence[float], others: Sequence[Sequence[float]], margin: float) -> bool:
    return any(
        box[0] < o[2] + margin and o[0] < box[2] + margin and box[1] < o[3] + margin and o[1] < box[3] + margin
        for o in others
    )


def place_blobs(rng: np.random.Generator, height: int, width: int, n_blobs: int, min_axis: float,
                max_axis: float, deform: float, border: float = 2.0, margin: float = 4.0) -> List[BlobSpec]:
    """Non-overlapping blobs fully inside the image

    May return fewer than asked when space runs out, but never none when any were asked for:
    a centred round blob that fits inside the border is the fallback.
    """
    min_axis = min(min_axis, max_axis)
    blobs: List[BlobSpec] = []
    boxes: List[List[float]] = []
    for _ in range(MAX_PLACEMENT_TRIES):
        if len(blobs) == n_blobs:
            break
        a = rng.uniform(min_axis, max_axis)
        b = rng.uniform(max(min_axis, a / 2), a)
        blob = BlobSpec(
            cx=rng.uniform(0, width), cy=rng.uniform(0, height), a=a, b=b,
            angle=rng.uniform(0, math.pi), deform=rng.uniform(0, deform),
            lobes=int(rng.integers(2, 4)), phase=rng.uniform(0, 2 * math.pi),
        )
        box = blob.analytic_box()
        inside = box[0] >= border and box[1] >= border and box[2] <= width - border and box[3] <= height - border
        if inside and not _overlaps(box, boxes, margin):
            blobs.append(blob)
            boxes.append(box)
    if not blobs and n_blobs > 0:
        radius = min(max_axis, min(height, width) / 2 - border - 1)
        if radius < 1:
            raise ContractError(f"A {width}x{height} image leaves no room for a blob inside a {border} px border")
        logger.debug(f"Placement fell back to a centred blob of radius {radius:.1f}")
        blobs.append(BlobSpec(cx=width / 2, cy=height / 2, a=radius, b=radius, angle=0.0))
    return blobs


def paint(background: np.ndarray, blobs: Sequence[BlobSpec], rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    height, width = background.shape[:2]
    pixels = background.copy()
    mask = np.zeros((height, width), dtype=bool)
    for blob in blobs:
        region = blob.rasterize(height, width)
        shade = rng.uniform(0.95, 1.0)
        pixels[region] = np.asarray(BLOB_RGB) * shade
        mask |= region
    return np.clip(pixels, 0, 255).astype(np.uint8), mask


def render_scene(seed: int, image_size: int = 128, n_blobs: int = 1, min_axis: float = 8.0,
                 max_axis: Optional[float] = None, deform: float = 0.1) -> Tuple[Frame, BinaryMask, List[BlobSpec]]:
    """One synthetic frame with its exact mask and blob geometry"""
    rng = np.random.default_rng(seed)
    max_axis = max_axis if max_axis is not None else image_size / 5
    blobs = place_blobs(rng, image_size, image_size, n_blobs, min_axis, max_axis, deform)
    pixels, mask = paint(render_background(rng, image_size, image_size), blobs, rng)
    return Frame(pixels=pixels), BinaryMask(mask), blobs


def _random_walk(rng: np.random.Generator, n_frames: int, max_drift: int) -> List[Tuple[int, int]]:
    """Integer offsets moving at most 1 px per axis per frame, bounded by max_drift"""
    offsets = [(0, 0)]
    for _ in range(n_frames - 1):
        dx, dy = rng.integers(-1, 2, size=2)
        x, y = offsets[-1]
        offsets.append((int(np.clip(x + dx, -max_drift, max_drift)), int(np.clip(y + dy, -max_drift, max_drift))))
    return offsets


def render_sequence(seed: int, n_frames: int = 12, image_size: int = 112, n_blobs: int = 1,
                    onset: int = 0, negative: bool = False, max_drift: int = 4,
                    min_axis: float = 12.0) -> Tuple[List[Frame], List[BinaryMask], List[List[BlobSpec]]]:
    """Frames of drifting blobs; blobs are absent before onset and throughout a negative sequence"""
    if n_frames < 1:
        raise ContractError("A sequence needs at least one frame")
    rng = np.random.default_rng(seed)
    background = render_background(rng, image_size, image_size)
    blobs = [] if negative else place_blobs(
        rng, image_size, image_size, n_blobs, min_axis, image_size / 6, deform=0.0,
        border=max_drift + 2, margin=2 * max_drift + 4,
    )
    walks = [_random_walk(rng, n_frames, max_drift) for _ in blobs]
    shades = rng.uniform(0.95, 1.0, size=len(blobs))

    frames, masks, geometry = [], [], []
    for t in range(n_frames):
        visible = [blob.shifted(*walk[t]) for blob, walk in zip(blobs, walks)] if t >= onset else []
        pixels = background.copy()
        mask = np.zeros((image_size, image_size), dtype=bool)
        for blob, shade in zip(visible, shades):
            region = blob.rasterize(image_size, image_size)
            pixels[region] = np.asarray(BLOB_RGB) * shade
            mask |= region
        frames.append(Frame(pixels=np.clip(pixels, 0, 255).astype(np.uint8), index=t))
        masks.append(BinaryMask(mask))
        geometry.append(visible)
    return frames, masks, geometry


def _blob_records(blobs: Sequence[BlobSpec]) -> List[Dict]:
    return [{"box": blob.analytic_box(), **asdict(blob)} for blob in blobs]


def synth_generate(out_root: Union[str, Path], n_scenes: int, image_size: int = 128,
                   blobs_per_scene: Tuple[int, int] = (1, 3), seed: int = 0,
                   deform: float = 0.1) -> DatasetManifest:
    """Write images/, masks/ and the blob sidecar; returns the scanned manifest"""
    if n_scenes < 1:
        raise ContractError("n_scenes must be at least 1")
    if image_size < MIN_IMAGE_SIZE:
        raise ContractError(f"image_size must be at least {MIN_IMAGE_SIZE}, got {image_size}")
    low, high = blobs_per_scene
    if not 1 <= low <= high:
        raise ContractError(f"blobs_per_scene must satisfy 1 <= low <= high, got {blobs_per_scene}")

    out_root = Path(out_root)
    counts = np.random.default_rng(seed).integers(low, high + 1, size=n_scenes)
    meta = {"seed": seed, "image_size": image_size, "scenes": {}}

    for i in tqdm(range(n_scenes), desc="Synthesizing scenes", disable=n_scenes < 50):
        scene_id = f"scene_{i:04d}"
        frame, mask, blobs = render_scene(seed * 100003 + i, image_size, int(counts[i]), deform=deform)
        save_frame(frame, out_root / "images" / f"{scene_id}.png")
        save_mask(mask, out_root / "masks" / f"{scene_id}.png")
        meta["scenes"][scene_id] = _blob_records(blobs)

    (out_root / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"Generated {n_scenes} synthetic scenes under {out_root}")
    return scan_dataset(str(out_root), "synthetic", name="synthetic")


def synth_generate_sequences(out_root: Union[str, Path], n_sequences: int, n_frames: int = 12,
                             image_size: int = 112, seed: int = 0, blobs_per_sequence: int = 1,
                             onsets: Optional[Sequence[int]] = None, n_negative: int = 0,
                             subsets: Optional[Sequence[str]] = None, max_drift: int = 4) -> DatasetManifest:
    """Write sequences/<id>/images|masks, optional case lists and the sidecar; returns the scanned manifest

    onsets[i] is the first frame showing blobs in sequence i; the last n_negative sequences have none.
    Sequences are tagged with subsets round-robin.
    """
    if n_sequences < 1:
        raise ContractError("n_sequences must be at least 1")
    if image_size < MIN_IMAGE_SIZE:
        raise ContractError(f"image_size must be at least {MIN_IMAGE_SIZE}, got {image_size}")
    out_root = Path(out_root)
    meta = {"seed": seed, "image_size": image_size, "sequences": {}}
    case_lists: Dict[str, List[str]] = {}

    for i in tqdm(range(n_sequences), desc="Synthesizing sequences", disable=n_sequences < 10):
        seq_id = f"seq_{i:03d}"
        onset = onsets[i] if onsets is not None and i < len(onsets) else 0
        negative = i >= n_sequences - n_negative
        frames, masks, geometry = render_sequence(
            seed * 100003 + i, n_frames, image_size, blobs_per_sequence, onset, negative, max_drift
        )
        for t, (frame, mask) in enumerate(zip(frames, masks)):
            save_frame(frame, out_root / "sequences" / seq_id / "images" / f"{t:04d}.png")
            save_mask(mask, out_root / "sequences" / seq_id / "masks" / f"{t:04d}.png")
        meta["sequences"][seq_id] = {
            "onset": None if negative else onset,
            "frames": [_blob_records(blobs) for blobs in geometry],
        }
        if subsets:
            case_lists.setdefault(subsets[i % len(subsets)], []).append(seq_id)

    for subset, cases in case_lists.items():
        path = out_root / "case_lists" / f"{subset}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(case + "\n" for case in cases), encoding="utf-8")

    (out_root / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"Generated {n_sequences} synthetic sequences of {n_frames} frames under {out_root}")
    return scan_dataset(str(out_root), "synthetic_video", name="synthetic_video")
