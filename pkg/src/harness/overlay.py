"""
Qualitative overlays: predicted region tinted over the image, ground-truth outline drawn on top
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image
from scipy import ndimage
from tqdm import tqdm

from core.exceptions import DimensionMismatchError
from core.geometry import Frame
from core.masks import BinaryMask
from core.raster_io import load_frame, load_mask
from data.manifest import DatasetManifest

logger = logging.getLogger(__name__)

TINT_RGB = (0, 200, 80)
TINT_ALPHA = 0.45
CONTOUR_RGB = (255, 0, 0)


@dataclass
class OverlaySummary:
    written: int = 0
    skipped: int = 0


def contour(mask: BinaryMask) -> np.ndarray:
    """Inner boundary pixels of the mask"""
    data = mask.data
    return data & ~ndimage.binary_erosion(data, border_value=0)


def render_overlay(frame: Frame, gt: BinaryMask, pred: BinaryMask) -> np.ndarray:
    if gt.shape != frame.shape or pred.shape != frame.shape:
        raise DimensionMismatchError(
            f"Overlay of {frame.shape} image needs equal-size masks, got gt {gt.shape} and prediction {pred.shape}"
        )
    canvas = frame.pixels.astype(np.float64)
    tint = np.asarray(TINT_RGB, dtype=np.float64)
    region = pred.data
    canvas[region] = (1.0 - TINT_ALPHA) * canvas[region] + TINT_ALPHA * tint
    canvas[contour(gt)] = CONTOUR_RGB
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def _prediction_path(predictions_dir: Path, safe_id: str) -> Optional[Path]:
    path = predictions_dir / f"{safe_id}.png"
    return path if path.is_file() else None


def cmd_overlay(manifest: DatasetManifest, predictions_dir: Union[str, Path],
                out_dir: Union[str, Path]) -> OverlaySummary:
    """One PNG per sample that has a stored prediction"""
    predictions_dir = Path(predictions_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = OverlaySummary()

    for sample in tqdm(manifest.sorted_samples(), desc="Rendering overlays", disable=len(manifest) < 50):
        pred_path = _prediction_path(predictions_dir, sample.safe_id)
        if pred_path is None:
            logger.warning(f"No prediction for {sample.id}; skipping overlay")
            summary.skipped += 1
            continue
        try:
            frame = load_frame(manifest.image_path(sample), key=sample.id)
            mask_path = manifest.mask_path(sample)
            gt = load_mask(mask_path) if mask_path is not None else BinaryMask.zeros(frame.height, frame.width)
            image = render_overlay(frame, gt, load_mask(pred_path))
            Image.fromarray(image).save(out_dir / f"{sample.safe_id}.png", format="PNG")
            summary.written += 1
        except DimensionMismatchError as e:
            logger.warning(f"Skipping overlay for {sample.id}: {e}")
            summary.skipped += 1
        except Exception as e:
            logger.error(f"Error rendering overlay for {sample.id}: {e}")
            summary.skipped += 1

    logger.info(f"Overlays: {summary.written} written, {summary.skipped} skipped")
    return summary
