"""
Raster I/O: frames, masks and the base64 PNG encoding used on the adapter wire
"""

import base64
import io
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

from .geometry import Frame
from .masks import BinaryMask

# 8-bit ground truth is anti-aliased; strictly above this is foreground
MASK_THRESHOLD = 127

PathLike = Union[str, Path]


def load_frame(path: PathLike, index: int = 0, key: str = "") -> Frame:
    with Image.open(path) as image:
        pixels = np.asarray(image.convert("RGB"), dtype=np.uint8)
    return Frame(pixels=pixels, index=index, key=key)


def load_mask(path: PathLike) -> BinaryMask:
    with Image.open(path) as image:
        gray = np.asarray(image.convert("L"))
    return BinaryMask(gray > MASK_THRESHOLD)


def save_mask(mask: BinaryMask, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.to_uint8()).save(path, format="PNG")


def save_frame(frame: Frame, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(frame.pixels.astype(np.uint8)).save(path, format="PNG")


def read_image_size(path: PathLike) -> Tuple[int, int]:
    """(height, width) read from the file header"""
    with Image.open(path) as image:
        width, height = image.size
    return height, width


def encode_png_b64(array: np.ndarray) -> str:
    buffer = io.BytesIO()
    Image.fromarray(array).save(buffer, format="PNG")
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def decode_png_b64(payload: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(payload))) as image:
        return np.asarray(image)


def encode_mask(mask: BinaryMask) -> str:
    return encode_png_b64(mask.to_uint8())


def decode_mask(payload: str) -> BinaryMask:
    array = decode_png_b64(payload)
    if array.ndim == 3:
        array = array[..., 0]
    return BinaryMask(array > MASK_THRESHOLD)


def encode_frame(frame: Frame) -> str:
    return encode_png_b64(frame.pixels.astype(np.uint8))


def decode_frame(payload: str, index: int = 0) -> Frame:
    array = decode_png_b64(payload)
    if array.ndim == 2:
        array = np.stack([array] * 3, axis=-1)
    return Frame(pixels=array[..., :3], index=index)
