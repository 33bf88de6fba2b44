"""
Reference adapter server for the external backend protocol
Serves synthetic scenes without any model framework: an intensity-contrast detector,
an inscribed-ellipse segmenter and ellipse propagation for video sessions.

    python src/backends/adapter_server.py                 # stdio
    python src/backends/adapter_server.py --tcp 127.0.0.1:5555
"""

import argparse
import json
import logging
import os
import socketserver
import sys
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError
from scipy import ndimage

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from backends.segmenter import InscribedEllipseSegmenter
from backends.types import Direction
from backends.video import MockVideoSession
from core.components import connected_components
from core.exceptions import PolypSegError
from core.geometry import BBox
from core.masks import BinaryMask
from core.raster_io import decode_frame, encode_mask

logger = logging.getLogger(__name__)

# foreground = smoothed intensity this far from the frame median
CONTRAST_THRESHOLD = 40.0
MIN_COMPONENT_PX = 16
DETECTION_CONFIDENCE = 0.9


# Request models

class DetectRequest(BaseModel):
    image: str
    input_size: int = 680


class SegmentRequest(BaseModel):
    image: str
    boxes: List[List[int]]
    batch_size: int = 64


class VideoInitRequest(BaseModel):
    frames: List[str] = Field(min_length=1)
    direction: Direction = Direction.FORWARD
    batch_size: int = 64


class VideoPromptRequest(BaseModel):
    frame: int
    obj: int
    box: List[int] = Field(min_length=4, max_length=4)


def contrast_foreground(pixels: np.ndarray) -> BinaryMask:
    gray = ndimage.gaussian_filter(pixels.astype(np.float64).mean(axis=2), sigma=1.0)
    return BinaryMask(np.abs(gray - np.median(gray)) > CONTRAST_THRESHOLD)


class AdapterSession:
    """Protocol state for one connection: at most one open video session"""

    def __init__(self):
        self.segmenter = InscribedEllipseSegmenter()
        self.video: Optional[MockVideoSession] = None

    def handle(self, message: Dict[str, Any]) -> Iterator[Dict[str, Any]]:
        op = message.get("op")
        handler = getattr(self, f"op_{op}", None) if isinstance(op, str) else None
        if handler is None:
            yield {"error": f"unknown op '{op}'"}
            return
        try:
            yield from handler(message)
        except ValidationError as e:
            yield {"error": f"malformed '{op}' request: {e.errors()[0]['msg']}"}
        except (PolypSegError, ValueError) as e:
            yield {"error": f"'{op}' failed: {e}"}

    def op_detect(self, message):
        request = DetectRequest.model_validate(message)
        frame = decode_frame(request.image)
        components = connected_components(contrast_foreground(frame.pixels), min_area=MIN_COMPONENT_PX)
        yield {"detections": [
            {"box": c.box.as_list(), "conf": DETECTION_CONFIDENCE, "cls": 0} for c in components
        ]}

    def op_segment(self, message):
        request = SegmentRequest.model_validate(message)
        frame = decode_frame(request.image)
        boxes = [BBox.from_list(box) for box in request.boxes]
        masks = self.segmenter.segment(frame, boxes)
        yield {"masks": [encode_mask(mask) for mask in masks]}

    def op_video_init(self, message):
        request = VideoInitRequest.model_validate(message)
        frames = [decode_frame(payload, index) for index, payload in enumerate(request.frames)]
        self.video = MockVideoSession(frames, self.segmenter, request.direction)
        logger.info(f"Video session opened on {len(frames)} frames ({request.direction.value})")
        yield {"ok": True}

    def op_video_prompt(self, message):
        if self.video is None:
            yield {"error": "video_prompt before video_init"}
            return
        request = VideoPromptRequest.model_validate(message)
        self.video.add_box_prompt(request.frame, request.obj, BBox.from_list(request.box))
        yield {"ok": True}

    def op_video_propagate(self, message):
        if self.video is None:
            yield {"error": "video_propagate before video_init"}
            return
        for frame_index, object_id, mask in self.video.propagate():
            yield {"frame": frame_index, "obj": object_id, "mask": encode_mask(mask)}
        yield {"done": True}


def serve_lines(read_line, write_line) -> None:
    session = AdapterSession()
    while True:
        line = read_line()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError as e:
            write_line(json.dumps({"error": f"malformed JSON: {e}"}))
            continue
        if not isinstance(message, dict):
            write_line(json.dumps({"error": "request must be a JSON object"}))
            continue
        for reply in session.handle(message):
            write_line(json.dumps(reply))


class AdapterRequestHandler(socketserver.StreamRequestHandler):
    def handle(self):
        logger.info(f"Client connected from {self.client_address}")

        def write_line(text: str) -> None:
            self.wfile.write(text.encode("utf-8") + b"\n")
            self.wfile.flush()

        serve_lines(lambda: self.rfile.readline().decode("utf-8"), write_line)
        logger.info(f"Client {self.client_address} disconnected")


class ThreadingAdapterServer(socketserver.ThreadingMixIn, socketserver.TCPServer):
    allow_reuse_address = True
    daemon_threads = True


def serve_stdio() -> None:
    def write_line(text: str) -> None:
        sys.stdout.write(text + "\n")
        sys.stdout.flush()

    serve_lines(sys.stdin.readline, write_line)


def main():
    parser = argparse.ArgumentParser(description="Reference adapter server for synthetic polyp scenes")
    parser.add_argument("--tcp", metavar="HOST:PORT", help="Listen on a TCP socket instead of stdio")
    parser.add_argument("--log-level", default=os.getenv("POLYPSEG_LOG_LEVEL", "INFO"))
    args = parser.parse_args()

    # stdout carries the protocol; logs go to stderr
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr)

    if args.tcp:
        host, _, port = args.tcp.rpartition(":")
        with ThreadingAdapterServer((host or "127.0.0.1", int(port)), AdapterRequestHandler) as server:
            logger.info(f"Adapter listening on {host}:{port}")
            server.serve_forever()
    else:
        serve_stdio()


if __name__ == "__main__":
    main()
