"""
Tests for detectors, image segmenters, video sessions and the adapter protocol
"""

import json
import shlex
import sys
from collections import deque
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from backends.adapter import AdapterClient, AdapterTransport, shared_client
from backends.adapter_server import AdapterSession
from backends.detector import ExternalDetector, detect
from backends.segmenter import ExternalSegmenter, GtIntersectSegmenter, inscribed_ellipse, segment_image
from backends.types import (
    Detection, DetectorKind, DetectorSpec, Direction, JitterSpec, SegmenterKind, SegmenterSpec,
)
from backends.video import (
    TRACKING_GROWTH_CAP, MockVideoSession, add_box_prompt, open_session, propagate,
)
from core.exceptions import BackendError, ConfigError, ContractError
from core.geometry import BBox, Frame, box_iou, expand_and_clip
from core.masks import BinaryMask, bbox_from_mask
from data.synth import render_scene

SERVER = Path(__file__).parent / "src" / "backends" / "adapter_server.py"


def blank_frames(n, height=32, width=32):
    return [Frame(np.zeros((height, width, 3), dtype=np.uint8), index=i) for i in range(n)]


def box_mask(box, height=32, width=32):
    return BinaryMask.from_box(box, height, width)


class InProcessTransport(AdapterTransport):
    """Feeds requests straight into a server-side protocol session"""

    def __init__(self):
        self.session = AdapterSession()
        self.pending = deque()

    def send_line(self, line):
        for reply in self.session.handle(json.loads(line)):
            self.pending.append(json.dumps(reply) + "\n")

    def read_line(self):
        return self.pending.popleft() if self.pending else ""

    def close(self):
        pass


@pytest.fixture
def client():
    return AdapterClient(InProcessTransport(), "in-process")


class TestOracleDetector:
    def test_single_blob(self):
        frame = blank_frames(1)[0]
        gt = box_mask(BBox(4, 6, 14, 12))
        assert detect(frame, DetectorSpec(), gt) == [Detection(BBox(4, 6, 14, 12), 1.0, 0)]

    def test_two_components(self):
        data = np.zeros((32, 32), dtype=bool)
        data[2:8, 2:8] = True
        data[20:30, 15:25] = True
        dets = detect(blank_frames(1)[0], DetectorSpec(), BinaryMask(data))
        assert sorted(d.box.as_list() for d in dets) == [[2, 2, 8, 8], [15, 20, 25, 30]]
        assert all(d.confidence == 1.0 for d in dets)

    def test_empty_gt(self):
        assert detect(blank_frames(1)[0], DetectorSpec(), BinaryMask.zeros(32, 32)) == []

    def test_ignores_speckle(self):
        data = np.zeros((32, 32), dtype=bool)
        data[2:8, 2:8] = True
        data[20:23, 20:23] = True  # 9 px
        dets = detect(blank_frames(1)[0], DetectorSpec(), BinaryMask(data))
        assert [d.box for d in dets] == [BBox(2, 2, 8, 8)]

    def test_requires_gt(self):
        with pytest.raises(ContractError):
            detect(blank_frames(1)[0], DetectorSpec())

    def test_jitter_is_deterministic(self):
        frame, gt, _ = render_scene(seed=4, n_blobs=2)
        spec = DetectorSpec(jitter=JitterSpec(shift_frac=0.2, scale_frac=0.3, spurious_prob=0.5), seed=9)
        assert detect(frame, spec, gt) == detect(frame, spec, gt)

    def test_drop_all(self):
        frame, gt, _ = render_scene(seed=4, n_blobs=2)
        spec = DetectorSpec(jitter=JitterSpec(drop_prob=1.0), seed=1)
        assert detect(frame, spec, gt) == []

    def test_spurious_box_shape(self):
        spec = DetectorSpec(jitter=JitterSpec(spurious_prob=1.0), seed=3)
        frame = Frame(np.zeros((100, 100, 3), dtype=np.uint8), index=0, key="neg")
        dets = detect(frame, spec, BinaryMask.zeros(100, 100))
        assert len(dets) == 1
        assert 10 <= dets[0].box.width <= 30 and 10 <= dets[0].box.height <= 30
        assert 0.3 <= dets[0].confidence <= 0.7

    def test_sorted_by_confidence(self):
        frame, gt, _ = render_scene(seed=8, n_blobs=3)
        spec = DetectorSpec(jitter=JitterSpec(spurious_prob=1.0, shift_frac=0.05), seed=2)
        confidences = [d.confidence for d in detect(frame, spec, gt)]
        assert confidences == sorted(confidences, reverse=True)


class TestImageSegmenters:
    def test_gt_intersect_superset(self):
        frame = blank_frames(1)[0]
        gt = box_mask(BBox(5, 5, 12, 9))
        [mask] = segment_image(frame, [BBox(0, 0, 20, 20)], "gt_intersect", gt)
        assert mask.equals(gt)

    def test_gt_intersect_left_half(self):
        frame = Frame(np.zeros((6, 10, 3), dtype=np.uint8))
        data = np.zeros((6, 10), dtype=bool)
        data[2, 0:8] = True
        [mask] = segment_image(frame, [BBox(0, 0, 4, 6)], "gt_intersect", BinaryMask(data))
        assert mask.area == 4

    def test_empty_box_list(self):
        frame = blank_frames(1)[0]
        for choice in ("box_fill", "gt_intersect", "ellipse"):
            assert segment_image(frame, [], choice, BinaryMask.zeros(32, 32)) == []

    def test_masks_stay_inside_box(self):
        frame, gt, _ = render_scene(seed=1)
        boxes = [BBox(10, 12, 40, 30), BBox(50, 50, 90, 100)]
        for choice in ("box_fill", "gt_intersect", "ellipse"):
            masks = segment_image(frame, boxes, choice, gt)
            assert len(masks) == 2
            for mask, box in zip(masks, boxes):
                inside = box_mask(box, 128, 128).data
                assert not (mask.data & ~inside).any()

    def test_ellipse_touches_box_sides(self):
        box = BBox(3, 4, 19, 14)
        mask = BinaryMask(inscribed_ellipse(box, 32, 32))
        assert bbox_from_mask(mask) == box

    def test_gt_intersect_needs_gt(self):
        with pytest.raises(ContractError):
            segment_image(blank_frames(1)[0], [BBox(0, 0, 4, 4)], "gt_intersect")

    def test_box_outside_frame(self):
        with pytest.raises(ContractError):
            segment_image(blank_frames(1)[0], [BBox(0, 0, 40, 4)], "box_fill")

    def test_backend_choices(self):
        assert SegmenterSpec.from_choice("oracle").kind == SegmenterKind.GT_INTERSECT
        assert SegmenterSpec.from_choice("ellipse").kind == SegmenterKind.INSCRIBED_ELLIPSE
        spec = SegmenterSpec.from_choice("external:tcp://localhost:5555")
        assert spec.kind == SegmenterKind.EXTERNAL and spec.address == "tcp://localhost:5555"
        with pytest.raises(ConfigError):
            SegmenterSpec.from_choice("sam3")


class TestVideoSessions:
    def test_open_requires_frames(self):
        with pytest.raises(ContractError):
            open_session([], SegmenterSpec())

    def test_prompt_bookkeeping(self):
        session = open_session(blank_frames(10), SegmenterSpec(kind=SegmenterKind.BOX_FILL))
        assert session.prompts == []
        add_box_prompt(session, 3, 1, BBox(2, 2, 8, 8))
        assert len(session.prompts) == 1
        with pytest.raises(ContractError):
            add_box_prompt(session, 3, 1, BBox(2, 2, 8, 8))
        with pytest.raises(ContractError):
            add_box_prompt(session, 99, 2, BBox(2, 2, 8, 8))

    def test_propagate_requires_prompt(self):
        session = open_session(blank_frames(4), SegmenterSpec(kind=SegmenterKind.BOX_FILL))
        with pytest.raises(ContractError):
            list(propagate(session))

    @pytest.mark.parametrize("direction,expected", [
        (Direction.FORWARD, list(range(3, 10))),
        (Direction.BIDIRECTIONAL, list(range(10))),
    ])
    def test_coverage(self, direction, expected):
        session = open_session(blank_frames(10), SegmenterSpec(kind=SegmenterKind.BOX_FILL), direction)
        add_box_prompt(session, 3, 1, BBox(10, 10, 16, 16))
        frames = [index for index, _, _ in propagate(session)]
        assert frames == expected

    def test_constant_gt_reconstructed(self):
        gt = box_mask(BBox(10, 8, 20, 18))
        gts = [gt] * 8
        session = open_session(blank_frames(8), SegmenterSpec(), gt_per_frame=gts)
        add_box_prompt(session, 0, 1, BBox(8, 6, 22, 20))
        results = list(propagate(session, gts))
        assert len(results) == 8
        assert all(mask.equals(gt) for _, _, mask in results)

    def test_each_frame_object_once(self):
        session = open_session(blank_frames(6), SegmenterSpec(kind=SegmenterKind.INSCRIBED_ELLIPSE),
                               Direction.BIDIRECTIONAL)
        add_box_prompt(session, 2, 1, BBox(2, 2, 10, 10))
        add_box_prompt(session, 4, 2, BBox(18, 18, 28, 28))
        keys = [(index, obj) for index, obj, _ in propagate(session)]
        assert len(keys) == len(set(keys)) == 12
        assert [index for index, _ in keys] == sorted(index for index, _ in keys)

    def test_tracking_region_growth(self):
        session = MockVideoSession(blank_frames(20, 200, 200), GtIntersectSegmenter())
        session.add_box_prompt(0, 1, BBox(90, 90, 110, 110))
        prompt = session.prompts[0]
        assert session.tracking_region(prompt, 0) == prompt.box
        assert session.tracking_region(prompt, 1) == expand_and_clip(prompt.box, 1.1, 200, 200)
        assert session.tracking_region(prompt, 19) == expand_and_clip(prompt.box, TRACKING_GROWTH_CAP, 200, 200)

    def test_forward_uses_latest_prompt(self):
        session = MockVideoSession(blank_frames(10), GtIntersectSegmenter())
        session.add_box_prompt(2, 1, BBox(0, 0, 4, 4))
        session.add_box_prompt(6, 1, BBox(10, 10, 14, 14))
        assert session.reference_prompt(1, 5).frame_index == 2
        assert session.reference_prompt(1, 7).frame_index == 6
        assert session.reference_prompt(1, 1) is None


class TestAdapterProtocol:
    def test_detect_finds_blob(self, client):
        frame, gt, _ = render_scene(seed=21, n_blobs=1)
        dets = ExternalDetector(DetectorSpec(kind=DetectorKind.EXTERNAL, address="x"), client).detect(frame)
        assert len(dets) == 1
        assert box_iou(dets[0].box, bbox_from_mask(gt)) > 0.7
        assert dets[0].confidence == pytest.approx(0.9)

    def test_segment_returns_ellipses(self, client):
        frame = blank_frames(1)[0]
        boxes = [BBox(2, 2, 12, 10), BBox(15, 15, 30, 31)]
        masks = ExternalSegmenter(SegmenterSpec(kind=SegmenterKind.EXTERNAL, address="x"), client).segment(frame, boxes)
        for mask, box in zip(masks, boxes):
            assert np.array_equal(mask.data, inscribed_ellipse(box, 32, 32))

    def test_video_session(self, client):
        frames = blank_frames(6)
        session = open_session(frames, SegmenterSpec(kind=SegmenterKind.EXTERNAL, address="x"), client=client)
        session.add_box_prompt(2, 1, BBox(8, 8, 20, 18))
        results = list(session.propagate())
        assert [index for index, _, _ in results] == [2, 3, 4, 5]
        assert np.array_equal(results[0][2].data, inscribed_ellipse(BBox(8, 8, 20, 18), 32, 32))

    def test_error_reply(self, client):
        frame = blank_frames(1)[0]
        from core.raster_io import encode_frame

        with pytest.raises(BackendError):
            client.request({"op": "segment", "image": encode_frame(frame), "boxes": [[0, 0, 99, 99]]})
        with pytest.raises(BackendError):
            client.request({"op": "teleport"})
        with pytest.raises(BackendError):
            client.request({"op": "video_propagate"})

    def test_missing_address(self):
        with pytest.raises(BackendError):
            shared_client(None)
        with pytest.raises(BackendError):
            AdapterClient.connect("no-port-here")

    def test_stalled_stdio_adapter_times_out(self):
        stalled = "import sys, time; sys.stdin.readline(); time.sleep(60)"
        address = f"stdio:{shlex.quote(sys.executable)} -c {shlex.quote(stalled)}"
        stalled_client = AdapterClient.connect(address, timeout=0.5)
        try:
            with pytest.raises(BackendError, match="no reply within 0.5 s"):
                stalled_client.request({"op": "detect"})
            with pytest.raises(BackendError):
                stalled_client.request({"op": "detect"})
        finally:
            stalled_client.close()

    def test_stdio_server(self):
        address = f"stdio:{shlex.quote(sys.executable)} {shlex.quote(str(SERVER))} --log-level WARNING"
        stdio_client = AdapterClient.connect(address)
        try:
            frame, gt, _ = render_scene(seed=21, n_blobs=1)
            spec = DetectorSpec(kind=DetectorKind.EXTERNAL, address=address)
            dets = ExternalDetector(spec, stdio_client).detect(frame)
            assert len(dets) == 1
            assert box_iou(dets[0].box, bbox_from_mask(gt)) > 0.7
        finally:
            stdio_client.close()
