"""
Tests for confidence filtering, NMS, the prompt cap and the empty-detection policy
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from backends.types import Detection
from core.exceptions import ContractError
from core.geometry import BBox
from prompt_bridge.bridge import BridgePolicy, PromptEntry, PromptSet, detections_to_prompts, nms, resolve_empty


def random_detections(rng, n, size=64):
    dets = []
    for _ in range(n):
        x0, y0 = rng.integers(0, size - 4, size=2)
        w, h = rng.integers(2, 20, size=2)
        box = BBox(x0, y0, min(size, x0 + w), min(size, y0 + h))
        dets.append(Detection(box, float(rng.choice([0.2, 0.4, 0.6, 0.8, 0.95]))))
    return dets


class TestNMS:
    def test_suppresses_overlap(self):
        a = Detection(BBox(0, 0, 10, 10), 0.9)
        b = Detection(BBox(0, 0, 10, 8), 0.8)
        assert nms([b, a], 0.5) == [a]

    def test_keeps_disjoint_in_confidence_order(self):
        a = Detection(BBox(0, 0, 5, 5), 0.6)
        b = Detection(BBox(10, 10, 15, 15), 0.9)
        assert nms([a, b], 0.5) == [b, a]

    def test_single(self):
        a = Detection(BBox(1, 1, 4, 4), 0.7)
        assert nms([a], 0.5) == [a]

    def test_tie_break_smaller_area_first(self):
        big = Detection(BBox(0, 0, 10, 10), 0.8)
        small = Detection(BBox(0, 0, 10, 9), 0.8)
        assert nms([big, small], 0.5) == [small]

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            dets = random_detections(rng, 12)
            once = nms(dets, 0.4)
            assert nms(once, 0.4) == once


class TestDetectionsToPrompts:
    def test_threshold_filter(self):
        a = Detection(BBox(0, 0, 10, 10), 0.9)
        b = Detection(BBox(20, 20, 30, 30), 0.3)
        prompts = detections_to_prompts([a, b], BridgePolicy(conf_threshold=0.5), frame_index=4)
        assert prompts.frame_index == 4
        assert prompts.entries == (PromptEntry(1, a.box, 0.9),)

    def test_prompt_cap_keeps_most_confident(self):
        dets = [Detection(BBox(i * 8, 0, i * 8 + 6, 6), 0.3 + 0.1 * i) for i in range(7)]
        prompts = detections_to_prompts(dets, BridgePolicy())
        assert len(prompts) == 5
        assert prompts.boxes == [d.box for d in reversed(dets[2:])]
        assert [e.object_id for e in prompts.entries] == [1, 2, 3, 4, 5]

    def test_empty(self):
        prompts = detections_to_prompts([], BridgePolicy())
        assert prompts.empty_flag and prompts.entries == ()

    def test_size_and_provenance(self):
        rng = np.random.default_rng(7)
        policy = BridgePolicy(conf_threshold=0.3, nms_iou=0.5, max_prompts=4)
        for _ in range(30):
            dets = random_detections(rng, 10)
            prompts = detections_to_prompts(dets, policy)
            assert len(prompts) <= min(policy.max_prompts, len(dets))
            input_boxes = {d.box for d in dets}
            assert all(box in input_boxes for box in prompts.boxes)

    def test_raising_threshold_never_adds_prompts(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            dets = random_detections(rng, 10)
            counts = [len(detections_to_prompts(dets, BridgePolicy(conf_threshold=t, max_prompts=10)))
                      for t in (0.0, 0.3, 0.5, 0.7, 0.9)]
            assert counts == sorted(counts, reverse=True)

    def test_transparent_bridge(self):
        rng = np.random.default_rng(13)
        dets = random_detections(rng, 8)
        dets.append(dets[0])  # exact duplicate survives with nms_iou 1
        policy = BridgePolicy(conf_threshold=0.0, nms_iou=1.0, max_prompts=len(dets))
        prompts = detections_to_prompts(dets, policy)
        assert sorted(b.as_list() for b in prompts.boxes) == sorted(d.box.as_list() for d in dets)

    def test_policy_bounds(self):
        with pytest.raises(ValidationError):
            BridgePolicy(conf_threshold=1.5)
        with pytest.raises(ValidationError):
            BridgePolicy(max_prompts=0)


class TestResolveEmpty:
    @pytest.mark.parametrize("size", [8, 680])
    def test_zero_mask(self, size):
        mask = resolve_empty(PromptSet(frame_index=0), size, size)
        assert mask.shape == (size, size) and mask.is_empty

    def test_nonempty_rejected(self):
        prompts = PromptSet(0, (PromptEntry(1, BBox(0, 0, 2, 2)),))
        with pytest.raises(ContractError):
            resolve_empty(prompts, 8, 8)

    def test_ids_must_be_consecutive(self):
        with pytest.raises(ContractError):
            PromptSet(0, (PromptEntry(2, BBox(0, 0, 2, 2)),))
