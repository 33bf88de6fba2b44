"""
Tests for prompt frame selection, sequence runs, coverage, provenance and re-prompting
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from backends.detector import Detector
from backends.types import Detection, DetectorSpec, Direction, SegmenterSpec
from core.exceptions import BackendError, ContractError, DimensionMismatchError
from core.geometry import BBox, Frame
from core.masks import BinaryMask
from data.synth import render_sequence
from metrics.overlap import iou_dice
from prompt_bridge.bridge import BridgePolicy, PromptEntry, PromptSet
from video.sequence_runner import (
    PromptSelection, Provenance, SequenceRunner, VideoPolicy, merge_object_masks, run_sequence,
    select_prompt_frame,
)

SIZE = 40


def blank_frames(n, size=SIZE):
    return [Frame(np.zeros((size, size, 3), dtype=np.uint8), index=i) for i in range(n)]


def boxes_to_masks(per_frame_boxes, size=SIZE):
    masks = []
    for boxes in per_frame_boxes:
        data = np.zeros((size, size), dtype=bool)
        for box in boxes:
            data[box.slices()] = True
        masks.append(BinaryMask(data))
    return masks


def prompt_set(index, n):
    return PromptSet(index, tuple(PromptEntry(i + 1, BBox(i * 4, 0, i * 4 + 2, 2)) for i in range(n)))


def run_oracle(frames, gts, **policy):
    return run_sequence(frames, gts, DetectorSpec(), BridgePolicy(), VideoPolicy(**policy), SegmenterSpec(), "seq")


def dice(pred, gt):
    return iou_dice(pred, gt)[1]


class TestSelectPromptFrame:
    def test_first_detection(self):
        sets = [prompt_set(0, 0), prompt_set(1, 0), prompt_set(2, 0), prompt_set(3, 1), prompt_set(4, 2)]
        assert select_prompt_frame(sets, VideoPolicy()) == 3

    def test_nothing_detected(self):
        assert select_prompt_frame([prompt_set(i, 0) for i in range(4)], VideoPolicy()) is None

    def test_fixed_index(self):
        policy = VideoPolicy(prompt_selection=PromptSelection.FIXED_INDEX, fixed_index=0)
        assert select_prompt_frame([prompt_set(0, 0), prompt_set(1, 1)], policy) == 0

    def test_fixed_index_out_of_range(self):
        policy = VideoPolicy(prompt_selection=PromptSelection.FIXED_INDEX, fixed_index=5)
        with pytest.raises(ContractError):
            select_prompt_frame([prompt_set(0, 1)], policy)

    def test_fixed_index_required(self):
        with pytest.raises(ValidationError):
            VideoPolicy(prompt_selection=PromptSelection.FIXED_INDEX)


class TestMergeObjectMasks:
    def test_union(self):
        left = np.zeros((4, 4), dtype=bool)
        left[:, :2] = True
        top = np.zeros((4, 4), dtype=bool)
        top[:2, :] = True
        assert merge_object_masks([BinaryMask(left), BinaryMask(top)]).area == 12

    def test_single_and_empty(self):
        mask = BinaryMask(np.eye(4, dtype=bool))
        assert merge_object_masks([mask]).equals(mask)
        assert merge_object_masks([], 3, 5).equals(BinaryMask.zeros(3, 5))
        with pytest.raises(ContractError):
            merge_object_masks([])

    def test_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            merge_object_masks([BinaryMask.zeros(4, 4), BinaryMask.zeros(4, 5)])

    def test_algebra(self):
        rng = np.random.default_rng(1)
        a, b, c = (BinaryMask(rng.random((6, 6)) < 0.3) for _ in range(3))
        assert merge_object_masks([a, b]).equals(merge_object_masks([b, a]))
        assert merge_object_masks([merge_object_masks([a, b]), c]).equals(merge_object_masks([a, merge_object_masks([b, c])]))
        assert merge_object_masks([a, a]).equals(a)


class TestSyntheticSequences:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_forward_identity(self, seed):
        frames, gts, _ = render_sequence(seed=seed, n_frames=12)
        run = run_oracle(frames, gts)
        assert run.prompt_frame == 0
        assert run.provenance == [Provenance.PROPAGATED] * 12
        assert all(dice(pred, gt) == 1.0 for pred, gt in zip(run.masks, gts))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_onset_forward(self, seed):
        frames, gts, _ = render_sequence(seed=seed, n_frames=12, onset=3)
        run = run_oracle(frames, gts)
        assert run.prompt_frame == 3
        assert run.provenance[:3] == [Provenance.EMPTY_NO_PROMPT] * 3
        assert run.provenance[3:] == [Provenance.PROPAGATED] * 9
        assert all(m.is_empty for m in run.masks[:3])
        assert all(dice(pred, gt) == 1.0 for pred, gt in zip(run.masks, gts))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bidirectional_identity(self, seed):
        frames, gts, _ = render_sequence(seed=seed, n_frames=12, onset=4)
        run = run_oracle(frames, gts, direction=Direction.BIDIRECTIONAL)
        assert run.prompt_frame == 4
        assert run.provenance == [Provenance.PROPAGATED] * 12
        assert all(dice(pred, gt) == 1.0 for pred, gt in zip(run.masks, gts))

    def test_negative_sequence(self):
        frames, gts, _ = render_sequence(seed=5, n_frames=8, negative=True)
        run = run_oracle(frames, gts)
        assert run.prompt_frame is None
        assert run.provenance == [Provenance.EMPTY_NO_DETECTION] * 8
        assert all(m.is_empty for m in run.masks)
        assert run.provenance_counts()["empty_no_detection"] == 8

    def test_missing_gt_frames_count_as_negative(self):
        frames, gts, _ = render_sequence(seed=6, n_frames=6, onset=2)
        run = run_oracle(frames, [None, None] + gts[2:])
        assert run.prompt_frame == 2

    def test_fixed_index_without_prompt(self):
        frames, gts, _ = render_sequence(seed=7, n_frames=8, onset=5)
        run = run_oracle(frames, gts, prompt_selection=PromptSelection.FIXED_INDEX, fixed_index=0)
        assert run.prompt_frame == 0
        assert run.provenance == [Provenance.EMPTY_NO_PROMPT] * 8
        assert all(m.is_empty for m in run.masks)

    def test_single_prompt_round(self):
        frames, gts, _ = render_sequence(seed=3, n_frames=10, n_blobs=2, image_size=160)
        runner = SequenceRunner(frames, gts, DetectorSpec(), BridgePolicy(), VideoPolicy(), SegmenterSpec(), "seq")
        run = runner.run()
        assert len(run.prompts) == len(runner.prompts_at(run.prompt_frame))
        assert {p.frame_index for p in run.prompts} == {run.prompt_frame}

    def test_detection_modes(self):
        frames, gts, _ = render_sequence(seed=9, n_frames=10, onset=2)
        lazy = run_oracle(frames, gts)
        assert lazy.detection_mode == "until_first_hit" and lazy.detector_calls == 3
        eager = run_oracle(frames, gts, detect_all_frames=True)
        assert eager.detection_mode == "all_frames" and eager.detector_calls == 10
        assert all(a.equals(b) for a, b in zip(lazy.masks, eager.masks))


class TestRePrompting:
    def test_new_object_gets_new_id(self):
        first, second = BBox(2, 2, 8, 8), BBox(25, 25, 32, 32)
        gts = boxes_to_masks([[first]] * 5 + [[first, second]] * 5)
        frames = blank_frames(10)

        single = run_oracle(frames, gts)
        assert dice(single.masks[7], gts[7]) < 1.0

        run = run_oracle(frames, gts, re_detect_interval=5)
        assert sorted((p.frame_index, p.object_id) for p in run.prompts) == [(0, 1), (5, 2)]
        assert all(dice(pred, gt) == 1.0 for pred, gt in zip(run.masks, gts))

    def test_drifting_object_keeps_its_id(self):
        gts = boxes_to_masks([[BBox(2, 2, 8, 8)]] * 5 + [[BBox(8, 2, 14, 8)]] * 5)
        run = run_oracle(blank_frames(10), gts, re_detect_interval=5)
        assert sorted((p.frame_index, p.object_id) for p in run.prompts) == [(0, 1), (5, 1)]
        assert all(dice(pred, gt) == 1.0 for pred, gt in zip(run.masks[5:], gts[5:]))

    def test_tracked_object_not_reprompted(self):
        gts = boxes_to_masks([[BBox(10, 10, 18, 18)]] * 10)
        run = run_oracle(blank_frames(10), gts, re_detect_interval=3)
        assert len(run.prompts) == 1


class FailingDetector(Detector):
    def detect(self, frame, gt=None):
        raise BackendError("adapter went away")


def test_backend_error_carries_frame_context():
    frames = blank_frames(3)
    runner = SequenceRunner(frames, None, DetectorSpec(), BridgePolicy(), VideoPolicy(),
                            SegmenterSpec(kind="box_fill"), "seq_x", detector=FailingDetector(DetectorSpec()))
    with pytest.raises(BackendError, match="seq_x.*frame 0"):
        runner.run()


def test_frames_and_masks_must_align():
    with pytest.raises(ContractError):
        run_oracle(blank_frames(3), boxes_to_masks([[BBox(0, 0, 4, 4)]] * 2))
