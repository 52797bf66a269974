import numpy as np
import pytest

from ..errors import InputError, PropagationError
from ..masks.rle import BinaryMask, decode, encode
from ..synth.proposals import scene_proposals
from ..synth.scene import Scene, SceneObject, SynthConfig, generate_scene
from ..tracklets.nms import tracklet_iou, tracklet_nms
from ..tracklets.tracklet import Proposal
from .base import (
    NoPropagation,
    Propagator,
    VideoContext,
    build_candidate_set,
    propagate,
    select_key_proposals,
)
from .keyframes import sample_key_frames
from .oracle import SyntheticOraclePropagator


def square_grid(x, y, size=2, shape=(8, 8)):
    grid = np.zeros(shape, dtype=bool)
    grid[y : y + size, x : x + size] = True
    return grid


def moving_square_scene(velocity=(1, 0), frames=3, start=(2, 2)):
    return Scene(
        video_id="moving",
        seed=0,
        width=8,
        height=8,
        num_frames=frames,
        num_colors=4,
        objects=(SceneObject("square", 0, 2, start, velocity),),
        referent_index=0,
        expression=(0,),
    )


def context_for(scene):
    return VideoContext(
        scene.video_id, scene.width, scene.height, scene.num_frames, scene
    )


class FlakyPropagator(Propagator):
    """Copies the seed but loses every odd frame."""

    def propagate_frame(self, seed, key, target, context):
        if target % 2:
            raise PropagationError("lost")
        return seed, 0.5

    def get_config(self):
        return {"name": "flaky"}


class TestSampleKeyFrames:
    """Test uniform key-frame sampling."""

    def test_all_frames(self):
        """Test K == T picks every frame."""
        assert sample_key_frames(7, 7).indices == (0, 1, 2, 3, 4, 5, 6)

    def test_midpoint(self):
        """Test K == 1 picks the middle frame."""
        assert sample_key_frames(10, 1).indices == (5,)

    def test_rounding_formula(self):
        """Test T=10, K=4."""
        assert sample_key_frames(10, 4).indices == (0, 3, 6, 9)

    def test_more_keys_than_frames(self):
        """Test K > T degenerates to all frames."""
        assert sample_key_frames(3, 7).indices == (0, 1, 2)

    def test_covers_first_and_last(self):
        """Test the plan spans the whole video for every K > 1."""
        for frames in range(2, 30):
            for k in range(2, 12):
                plan = sample_key_frames(frames, k)
                assert plan.indices[0] == 0
                assert plan.indices[-1] == frames - 1
                assert len(plan.indices) == min(k, frames)
                assert list(plan.indices) == sorted(set(plan.indices))

    def test_zero_frames(self):
        """Test an empty video is rejected."""
        with pytest.raises(InputError):
            sample_key_frames(0, 3)


class TestPropagate:
    """Test the propagation contract."""

    def test_single_frame(self):
        """Test T=1 returns just the seed."""
        seed = encode(square_grid(2, 2))
        t = propagate(seed, 0, VideoContext("v", 8, 8, 1), NoPropagation())

        assert t.masks == (seed,)
        assert t.prop_prob == (1.0,)

    def test_oracle_zero_motion(self):
        """Test a static object is replicated on every frame."""
        scene = moving_square_scene(velocity=(0, 0), frames=4)
        seed = scene.object_masks(0)[1]
        t = propagate(seed, 1, context_for(scene), SyntheticOraclePropagator())

        assert all(m == seed for m in t.masks)
        assert t.prop_prob == (1.0, 1.0, 1.0, 1.0)

    def test_oracle_translation(self):
        """Test squares at x = 2, 3, 4 for velocity (+1, 0)."""
        scene = moving_square_scene()
        seed = encode(square_grid(2, 2))
        t = propagate(seed, 0, context_for(scene), SyntheticOraclePropagator())

        for frame, x in enumerate((2, 3, 4)):
            np.testing.assert_array_equal(decode(t.masks[frame]), square_grid(x, 2))

    def test_backward_propagation(self):
        """Test frames before the key frame move the other way."""
        scene = moving_square_scene()
        seed = encode(square_grid(4, 2))
        t = propagate(seed, 2, context_for(scene), SyntheticOraclePropagator())

        np.testing.assert_array_equal(decode(t.masks[0]), square_grid(2, 2))

    def test_soft_failure(self):
        """Test failed frames become empty with probability 0."""
        seed = encode(square_grid(2, 2))
        t = propagate(seed, 0, VideoContext("v", 8, 8, 4), FlakyPropagator())

        assert t.prop_prob == (1.0, 0.0, 0.5, 0.0)
        assert t.masks[1].is_empty() and t.masks[3].is_empty()
        assert t.masks[2] == seed

    def test_contract_for_every_propagator(self):
        """Test masks[key] == seed and prob 1 for each implementation."""
        scene = moving_square_scene(frames=5)
        impls = (
            NoPropagation(),
            FlakyPropagator(),
            SyntheticOraclePropagator(0.3, 0.9, seed=4),
        )
        for impl in impls:
            for key in range(5):
                seed = scene.object_masks(0)[key]
                t = propagate(seed, key, context_for(scene), impl)
                assert t.num_frames == 5
                assert t.masks[key] == seed
                assert t.prop_prob[key] == 1.0

    def test_oracle_noise_decays_probability(self):
        """Test probability decays with distance from the key frame."""
        scene = moving_square_scene(frames=3, start=(1, 2))
        seed = scene.object_masks(0)[0]
        oracle = SyntheticOraclePropagator(noise=0.5, decay=0.5)
        t = propagate(seed, 0, context_for(scene), oracle)

        assert t.prop_prob == (1.0, 0.5, 0.25)

    def test_key_out_of_range(self):
        """Test key frames outside the video are rejected."""
        with pytest.raises(InputError):
            propagate(
                BinaryMask.empty(8, 8), 3, VideoContext("v", 8, 8, 3), NoPropagation()
            )


class TestBuildCandidateSet:
    """Test candidate tracklet construction."""

    def test_no_proposals(self):
        """Test an empty proposal list gives an empty set."""
        result = build_candidate_set([], VideoContext("v", 8, 8, 3), NoPropagation())

        assert len(result) == 0

    def test_cardinality(self):
        """Test 2 key frames x 3 proposals gives 6 tracklets."""
        proposals = [
            Proposal(key, encode(square_grid(x, 0)), 0.9, "htc")
            for key in (0, 2)
            for x in (0, 3, 6)
        ]
        result = build_candidate_set(
            proposals,
            VideoContext("v", 8, 8, 3),
            NoPropagation(),
            sample_key_frames(3, 2),
            workers=2,
        )

        assert len(result) == 6
        assert [t.id for t in result] == [f"{i:04d}" for i in range(6)]

    def test_same_object_from_two_key_frames(self):
        """Test one object proposed twice yields matching tracklets."""
        scene = moving_square_scene(frames=3)
        proposals = [Proposal(k, scene.object_masks(0)[k], 1.0, "htc") for k in (0, 2)]
        result = build_candidate_set(
            proposals, context_for(scene), SyntheticOraclePropagator()
        )

        first, second = result.tracklets[0], result.tracklets[1]
        assert tracklet_iou(first, second) == pytest.approx(1.0)

    def test_proposal_off_plan_rejected(self):
        """Test proposals must sit on key frames."""
        with pytest.raises(InputError):
            build_candidate_set(
                [Proposal(1, BinaryMask.empty(8, 8), 1.0, "htc")],
                VideoContext("v", 8, 8, 3),
                NoPropagation(),
                sample_key_frames(3, 2),
            )

    def test_oracle_then_nms_gives_one_tracklet_per_object(self):
        """Test noise-free scenes collapse to one tracklet per object."""
        config = SynthConfig()
        for seed in range(10):
            scene = generate_scene(config, seed)
            plan = sample_key_frames(scene.num_frames, 7)
            proposals = select_key_proposals(scene_proposals(scene, config), plan)
            candidates = build_candidate_set(
                proposals, context_for(scene), SyntheticOraclePropagator(), plan
            )
            kept = tracklet_nms(candidates, 0.5, 10)

            assert len(kept) == len(scene.objects)
