import json

import numpy as np
import pytest
from pydantic import ValidationError

from ..errors import ConfigError, FormatError
from ..masks.rle import decode, frame_intersection_area
from .scene import (
    COLORS,
    Scene,
    SceneObject,
    SynthConfig,
    generate_scene,
    load_scene,
    motion_bucket,
    render_shape,
    unique_description,
)


class TestMotionBucket:
    """Test velocity quantisation."""

    def test_static(self):
        """Test zero velocity is static."""
        assert motion_bucket(0, 0) == "static"

    def test_compass_directions(self):
        """Test image coordinates: y grows downwards."""
        assert motion_bucket(2, 0) == "east"
        assert motion_bucket(0, -1) == "north"
        assert motion_bucket(-1, 1) == "southwest"
        assert motion_bucket(1, 1) == "southeast"


class TestRenderShape:
    """Test shape rasterisation."""

    def test_square_fills_box(self):
        """Test a 3x3 square covers exactly its box."""
        grid = render_shape("square", 2, 1, 3, 8, 8)

        assert grid.sum() == 9
        assert grid[1:4, 2:5].all()

    def test_shapes_fit_box(self):
        """Test every shape stays inside its bounding box."""
        for shape in ("square", "disk", "triangle"):
            grid = render_shape(shape, 3, 3, 6, 16, 16)
            ys, xs = np.nonzero(grid)

            assert grid.any()
            assert xs.min() >= 3 and xs.max() <= 8
            assert ys.min() >= 3 and ys.max() <= 8

    def test_unknown_shape(self):
        """Test unknown shapes are a config error."""
        with pytest.raises(ConfigError):
            render_shape("hexagon", 0, 0, 3, 8, 8)


class TestGenerateScene:
    """Test deterministic scene generation."""

    def setup_method(self):
        self.config = SynthConfig()

    def test_same_seed_same_scene(self):
        """Test generation is reproducible."""
        assert generate_scene(self.config, 11) == generate_scene(self.config, 11)
        other = generate_scene(self.config, 12)
        assert generate_scene(self.config, 11).to_dict() != other.to_dict()

    def test_motion_example(self):
        """Test velocity (+1, 0) from (2, 2) puts a size-2 square at x = 2, 3, 4."""
        square = SceneObject("square", 0, 2, (2, 2), (1, 0))
        scene = Scene("v", 0, 8, 8, 3, 4, (square,), 0, (0,))

        for t, x in enumerate((2, 3, 4)):
            ys, xs = np.nonzero(decode(scene.object_masks(0)[t]))
            assert (xs.min(), ys.min()) == (x, 2)

    def test_single_object(self):
        """Test one object is described by its colour alone."""
        scene = generate_scene(SynthConfig(min_objects=1, max_objects=1), 0)

        assert scene.expression_words() == [COLORS[scene.objects[0].color]]

    def test_expression_is_unique(self):
        """Test the expression words match exactly one object."""
        for seed in range(30):
            scene = generate_scene(self.config, seed)
            words = set(scene.expression_words())
            matches = [
                i
                for i, o in enumerate(scene.objects)
                if words <= {COLORS[o.color], o.shape, o.motion}
            ]
            assert matches == [scene.referent_index]

    def test_objects_stay_in_frame_and_apart(self):
        """Test objects never leave the frame or touch each other."""
        for seed in range(20):
            scene = generate_scene(self.config, seed)
            tracks = [scene.object_masks(i) for i in range(len(scene.objects))]
            for i, masks in enumerate(tracks):
                assert all(m.area == masks[0].area for m in masks)
                for other in tracks[i + 1 :]:
                    for t in range(scene.num_frames):
                        assert frame_intersection_area(masks[t], other[t]) == 0

    def test_hard_distractors_share_attributes(self):
        """Test hard-mode distractors differ from the referent in one attribute."""
        config = SynthConfig(hard=True, min_objects=3)
        for seed in range(300):
            scene = generate_scene(config, seed)
            ref = scene.objects[scene.referent_index].attributes()
            for i, obj in enumerate(scene.objects):
                if i != scene.referent_index:
                    pairs = zip(obj.attributes(), ref, strict=True)
                    assert sum(a != b for a, b in pairs) == 1

    def test_hard_distractors_when_variants_run_out(self):
        """Test distractors still share an attribute once one-off variants run out."""
        config = SynthConfig(
            hard=True, num_colors=2, min_objects=5, max_objects=5, max_speed=0
        )
        for seed in range(50):
            scene = generate_scene(config, seed)
            ref = scene.objects[scene.referent_index].attributes()
            distractors = [
                o.attributes()
                for i, o in enumerate(scene.objects)
                if i != scene.referent_index
            ]
            assert len(set(distractors)) == 4
            for d in distractors:
                assert any(a == b for a, b in zip(d, ref, strict=True))

    def test_unsatisfiable(self):
        """Test too little attribute variety is a config error."""
        config = SynthConfig(num_colors=1, max_speed=0, min_objects=5, max_objects=5)

        with pytest.raises(ConfigError, match="attribute"):
            generate_scene(config, 0)

    def test_object_count_limit(self):
        """Test more than five objects is rejected by the config."""
        with pytest.raises(ValidationError):
            SynthConfig(max_objects=6)


class TestSceneFile:
    """Test scene JSON."""

    def test_round_trip(self, tmp_path):
        """Test a scene reloads equal to itself."""
        scene = generate_scene(SynthConfig(), 5)
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(scene.to_dict()))

        assert load_scene(path) == scene

    def test_malformed(self, tmp_path):
        """Test missing fields are a format error."""
        path = tmp_path / "scene.json"
        path.write_text('{"video_id": "x"}')

        with pytest.raises(FormatError):
            load_scene(path)

    def test_unique_description_order(self):
        """Test colour is preferred, then shape, then motion."""
        objects = (
            SceneObject("disk", 0, 4, (0, 0), (0, 0)),
            SceneObject("square", 0, 4, (10, 10), (0, 0)),
        )

        assert unique_description(objects, 0) == ("shape",)
