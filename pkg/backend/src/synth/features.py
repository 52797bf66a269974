"""
Attribute-encoded features for synthetic scenes.

Every pixel covered by an object carries the one-hot concatenation of the
object's colour, shape and motion bucket; background pixels are zero. The
channel order is the token vocabulary order, so a word token and the
attribute it names share one channel.
"""

import numpy as np

from ..errors import InputError
from ..grounding.features import FeatureMap, TokenFeatures
from ..masks.morphology import area_average
from ..masks.rle import decode
from .scene import COLORS, Scene


def attribute_vector(scene: Scene, index: int, feature_dim: int) -> np.ndarray:
    obj = scene.objects[index]
    vocab = scene.vocabulary
    vec = np.zeros(feature_dim)
    vec[vocab.index(COLORS[obj.color])] = 1.0
    vec[vocab.index(obj.shape)] = 1.0
    vec[vocab.index(obj.motion)] = 1.0
    return vec


def attribute_features(
    scene: Scene, grid_width: int, grid_height: int, feature_dim: int | None = None
) -> tuple[list[FeatureMap], TokenFeatures]:
    """
    Per-frame feature maps and expression token features of a scene.

    Args:
        scene: Generated scene
        grid_width: Feature grid width w
        grid_height: Feature grid height h
        feature_dim: Channel count D; extra channels beyond the attributes stay zero

    Returns:
        One FeatureMap per frame and the TokenFeatures of the expression
    """
    attr_dims = len(scene.vocabulary)
    feature_dim = attr_dims if feature_dim is None else feature_dim
    if feature_dim < attr_dims:
        raise InputError(
            f"Feature dimension {feature_dim} cannot hold "
            f"{attr_dims} attribute channels"
        )

    vectors = [
        attribute_vector(scene, i, feature_dim) for i in range(len(scene.objects))
    ]
    frames = []
    for t in range(scene.num_frames):
        dense = np.zeros((scene.height, scene.width, feature_dim))
        for i, vec in enumerate(vectors):
            dense[decode(scene.object_masks(i)[t])] = vec
        frames.append(FeatureMap(area_average(dense, grid_width, grid_height)))

    tokens = np.zeros((len(scene.expression), feature_dim))
    for row, token in enumerate(scene.expression):
        tokens[row, token] = 1.0
    return frames, TokenFeatures(tokens)
