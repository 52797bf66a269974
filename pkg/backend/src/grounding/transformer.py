"""
Forward pass of the grounding transformer.

Pre-norm encoder layers without positional encodings, so the output is
equivariant to any permutation of the input tokens.
"""

import numpy as np
from scipy.special import erf, softmax

from ..errors import DimensionError, InputError, NumericError
from .features import TokenFeatures
from .model import LAYER_NORM_EPS, GroundingModel, LayerWeights


def assemble_tokens(
    tracklet_feats: np.ndarray, lang_feats: TokenFeatures, model: GroundingModel
) -> np.ndarray:
    """Stack tracklet then language tokens, each plus its modality's embedding."""
    tracklet_feats = np.asarray(tracklet_feats, dtype=np.float64)
    if tracklet_feats.ndim != 2:
        raise DimensionError(
            f"Tracklet features must be (P, D), got {tracklet_feats.shape}"
        )
    dim = model.dim
    if tracklet_feats.shape[1] != dim or lang_feats.channels != dim:
        raise DimensionError(
            f"Feature width mismatch: tracklets {tracklet_feats.shape[1]}, "
            f"language {lang_feats.channels}, model {dim}"
        )
    visual = tracklet_feats + model.embed_visual
    linguistic = lang_feats.data + model.embed_linguistic
    return np.concatenate([visual, linguistic], axis=0)


def layer_norm(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * gain + bias


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def attention_weights(
    x: np.ndarray, layer: LayerWeights, num_heads: int
) -> np.ndarray:
    """Per-head attention matrices, shape (H, N, N)."""
    n, dim = x.shape
    head_dim = dim // num_heads
    q = (x @ layer.wq).reshape(n, num_heads, head_dim).transpose(1, 0, 2)
    k = (x @ layer.wk).reshape(n, num_heads, head_dim).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.sqrt(head_dim)
    return softmax(scores, axis=-1)


def multi_head_attention(
    x: np.ndarray, layer: LayerWeights, num_heads: int
) -> np.ndarray:
    n, dim = x.shape
    head_dim = dim // num_heads
    weights = attention_weights(x, layer, num_heads)
    v = (x @ layer.wv).reshape(n, num_heads, head_dim).transpose(1, 0, 2)
    heads = (weights @ v).transpose(1, 0, 2).reshape(n, dim)
    return heads @ layer.wo


def feed_forward(x: np.ndarray, layer: LayerWeights) -> np.ndarray:
    return gelu(x @ layer.ffn_w1 + layer.ffn_b1) @ layer.ffn_w2 + layer.ffn_b2


def transformer_forward(tokens: np.ndarray, model: GroundingModel) -> np.ndarray:
    """
    Run the encoder stack over an (N, D) token sequence.

    Raises:
        NumericError: if a layer produces a non-finite value
    """
    x = np.asarray(tokens, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InputError(f"Token sequence must be (N, D) with N >= 1, got {x.shape}")
    if x.shape[1] != model.dim:
        raise DimensionError(
            f"Token width {x.shape[1]} does not match model width {model.dim}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericError("Input tokens contain non-finite values", layer=0)

    with np.errstate(over="ignore", invalid="ignore"):
        for i, layer in enumerate(model.layers):
            normed = layer_norm(x, layer.ln1_g, layer.ln1_b)
            x = x + multi_head_attention(normed, layer, model.num_heads)
            x = x + feed_forward(layer_norm(x, layer.ln2_g, layer.ln2_b), layer)
            if not np.all(np.isfinite(x)):
                raise NumericError(
                    f"Non-finite activations after transformer layer {i}", layer=i
                )
    return x


def grounding_logits(
    contextual: np.ndarray, count: int, model: GroundingModel
) -> np.ndarray:
    hidden = np.maximum(contextual[:count] @ model.head_w1 + model.head_b1, 0.0)
    return (hidden @ model.head_w2 + model.head_b2)[:, 0]


def grounding_head(
    contextual: np.ndarray, count: int, model: GroundingModel
) -> np.ndarray:
    """Tracklet probabilities: MLP on the first `count` tokens, softmax over them."""
    if count < 1 or count > contextual.shape[0]:
        raise InputError(
            f"Tracklet count {count} outside [1, {contextual.shape[0]}]"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        logits = grounding_logits(contextual, count, model)
    if not np.all(np.isfinite(logits)):
        raise NumericError("Non-finite grounding logits", layer=len(model.layers))
    return softmax(logits)


def ground_frame(
    tracklet_feats: np.ndarray, lang_feats: TokenFeatures, model: GroundingModel
) -> np.ndarray:
    """Per-frame tracklet scores s^t for one model."""
    tokens = assemble_tokens(tracklet_feats, lang_feats, model)
    contextual = transformer_forward(tokens, model)
    return grounding_head(contextual, tracklet_feats.shape[0], model)
