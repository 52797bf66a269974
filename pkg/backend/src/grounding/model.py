"""
Grounding model weights, presets and checkpoint conversion.

Weights are kept as float64 for the forward pass and converted to float32
when written, so a checkpoint survives read -> write byte-identically.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DimensionError, FormatError, InputError
from .tensor_io import read_checkpoint, write_checkpoint

logger = logging.getLogger(__name__)

LAYER_TENSORS = (
    "wq",
    "wk",
    "wv",
    "wo",
    "ln1.g",
    "ln1.b",
    "ln2.g",
    "ln2.b",
    "ffn.w1",
    "ffn.b1",
    "ffn.w2",
    "ffn.b2",
)
HEAD_TENSORS = ("head.w1", "head.b1", "head.w2", "head.b2")
LAYER_NORM_EPS = 1e-5


@dataclass(frozen=True)
class ModelShape:
    dim: int
    layers: int
    heads: int
    ffn_hidden: int
    head_hidden: int


MODEL_PRESETS = {
    "desk": ModelShape(dim=16, layers=2, heads=2, ffn_hidden=32, head_hidden=16),
    "paper": ModelShape(
        dim=768, layers=4, heads=12, ffn_hidden=3072, head_hidden=768
    ),
}


def get_preset(name: str) -> ModelShape:
    if name not in MODEL_PRESETS:
        raise ConfigError(
            f"Unknown model preset '{name}'. Available: {list(MODEL_PRESETS)}"
        )
    return MODEL_PRESETS[name]


@dataclass(frozen=True, eq=False)
class LayerWeights:
    """Parameters of one pre-norm transformer encoder layer."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray
    ffn_w1: np.ndarray
    ffn_b1: np.ndarray
    ffn_w2: np.ndarray
    ffn_b2: np.ndarray

    @classmethod
    def from_tensors(
        cls, tensors: dict[str, np.ndarray], prefix: str
    ) -> "LayerWeights":
        try:
            values = [
                np.asarray(tensors[f"{prefix}.{n}"], dtype=np.float64)
                for n in LAYER_TENSORS
            ]
        except KeyError as e:
            raise FormatError(f"Checkpoint is missing tensor {e}") from e
        return cls(*values)

    def to_tensors(self, prefix: str) -> dict[str, np.ndarray]:
        values = (
            self.wq,
            self.wk,
            self.wv,
            self.wo,
            self.ln1_g,
            self.ln1_b,
            self.ln2_g,
            self.ln2_b,
            self.ffn_w1,
            self.ffn_b1,
            self.ffn_w2,
            self.ffn_b2,
        )
        return {
            f"{prefix}.{n}": v for n, v in zip(LAYER_TENSORS, values, strict=True)
        }

    def check(self, dim: int, index: int) -> None:
        hidden = self.ffn_w1.shape[-1] if self.ffn_w1.ndim == 2 else -1
        expected = {
            "wq": (dim, dim),
            "wk": (dim, dim),
            "wv": (dim, dim),
            "wo": (dim, dim),
            "ln1_g": (dim,),
            "ln1_b": (dim,),
            "ln2_g": (dim,),
            "ln2_b": (dim,),
            "ffn_w1": (dim, hidden),
            "ffn_b1": (hidden,),
            "ffn_w2": (hidden, dim),
            "ffn_b2": (dim,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionError(
                    f"layer{index}.{name} has shape {actual}, expected {shape}"
                )


@dataclass(frozen=True, eq=False)
class GroundingModel:
    """Transformer grounding module: encoder layers, modal embeddings, MLP head."""

    layers: tuple[LayerWeights, ...]
    embed_visual: np.ndarray
    embed_linguistic: np.ndarray
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray
    num_heads: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        dim = self.dim
        if self.num_heads < 1 or dim % self.num_heads:
            raise ConfigError(
                f"Model dimension {dim} is not divisible by {self.num_heads} heads"
            )
        if self.embed_linguistic.shape != (dim,):
            raise DimensionError(
                f"embed.linguistic has shape {self.embed_linguistic.shape}, "
                f"expected ({dim},)"
            )
        for i, layer in enumerate(self.layers):
            layer.check(dim, i)
        hidden = self.head_w1.shape[-1]
        if self.head_w1.shape != (dim, hidden) or self.head_b1.shape != (hidden,):
            raise DimensionError(
                f"head.w1/b1 shapes {self.head_w1.shape}/{self.head_b1.shape} "
                f"do not match D={dim}"
            )
        if self.head_w2.shape != (hidden, 1) or self.head_b2.shape != (1,):
            raise DimensionError(
                f"head.w2/b2 shapes {self.head_w2.shape}/{self.head_b2.shape} "
                f"are not ({hidden}, 1)/(1,)"
            )
        for name, array in self.to_tensors().items():
            if not np.all(np.isfinite(array)):
                raise InputError(f"Model tensor {name} contains non-finite values")

    @property
    def dim(self) -> int:
        return self.embed_visual.shape[0]

    @property
    def head_dim(self) -> int:
        return self.dim // self.num_heads

    def to_tensors(self) -> dict[str, np.ndarray]:
        tensors: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            tensors.update(layer.to_tensors(f"layer{i}"))
        tensors["embed.visual"] = self.embed_visual
        tensors["embed.linguistic"] = self.embed_linguistic
        tensors["head.w1"] = self.head_w1
        tensors["head.b1"] = self.head_b1
        tensors["head.w2"] = self.head_w2
        tensors["head.b2"] = self.head_b2
        return tensors

    @classmethod
    def from_tensors(
        cls, tensors: dict[str, np.ndarray], num_heads: int
    ) -> "GroundingModel":
        count = 0
        while f"layer{count}.wq" in tensors:
            count += 1
        if count == 0:
            raise FormatError("Checkpoint contains no transformer layers")
        try:
            names = ("embed.visual", "embed.linguistic", *HEAD_TENSORS)
            others = {n: np.asarray(tensors[n], dtype=np.float64) for n in names}
        except KeyError as e:
            raise FormatError(f"Checkpoint is missing tensor {e}") from e
        return cls(
            layers=tuple(
                LayerWeights.from_tensors(tensors, f"layer{i}") for i in range(count)
            ),
            embed_visual=others["embed.visual"],
            embed_linguistic=others["embed.linguistic"],
            head_w1=others["head.w1"],
            head_b1=others["head.b1"],
            head_w2=others["head.w2"],
            head_b2=others["head.b2"],
            num_heads=num_heads,
        )


def load_model(path: str | Path, num_heads: int) -> GroundingModel:
    model = GroundingModel.from_tensors(read_checkpoint(path), num_heads)
    logger.info(
        f"Loaded grounding model from {path}: D={model.dim}, "
        f"{len(model.layers)} layers, {num_heads} heads"
    )
    return model


def save_model(model: GroundingModel, path: str | Path) -> None:
    write_checkpoint(path, model.to_tensors())


def random_model(shape: ModelShape, rng: np.random.Generator) -> GroundingModel:
    """Randomly initialised weights for numeric checks and smoke runs."""
    d, f, h = shape.dim, shape.ffn_hidden, shape.head_hidden

    def normal(*size: int, scale: float) -> np.ndarray:
        # round through float32 so saved checkpoints reload to the same values
        return (rng.standard_normal(size) * scale).astype(np.float32).astype(np.float64)

    layers = tuple(
        LayerWeights(
            wq=normal(d, d, scale=1 / math.sqrt(d)),
            wk=normal(d, d, scale=1 / math.sqrt(d)),
            wv=normal(d, d, scale=1 / math.sqrt(d)),
            wo=normal(d, d, scale=1 / math.sqrt(d)),
            ln1_g=1 + normal(d, scale=0.1),
            ln1_b=normal(d, scale=0.1),
            ln2_g=1 + normal(d, scale=0.1),
            ln2_b=normal(d, scale=0.1),
            ffn_w1=normal(d, f, scale=1 / math.sqrt(d)),
            ffn_b1=normal(f, scale=0.1),
            ffn_w2=normal(f, d, scale=1 / math.sqrt(f)),
            ffn_b2=normal(d, scale=0.1),
        )
        for _ in range(shape.layers)
    )
    return GroundingModel(
        layers=layers,
        embed_visual=normal(d, scale=0.5),
        embed_linguistic=normal(d, scale=0.5),
        head_w1=normal(d, h, scale=1 / math.sqrt(d)),
        head_b1=normal(h, scale=0.1),
        head_w2=normal(h, 1, scale=1 / math.sqrt(h)),
        head_b2=normal(1, scale=0.1),
        num_heads=shape.heads,
    )


def analytic_dim(attribute_dims: int, num_heads: int) -> int:
    """Model width needed by `analytic_model`."""
    head_dim = max(attribute_dims, math.ceil((2 * attribute_dims + 2) / num_heads))
    return head_dim * num_heads


def analytic_model(
    attribute_dims: int,
    num_heads: int = 2,
    num_layers: int = 2,
    sharpness: float = 20.0,
    temperature: float = 20.0,
) -> GroundingModel:
    """
    Hand-built weights that ground one-hot attribute features without training.

    Channel layout: attributes in [0, A), the visual marker at A, the
    linguistic marker at A + 1, and a copy block at [A + 2, 2A + 2). The
    modal embeddings set the markers. In layer 0, head 0 lets every token
    carrying the visual marker attend (almost) only to language tokens and
    writes their mean attribute vector into the copy block; the FFN and all
    later layers are zero, i.e. identity through the residual path. The head
    scores each tracklet by sum_i min(tau_i, qbar_i), the soft overlap of its
    attributes with the mean expression vector, scaled by `temperature`.

    Language tokens must be one-hot rows (exactly one attribute each) for
    the layer-norm constants below to hold.
    """
    a = attribute_dims
    dim = analytic_dim(a, num_heads)
    head_dim = dim // num_heads
    marker_v, marker_l, copy = a, a + 1, a + 2
    hidden = 2 * dim

    def zeros(*size: int) -> np.ndarray:
        return np.zeros(size)

    def identity_layer() -> LayerWeights:
        return LayerWeights(
            zeros(dim, dim), zeros(dim, dim), zeros(dim, dim), zeros(dim, dim),
            np.ones(dim), zeros(dim), np.ones(dim), zeros(dim),
            zeros(dim, hidden), zeros(hidden), zeros(hidden, dim), zeros(dim),
        )

    first = identity_layer()
    first.wq[marker_v, 0] = sharpness * math.sqrt(head_dim)
    first.wk[marker_l, 0] = 1.0
    for i in range(a):
        first.wv[i, i] = 1.0
        first.wo[i, copy + i] = 1.0
    layers = (first, *(identity_layer() for _ in range(num_layers - 1)))

    # layer-norm statistics of a language token: two ones among `dim` channels
    mean = 2.0 / dim
    var = 2.0 / dim - mean**2
    scale = 1.0 / math.sqrt(var + LAYER_NORM_EPS)

    head_w1 = zeros(dim, 2 * a)
    head_b1 = zeros(2 * a)
    for i in range(a):
        head_w1[i, i] = 1.0
        head_w1[i, a + i] = 1.0
        head_w1[copy + i, a + i] = -1.0 / scale
        head_b1[a + i] = -mean
    head_w2 = np.concatenate([np.full(a, temperature), np.full(a, -temperature)])
    head_w2 = head_w2[:, None]

    embed_visual = zeros(dim)
    embed_visual[marker_v] = 1.0
    embed_linguistic = zeros(dim)
    embed_linguistic[marker_l] = 1.0

    return GroundingModel(
        layers=layers,
        embed_visual=embed_visual,
        embed_linguistic=embed_linguistic,
        head_w1=head_w1,
        head_b1=head_b1,
        head_w2=head_w2,
        head_b2=zeros(1),
        num_heads=num_heads,
    )
