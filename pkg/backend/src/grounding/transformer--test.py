import math

import numpy as np
import pytest

from ..errors import DimensionError, NumericError
from .features import TokenFeatures
from .model import MODEL_PRESETS, LayerWeights, ModelShape, analytic_model, random_model
from .transformer import (
    assemble_tokens,
    attention_weights,
    grounding_head,
    layer_norm,
    transformer_forward,
)

SMALL = ModelShape(dim=16, layers=2, heads=2, ffn_hidden=32, head_hidden=16)


def reference_forward(x, model):
    """Loop-by-loop encoder used to check the vectorised one."""
    x = [list(row) for row in x]
    n, dim = len(x), model.dim
    heads, dh = model.num_heads, model.head_dim

    def norm(rows, g, b):
        out = []
        for row in rows:
            mean = sum(row) / dim
            var = sum((v - mean) ** 2 for v in row) / dim
            scale = math.sqrt(var + 1e-5)
            out.append([(row[c] - mean) / scale * g[c] + b[c] for c in range(dim)])
        return out

    def matmul(rows, w):
        width = range(len(w[0]))
        return [
            [sum(r * w[k][j] for k, r in enumerate(row)) for j in width] for row in rows
        ]

    for layer in model.layers:
        h = norm(x, layer.ln1_g, layer.ln1_b)
        q, k, v = matmul(h, layer.wq), matmul(h, layer.wk), matmul(h, layer.wv)
        concat = [[0.0] * dim for _ in range(n)]
        for head in range(heads):
            cols = range(head * dh, (head + 1) * dh)
            for i in range(n):
                scores = [
                    sum(q[i][c] * k[j][c] for c in cols) / math.sqrt(dh)
                    for j in range(n)
                ]
                top = max(scores)
                exps = [math.exp(s - top) for s in scores]
                total = sum(exps)
                for c in cols:
                    concat[i][c] = sum(exps[j] / total * v[j][c] for j in range(n))
        attn = matmul(concat, layer.wo)
        x = [[x[i][c] + attn[i][c] for c in range(dim)] for i in range(n)]

        h = norm(x, layer.ln2_g, layer.ln2_b)
        hidden = matmul(h, layer.ffn_w1)
        hidden = [
            [
                0.5 * z * (1 + math.erf(z / math.sqrt(2)))
                for z in (a + b for a, b in zip(row, layer.ffn_b1, strict=True))
            ]
            for row in hidden
        ]
        out = matmul(hidden, layer.ffn_w2)
        x = [
            [x[i][c] + out[i][c] + layer.ffn_b2[c] for c in range(dim)]
            for i in range(n)
        ]
    return np.array(x)


class TestAssembleTokens:
    """Test token assembly with modal embeddings."""

    def setup_method(self):
        self.model = random_model(SMALL, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        self.tracklets = rng.standard_normal((3, 16))
        self.lang = TokenFeatures(rng.standard_normal((2, 16)))

    def test_embeddings_broadcast(self):
        """Test every tracklet row gets e_v and every token row gets e_l."""
        tokens = assemble_tokens(self.tracklets, self.lang, self.model)

        assert tokens.shape == (5, 16)
        visual = np.tile(self.model.embed_visual, (3, 1))
        linguistic = np.tile(self.model.embed_linguistic, (2, 1))
        np.testing.assert_allclose(tokens[:3] - self.tracklets, visual)
        np.testing.assert_allclose(tokens[3:] - self.lang.data, linguistic)

    def test_permuting_tracklets(self):
        """Test permuting tracklet rows permutes the first P tokens."""
        order = [2, 0, 1]
        a = assemble_tokens(self.tracklets, self.lang, self.model)
        b = assemble_tokens(self.tracklets[order], self.lang, self.model)

        np.testing.assert_array_equal(b[:3], a[order])
        np.testing.assert_array_equal(b[3:], a[3:])

    def test_width_mismatch(self):
        """Test tracklet features of the wrong width are rejected."""
        with pytest.raises(DimensionError):
            assemble_tokens(np.zeros((2, 8)), self.lang, self.model)


class TestTransformerForward:
    """Test the encoder stack against a naive reference."""

    def test_matches_reference(self):
        """Test 100 random instances agree within 1e-5 relative."""
        rng = np.random.default_rng(42)
        for _ in range(100):
            model = random_model(SMALL, rng)
            tokens = rng.standard_normal((int(rng.integers(1, 9)), 16))

            fast = transformer_forward(tokens, model)
            slow = reference_forward(tokens, model)

            np.testing.assert_allclose(fast, slow, rtol=1e-5, atol=1e-8)

    def test_single_token_attends_to_itself(self):
        """Test N=1 gives attention weight 1."""
        model = random_model(SMALL, np.random.default_rng(3))
        x = np.random.default_rng(4).standard_normal((1, 16))
        layer = model.layers[0]

        normed = layer_norm(x, layer.ln1_g, layer.ln1_b)
        weights = attention_weights(normed, layer, model.num_heads)

        np.testing.assert_allclose(weights, np.ones((2, 1, 1)))

    def test_permutation_equivariance(self):
        """Test forward(perm(x)) == perm(forward(x))."""
        rng = np.random.default_rng(5)
        model = random_model(SMALL, rng)
        x = rng.standard_normal((7, 16))
        order = rng.permutation(7)

        permuted = transformer_forward(x[order], model)
        np.testing.assert_allclose(
            permuted, transformer_forward(x, model)[order], atol=1e-12
        )

    def test_overflow_reports_layer(self):
        """Test an overflowing feed-forward block reports its layer index."""
        model = random_model(SMALL, np.random.default_rng(6))
        layer = model.layers[1]
        blown = LayerWeights(
            **{
                **layer.__dict__,
                "ffn_b1": np.full_like(layer.ffn_b1, 1e308),
                "ffn_w2": np.abs(layer.ffn_w2) + 1.0,
            }
        )
        model = type(model)(**{**model.__dict__, "layers": (model.layers[0], blown)})

        x = np.random.default_rng(7).standard_normal((3, 16)) * 10

        with pytest.raises(NumericError) as exc:
            transformer_forward(x, model)

        assert exc.value.layer == 1
        assert exc.value.exit_code == 4

    def test_paper_preset_shape(self):
        """Test the large preset describes a 4 layer, 12 head encoder."""
        shape = MODEL_PRESETS["paper"]

        assert (shape.dim, shape.layers, shape.heads) == (768, 4, 12)
        assert shape.dim % shape.heads == 0


class TestGroundingHead:
    """Test the scoring head and its softmax domain."""

    def setup_method(self):
        self.model = random_model(SMALL, np.random.default_rng(8))

    def test_single_tracklet(self):
        """Test P=1 always scores 1."""
        contextual = np.random.default_rng(9).standard_normal((4, 16))

        np.testing.assert_allclose(grounding_head(contextual, 1, self.model), [1.0])

    def test_identical_tracklets(self):
        """Test equal tracklet tokens split the mass evenly."""
        row = np.random.default_rng(10).standard_normal(16)
        contextual = np.vstack([np.tile(row, (4, 1)), np.zeros((2, 16))])

        scores = grounding_head(contextual, 4, self.model)

        np.testing.assert_allclose(scores, [0.25] * 4)

    def test_language_tokens_excluded(self):
        """Test rows after P do not change the scores."""
        rng = np.random.default_rng(11)
        contextual = rng.standard_normal((5, 16))
        other = contextual.copy()
        other[3:] = rng.standard_normal((2, 16)) * 100

        scores = grounding_head(contextual, 3, self.model)

        np.testing.assert_allclose(scores, grounding_head(other, 3, self.model))
        assert scores.sum() == pytest.approx(1.0, abs=1e-12)


class TestAnalyticModel:
    """Test the hand-built attribute matching weights."""

    def test_prefers_matching_attributes(self):
        """Test the tracklet with both expression attributes wins."""
        model = analytic_model(6, num_heads=2)
        dim = model.dim
        tracklets = np.zeros((3, dim))
        tracklets[0, [0, 3]] = 1.0  # matches both words
        tracklets[1, [0, 4]] = 1.0  # matches one
        tracklets[2, [1, 4]] = 1.0  # matches none
        tokens = np.zeros((2, dim))
        tokens[0, 0] = tokens[1, 3] = 1.0

        sequence = assemble_tokens(tracklets, TokenFeatures(tokens), model)
        contextual = transformer_forward(sequence, model)
        scores = grounding_head(contextual, 3, model)

        assert scores[0] > scores[1] > scores[2]
        assert scores[0] > 0.99

    def test_width_fits_heads(self):
        """Test the analytic width is divisible by the head count."""
        for attrs in range(1, 20):
            for heads in (1, 2, 3, 4):
                assert analytic_model(attrs, num_heads=heads).dim % heads == 0
