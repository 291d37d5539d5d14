"""A desk-scale diffusion transformer with alternating spatial/temporal attention.

Blocks are pre-norm residual: (spatial | temporal) self-attention, then
cross-attention against a single condition token, then a 2-layer FFN. The
self-attention output of each block passes through a layer hook before the
residual add; REPLACE hooks short-circuit the attention computation entirely.

Weights are seeded-random, uniform(-1/sqrt(d), 1/sqrt(d)): caching correctness
and speedup depend on the computation graph, not on trained weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .denoisers import _check_hooks, REPLACE


@dataclass(frozen=True)
class TinyDiTConfig:
    layers: int = 4
    embed_dim: int = 32
    heads: int = 4
    patch: int = 4
    frames: int = 8
    channels: int = 4
    height: int = 32
    width: int = 32
    condition_vocab: int = 8
    init_seed: int = 0

    def __post_init__(self):
        if self.layers % 2 != 0:
            raise ValueError("layers must be even (alternating spatial/temporal)")
        if self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by heads")
        if self.height % self.patch != 0 or self.width % self.patch != 0:
            raise ValueError("spatial dims must be divisible by patch size")

    @property
    def spatial_tokens(self) -> int:
        return (self.height // self.patch) * (self.width // self.patch)

    @property
    def total_tokens(self) -> int:
        return self.frames * self.spatial_tokens


class MacCounter:
    """Accrues multiply-accumulates from the shapes of executed matmuls."""

    def __init__(self):
        self.total = 0

    def add_matmul(self, a_shape, b_shape):
        batch = int(np.prod(a_shape[:-2], dtype=np.int64)) if len(a_shape) > 2 else 1
        self.total += batch * a_shape[-2] * a_shape[-1] * b_shape[-1]


def _mm(a: np.ndarray, b: np.ndarray, counter: MacCounter | None) -> np.ndarray:
    if counter is not None:
        counter.add_matmul(a.shape, b.shape)
    return a @ b


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-5)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x**3)))


def sinusoidal_embedding(value: float, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = value * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)]).astype(np.float32)


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int = 1,
              counter: MacCounter | None = None) -> np.ndarray:
    """Multi-head softmax(q k^T / sqrt(d_head)) v; heads concatenated.

    q: (..., n, d), k/v: (..., m, d); d divisible by heads.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[:-1] != v.shape[:-1]:
        raise ValueError(f"dimension mismatch: q{q.shape} k{k.shape} v{v.shape}")
    d = q.shape[-1]
    if d % heads != 0:
        raise ValueError("feature dim must be divisible by heads")
    dh = d // heads

    def split(x):
        return np.moveaxis(x.reshape(*x.shape[:-1], heads, dh), -2, -3)

    qh, kh, vh = split(q), split(k), split(v)
    scores = _mm(qh, np.swapaxes(kh, -1, -2), counter) / math.sqrt(dh)
    scores -= scores.max(axis=-1, keepdims=True)
    w = np.exp(scores)
    w /= w.sum(axis=-1, keepdims=True)
    out = _mm(w, vh, counter)
    return np.moveaxis(out, -3, -2).reshape(*q.shape[:-1], d)


class TinyDiT:
    def __init__(self, config: TinyDiTConfig):
        self.config = config
        self.layer_count = config.layers
        self.latent_shape = (config.frames, config.channels, config.height, config.width)
        d = config.embed_dim
        g = rng.stream(config.init_seed, rng.MODEL_INIT)
        bound = 1.0 / math.sqrt(d)

        def w(*shape):
            return g.uniform(-bound, bound, size=shape).astype(np.float32)

        patch_dim = config.channels * config.patch * config.patch
        self.weights: dict[str, np.ndarray] = {"patch_in": w(patch_dim, d), "patch_out": w(d, patch_dim)}
        for i in range(config.layers):
            for name in ("attn_q", "attn_k", "attn_v", "attn_o",
                         "cross_q", "cross_k", "cross_v", "cross_o"):
                self.weights[f"block{i}.{name}"] = w(d, d)
            self.weights[f"block{i}.ffn_1"] = w(d, 4 * d)
            self.weights[f"block{i}.ffn_2"] = w(4 * d, d)
        self._pos = self._positional_embedding()

    def _positional_embedding(self) -> np.ndarray:
        c = self.config
        d = c.embed_dim
        pos = np.zeros((c.frames, c.spatial_tokens, d), dtype=np.float32)
        for f in range(c.frames):
            for n in range(c.spatial_tokens):
                pos[f, n] = sinusoidal_embedding(f * c.spatial_tokens + n, d)
        return 0.1 * pos

    def condition_embedding(self, condition_id: int) -> np.ndarray:
        if condition_id == 0:
            return np.zeros(self.config.embed_dim, dtype=np.float32)
        hashed = (condition_id * 2654435761) % 65521
        return sinusoidal_embedding(float(hashed), self.config.embed_dim)

    def predict(self, x_t: np.ndarray, t: int, condition_id: int, hooks=None,
                counter: MacCounter | None = None) -> np.ndarray:
        c = self.config
        if x_t.shape != self.latent_shape:
            raise ValueError(f"expected input shape {self.latent_shape}, got {x_t.shape}")
        hooks = _check_hooks(hooks, self.layer_count)
        d = c.embed_dim
        p = c.patch
        gh, gw = c.height // p, c.width // p

        # patchify: (F, C, H, W) -> (F, n_s, C*p*p) tokens
        tok = x_t.reshape(c.frames, c.channels, gh, p, gw, p)
        tok = tok.transpose(0, 2, 4, 1, 3, 5).reshape(c.frames, c.spatial_tokens, -1)
        h = _mm(tok.astype(np.float32), self.weights["patch_in"], counter)
        h = h + self._pos + sinusoidal_embedding(float(t), d) + self.condition_embedding(condition_id)

        cond_tok = self.condition_embedding(condition_id).reshape(1, d)
        for i in range(c.layers):
            wb = lambda name: self.weights[f"block{i}.{name}"]
            hook = hooks[i]
            if hook.mode == REPLACE:
                attn_out = np.asarray(hook.replacement, dtype=np.float32)
                if attn_out.shape != h.shape:
                    raise ValueError("replacement feature shape mismatch")
            else:
                hn = _layer_norm(h)
                if i % 2 == 1:  # temporal layers attend across frames per spatial site
                    hn = np.swapaxes(hn, 0, 1)
                q = _mm(hn, wb("attn_q"), counter)
                k = _mm(hn, wb("attn_k"), counter)
                v = _mm(hn, wb("attn_v"), counter)
                a = attention(q, k, v, heads=c.heads, counter=counter)
                a = _mm(a, wb("attn_o"), counter)
                if i % 2 == 1:
                    a = np.swapaxes(a, 0, 1)
                attn_out = np.ascontiguousarray(a, dtype=np.float32)
                hook.recorded = attn_out
            h = h + attn_out

            hn = _layer_norm(h)
            q = _mm(hn, wb("cross_q"), counter)
            k = _mm(cond_tok, wb("cross_k"), counter)
            v = _mm(cond_tok, wb("cross_v"), counter)
            a = attention(q, k, v, heads=c.heads, counter=counter)
            h = h + _mm(a, wb("cross_o"), counter)

            hn = _layer_norm(h)
            h = h + _mm(_gelu(_mm(hn, wb("ffn_1"), counter)), wb("ffn_2"), counter)

        out = _mm(_layer_norm(h), self.weights["patch_out"], counter)
        out = out.reshape(c.frames, gh, gw, c.channels, p, p)
        out = out.transpose(0, 3, 1, 4, 2, 5).reshape(self.latent_shape)
        return np.ascontiguousarray(out, dtype=np.float32)

    def call_macs(self, reused_attention: bool = False) -> int:
        total = count_macs(self.config)
        if reused_attention:
            total -= sum(attention_layer_macs(self.config, i) for i in range(self.config.layers))
        return total

    # --- weight persistence: flat little-endian f32 blob + JSON shape sidecar ---

    def save_weights(self, path: str | Path) -> None:
        path = Path(path)
        blob = b"".join(self.weights[k].astype("<f4").tobytes() for k in sorted(self.weights))
        path.write_bytes(blob)
        sidecar = {k: list(self.weights[k].shape) for k in sorted(self.weights)}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))

    def load_weights(self, path: str | Path) -> None:
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        raw = np.frombuffer(path.read_bytes(), dtype="<f4")
        offset = 0
        for name in sorted(sidecar):
            shape = tuple(sidecar[name])
            size = int(np.prod(shape))
            if name not in self.weights or self.weights[name].shape != shape:
                raise ValueError(f"weight {name!r} with shape {shape} does not match the model")
            self.weights[name] = raw[offset:offset + size].reshape(shape).copy()
            offset += size
        if offset != raw.size:
            raise ValueError("weight file size does not match the sidecar")


def attention_layer_macs(config: TinyDiTConfig, layer: int) -> int:
    """MACs of one spatial or temporal self-attention module (QKVO + scores + apply)."""
    d = config.embed_dim
    if layer % 2 == 0:
        n, instances = config.spatial_tokens, config.frames
    else:
        n, instances = config.frames, config.spatial_tokens
    return instances * (2 * n * n * d + 4 * n * d * d)


def count_macs(config: TinyDiTConfig, shape=None) -> int:
    """Analytic MACs of one full predict call.

    Per self-attention: 2 n^2 d + 4 n d^2. Per FFN: 8 n d^2. Cross-attention
    with m condition tokens: 2 n m d + 2 n d^2 + 2 m d^2. Plus patch embed and
    unembed projections.
    """
    if shape is not None and tuple(shape) != (config.frames, config.channels,
                                              config.height, config.width):
        raise ValueError(f"shape {shape} does not match the config latent shape")
    d = config.embed_dim
    n = config.total_tokens
    m = 1  # single condition token
    patch_dim = config.channels * config.patch * config.patch
    total = 2 * n * patch_dim * d  # patch embed + unembed
    for i in range(config.layers):
        total += attention_layer_macs(config, i)
        total += 2 * n * m * d + 2 * n * d * d + 2 * m * d * d  # cross-attention
        total += 8 * n * d * d  # FFN with 4x hidden
    return total
