"""Graph-attention encoder and attention-model decoder heads."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
from torch import nn

N_NODE_FEATURES = 6  # x, y, time cost, depot flag, start flag, sub-task flag
N_STATE_FEATURES = 4  # agents remaining, current agent time, max time, distance to depot
FEATURE_LAYOUT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 128
    heads: int = 8
    encoder_layers: int = 3
    feedforward_dim: int = 512
    logit_clip: float = 10.0
    normalization: str = "instance"  # masked per-instance feature standardization
    choose_start: bool = False  # let the policy pick among unused starts instead of forcing start_k

    def __post_init__(self):
        if self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by heads {self.heads}")
        if self.logit_clip <= 0:
            raise ValueError("logit clip must be positive")
        if self.encoder_layers < 0:
            raise ValueError("encoder_layers must be >= 0")
        if self.normalization not in ("instance", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def key_dim(self) -> int:
        return self.hidden_dim // self.heads


@dataclass(frozen=True)
class FeatureNorm:
    """Constants used to scale raw scenario quantities into network inputs."""

    domain_size: float = 10.0
    time_cost_max: float = 10.0
    m_max: int = 6

    @property
    def diagonal(self) -> float:
        return self.domain_size * math.sqrt(2.0)


class AllMaskedError(ValueError):
    pass


def attend(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, mask: torch.Tensor | None) -> torch.Tensor:
    """Scaled dot-product attention per head.

    q: (B, H, Q, dk), k and v: (B, H, K, dk), mask: (B, Q, K) or (B, 1, K), True = may attend.
    """
    scores = q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1])
    if mask is not None:
        if not bool(mask.any(-1).all()):
            raise AllMaskedError("attention row with every key masked")
        scores = scores.masked_fill(~mask[:, None], float("-inf"))
    return torch.softmax(scores, dim=-1) @ v


def split_heads(x: torch.Tensor, heads: int) -> torch.Tensor:
    B, L, D = x.shape
    return x.view(B, L, heads, D // heads).transpose(1, 2)


def merge_heads(x: torch.Tensor) -> torch.Tensor:
    B, H, L, dk = x.shape
    return x.transpose(1, 2).reshape(B, L, H * dk)


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.W_q = nn.Linear(dim, dim, bias=False)
        self.W_k = nn.Linear(dim, dim, bias=False)
        self.W_v = nn.Linear(dim, dim, bias=False)
        self.W_o = nn.Linear(dim, dim, bias=False)

    def forward(self, queries, keys, values, mask=None):
        return mha(queries, keys, values, mask, self, self.heads)


def mha(queries, keys, values, mask, params: MultiHeadAttention, heads: int) -> torch.Tensor:
    """Project, attend per head, concatenate heads and project back.

    queries (B, Q, d), keys/values (B, K, d), mask (B, Q, K) bool with True = visible.
    """
    q = split_heads(params.W_q(queries), heads)
    k = split_heads(params.W_k(keys), heads)
    v = split_heads(params.W_v(values), heads)
    return params.W_o(merge_heads(attend(q, k, v, mask)))


class MaskedNorm(nn.Module):
    """Standardize each feature over the real vertices of an instance."""

    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.scale = nn.Parameter(torch.ones(dim))
        self.shift = nn.Parameter(torch.zeros(dim))
        self.eps = eps

    def forward(self, x, node_mask):
        w = node_mask[..., None].to(x.dtype)
        count = w.sum(1, keepdim=True)
        mean = (x * w).sum(1, keepdim=True) / count
        var = (((x - mean) * w) ** 2).sum(1, keepdim=True) / count
        return (x - mean) / torch.sqrt(var + self.eps) * self.scale + self.shift


class EncoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.hidden_dim
        self.heads = config.heads
        self.attn = MultiHeadAttention(d, config.heads)
        self.ff = nn.Sequential(nn.Linear(d, config.feedforward_dim), nn.ReLU(), nn.Linear(config.feedforward_dim, d))
        self.use_norm = config.normalization == "instance"
        self.norm1 = MaskedNorm(d)
        self.norm2 = MaskedNorm(d)

    def forward(self, h, node_mask, attn_mask):
        keep = node_mask[..., None]
        h = h + self.attn(h, h, h, attn_mask)
        if self.use_norm:
            h = self.norm1(h, node_mask)
        h = h + self.ff(h)
        if self.use_norm:
            h = self.norm2(h, node_mask)
        return torch.where(keep, h, torch.zeros_like(h))


@dataclass
class Embeddings:
    nodes: torch.Tensor  # (B, V, d)
    graph: torch.Tensor  # (B, d)
    node_mask: torch.Tensor  # (B, V)


class AttentionModel(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig(), norm: FeatureNorm = FeatureNorm()):
        super().__init__()
        self.config = config
        self.norm = norm
        d = config.hidden_dim
        self.init_embed = nn.Linear(N_NODE_FEATURES, d)
        self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.encoder_layers))
        # decoder
        self.state_proj = nn.Linear(N_STATE_FEATURES, d)
        self.context_proj = nn.Linear(2 * d, d)
        self.glimpse = MultiHeadAttention(d, config.heads)
        self.pointer_key = nn.Linear(d, d, bias=False)

    def encode(self, features: torch.Tensor, node_mask: torch.Tensor) -> Embeddings:
        h = self.init_embed(features)
        h = torch.where(node_mask[..., None], h, torch.zeros_like(h))
        attn_mask = node_mask[:, None, :].expand(-1, features.shape[1], -1)
        for i, layer in enumerate(self.layers):
            h = layer(h, node_mask, attn_mask)
            if not bool(torch.isfinite(h).all()):
                raise FloatingPointError(f"non-finite embeddings after encoder layer {i}")
        w = node_mask[..., None].to(h.dtype)
        graph = (h * w).sum(1) / w.sum(1)
        return Embeddings(h, graph, node_mask)

    def precompute(self, emb: Embeddings) -> "DecoderCache":
        H = self.config.heads
        return DecoderCache(
            emb=emb,
            glimpse_k=split_heads(self.glimpse.W_k(emb.nodes), H),
            glimpse_v=split_heads(self.glimpse.W_v(emb.nodes), H),
            pointer_k=self.pointer_key(emb.nodes),
        )

    def context(self, emb: Embeddings, state_features: torch.Tensor, current: torch.Tensor) -> torch.Tensor:
        """graph embedding + Linear([state embedding, embedding of the current vertex])."""
        h_state = self.state_proj(state_features)
        h_cur = emb.nodes[torch.arange(current.shape[0]), current]
        return emb.graph + self.context_proj(torch.cat([h_state, h_cur], dim=-1))

    def logits(self, cache: "DecoderCache", ctx: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Clipped pointer logits with masked entries at -inf; ctx (B, d), mask (B, V)."""
        H = self.config.heads
        q = split_heads(self.glimpse.W_q(ctx[:, None, :]), H)
        g = self.glimpse.W_o(merge_heads(attend(q, cache.glimpse_k, cache.glimpse_v, mask[:, None, :])))
        raw = (g @ cache.pointer_k.transpose(-1, -2)).squeeze(1) / math.sqrt(g.shape[-1])
        u = self.config.logit_clip * torch.tanh(raw)
        return u.masked_fill(~mask, float("-inf"))


@dataclass
class DecoderCache:
    emb: Embeddings
    glimpse_k: torch.Tensor
    glimpse_v: torch.Tensor
    pointer_k: torch.Tensor


def config_dict(model: AttentionModel) -> dict:
    return {
        "config": asdict(model.config),
        "norm": asdict(model.norm),
        "feature_layout_version": FEATURE_LAYOUT_VERSION,
    }
