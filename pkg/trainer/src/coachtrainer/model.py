"""A tiny word-level causal transformer plus LoRA adapters.

The base model is deliberately small (CPU-trainable in seconds); LoRA applies
to every nn.Linear, B is zero-initialized so the adapted model equals the
base model at initialization, and merge folds B@A into the base weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 48
    n_heads: int = 2
    n_layers: int = 2
    max_len: int = 160


class CausalSelfAttention(nn.Module):
    """Explicit q/k/v/o projections so the LoRA pass sees plain nn.Linear."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.d_model % cfg.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.n_heads = cfg.n_heads
        self.q = nn.Linear(cfg.d_model, cfg.d_model)
        self.k = nn.Linear(cfg.d_model, cfg.d_model)
        self.v = nn.Linear(cfg.d_model, cfg.d_model)
        self.o = nn.Linear(cfg.d_model, cfg.d_model)

    def forward(self, x: torch.Tensor, causal_mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        hd = d // self.n_heads

        def split(proj):
            return proj(x).view(b, t, self.n_heads, hd).transpose(1, 2)

        q, k, v = split(self.q), split(self.k), split(self.v)
        scores = q @ k.transpose(-2, -1) / math.sqrt(hd) + causal_mask
        out = torch.softmax(scores, dim=-1) @ v
        return self.o(out.transpose(1, 2).reshape(b, t, d))


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = CausalSelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.d_model, 4 * cfg.d_model),
            nn.GELU(),
            nn.Linear(4 * cfg.d_model, cfg.d_model),
        )

    def forward(self, x: torch.Tensor, causal_mask: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x), causal_mask)
        return x + self.mlp(self.ln2(x))


class TinyLM(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.tok = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos = nn.Embedding(cfg.max_len, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """(batch, seq) int64 -> (batch, seq, vocab) logits."""
        b, t = ids.shape
        if t > self.cfg.max_len:
            raise ValueError(f"sequence length {t} exceeds max_len {self.cfg.max_len}")
        x = self.tok(ids) + self.pos(torch.arange(t, device=ids.device))
        causal = torch.triu(
            torch.full((t, t), float("-inf"), device=ids.device), diagonal=1
        )
        for block in self.blocks:
            x = block(x, causal)
        return self.head(self.ln_f(x))


# -- LoRA ----------------------------------------------------------------------


class LoRALinear(nn.Module):
    """Frozen base linear plus a rank-r update; B starts at zero so the
    wrapped module computes exactly the base mapping at initialization."""

    def __init__(self, base: nn.Linear, rank: int):
        super().__init__()
        if rank <= 0:
            raise ValueError("LoRA rank must be > 0")
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + x @ self.lora_a.T @ self.lora_b.T

    def merged_weight(self) -> torch.Tensor:
        return self.base.weight + self.lora_b @ self.lora_a


def apply_lora(model: nn.Module, rank: int) -> list[nn.Parameter]:
    """Wraps every nn.Linear in the model; returns the adapter parameters."""
    params: list[nn.Parameter] = []
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, nn.Linear):
                wrapped = LoRALinear(child, rank)
                setattr(module, name, wrapped)
                params.extend([wrapped.lora_a, wrapped.lora_b])
    if not params:
        raise ValueError("model has no nn.Linear layers to adapt")
    return params


class MergeError(RuntimeError):
    pass


def merge_lora(model: nn.Module) -> nn.Module:
    """Folds each adapter into its base weight in place, restoring plain
    nn.Linear modules. The merged model computes the adapted mapping with no
    adapter parameters left."""
    merged_any = False
    for module in list(model.modules()):
        for name, child in list(module.named_children()):
            if isinstance(child, LoRALinear):
                with torch.no_grad():
                    child.base.weight.copy_(child.merged_weight())
                for p in child.base.parameters():
                    p.requires_grad_(True)
                setattr(module, name, child.base)
                merged_any = True
    if not merged_any:
        raise MergeError("no LoRA adapters to merge")
    return model


def count_adapter_params(model: nn.Module) -> int:
    return sum(
        p.numel()
        for m in model.modules()
        if isinstance(m, LoRALinear)
        for p in (m.lora_a, m.lora_b)
    )
