"""Multi-head graph attention over dense boolean adjacency.

Works on a single graph (``[N, F]`` features, ``[N, N]`` adjacency) or a
padded batch of graphs (``[B, N, F]`` / ``[B, N, N]``).  Padding nodes are
handled by giving them a self-loop only, which keeps them out of every real
node's neighbourhood.
"""

from __future__ import annotations

from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoder import masked_softmax


def self_loops(n: int) -> torch.Tensor:
    return torch.eye(n, dtype=torch.bool)


def check_adjacency(adj: torch.Tensor) -> None:
    if not bool(adj.any(dim=-1).all()):
        raise ValueError("graph attention: a node has an empty neighbourhood")


def gat_layer(
    features: torch.Tensor,
    adj: torch.Tensor,
    weight: torch.Tensor,
    attn: torch.Tensor,
    concat_heads: bool = True,
    negative_slope: float = 0.2,
    activation=F.elu,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One GAT layer.

    weight: [K, F', F] per-head projections; attn: [K, 2F'] attention vectors.
    Returns the new features ([.., N, K*F'] if ``concat_heads`` else
    [.., N, F']) and the attention coefficients [.., K, N, N].
    """
    single = features.dim() == 2
    if single:
        features, adj = features.unsqueeze(0), adj.unsqueeze(0)
    check_adjacency(adj)
    K, f_out, f_in = weight.shape
    if features.shape[-1] != f_in:
        raise ValueError(f"gat_layer expects {f_in} input features, got {features.shape[-1]}")

    B, N, _ = features.shape
    wh = (features @ weight.reshape(K * f_out, f_in).T).view(B, N, K, f_out).transpose(1, 2)  # [B, K, N, F']
    src = (wh @ attn[:, :f_out].unsqueeze(-1)).squeeze(-1)  # a_1 . W h_i  -> [B, K, N]
    dst = (wh @ attn[:, f_out:].unsqueeze(-1)).squeeze(-1)  # a_2 . W h_j
    logits = F.leaky_relu(src.unsqueeze(-1) + dst.unsqueeze(-2), negative_slope)
    alpha = masked_softmax(logits, adj.unsqueeze(1).expand_as(logits), dim=-1)
    out = activation(alpha @ wh)  # [B, K, N, F']

    if concat_heads:
        out = out.permute(0, 2, 1, 3).reshape(out.shape[0], out.shape[2], K * f_out)
    else:
        out = out.mean(dim=1)
    if single:
        return out[0], alpha[0]
    return out, alpha


class GATLayer(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, heads: int, concat_heads: bool = True,
                 negative_slope: float = 0.2, dropout: float = 0.0):
        super().__init__()
        if heads < 1:
            raise ValueError("heads must be >= 1")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.heads = heads
        self.concat_heads = concat_heads
        self.negative_slope = negative_slope
        self.weight = nn.Parameter(torch.empty(heads, out_dim, in_dim))
        self.attn = nn.Parameter(torch.empty(heads, 2 * out_dim))
        self.dropout = nn.Dropout(dropout)
        self.reset_parameters()

    def reset_parameters(self):
        for k in range(self.heads):
            nn.init.xavier_uniform_(self.weight.data[k], gain=1.414)
        nn.init.xavier_uniform_(self.attn.data, gain=1.414)

    @property
    def output_dim(self) -> int:
        return self.heads * self.out_dim if self.concat_heads else self.out_dim

    def forward(self, features, adj, return_attention: bool = False):
        out, alpha = gat_layer(self.dropout(features), adj, self.weight, self.attn,
                               self.concat_heads, self.negative_slope)
        return (out, alpha) if return_attention else out


def stack_gat(features: torch.Tensor, adj: torch.Tensor, layers: Sequence[GATLayer]) -> torch.Tensor:
    h = features
    for i, layer in enumerate(layers):
        if h.shape[-1] != layer.in_dim:
            raise ValueError(f"layer {i} expects {layer.in_dim} features, got {h.shape[-1]}")
        h = layer(h, adj)
    return h


class GATStack(nn.Module):
    """``num_layers`` GAT layers; inner layers concatenate heads, the last
    averages them so the output width is ``out_dim``."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int, heads: int, num_layers: int = 2,
                 negative_slope: float = 0.2, dropout: float = 0.0):
        super().__init__()
        if num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        layers = []
        d = in_dim
        for _ in range(num_layers - 1):
            layers.append(GATLayer(d, hidden_dim, heads, True, negative_slope, dropout))
            d = heads * hidden_dim
        layers.append(GATLayer(d, out_dim, heads, False, negative_slope, dropout))
        self.layers = nn.ModuleList(layers)

    def forward(self, features: torch.Tensor, adj: torch.Tensor) -> torch.Tensor:
        return stack_gat(features, adj, self.layers)

    def attention_maps(self, features: torch.Tensor, adj: torch.Tensor) -> list[torch.Tensor]:
        maps, h = [], features
        for layer in self.layers:
            h, alpha = layer(h, adj, return_attention=True)
            maps.append(alpha)
        return maps
