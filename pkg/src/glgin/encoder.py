"""Shared self-attentive encoder: embedding -> BiLSTM, plus single-head
scaled dot-product self-attention over the embeddings, concatenated."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

# additive mask value; finite so fully-masked query rows never produce NaN
NEG_INF = -1e30


def run_lstm(lstm: nn.LSTM, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Run ``lstm`` over the true lengths only; padded outputs are zero.

    Packing keeps PAD steps out of the recurrence in both directions, so a
    real position's state never depends on how much padding follows it.
    """
    packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
    out, _ = lstm(packed)
    out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
    return out


def masked_softmax(logits: torch.Tensor, mask: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Softmax over ``dim`` with ``mask == False`` entries forced to 0."""
    logits = logits.masked_fill(~mask, NEG_INF)
    weights = torch.softmax(logits, dim=dim)
    return weights * mask.to(weights.dtype)


def self_attention(
    x: torch.Tensor,
    mask: torch.Tensor,
    w_q: torch.Tensor,
    w_k: torch.Tensor,
    w_v: torch.Tensor,
) -> tuple[torch.Tensor, torch.Tensor]:
    """softmax(Q K^T / sqrt(d_k)) V with PAD keys excluded.

    x: [B, n, d_in]; mask: [B, n] bool; w_*: [d, d_in] (``nn.Linear`` layout).
    Returns (C [B, n, d], attention weights [B, n, n]).
    """
    if not bool(mask.any(dim=1).all()):
        raise ValueError("self_attention: a row has no unmasked position to attend to")
    q = x @ w_q.T
    k = x @ w_k.T
    v = x @ w_v.T
    scores = q @ k.transpose(1, 2) / math.sqrt(k.shape[-1])
    key_mask = mask.unsqueeze(1).expand_as(scores)
    weights = masked_softmax(scores, key_mask, dim=-1)
    return weights @ v, weights


@dataclass
class EncodedBatch:
    H: torch.Tensor     # [B, n, 2*d_lstm]
    C: torch.Tensor     # [B, n, d_attn]
    E: torch.Tensor     # [B, n, 2*d_lstm + d_attn]
    mask: torch.Tensor  # [B, n] bool
    lengths: torch.Tensor
    attention: torch.Tensor | None = None  # [B, n, n]


class SelfAttentiveEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        d_emb: int = 128,
        d_lstm: int = 256,
        d_attn: int | None = None,
        dropout: float = 0.4,
        pad_id: int = 0,
    ):
        super().__init__()
        d_attn = 2 * d_lstm if d_attn is None else d_attn
        self.d_lstm = d_lstm
        self.d_attn = d_attn
        self.embedding = nn.Embedding(vocab_size, d_emb, padding_idx=pad_id)
        self.lstm = nn.LSTM(d_emb, d_lstm, batch_first=True, bidirectional=True)
        self.query = nn.Linear(d_emb, d_attn, bias=False)
        self.key = nn.Linear(d_emb, d_attn, bias=False)
        self.value = nn.Linear(d_emb, d_attn, bias=False)
        self.dropout = nn.Dropout(dropout)

    @property
    def output_dim(self) -> int:
        return 2 * self.d_lstm + self.d_attn

    def forward(self, token_ids: torch.Tensor, lengths: torch.Tensor, mask: torch.Tensor) -> EncodedBatch:
        x = self.dropout(self.embedding(token_ids))
        h = self.dropout(run_lstm(self.lstm, x, lengths))
        c, attn = self_attention(x, mask, self.query.weight, self.key.weight, self.value.weight)
        keep = mask.unsqueeze(-1).to(c.dtype)
        c = c * keep
        return EncodedBatch(H=h, C=c, E=torch.cat([h, c], dim=-1), mask=mask, lengths=lengths, attention=attn)
