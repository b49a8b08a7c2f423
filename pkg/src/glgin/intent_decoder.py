"""Token-level multi-label intent detection with sentence-level voting."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoder import run_lstm

VOTE_THRESHOLD = 0.5


def token_intent_scores(h: torch.Tensor, w_h, b_h, w_i, b_i, negative_slope: float = 0.01) -> torch.Tensor:
    """sigmoid(W_I LeakyReLU(W_h h_t + b_h) + b_I) for every token."""
    return torch.sigmoid(F.linear(F.leaky_relu(F.linear(h, w_h, b_h), negative_slope), w_i, b_i))


def vote_counts(scores: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Number of real tokens voting for each intent. scores [B, n, N_I] -> [B, N_I]."""
    positive = (scores > VOTE_THRESHOLD) & mask.unsqueeze(-1)
    return positive.sum(dim=1)


def vote_intents(scores, length: int | None = None) -> set[int]:
    """Intents with strictly more than ``n / 2`` positive token votes.

    ``scores`` is an ``[n, N_I]`` array-like for a single utterance; only the
    first ``length`` rows vote.  May return an empty set.
    """
    scores = torch.as_tensor(scores)
    n = scores.shape[0] if length is None else length
    if n < 1:
        raise ValueError("voting needs at least one token")
    votes = (scores[:n] > VOTE_THRESHOLD).sum(dim=0)
    # 2 * votes > n is the integer form of votes > n / 2
    return {int(k) for k in torch.nonzero(2 * votes > n).flatten()}


def select_intents(scores: torch.Tensor, mask: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Batched voting with the empty-set fallback.

    Returns a bool matrix [B, N_I].  Rows where no intent wins a majority
    fall back to the single intent with the highest mean token score.
    """
    counts = vote_counts(scores, mask)
    chosen = 2 * counts > lengths.unsqueeze(-1)
    empty = ~chosen.any(dim=-1)
    if bool(empty.any()):
        mean = (scores * mask.unsqueeze(-1)).sum(dim=1) / lengths.unsqueeze(-1).to(scores.dtype)
        best = mean.argmax(dim=-1)
        fallback = F.one_hot(best, scores.shape[-1]).bool()
        chosen = torch.where(empty.unsqueeze(-1), fallback, chosen)
    return chosen


class IntentDecoder(nn.Module):
    def __init__(self, input_dim: int, num_intents: int, d_lstm: int = 256, d_hidden: int | None = None,
                 dropout: float = 0.4):
        super().__init__()
        d_hidden = 2 * d_lstm if d_hidden is None else d_hidden
        self.lstm = nn.LSTM(input_dim, d_lstm, batch_first=True, bidirectional=True)
        self.hidden = nn.Linear(2 * d_lstm, d_hidden)
        self.output = nn.Linear(d_hidden, num_intents)
        self.dropout = nn.Dropout(dropout)

    def logits(self, E: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        h = self.dropout(run_lstm(self.lstm, E, lengths))
        return self.output(F.leaky_relu(self.hidden(h), 0.01))

    def forward(self, E: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(E, lengths))
