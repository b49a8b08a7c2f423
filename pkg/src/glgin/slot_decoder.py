"""Slot filling decoders.

:class:`SlotDecoder` is the non-autoregressive path: a slot-aware BiLSTM
over ``[I_t || e_t]``, a local window graph over the slot states, a global
graph joining every slot to the predicted intents, and an independent
softmax per token.  :class:`AutoregressiveSlotDecoder` is a left-to-right
greedy decoder kept only as the latency baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .encoder import run_lstm
from .graph import GATStack


def build_local_adjacency(n: int, window: int) -> torch.Tensor:
    """Node i is linked to every j with |i - j| <= window (self included)."""
    if n < 1 or window < 0:
        raise ValueError("need n >= 1 and window >= 0")
    idx = torch.arange(n)
    return (idx.unsqueeze(0) - idx.unsqueeze(1)).abs() <= window


def build_global_adjacency(n: int, m: int, window: int) -> torch.Tensor:
    """n slot nodes (indices 0..n-1) followed by m intent nodes.

    Slot-slot edges follow the window, every slot links to every intent,
    intents are fully connected among themselves.
    """
    if m < 1:
        raise ValueError("the global graph needs at least one intent node")
    adj = torch.ones(n + m, n + m, dtype=torch.bool)
    adj[:n, :n] = build_local_adjacency(n, window)
    return adj


def batched_local_adjacency(mask: torch.Tensor, window: int) -> torch.Tensor:
    """[B, n, n] window graph over real tokens; PAD nodes keep a self-loop only."""
    n = mask.shape[1]
    local = build_local_adjacency(n, window).to(mask.device)
    real = mask.unsqueeze(2) & mask.unsqueeze(1)
    eye = torch.eye(n, dtype=torch.bool, device=mask.device)
    return (local.unsqueeze(0) & real) | eye.unsqueeze(0)


def batched_global_adjacency(mask: torch.Tensor, intent_mask: torch.Tensor, window: int) -> torch.Tensor:
    """[B, n + N_I, n + N_I] graph: slot nodes first, then one node per intent
    label.  Only predicted intents are wired in; the rest, like PAD slots,
    are isolated with a self-loop."""
    B, n = mask.shape
    N_I = intent_mask.shape[1]
    slot_slot = batched_local_adjacency(mask, window)
    slot_intent = mask.unsqueeze(2) & intent_mask.unsqueeze(1)          # [B, n, N_I]
    intent_intent = intent_mask.unsqueeze(2) & intent_mask.unsqueeze(1)  # [B, N_I, N_I]
    intent_intent = intent_intent | torch.eye(N_I, dtype=torch.bool, device=mask.device)
    top = torch.cat([slot_slot, slot_intent], dim=2)
    bottom = torch.cat([slot_intent.transpose(1, 2), intent_intent], dim=2)
    return torch.cat([top, bottom], dim=1)


@dataclass
class SlotPrediction:
    logits: torch.Tensor  # [B, n, N_S]
    y: torch.Tensor       # softmax of logits
    o_S: torch.Tensor     # [B, n] slot vocabulary ids, PAD (0) where masked


def predict_slots(G: torch.Tensor, w_s: torch.Tensor, mask: torch.Tensor) -> SlotPrediction:
    """softmax(W_s g_t) per token; argmax ties resolve to the lowest id.

    Class c of the classifier is slot vocabulary id c + 1 (id 0 is PAD).
    """
    logits = G @ w_s.T
    y = torch.softmax(logits, dim=-1)
    o = (logits.argmax(dim=-1) + 1) * mask.long()
    return SlotPrediction(logits, y, o)


class SlotDecoder(nn.Module):
    def __init__(
        self,
        input_dim: int,
        num_intents: int,
        num_slots: int,
        d_lstm: int = 256,
        gat_heads: int = 4,
        gat_layers: int = 2,
        window_size: int = 1,
        use_local_graph: bool = True,
        use_global_graph: bool = True,
        dropout: float = 0.4,
        negative_slope: float = 0.2,
        gat_dropout: float | None = None,
    ):
        super().__init__()
        d_node = 2 * d_lstm
        if d_node % gat_heads:
            raise ValueError(f"2*d_lstm={d_node} must be divisible by gat_heads={gat_heads}")
        self.window_size = window_size
        self.use_local_graph = use_local_graph
        self.use_global_graph = use_global_graph
        self.d_node = d_node
        self.lstm = nn.LSTM(num_intents + input_dim, d_lstm, batch_first=True, bidirectional=True)
        per_head = d_node // gat_heads
        gat_dropout = dropout if gat_dropout is None else gat_dropout
        self.local_gat = GATStack(d_node, per_head, d_node, gat_heads, gat_layers, negative_slope, gat_dropout)
        self.intent_embedding = nn.Embedding(num_intents, d_node)
        self.global_gat = GATStack(d_node, per_head, d_node, gat_heads, gat_layers, negative_slope, gat_dropout)
        self.classifier = nn.Linear(d_node, num_slots, bias=False)
        self.dropout = nn.Dropout(dropout)

    def slot_lstm(self, E: torch.Tensor, I: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.dropout(run_lstm(self.lstm, torch.cat([I, E], dim=-1), lengths))

    def local_interaction(self, S: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        if not self.use_local_graph:
            return S
        return self.local_gat(S, batched_local_adjacency(mask, self.window_size))

    def _global_graph(self, S_local, mask, intent_mask):
        B = S_local.shape[0]
        intents = self.intent_embedding.weight.unsqueeze(0).expand(B, -1, -1)
        nodes = torch.cat([S_local, intents], dim=1)
        return nodes, batched_global_adjacency(mask, intent_mask, self.window_size)

    def global_interaction(self, S_local: torch.Tensor, mask: torch.Tensor, intent_mask: torch.Tensor) -> torch.Tensor:
        if not self.use_global_graph:
            return S_local
        nodes, adj = self._global_graph(S_local, mask, intent_mask)
        return self.global_gat(nodes, adj)[:, :S_local.shape[1]]

    @torch.no_grad()
    def attention_maps(self, E, I, mask, lengths, intent_mask) -> dict[str, list[torch.Tensor]]:
        """Per-layer GAT coefficients [B, K, N, N] of both graphs."""
        maps = {}
        S = self.slot_lstm(E, I, lengths)
        if self.use_local_graph:
            adj = batched_local_adjacency(mask, self.window_size)
            maps["local"] = self.local_gat.attention_maps(S, adj)
            S = self.local_gat(S, adj)
        if self.use_global_graph:
            maps["global"] = self.global_gat.attention_maps(*self._global_graph(S, mask, intent_mask))
        return maps

    def forward(self, E: torch.Tensor, I: torch.Tensor, mask: torch.Tensor, lengths: torch.Tensor,
                intent_mask: torch.Tensor) -> SlotPrediction:
        S = self.slot_lstm(E, I, lengths)
        S = self.local_interaction(S, mask)
        G = self.global_interaction(S, mask, intent_mask)
        return predict_slots(G, self.classifier.weight, mask)


class AutoregressiveSlotDecoder(nn.Module):
    """Left-to-right LSTM decoder fed with the previous slot's embedding.

    Input at step t is ``[e_t || I_t || emb(o_{t-1})]``; step 0 sees the
    start symbol (id 0, shared with PAD).  Trained with gold previous slots,
    decoded greedily one token at a time.
    """

    def __init__(self, input_dim: int, num_intents: int, num_slots: int, d_lstm: int = 256,
                 d_slot_emb: int = 64, dropout: float = 0.4):
        super().__init__()
        self.slot_embedding = nn.Embedding(num_slots + 1, d_slot_emb)
        self.lstm = nn.LSTM(input_dim + num_intents + d_slot_emb, d_lstm, batch_first=True)
        self.classifier = nn.Linear(d_lstm, num_slots)
        self.dropout = nn.Dropout(dropout)

    def teacher_forced(self, E: torch.Tensor, I: torch.Tensor, gold_slot_ids: torch.Tensor,
                       mask: torch.Tensor) -> SlotPrediction:
        prev = torch.zeros_like(gold_slot_ids)
        prev[:, 1:] = gold_slot_ids[:, :-1]
        x = torch.cat([E, I, self.slot_embedding(prev)], dim=-1)
        h, _ = self.lstm(self.dropout(x))
        logits = self.classifier(self.dropout(h))
        y = torch.softmax(logits, dim=-1)
        return SlotPrediction(logits, y, (logits.argmax(-1) + 1) * mask.long())

    def decode(self, E: torch.Tensor, I: torch.Tensor, mask: torch.Tensor,
               overrides: dict[int, int] | None = None, return_inputs: bool = False):
        """Greedy decoding, strictly sequential over the token axis.

        ``overrides`` forces the emitted slot id at given steps (all batch
        rows), which is how the step-to-step dependence is probed.
        """
        B, n, _ = E.shape
        prev = torch.zeros(B, dtype=torch.long, device=E.device)
        state = None
        logits, inputs = [], []
        for t in range(n):
            x_t = torch.cat([E[:, t], I[:, t], self.slot_embedding(prev)], dim=-1)
            if return_inputs:
                inputs.append(x_t)
            h_t, state = self.lstm(x_t.unsqueeze(1), state)
            step_logits = self.classifier(h_t[:, 0])
            logits.append(step_logits)
            prev = step_logits.argmax(dim=-1) + 1
            if overrides and t in overrides:
                prev = torch.full_like(prev, overrides[t])
        logits = torch.stack(logits, dim=1)
        y = torch.softmax(logits, dim=-1)
        pred = SlotPrediction(logits, y, (logits.argmax(-1) + 1) * mask.long())
        if return_inputs:
            return pred, torch.stack(inputs, dim=1)
        return pred
