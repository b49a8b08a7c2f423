"""The full GL-GIN model: encoder, intent decoder and graph slot decoder,
optionally carrying an autoregressive baseline slot decoder."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .config import TrainConfig
from .corpus import Batch
from .encoder import EncodedBatch, SelfAttentiveEncoder
from .intent_decoder import IntentDecoder, select_intents
from .slot_decoder import AutoregressiveSlotDecoder, SlotDecoder, SlotPrediction


@dataclass
class ModelOutput:
    encoded: EncodedBatch
    intent_logits: torch.Tensor  # [B, n, N_I]
    intent_scores: torch.Tensor  # sigmoid of intent_logits
    intent_mask: torch.Tensor    # [B, N_I] bool, predicted (post-fallback) intents
    slots: SlotPrediction


class GLGIN(nn.Module):
    def __init__(self, config: TrainConfig, vocab_size: int, num_intents: int, num_slots: int):
        super().__init__()
        self.config = config
        self.encoder = SelfAttentiveEncoder(vocab_size, config.d_emb, config.d_lstm, config.d_attn, config.dropout)
        enc_dim = self.encoder.output_dim
        self.intent_decoder = IntentDecoder(enc_dim, num_intents, config.d_lstm, dropout=config.dropout)
        self.slot_decoder = SlotDecoder(
            enc_dim, num_intents, num_slots,
            d_lstm=config.d_lstm,
            gat_heads=config.gat_heads,
            gat_layers=config.gat_layers,
            window_size=config.window_size,
            use_local_graph=config.use_local_graph,
            use_global_graph=config.use_global_graph,
            dropout=config.dropout,
            negative_slope=config.gat_negative_slope,
            gat_dropout=config.gat_dropout,
        )
        self.baseline = (
            AutoregressiveSlotDecoder(enc_dim, num_intents, num_slots, config.d_lstm,
                                      config.baseline_slot_emb, config.dropout)
            if config.train_baseline else None
        )

    def main_parameters(self):
        """Parameters of the parallel model (everything except the baseline)."""
        for name, p in self.named_parameters():
            if not name.startswith("baseline."):
                yield p

    def encode(self, batch: Batch) -> tuple[EncodedBatch, torch.Tensor]:
        """Encoder states and token-level intent logits."""
        enc = self.encoder(batch.token_ids, batch.lengths, batch.token_mask)
        return enc, self.intent_decoder.logits(enc.E, batch.lengths)

    def forward(self, batch: Batch, gold_intents: torch.Tensor | None = None) -> ModelOutput:
        enc, logits = self.encode(batch)
        scores = torch.sigmoid(logits)
        if gold_intents is not None:
            intent_mask = gold_intents.bool()
            # unseen intents at train time can leave a row empty
            empty = ~intent_mask.any(-1, keepdim=True)
            intent_mask = intent_mask | (empty & select_intents(scores.detach(), batch.token_mask, batch.lengths))
        else:
            intent_mask = select_intents(scores.detach(), batch.token_mask, batch.lengths)
        slots = self.slot_decoder(enc.E, scores, batch.token_mask, batch.lengths, intent_mask)
        return ModelOutput(enc, logits, scores, intent_mask, slots)
