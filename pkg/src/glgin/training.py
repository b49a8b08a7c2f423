"""Joint training with Adam and dev-set model selection, plus checkpoint I/O.

Checkpoint container (format version 1.x) is a zip archive:

* ``manifest.json`` - format name/version, config, best dev metrics,
  training history, parameter index (name, shape, dtype)
* ``vocab.json`` - token / slot / intent label lists, in id order
* ``params.npz`` - one array per ``state_dict`` entry

Readers accept any 1.x file and reject other major versions.
"""

from __future__ import annotations

import copy
import io
import json
import logging
import math
import time
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .config import TrainConfig
from .corpus import LabeledExample, Vocabularies, build_vocabularies, make_batches
from .evaluation import MetricsReport, evaluate
from .losses import intent_loss_from_logits, joint_loss, slot_loss_from_logits
from .model import GLGIN

log = logging.getLogger(__name__)

FORMAT_NAME = "glgin-checkpoint"
FORMAT_VERSION = "1.0"


class TrainingDiverged(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    model: GLGIN
    vocab: Vocabularies
    config: TrainConfig
    metrics: dict = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    format_version: str = FORMAT_VERSION

    @property
    def has_baseline(self) -> bool:
        return self.model.baseline is not None


def build_model(config: TrainConfig, vocab: Vocabularies) -> GLGIN:
    return GLGIN(config, len(vocab.token), vocab.num_intents, vocab.num_slots)


def _selection_key(m: MetricsReport) -> tuple[float, float, float]:
    # overall accuracy decides; F1 then intent accuracy only break ties
    return (m.overall_acc, m.slot_f1, m.intent_acc)


def batch_losses(model: GLGIN, batch, config: TrainConfig) -> tuple[torch.Tensor, dict]:
    gold = batch.intent_targets if config.teacher_force_intents else None
    out = model(batch, gold_intents=gold)
    l1 = intent_loss_from_logits(out.intent_logits, batch.intent_targets, batch.token_mask)
    l2 = slot_loss_from_logits(out.slots.logits, batch.slot_ids, batch.token_mask)
    loss = joint_loss(l1, l2, config.alpha, config.beta)
    parts = {"intent": l1.item(), "slot": l2.item(), "joint": loss.item()}
    total = loss
    if model.baseline is not None:
        # the baseline trains on detached features so it never shapes the encoder
        base = model.baseline.teacher_forced(
            out.encoded.E.detach(), out.intent_scores.detach(), batch.slot_ids, batch.token_mask
        )
        lb = slot_loss_from_logits(base.logits, batch.slot_ids, batch.token_mask)
        parts["baseline"] = lb.item()
        total = total + lb
    return total, parts


def train(
    config: TrainConfig,
    train_set: Sequence[LabeledExample],
    dev_set: Sequence[LabeledExample],
    vocab: Vocabularies | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> Checkpoint:
    """Train with Adam on the joint loss; return the best-on-dev checkpoint.

    Early stopping triggers once ``patience`` consecutive epochs fail to
    improve the dev selection key.
    """
    vocab = vocab or build_vocabularies(train_set)
    torch.manual_seed(config.seed)
    model = build_model(config, vocab)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    history: list[dict] = []
    best_state, best_key, best_metrics = None, None, None
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        start = time.perf_counter()
        model.train()
        totals = {"joint": 0.0, "intent": 0.0, "slot": 0.0, "baseline": 0.0}
        for batch in make_batches(train_set, vocab, config.batch_size, shuffle=True, seed=config.seed + epoch):
            optimizer.zero_grad()
            total, parts = batch_losses(model, batch, config)
            if not math.isfinite(parts["joint"]) or not math.isfinite(total.item()):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}: {parts}; try a lower learning_rate or grad_clip"
                )
            total.backward()
            if config.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()
            for k, v in parts.items():
                totals[k] += v
        dev = evaluate(model, dev_set, vocab)
        record = {
            "epoch": epoch,
            "train_loss": totals["joint"] / len(train_set),
            "train_intent_loss": totals["intent"] / len(train_set),
            "train_slot_loss": totals["slot"] / len(train_set),
            "baseline_loss": totals["baseline"] / len(train_set) if model.baseline is not None else None,
            "dev": dev.to_dict(),
            "seconds": time.perf_counter() - start,
        }
        key = _selection_key(dev)
        improved = best_key is None or key > best_key
        record["best"] = improved
        history.append(record)
        log.info("epoch %d loss %.4f dev overall %.4f f1 %.4f intent %.4f%s", epoch, record["train_loss"],
                 dev.overall_acc, dev.slot_f1, dev.intent_acc, " *" if improved else "")
        if on_epoch is not None:
            on_epoch(record)
        if improved:
            best_key, best_metrics = key, dev
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                log.info("early stop after epoch %d", epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    return Checkpoint(model, vocab, config, {"dev": best_metrics.to_dict()}, history)


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {k: v.detach().cpu().numpy() for k, v in ckpt.model.state_dict().items()}
    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "metrics": ckpt.metrics,
        "history": ckpt.history,
        "has_baseline": ckpt.has_baseline,
        "parameters": {k: {"shape": list(a.shape), "dtype": str(a.dtype)} for k, a in state.items()},
    }
    buf = io.BytesIO()
    np.savez(buf, **state)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2))
        zf.writestr("vocab.json", json.dumps(ckpt.vocab.to_dict()))
        zf.writestr("params.npz", buf.getvalue())
    tmp.replace(path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            vocab_raw = json.loads(zf.read("vocab.json"))
            params = np.load(io.BytesIO(zf.read("params.npz")))
            state = {k: torch.from_numpy(params[k].copy()) for k in params.files}
    except (zipfile.BadZipFile, KeyError, ValueError, OSError, EOFError) as exc:
        raise CheckpointError(f"corrupted or unreadable checkpoint {path}: {exc}") from None

    if manifest.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not a GL-GIN checkpoint")
    version = str(manifest.get("format_version", ""))
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise CheckpointError(
            f"checkpoint format {version!r} is incompatible with this reader ({FORMAT_VERSION})"
        )
    try:
        config = TrainConfig.from_dict(manifest["config"])
        vocab = Vocabularies.from_dict(vocab_raw)
        model = build_model(config, vocab)
        model.load_state_dict(state)
    except (KeyError, ValueError, RuntimeError) as exc:
        raise CheckpointError(f"checkpoint {path} does not match its manifest: {exc}") from None
    model.eval()
    return Checkpoint(model, vocab, config, manifest.get("metrics", {}), manifest.get("history", []), version)
