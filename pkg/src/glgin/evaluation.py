"""Slot F1 / intent accuracy / overall accuracy, and the decode-latency
benchmark comparing the parallel slot decoder with the autoregressive one.

Span convention (CoNLL, lenient): ``B-x`` opens a span of type ``x``;
``I-x`` extends an open span of the same type and otherwise opens a new one;
``O`` closes.  Spans are ``(type, start, end)`` with inclusive 0-based ends.
Corpus-level F1 is micro-averaged; with no gold and no predicted spans at all
it is defined as 1.0.
"""

from __future__ import annotations

import json
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import torch

from .corpus import Batch, LabeledExample, Vocabularies, make_batches
from .intent_decoder import select_intents


def extract_spans(tags: Sequence[str]) -> set[tuple[str, int, int]]:
    spans = set()
    cur_type, start = None, 0
    for i, tag in enumerate(tags):
        if tag.startswith("B-"):
            if cur_type is not None:
                spans.add((cur_type, start, i - 1))
            cur_type, start = tag[2:], i
        elif tag.startswith("I-"):
            if cur_type != tag[2:]:
                if cur_type is not None:
                    spans.add((cur_type, start, i - 1))
                cur_type, start = tag[2:], i
        else:
            if cur_type is not None:
                spans.add((cur_type, start, i - 1))
            cur_type = None
    if cur_type is not None:
        spans.add((cur_type, start, len(tags) - 1))
    return spans


def spans_to_tags(spans: Iterable[tuple[str, int, int]], length: int) -> list[str]:
    tags = ["O"] * length
    for typ, start, end in spans:
        tags[start] = f"B-{typ}"
        for i in range(start + 1, end + 1):
            tags[i] = f"I-{typ}"
    return tags


def span_counts(pred: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> tuple[int, int, int]:
    """(matches, predicted spans, gold spans) summed over the corpus."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sequences for {len(gold)} gold ones")
    matches = n_pred = n_gold = 0
    for p, g in zip(pred, gold):
        if len(p) != len(g):
            raise ValueError(f"tag sequence length mismatch: {len(p)} vs {len(g)}")
        ps, gs = extract_spans(p), extract_spans(g)
        matches += len(ps & gs)
        n_pred += len(ps)
        n_gold += len(gs)
    return matches, n_pred, n_gold


def f1_from_counts(matches: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    precision = matches / n_pred if n_pred else 0.0
    recall = matches / n_gold if n_gold else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def slot_f1(pred: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> float:
    return f1_from_counts(*span_counts(pred, gold))[2]


def _check_aligned(pred, gold):
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predictions for {len(gold)} references")
    if len(gold) == 0:
        raise ValueError("cannot score an empty dataset")


def intent_accuracy(pred: Sequence[Iterable[str]], gold: Sequence[Iterable[str]]) -> float:
    """Exact set match per utterance."""
    _check_aligned(pred, gold)
    return sum(set(p) == set(g) for p, g in zip(pred, gold)) / len(gold)


def overall_accuracy(pred_intents, gold_intents, pred_slots, gold_slots) -> float:
    _check_aligned(pred_intents, gold_intents)
    _check_aligned(pred_slots, gold_slots)
    correct = sum(
        set(pi) == set(gi) and list(ps) == list(gs)
        for pi, gi, ps, gs in zip(pred_intents, gold_intents, pred_slots, gold_slots)
    )
    return correct / len(gold_intents)


@dataclass
class MetricsReport:
    slot_f1: float
    intent_acc: float
    overall_acc: float
    slot_precision: float
    slot_recall: float
    examples: int
    gold_spans: int
    predicted_spans: int
    span_matches: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def score(pred_intents, pred_slots, gold: Sequence[LabeledExample]) -> MetricsReport:
    gold_intents = [ex.intents for ex in gold]
    gold_slots = [ex.slots for ex in gold]
    matches, n_pred, n_gold = span_counts(pred_slots, gold_slots)
    p, r, f = f1_from_counts(matches, n_pred, n_gold)
    return MetricsReport(
        slot_f1=f,
        intent_acc=intent_accuracy(pred_intents, gold_intents),
        overall_acc=overall_accuracy(pred_intents, gold_intents, pred_slots, gold_slots),
        slot_precision=p,
        slot_recall=r,
        examples=len(gold),
        gold_spans=n_gold,
        predicted_spans=n_pred,
        span_matches=matches,
    )


@dataclass
class Prediction:
    intents: tuple[str, ...]
    slots: tuple[str, ...]


@torch.no_grad()
def predict(model, examples: Sequence[LabeledExample], vocab: Vocabularies, batch_size: int = 64) -> list[Prediction]:
    was_training = model.training
    model.eval()
    out: list[Prediction] = []
    try:
        for batch in make_batches(examples, vocab, batch_size):
            result = model(batch)
            for b, ex in enumerate(batch.examples):
                n = len(ex)
                ids = result.slots.o_S[b, :n].tolist()
                intents = torch.nonzero(result.intent_mask[b]).flatten().tolist()
                out.append(Prediction(
                    intents=tuple(vocab.intent.lookup(k) for k in intents),
                    slots=tuple(vocab.slot.lookup(i) for i in ids),
                ))
    finally:
        model.train(was_training)
    return out


def evaluate(model, examples: Sequence[LabeledExample], vocab: Vocabularies, batch_size: int = 64) -> MetricsReport:
    preds = predict(model, examples, vocab, batch_size)
    return score([p.intents for p in preds], [p.slots for p in preds], examples)


# --- decode latency -------------------------------------------------------

DECODERS = ("parallel", "autoregressive")


def hardware_descriptor() -> dict:
    return {
        "machine": platform.machine(),
        "processor": platform.processor() or platform.machine(),
        "system": platform.system(),
        "cpu_count": os.cpu_count(),
        "torch": torch.__version__,
        "torch_threads": torch.get_num_threads(),
        "python": platform.python_version(),
    }


@dataclass
class LatencyEntry:
    decoder: str
    batch_size: int
    decode_seconds: float
    runs: list[float] = field(default_factory=list)


@dataclass
class LatencyReport:
    entries: list[LatencyEntry]
    hardware: dict
    examples: int
    warmup_batches: int

    def seconds(self, decoder: str, batch_size: int) -> float:
        for e in self.entries:
            if e.decoder == decoder and e.batch_size == batch_size:
                return e.decode_seconds
        raise KeyError((decoder, batch_size))

    @property
    def batch_sizes(self) -> list[int]:
        return sorted({e.batch_size for e in self.entries})

    def speedup(self, batch_size: int) -> float:
        return self.seconds("autoregressive", batch_size) / self.seconds("parallel", batch_size)

    def to_dict(self) -> dict:
        return {
            "entries": [asdict(e) for e in self.entries],
            "speedup": {str(bs): self.speedup(bs) for bs in self.batch_sizes
                        if {"parallel", "autoregressive"} <= {e.decoder for e in self.entries if e.batch_size == bs}},
            "hardware": self.hardware,
            "examples": self.examples,
            "warmup_batches": self.warmup_batches,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@torch.inference_mode()
def _prepare(model, batches: Sequence[Batch]):
    """Encoder + intent stage outputs; computed once and never timed."""
    prepared = []
    for batch in batches:
        enc, logits = model.encode(batch)
        scores = torch.sigmoid(logits)
        intent_mask = select_intents(scores, batch.token_mask, batch.lengths)
        prepared.append((enc.E, scores, batch.token_mask, batch.lengths, intent_mask))
    return prepared


@torch.inference_mode()
def _decode_pass(model, prepared, decoder: str) -> None:
    if decoder == "parallel":
        for E, I, mask, lengths, intent_mask in prepared:
            model.slot_decoder(E, I, mask, lengths, intent_mask).o_S
    else:
        for E, I, mask, lengths, _ in prepared:
            model.baseline.decode(E, I, mask).o_S


def benchmark_decode(
    model,
    examples: Sequence[LabeledExample],
    vocab: Vocabularies,
    batch_size: int = 32,
    decoder: str = "parallel",
    warmup_batches: int = 3,
    repeats: int = 1,
    threads: int | None = 1,
) -> LatencyEntry:
    """Wall-clock seconds for the slot-decoding stage over one full pass.

    Encoding and intent voting run beforehand and are excluded.  The median
    of ``repeats`` passes is reported.  ``threads`` pins torch's intra-op
    thread count for the duration of the measurement.
    """
    if decoder not in DECODERS:
        raise ValueError(f"decoder must be one of {DECODERS}")
    if decoder == "autoregressive" and getattr(model, "baseline", None) is None:
        raise ValueError("model has no autoregressive baseline parameters")
    old_threads = torch.get_num_threads()
    if threads:
        torch.set_num_threads(threads)
    model.eval()
    try:
        batches = make_batches(examples, vocab, batch_size)
        prepared = _prepare(model, batches)
        if warmup_batches:
            _decode_pass(model, prepared[:warmup_batches], decoder)
        runs = []
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            _decode_pass(model, prepared, decoder)
            runs.append(time.perf_counter() - t0)
    finally:
        torch.set_num_threads(old_threads)
    return LatencyEntry(decoder, batch_size, statistics.median(runs), runs)


def latency_report(model, examples, vocab, batch_sizes=(32,), decoders=DECODERS, warmup_batches: int = 3,
                   repeats: int = 1, threads: int | None = 1) -> LatencyReport:
    entries = [
        benchmark_decode(model, examples, vocab, bs, dec, warmup_batches, repeats, threads)
        for bs in batch_sizes
        for dec in decoders
    ]
    hw = hardware_descriptor()
    if threads:
        hw["torch_threads"] = threads
    return LatencyReport(entries, hw, len(examples), warmup_batches)


def examples_from_tokens(utterances: Sequence[Sequence[str]], lowercase: bool = True) -> list[LabeledExample]:
    """Unlabeled utterances wrapped as examples (all-``O`` slots, placeholder intent)."""
    return [
        LabeledExample(tuple(t.lower() if lowercase else t for t in toks), ("O",) * len(toks), ("<none>",))
        for toks in utterances
    ]
