"""Multi-intent SLU corpora: file parsing, vocabularies and padded batches.

Dataset files use the cleaned MixATIS / MixSNIPS layout::

    listen O
    to O
    westbam B-artist
    PlayMusic

    what O
    ...
    atis_flight#atis_airfare

Each block is ``n`` lines of ``token<SPACE>slot``, one line holding the
``#``-joined intent labels, then a blank line (optional after the last
block).  :func:`dump_dataset` writes exactly this layout with ``\\n`` line
endings and a single trailing blank line after every block, so a file that
follows that convention survives a parse / dump round trip byte-for-byte.
Trailing whitespace on a line is stripped when parsing.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import torch

PAD = "<pad>"
UNK = "<unk>"
OUTSIDE = "O"

_BIO_RE = re.compile(r"^(O|[BI]-\S+)$")


class DatasetParseError(ValueError):
    """Raised when a dataset file does not follow the block format."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass(frozen=True)
class LabeledExample:
    tokens: tuple[str, ...]
    slots: tuple[str, ...]
    # file order is kept so the block can be written back unchanged
    intents: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise ValueError("an utterance needs at least one token")
        if len(self.tokens) != len(self.slots):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.slots)} slot tags"
            )
        if len(self.intents) == 0:
            raise ValueError("an utterance needs at least one intent")
        for tag in self.slots:
            if not _BIO_RE.match(tag):
                raise ValueError(f"malformed BIO tag {tag!r}")

    @property
    def intent_set(self) -> frozenset[str]:
        return frozenset(self.intents)

    def __len__(self) -> int:
        return len(self.tokens)


def parse_intents(line: str) -> tuple[str, ...]:
    parts = line.split("#")
    if any(p == "" for p in parts):
        raise ValueError(f"empty intent label in {line!r}")
    # dict keeps first-occurrence order while dropping repeats
    return tuple(dict.fromkeys(parts))


def _parse_block(path, block: list[tuple[int, str]], lowercase: bool) -> LabeledExample:
    *token_lines, (intent_no, intent_line) = block
    if " " in intent_line:
        raise DatasetParseError(
            path, intent_no, "block must end with an intent line (no spaces), got a token line"
        )
    if not token_lines:
        raise DatasetParseError(path, intent_no, "block has an intent line but no tokens")
    tokens, slots = [], []
    for lineno, line in token_lines:
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise DatasetParseError(
                path, lineno, f"expected 'token slot', got {line!r}"
            )
        tok, tag = parts
        if not _BIO_RE.match(tag):
            raise DatasetParseError(path, lineno, f"malformed BIO tag {tag!r}")
        tokens.append(tok.lower() if lowercase else tok)
        slots.append(tag)
    try:
        intents = parse_intents(intent_line)
    except ValueError as exc:
        raise DatasetParseError(path, intent_no, str(exc)) from None
    return LabeledExample(tuple(tokens), tuple(slots), intents)


def parse_lines(lines: Iterable[str], lowercase: bool = True, source="<string>") -> list[LabeledExample]:
    examples: list[LabeledExample] = []
    block: list[tuple[int, str]] = []
    lineno = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip()
        if line:
            block.append((lineno, line))
        elif block:
            examples.append(_parse_block(source, block, lowercase))
            block = []
    if block:
        examples.append(_parse_block(source, block, lowercase))
    if not examples:
        raise DatasetParseError(source, max(lineno, 1), "no examples found (empty file)")
    return examples


def load_dataset(path, lowercase: bool = True) -> list[LabeledExample]:
    """Parse a block-format dataset file into a list of examples."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        return parse_lines(f, lowercase=lowercase, source=path)


def format_example(ex: LabeledExample) -> str:
    body = "".join(f"{t} {s}\n" for t, s in zip(ex.tokens, ex.slots))
    return body + "#".join(ex.intents) + "\n"


def dump_dataset(examples: Sequence[LabeledExample], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for ex in examples:
            f.write(format_example(ex))
            f.write("\n")


class Vocab:
    """Bijective label <-> id map. Reserved entries come first, then labels
    in first-occurrence order."""

    def __init__(self, reserved: Sequence[str] = (), unk: str | None = None):
        self.itos: list[str] = []
        self.stoi: dict[str, int] = {}
        for r in reserved:
            self.add(r)
        self.unk = unk

    def add(self, label: str) -> int:
        idx = self.stoi.get(label)
        if idx is None:
            idx = len(self.itos)
            self.itos.append(label)
            self.stoi[label] = idx
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, label: str) -> bool:
        return label in self.stoi

    def index(self, label: str) -> int:
        idx = self.stoi.get(label)
        if idx is None:
            if self.unk is None:
                raise KeyError(label)
            return self.stoi[self.unk]
        return idx

    def lookup(self, idx: int) -> str:
        return self.itos[idx]

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, labels: Sequence[str], unk: str | None = None) -> "Vocab":
        v = cls(unk=unk)
        for lab in labels:
            if lab in v:
                raise ValueError(f"duplicate vocabulary entry {lab!r}")
            v.add(lab)
        return v


@dataclass
class Vocabularies:
    token: Vocab
    slot: Vocab
    intent: Vocab

    @property
    def num_intents(self) -> int:
        return len(self.intent)

    @property
    def num_slots(self) -> int:
        """Slot classes excluding PAD."""
        return len(self.slot) - 1

    def to_dict(self) -> dict:
        return {
            "token": self.token.to_list(),
            "slot": self.slot.to_list(),
            "intent": self.intent.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabularies":
        token = Vocab.from_list(d["token"], unk=UNK)
        slot = Vocab.from_list(d["slot"])
        intent = Vocab.from_list(d["intent"])
        if token.itos[:2] != [PAD, UNK] or slot.itos[:1] != [PAD]:
            raise ValueError("vocabulary is missing its reserved PAD/UNK entries")
        return cls(token, slot, intent)


def build_vocabularies(train: Sequence[LabeledExample]) -> Vocabularies:
    if len(train) == 0:
        raise ValueError("cannot build vocabularies from an empty training set")
    token = Vocab([PAD, UNK], unk=UNK)
    slot = Vocab([PAD])
    intent = Vocab()
    for ex in train:
        for t in ex.tokens:
            token.add(t)
        for s in ex.slots:
            slot.add(s)
        for i in ex.intents:
            intent.add(i)
    return Vocabularies(token, slot, intent)


@dataclass
class Batch:
    token_ids: torch.Tensor       # [B, n_max] long
    lengths: torch.Tensor         # [B] long
    token_mask: torch.Tensor      # [B, n_max] bool
    slot_ids: torch.Tensor        # [B, n_max] long
    intent_targets: torch.Tensor  # [B, N_I] float 0/1
    examples: list[LabeledExample] = field(default_factory=list, repr=False)

    @property
    def size(self) -> int:
        return self.token_ids.shape[0]

    def to(self, device) -> "Batch":
        return Batch(
            self.token_ids.to(device),
            self.lengths.to(device),
            self.token_mask.to(device),
            self.slot_ids.to(device),
            self.intent_targets.to(device),
            self.examples,
        )


def collate(examples: Sequence[LabeledExample], vocab: Vocabularies) -> Batch:
    """Pad a list of examples into one batch.

    Slot tags or intents unseen in training map to ``O`` / no target; the
    metrics always score against the original strings.
    """
    if len(examples) == 0:
        raise ValueError("cannot collate an empty batch")
    lengths = [len(ex) for ex in examples]
    n_max = max(lengths)
    B = len(examples)
    token_ids = torch.zeros(B, n_max, dtype=torch.long)
    slot_ids = torch.zeros(B, n_max, dtype=torch.long)
    intents = torch.zeros(B, vocab.num_intents)
    outside = vocab.slot.stoi.get(OUTSIDE, 0)
    for b, ex in enumerate(examples):
        n = lengths[b]
        token_ids[b, :n] = torch.tensor([vocab.token.index(t) for t in ex.tokens])
        slot_ids[b, :n] = torch.tensor([vocab.slot.stoi.get(s, outside) for s in ex.slots])
        for name in ex.intents:
            k = vocab.intent.stoi.get(name)
            if k is not None:
                intents[b, k] = 1.0
    lengths_t = torch.tensor(lengths, dtype=torch.long)
    mask = torch.arange(n_max).unsqueeze(0) < lengths_t.unsqueeze(1)
    return Batch(token_ids, lengths_t, mask, slot_ids, intents, list(examples))


def make_batches(
    data: Sequence[LabeledExample],
    vocab: Vocabularies,
    batch_size: int = 16,
    shuffle: bool = False,
    seed: int = 0,
    bucket_by_length: bool = False,
) -> list[Batch]:
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if len(data) == 0:
        raise ValueError("cannot batch an empty dataset")
    order = list(range(len(data)))
    if shuffle:
        random.Random(seed).shuffle(order)
    if bucket_by_length:
        # stable sort keeps the shuffled order among equal lengths
        order.sort(key=lambda i: len(data[i]))
    chunks = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if bucket_by_length and shuffle:
        random.Random(seed + 1).shuffle(chunks)
    return [collate([data[i] for i in chunk], vocab) for chunk in chunks]
