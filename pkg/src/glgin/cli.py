"""Command-line entry points: ``glgin train|eval|predict|bench|synth``.

Reports go to stdout as JSON, logs to stderr.  Exit codes: 0 success,
1 usage / config / input error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import torch

from . import plotting
from .config import ConfigError, load_run_config
from .corpus import DatasetParseError, load_dataset, make_batches
from .evaluation import evaluate, examples_from_tokens, latency_report, predict
from .synthetic import write_splits
from .training import CheckpointError, TrainingDiverged, load_checkpoint, save_checkpoint, train

log = logging.getLogger("glgin")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
INPUT_ERRORS = (ConfigError, DatasetParseError, CheckpointError, FileNotFoundError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    sys.stdout.flush()


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    train_set = load_dataset(cfg.train_path, lowercase=cfg.train.lowercase)
    dev_set = load_dataset(cfg.dev_path, lowercase=cfg.train.lowercase)
    test_set = load_dataset(cfg.test_path, lowercase=cfg.train.lowercase) if cfg.test_path else None

    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "metrics.jsonl"
    with log_path.open("w", encoding="utf-8") as log_file:
        def on_epoch(record):
            log_file.write(json.dumps(record, sort_keys=True) + "\n")
            log_file.flush()

        ckpt = train(cfg.train, train_set, dev_set, on_epoch=on_epoch)
    save_checkpoint(ckpt, out / "model.ckpt")
    report = {"checkpoint": str(out / "model.ckpt"), "dev": ckpt.metrics["dev"], "epochs": len(ckpt.history)}
    if test_set is not None:
        test = evaluate(ckpt.model, test_set, ckpt.vocab)
        report["test"] = test.to_dict()
        (out / "test_metrics.json").write_text(test.to_json() + "\n", encoding="utf-8")
    if cfg.figures:
        report["figures"] = [str(plotting.plot_training_curves(ckpt.history, out / "training_curves.png"))]
    _emit(report)
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    data = load_dataset(args.data, lowercase=ckpt.config.lowercase)
    metrics = evaluate(ckpt.model, data, ckpt.vocab, batch_size=args.batch_size)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval_metrics.json").write_text(metrics.to_json() + "\n", encoding="utf-8")
    _emit(metrics.to_dict())
    return EXIT_OK


def _read_utterances(path: Path) -> list[list[str]]:
    utterances = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens:
                log.warning("%s:%d: empty line skipped", path, lineno)
                continue
            utterances.append(tokens)
    return utterances


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    path = Path(args.data)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    utterances = _read_utterances(path)
    if not utterances:
        return EXIT_OK
    examples = examples_from_tokens(utterances, lowercase=ckpt.config.lowercase)
    preds = predict(ckpt.model, examples, ckpt.vocab, batch_size=args.batch_size)
    for p in preds:
        sys.stdout.write("#".join(p.intents) + "\t" + " ".join(p.slots) + "\n")
    if args.dump_attention:
        _dump_attention(ckpt, examples, Path(args.dump_attention), args.batch_size)
    return EXIT_OK


@torch.no_grad()
def _dump_attention(ckpt, examples, path: Path, batch_size: int) -> None:
    model, records = ckpt.model, []
    for batch in make_batches(examples, ckpt.vocab, batch_size):
        out = model(batch)
        maps = model.slot_decoder.attention_maps(out.encoded.E, out.intent_scores, batch.token_mask,
                                                 batch.lengths, out.intent_mask)
        for b, ex in enumerate(batch.examples):
            n = len(ex)
            rec = {"tokens": list(ex.tokens), "encoder": out.encoded.attention[b, :n, :n].tolist()}
            if "local" in maps:
                rec["local"] = [a[b, :, :n, :n].tolist() for a in maps["local"]]
            if "global" in maps:
                keep = list(range(n)) + [n + int(k) for k in torch.nonzero(out.intent_mask[b]).flatten()]
                rec["global_nodes"] = list(ex.tokens) + [
                    ckpt.vocab.intent.lookup(int(k)) for k in torch.nonzero(out.intent_mask[b]).flatten()
                ]
                rec["global"] = [a[b][:, keep][:, :, keep].tolist() for a in maps["global"]]
            records.append(rec)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(records) + "\n", encoding="utf-8")


def cmd_bench(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if not ckpt.has_baseline:
        raise CheckpointError("checkpoint has no autoregressive baseline parameters; retrain with train_baseline: true")
    data = load_dataset(args.data, lowercase=ckpt.config.lowercase)
    report = latency_report(ckpt.model, data, ckpt.vocab, batch_sizes=args.batch_sizes,
                            warmup_batches=args.warmup, repeats=args.repeats, threads=args.threads)
    payload = report.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "latency.json").write_text(report.to_json() + "\n", encoding="utf-8")
        payload["figures"] = [str(plotting.plot_latency(report, out / "latency.png"))]
    _emit(payload)
    return EXIT_OK


def cmd_synth(args) -> int:
    paths = write_splits(args.out, args.train, args.dev, args.test, seed=args.seed or 0)
    _emit({k: str(v) for k, v in paths.items()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glgin", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model from a YAML run config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config and GLGIN_OUT_DIR)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labeled dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="tag whitespace-tokenized utterances, one per line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--dump-attention", metavar="PATH", help="write raw attention weights as JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="time parallel vs autoregressive slot decoding")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch-sizes", "--batch-size", dest="batch_sizes", type=int, nargs="+", default=[32])
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a template-generated corpus in the dataset format")
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--dev", type=int, default=100)
    p.add_argument("--test", type=int, default=828)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"glgin: error: {exc}\n")
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        sys.stderr.write(f"glgin {args.command}: {exc}\n")
        return EXIT_USAGE
    except TrainingDiverged as exc:
        sys.stderr.write(f"glgin {args.command}: training diverged: {exc}\n")
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        sys.stderr.write(f"glgin {args.command}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
