"""Command-line entry point: ``carryover {train,eval,predict,synth,gradcheck}``.

Usage errors exit with status 2, data errors with status 1 and a message
naming the file and line. ``CARRYOVER_LOG`` sets the log level
(``DEBUG``, ``INFO``, ``WARNING``...; default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Sequence

from . import corpus as io
from .checkpoint import load_checkpoint, save_checkpoint
from .decoders import DecoderConfig, OrderingPolicy
from .embeddings import load_vectors
from .errors import CarryoverError
from .gradcheck import TOLERANCE, run_suite
from .metrics import PRESETS, corpus_eval
from .synth import SynthConfig, synth_generate
from .training import TrainConfig, train

log = logging.getLogger("carryover")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # raise instead of exiting so run_cli can return a code
        raise UsageError(f"{self.prog}: error: {message}")


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise CarryoverError(f"{path}: line {e.lineno}: invalid JSON config ({e.msg})") from None
    if not isinstance(data, dict):
        raise CarryoverError(f"{path}: config must be a JSON object")
    return data


def _read(path: str, role: str):
    try:
        data = io.read_any(path)
    except CarryoverError as e:
        raise CarryoverError(f"{path}: {e}") from None
    log.info("%s: %d instances from %s", role, len(data), path)
    return data


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -------------------------------------------------------------- subcommands


def cmd_train(args) -> int:
    from .plotting import plot_history

    cfg = TrainConfig.from_dict(_load_json(args.config))
    if args.decoder:
        cfg.decoder = replace(cfg.decoder, kind=args.decoder)
    if args.ordering:
        cfg.ordering = OrderingPolicy(args.ordering, cfg.ordering.seed)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.bucket_preset:
        cfg.bucket_preset = args.bucket_preset
    TrainConfig.__post_init__(cfg)

    pretrained = None
    if args.embeddings:
        pretrained = load_vectors(args.embeddings)
        cfg.encoder = replace(cfg.encoder, emb_dim=pretrained.dim)
    train_set = _read(args.train, "train")
    dev_set = _read(args.dev, "dev") if args.dev else []

    model, history = train(cfg, train_set, dev_set, pretrained)
    out = _out_dir(args)
    save_checkpoint(model, out / "model.ckpt")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    (out / "history.json").write_text(json.dumps(history.to_dict(), indent=2) + "\n")
    plot_history(history.train_loss, history.dev_f1, out / "history.png", history.best_epoch)
    print(f"best epoch {history.best_epoch + 1}/{len(history.dev_f1)} dev F1 {history.dev_f1[history.best_epoch]:.4f}")
    print(f"checkpoint written to {out / 'model.ckpt'}")
    return 0


def write_report_tsv(report, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["bucket", "precision", "recall", "f1", "count"])
        for label, (p, r, f, n) in report.by_distance.items():
            w.writerow([label, f"{p:.6f}", f"{r:.6f}", f"{f:.6f}", n])
        w.writerow([report.aggregate_label, f"{report.precision:.6f}", f"{report.recall:.6f}", f"{report.f1:.6f}", report.count])


def cmd_eval(args) -> int:
    from .plotting import plot_bucket_f1, plot_grid

    model = load_checkpoint(args.checkpoint)
    data = _read(args.test, "test")
    report = corpus_eval(model, data, args.bucket_preset or "internal")
    print(report.format_table())
    out = _out_dir(args)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    write_report_tsv(report, out / "report.tsv")
    plot_bucket_f1(report, out / "bucket_f1.png")
    plot_grid(report, out / "grid.png")
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.checkpoint)
    raw = args.record
    if raw == "-":
        raw = sys.stdin.read()
    elif os.path.exists(raw):
        raw = Path(raw).read_text(encoding="utf-8")
    lines = [l for l in raw.splitlines() if l.strip()]
    if not lines:
        raise CarryoverError("predict: no record given")
    try:
        obj = json.loads(lines[-1])
    except json.JSONDecodeError as e:
        raise CarryoverError(f"predict: invalid JSON record ({e.msg})") from None
    inst = io.record_to_instance(obj, len(lines)) if "labels" in obj else io.record_to_instance(
        {**obj, "labels": [], "anchors_positive": False}, len(lines)
    )
    pred = model.predict(inst)
    chosen = []
    for j in sorted(pred.selected):
        c = inst.candidates[j]
        toks = inst.dialogue.utterance(c.distance).tokens[c.source.span_left : c.source.span_right + 1]
        chosen.append({"index": j, "key": c.mapped_key, "value": " ".join(toks), "distance": c.distance})
    result = {"id": inst.uid, "selected": chosen}
    if pred.per_slot_prob is not None:
        result["probabilities"] = [round(p, 6) for p in pred.per_slot_prob]
    if pred.decode_trace is not None:
        result["trace"] = list(pred.decode_trace)
    print(json.dumps(result, ensure_ascii=False))
    return 0


def cmd_synth(args) -> int:
    raw = _load_json(args.config)
    known = {f.name for f in fields(SynthConfig)}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown SynthConfig fields: {', '.join(sorted(unknown))}")
    if "correlated_pairs" in raw and raw["correlated_pairs"] is not None:
        raw["correlated_pairs"] = [tuple(p) for p in raw["correlated_pairs"]]
    for k in ("distractors", "anchors"):
        if k in raw:
            raw[k] = tuple(raw[k])
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = SynthConfig(**raw)
    splits = synth_generate(cfg)
    out = _out_dir(args)
    for name, data in splits.items():
        io.write_corpus(data, out / f"{name}.jsonl")
        stats = io.corpus_stats(data)
        print(f"{name}: {stats.n_instances} dialogues, {stats.n_candidates} candidates")
        print(stats.table())
    return 0


def cmd_gradcheck(args) -> int:
    results = run_suite(args.cases, args.seed if args.seed is not None else 0)
    failed = 0
    for r in results:
        status = "ok" if r.ok else "FAIL"
        failed += not r.ok
        print(f"{r.name:<20} max rel err {r.max_error:.2e}  ({r.cases} cases, {r.seconds:.2f}s)  {status}")
    print(f"{len(results) - failed}/{len(results)} checks within {TOLERANCE:g}")
    return 1 if failed else 0


# ------------------------------------------------------------------ parsing


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="carryover", description="Joint slot carryover models.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    def common(sp, *names):
        if "config" in names:
            sp.add_argument("--config", help="JSON config file")
        if "seed" in names:
            sp.add_argument("--seed", type=int, help="random seed (u64)")
        if "preset" in names:
            sp.add_argument("--bucket-preset", choices=sorted(PRESETS), help="distance buckets for reports")
        sp.add_argument("--out", help="output directory (default: current directory)")

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--train", required=True, help="training corpus")
    t.add_argument("--dev", help="dev corpus for model selection")
    t.add_argument("--decoder", choices=["independent", "pointer", "transformer"])
    t.add_argument("--ordering", choices=["none", "turn", "temporal"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--embeddings", help="pretrained word vectors (text format)")
    common(t, "config", "seed", "preset")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a corpus")
    e.add_argument("checkpoint")
    e.add_argument("--test", required=True, help="evaluation corpus")
    common(e, "preset")
    e.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="select slots for one record")
    pr.add_argument("checkpoint")
    pr.add_argument("record", help="JSON record, a file holding one, or - for stdin")
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("synth", help="write a synthetic corpus split")
    common(s, "config", "seed")
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("gradcheck", help="run the finite-difference suite")
    g.add_argument("--cases", type=int, default=20, help="random cases per check")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gradcheck)
    return p


def _configure_logging() -> None:
    level = os.environ.get("CARRYOVER_LOG", "WARNING").upper()
    value = int(level) if level.isdigit() else getattr(logging, level, None)
    if not isinstance(value, int):
        value = logging.WARNING
    logging.basicConfig(level=value, format="%(levelname)s %(name)s: %(message)s")


def run_cli(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "epochs", None) is not None and args.epochs < 1:
            raise UsageError("--epochs must be >= 1")
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except (CarryoverError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
