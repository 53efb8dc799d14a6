"""``fetel`` command line: build a KB, make weak labels, train, evaluate, predict, link.

Machine-readable results go to stdout (or ``--out``) as JSON/JSONL; human
summaries go to stderr. Exit codes: 0 ok, 1 usage/config, 2 data, 3 runtime.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .corpus import (WeakLabelReport, example_from_record, generate_weak_labels, load_dataset,
                     load_embeddings, read_anchor_documents, read_records, save_dataset, split_dev)
from .entity_linker import link_examples
from .errors import ConfigError, FetelError, IoFailure
from .evaluation import evaluate
from .features import featurize, predict_scores
from .knowledge_base import (IngestReport, KnowledgeBase, load_snapshot, read_anchor_tsv,
                             read_entities_jsonl, save_snapshot)
from .model import MULTI_PATH, SINGLE_PATH, ModelConfig, decode_prediction, load_checkpoint, save_checkpoint
from .training import TrainingConfig, train, write_log
from .type_system import KbTypeMapping, TypeVocabulary

logger = logging.getLogger("fetel")

PATH_FIELDS = ("types", "mapping", "embeddings", "kb", "train", "dev")


@dataclass
class PipelineConfig:
    """Everything a training run needs; serializes to and from plain JSON."""
    types: str | None = None
    mapping: str | None = None
    embeddings: str | None = None
    kb: str | None = None
    train: str | None = None
    dev: str | None = None
    out: str | None = None
    dev_size: int = 2000
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        try:
            data["model"] = ModelConfig(**data.get("model", {}))
            data["training"] = TrainingConfig(**data.get("training", {}))
        except TypeError as exc:
            raise ConfigError(f"bad config block: {exc}") from None
        return cls(**data)

    @classmethod
    def load(cls, path) -> PipelineConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None

    def validate(self, required=PATH_FIELDS) -> None:
        """Fail fast on missing settings or input files, before any real work."""
        for name in required:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"missing required setting --{name}")
        for name in PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"--{name}: no such file: {value}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _require_files(*paths) -> None:
    for flag, p in paths:
        if p is not None and not Path(p).exists():
            raise ConfigError(f"{flag}: no such file: {p}")


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _emit_lines(records, out=None) -> None:
    lines = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    if out:
        try:
            Path(out).write_text(lines, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(lines)


def _vocab_and_mapping(types_path, mapping_path):
    vocab = TypeVocabulary.load(types_path)
    return vocab, KbTypeMapping.load(mapping_path, vocab)


def cmd_build_kb(args) -> int:
    _require_files(("--entities", args.entities), ("--anchors", args.anchors),
                   ("--types", args.types), ("--mapping", args.mapping))
    if (args.types is None) != (args.mapping is None):
        raise ConfigError("--types and --mapping must be given together")
    mapping = _vocab_and_mapping(args.types, args.mapping)[1] if args.types else None
    report = IngestReport()
    kb = KnowledgeBase.build(read_entities_jsonl(args.entities), read_anchor_tsv(args.anchors),
                             mapping, report)
    save_snapshot(kb, args.out)
    summary = {"entities": len(kb.entities), "surfaces": len(kb.anchors), "anchor_pairs": report.pairs,
               "skipped_empty_surface": report.skipped_empty, "persons": sum(
                   e.is_person for e in kb.entities.values()), "snapshot": str(args.out)}
    _emit(summary)
    print(f"built KB with {summary['entities']} entities and {summary['surfaces']} surfaces",
          file=sys.stderr)
    return 0


def cmd_make_training_data(args) -> int:
    _require_files(("--anchor-docs", args.anchor_docs), ("--kb", args.kb),
                   ("--types", args.types), ("--mapping", args.mapping))
    vocab, mapping = _vocab_and_mapping(args.types, args.mapping)
    kb = load_snapshot(args.kb)
    report = WeakLabelReport()
    examples = generate_weak_labels(read_anchor_documents(args.anchor_docs), kb, mapping, vocab, report)
    save_dataset(examples, args.out)
    _emit({**asdict(report), "out": str(args.out)})
    print(f"wrote {report.examples} examples from {report.anchors} anchors "
          f"({report.unknown_entity} unknown entity, {report.empty_labels} unmappable)", file=sys.stderr)
    return 0


def _pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    for name in PATH_FIELDS + ("out", "dev_size", "seed"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    model_over = {"dropout_rate": args.dropout}
    if args.no_el:
        model_over["use_el_features"] = False
    train_over = {"lambda_p": args.lambda_p, "nil_dropout_rate": args.nil_rate,
                  "max_epochs": args.max_epochs, "batch_size": args.batch_size,
                  "learning_rate": args.lr, "patience": args.patience, "policy": args.policy}
    if args.no_person_noise:
        train_over["person_noise_enabled"] = False
    model_over = {k: v for k, v in model_over.items() if v is not None}
    train_over = {k: v for k, v in train_over.items() if v is not None}
    cfg.model = ModelConfig(**{**asdict(cfg.model), **model_over, "seed": cfg.seed})
    cfg.training = TrainingConfig(**{**asdict(cfg.training), **train_over, "seed": cfg.seed})
    return cfg


def cmd_train(args) -> int:
    cfg = _pipeline_config(args)
    cfg.validate(("types", "mapping", "embeddings", "kb", "train"))
    if cfg.out is None:
        raise ConfigError("missing required setting --out")
    vocab, mapping = _vocab_and_mapping(cfg.types, cfg.mapping)
    kb = load_snapshot(cfg.kb)
    embeddings = load_embeddings(cfg.embeddings, seed=cfg.seed)
    if embeddings.dimension != cfg.model.embed_dim:
        # the word vector file fixes the input width
        logger.warning("using embedding dimension %d from %s (config had %d)",
                       embeddings.dimension, cfg.embeddings, cfg.model.embed_dim)
        cfg.model = replace(cfg.model, embed_dim=embeddings.dimension)
    train_set = load_dataset(cfg.train, vocab)
    if cfg.dev:
        dev_set = load_dataset(cfg.dev, vocab)
    else:
        train_set, dev_set = split_dev(train_set, cfg.dev_size, cfg.seed)

    def report(entry):
        print(f"epoch {entry['epoch']}: loss {entry['loss']:.4f} dev strict {entry['dev_strict']:.4f}",
              file=sys.stderr)

    result = train(train_set, dev_set, kb, mapping, vocab, embeddings, cfg.model, cfg.training, report)
    out = Path(cfg.out)
    save_checkpoint(result.model, vocab, mapping, out,
                    {"best_epoch": result.best_epoch, "best_dev_strict": result.best_dev_strict})
    write_log(result.log, out / "train_log.jsonl")
    (out / "pipeline.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    _emit({"checkpoint": str(out), "epochs": len(result.log), "best_epoch": result.best_epoch,
           "best_dev_strict": result.best_dev_strict, "train_size": len(train_set), "dev_size": len(dev_set)})
    return 0


def _load_model_inputs(args, require_labels):
    _require_files(("--model", args.model), ("--data", args.data), ("--kb", args.kb))
    model, vocab, mapping = load_checkpoint(args.model)
    kb = load_snapshot(args.kb)
    return model, vocab, mapping, kb, load_dataset(args.data, vocab, require_labels=require_labels)


def cmd_evaluate(args) -> int:
    model, vocab, mapping, kb, data = _load_model_inputs(args, True)
    report = evaluate(model, data, kb, mapping, vocab, args.policy, args.batch_size)
    _emit(report.to_dict(), args.out)
    print(f"strict {report.strict_accuracy:.4f}  macro F1 {report.macro_f1:.4f}  "
          f"micro F1 {report.micro_f1:.4f}  ({report.n_mentions} mentions)", file=sys.stderr)
    return 0


def cmd_predict(args) -> int:
    model, vocab, mapping, kb, data = _load_model_inputs(args, False)
    records = read_records(args.data)
    scores = predict_scores(model, featurize(data, model, kb, mapping, vocab), vocab, args.batch_size).numpy()
    out = []
    for rec, s in zip(records, scores):
        predicted = sorted(str(t) for t in decode_prediction(s, vocab, args.policy))
        out.append({**rec, "predicted_labels": predicted,
                    "scores": {str(t): float(x) for t, x in zip(vocab.types, s)}})
    _emit_lines(out, args.out)
    print(f"predicted {len(out)} mentions", file=sys.stderr)
    return 0


def cmd_link(args) -> int:
    _require_files(("--data", args.data), ("--kb", args.kb))
    kb = load_snapshot(args.kb)
    records = read_records(args.data)
    examples = [example_from_record(rec, None, i, require_labels=False) for i, rec in enumerate(records)]
    results = link_examples(kb, examples)
    _emit_lines([r.to_record() for r in results], args.out)
    print(f"linked {sum(not r.is_nil for r in results)} of {len(results)} mentions", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fetel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-kb", help="ingest entity records and anchor pairs into a KB snapshot")
    p.add_argument("--entities", required=True, help="entity JSONL (id, title, types)")
    p.add_argument("--anchors", required=True, help="anchor TSV (surface<TAB>entity_id)")
    p.add_argument("--out", required=True, help="snapshot path to write")
    p.add_argument("--types", help="type vocabulary, used with --mapping to flag persons")
    p.add_argument("--mapping", help="KB type mapping TSV")
    p.set_defaults(func=cmd_build_kb)

    p = sub.add_parser("make-training-data", help="weakly label anchor mentions from KB types")
    p.add_argument("--anchor-docs", required=True, help="JSONL documents with anchor spans")
    p.add_argument("--kb", required=True)
    p.add_argument("--types", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--out", required=True, help="mention JSONL to write")
    p.set_defaults(func=cmd_make_training_data)

    p = sub.add_parser("train", help="train a typing model")
    p.add_argument("--config", help="JSON pipeline config; flags override it")
    for name in PATH_FIELDS:
        p.add_argument(f"--{name}")
    p.add_argument("--out", help="checkpoint directory")
    p.add_argument("--dev-size", type=int, help="held-out size when --dev is absent")
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda-p", type=float)
    p.add_argument("--nil-rate", type=float)
    p.add_argument("--no-person-noise", action="store_true")
    p.add_argument("--no-el", action="store_true", help="zero the entity linking features")
    p.add_argument("--dropout", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--policy", choices=[MULTI_PATH, SINGLE_PATH])
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "score a labeled mention set"),
                                 ("predict", cmd_predict, "add predicted labels to mention JSONL")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", required=True, help="checkpoint directory")
        p.add_argument("--data", required=True)
        p.add_argument("--kb", required=True)
        p.add_argument("--policy", choices=[MULTI_PATH, SINGLE_PATH], default=MULTI_PATH)
        p.add_argument("--batch-size", type=int, default=256)
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("link", help="link mentions to KB entities by commonness")
    p.add_argument("--data", required=True, help="mention JSONL")
    p.add_argument("--kb", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_link)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except FetelError as exc:
        print(f"fetel {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
