"""Command-line surface for the humor pipeline.

Every subcommand accepts --seed, --config (inline JSON or a JSON file
path), and --out.  Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classify, markov, neural
from .annotate import annotate_joke, load_pos_lexicon, read_conllu_corpus, serialize_conllu
from .corpus import Joke, clean_text, dump_corpus_jsonl, load_corpus, tokenize
from .errors import HumorkitError
from .evaluation import format_report, load_sessions, report, run_blind_eval
from .features import export_feature_table, load_feature_csv
from .infill import (
    BaselineInfiller,
    RemoteInfiller,
    build_pos_vocabulary,
    hybrid_generate,
    template_request,
)
from .lexicons import load_lexicon_set
from .template import extract_template, load_templates, render, save_templates, weight_config_from_dict


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="rng seed for all sampling")
    sub.add_argument("--config", default=None, help="inline JSON or path to a JSON file")
    sub.add_argument("--out", required=True, help="output file (or directory for features)")


def _load_config(value: str | None) -> dict:
    if value is None:
        return {}
    text = value.strip()
    if not text.startswith("{"):
        text = Path(value).read_text(encoding="utf-8")
    cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    return cfg


def _write_jsonl(records: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _annotated_docs(infile: str, conllu: str | None) -> list:
    jokes = load_corpus(infile, "jsonl")
    gold: dict[str, list] = {}
    if conllu:
        with Path(conllu).open(encoding="utf-8") as fh:
            for doc_id, sentences in read_conllu_corpus(fh):
                if doc_id is not None:
                    gold[doc_id] = sentences
    pos_lexicon = load_pos_lexicon()
    return [
        annotate_joke(joke, pos_lexicon, sentences=gold.get(joke.id))
        for joke in jokes
    ]


def _cmd_ingest(args: argparse.Namespace, cfg: dict) -> None:
    jokes = load_corpus(args.infile, args.format)
    cleaned = [Joke(id=j.id, text=clean_text(j.text), label=j.label) for j in jokes]
    dump_corpus_jsonl(cleaned, args.out)


def _cmd_annotate(args: argparse.Namespace, cfg: dict) -> None:
    docs = _annotated_docs(args.infile, args.conllu)
    chunks = [serialize_conllu(doc.sentences, doc_id=doc.joke.id) for doc in docs]
    Path(args.out).write_text("".join(chunks), encoding="utf-8")


def _cmd_features(args: argparse.Namespace, cfg: dict) -> None:
    docs = _annotated_docs(args.infile, args.conllu)
    lex = load_lexicon_set(args.lexicons)
    export_feature_table(docs, lex, args.out)


def _labeled_dataset(features_path: str) -> classify.Dataset:
    _, labels, rows, names = load_feature_csv(features_path)
    keep = [i for i, label in enumerate(labels) if label is not None]
    return classify.Dataset(
        X=np.asarray([rows[i] for i in keep], dtype=np.float64),
        y=np.asarray([labels[i] for i in keep], dtype=np.int64),
        feature_names=names,
    )


def _cmd_train(args: argparse.Namespace, cfg: dict) -> None:
    data = _labeled_dataset(args.features)
    allowed = ("epochs", "learning_rate", "regularization", "gamma", "kernel")
    tcfg = classify.TrainConfig(
        seed=args.seed, **{k: cfg[k] for k in allowed if k in cfg}
    )
    model = classify.train(args.kind, data, tcfg)
    classify.save_model(model, args.out)
    print(json.dumps({"train": classify.evaluate(model, data)}, sort_keys=True))


def _cmd_classify(args: argparse.Namespace, cfg: dict) -> None:
    ids, labels, rows, names = load_feature_csv(args.features)
    model = classify.load_model(args.model, expected_feature_names=names)
    predictions, scores = classify.predict_batch(model, np.asarray(rows, dtype=np.float64))
    records = [
        {"id": ids[i], "label": int(predictions[i]), "score": float(scores[i])}
        for i in range(len(ids))
    ]
    _write_jsonl(records, args.out)
    labeled = [i for i, label in enumerate(labels) if label is not None]
    if labeled:
        metrics = classify.metrics_from_predictions(
            np.asarray([labels[i] for i in labeled]), predictions[labeled]
        )
        print(json.dumps({"eval": metrics}, sort_keys=True))


def _token_seqs(jokes: list[Joke], level: str, cfg: dict) -> list:
    return [
        tokenize(
            clean_text(j.text),
            level=level,
            punct_mode=cfg.get("punct_mode", "keep"),
            lowercase=cfg.get("lowercase", False),
        )
        for j in jokes
    ]


def _cmd_markov_train(args: argparse.Namespace, cfg: dict) -> None:
    jokes = load_corpus(args.infile, "jsonl")
    seqs = _token_seqs(jokes, args.level, cfg)
    model = markov.fit(seqs, args.level, args.n)
    markov.save(model, args.out)


def _cmd_markov_gen(args: argparse.Namespace, cfg: dict) -> None:
    model = markov.load(args.model)
    seed_seq = tokenize(
        clean_text(args.seed_text),
        level=model.level,
        punct_mode=cfg.get("punct_mode", "keep"),
        lowercase=cfg.get("lowercase", False),
    )
    joiner = " " if model.level == "word" else ""
    records = []
    for i in range(args.count):
        tokens = markov.generate(
            model,
            list(seed_seq.tokens),
            max_tokens=args.max_tokens,
            rng_seed=args.seed + i,
            backoff=args.backoff,
        )
        records.append({"rng_seed": args.seed + i, "tokens": tokens, "text": joiner.join(tokens)})
    _write_jsonl(records, args.out)


def _cmd_lstm_train(args: argparse.Namespace, cfg: dict) -> None:
    jokes = load_corpus(args.infile, "jsonl")
    lstm_cfg = {"punct_mode": "drop", "lowercase": True, **cfg}
    seqs = [list(seq.tokens) for seq in _token_seqs(jokes, "word", lstm_cfg)]
    vocab = neural.build_vocab(seqs, max_size=cfg.get("max_vocab"))
    ncfg = neural.NeuralConfig(
        vocab_size=len(vocab),
        embed_dim=int(cfg.get("embed_dim", 32)),
        hidden_dim=int(cfg.get("hidden_dim", 64)),
        dropout_rate=float(cfg.get("dropout_rate", 0.0)),
        sequence_length=int(cfg.get("sequence_length", 4)),
        seed=args.seed,
        learning_rate=float(cfg.get("learning_rate", 0.1)),
        epochs=int(cfg.get("epochs", 20)),
        batch_size=int(cfg.get("batch_size", 16)),
    )
    windows = neural.make_windows(seqs, vocab, ncfg.sequence_length)
    model = neural.build(ncfg)
    model.vocab = vocab
    history = neural.train(model, windows)
    neural.save(model, args.out)
    neural.write_loss_csv(history, Path(args.out).with_suffix(".loss.csv"))
    print(json.dumps({"epochs": len(history), "final_loss": history[-1]}, sort_keys=True))


def _cmd_lstm_gen(args: argparse.Namespace, cfg: dict) -> None:
    model = neural.load(args.model)
    seed_seq = tokenize(
        clean_text(args.seed_text),
        level="word",
        punct_mode=cfg.get("punct_mode", "drop"),
        lowercase=cfg.get("lowercase", True),
    )
    tokens = neural.generate(
        model,
        list(seed_seq.tokens),
        max_tokens=args.max_tokens,
        rng_seed=args.seed,
        temperature=args.temperature,
    )
    record = {
        "tokens": tokens,
        "text": " ".join(tokens),
        "degeneration_cycle": neural.degeneration_cycle(tokens),
    }
    _write_jsonl([record], args.out)


def _cmd_template(args: argparse.Namespace, cfg: dict) -> None:
    docs = _annotated_docs(args.infile, args.conllu)
    lex = load_lexicon_set(args.lexicons)
    wcfg = weight_config_from_dict(cfg)
    templates = [extract_template(doc, lex, wcfg) for doc in docs]
    save_templates(templates, args.out)


def _make_infiller(kind: str, endpoint: str | None, vocab_docs: list):
    if kind == "baseline":
        return BaselineInfiller(build_pos_vocabulary(vocab_docs))
    return RemoteInfiller(endpoint=endpoint)


def _cmd_infill(args: argparse.Namespace, cfg: dict) -> None:
    templates = load_templates(args.templates)
    docs = _annotated_docs(args.infile, None)
    infiller = _make_infiller(args.infiller, args.endpoint, docs)
    top_k = int(cfg.get("top_k", 5))
    records = []
    for i, template in enumerate(templates):
        rendered = render(template)
        if not template.masked_surfaces():
            records.append(
                {"joke_id": template.joke_id, "template": rendered, "generated": rendered}
            )
            continue
        result = infiller(template_request(template, top_k=top_k), args.seed + i)
        records.append(
            {
                "joke_id": template.joke_id,
                "template": rendered,
                "generated": " ".join(result.filled_tokens),
                "infiller_id": result.infiller_id,
            }
        )
    _write_jsonl(records, args.out)


def _cmd_generate(args: argparse.Namespace, cfg: dict) -> None:
    docs = _annotated_docs(args.infile, args.conllu)
    lex = load_lexicon_set(args.lexicons)
    wcfg = weight_config_from_dict(cfg)
    infiller = _make_infiller(args.infiller, args.endpoint, docs)
    records = []
    for i, doc in enumerate(docs):
        result = hybrid_generate(
            doc, lex, wcfg, infiller, rng_seed=args.seed + i, top_k=int(cfg.get("top_k", 5))
        )
        records.append(
            {
                "original": result["original"],
                "template": result["template_string"],
                "generated": result["generated"],
                "diagnostics": result["diagnostics"],
            }
        )
    _write_jsonl(records, args.out)


def _cmd_eval_blind(args: argparse.Namespace, cfg: dict) -> None:
    fixed = cfg.get("fixed_timestamp")
    run_blind_eval(
        human_file=args.human,
        generated_file=args.generated,
        n_items=args.n_items,
        shuffle_seed=args.seed,
        evaluator_id=args.evaluator,
        out_path=args.out,
        input_stream=sys.stdin,
        output_stream=sys.stdout,
        timestamp_fn=(lambda: fixed) if fixed is not None else None,
    )


def _cmd_report(args: argparse.Namespace, cfg: dict) -> None:
    sessions = load_sessions(args.sessions)
    result = report(sessions)
    Path(args.out).write_text(
        json.dumps(result, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(format_report(result))


def build_parser() -> _Parser:
    parser = _Parser(prog="humorkit", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("ingest", help="clean a raw corpus into canonical JSONL")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    _add_common(sub)
    sub.set_defaults(func=_cmd_ingest)

    sub = subs.add_parser("annotate", help="emit token annotations as CoNLL-U")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--conllu", default=None, help="gold annotations keyed by joke id")
    _add_common(sub)
    sub.set_defaults(func=_cmd_annotate)

    sub = subs.add_parser("features", help="export feature table and histograms")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--conllu", default=None)
    sub.add_argument("--lexicons", required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_features)

    sub = subs.add_parser("train", help="train a classifier on a feature table")
    sub.add_argument("--features", required=True)
    sub.add_argument("--kind", choices=("logreg", "gnb", "svm"), required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_train)

    sub = subs.add_parser("classify", help="apply a trained classifier")
    sub.add_argument("--features", required=True)
    sub.add_argument("--model", required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_classify)

    sub = subs.add_parser("markov-train", help="fit an n-gram model")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--level", choices=("word", "char"), default="word")
    sub.add_argument("--n", type=int, default=3)
    _add_common(sub)
    sub.set_defaults(func=_cmd_markov_train)

    sub = subs.add_parser("markov-gen", help="generate from an n-gram model")
    sub.add_argument("--model", required=True)
    sub.add_argument("--seed-text", required=True)
    sub.add_argument("--max-tokens", type=int, default=30)
    sub.add_argument("--count", type=int, default=1)
    sub.add_argument("--backoff", action="store_true")
    _add_common(sub)
    sub.set_defaults(func=_cmd_markov_gen)

    sub = subs.add_parser("lstm-train", help="train the neural language model")
    sub.add_argument("--in", dest="infile", required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_lstm_train)

    sub = subs.add_parser("lstm-gen", help="generate from the neural language model")
    sub.add_argument("--model", required=True)
    sub.add_argument("--seed-text", required=True)
    sub.add_argument("--max-tokens", type=int, default=30)
    sub.add_argument("--temperature", type=float, default=0.0)
    _add_common(sub)
    sub.set_defaults(func=_cmd_lstm_gen)

    sub = subs.add_parser("template", help="extract mask templates")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--conllu", default=None)
    sub.add_argument("--lexicons", required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_template)

    sub = subs.add_parser("infill", help="fill masks in an extracted template file")
    sub.add_argument("--templates", required=True)
    sub.add_argument("--in", dest="infile", required=True, help="corpus for the sampling vocabulary")
    sub.add_argument("--infiller", choices=("baseline", "remote"), default="baseline")
    sub.add_argument("--endpoint", default=None)
    _add_common(sub)
    sub.set_defaults(func=_cmd_infill)

    sub = subs.add_parser("generate", help="template extraction plus infilling end to end")
    sub.add_argument("--in", dest="infile", required=True)
    sub.add_argument("--conllu", default=None)
    sub.add_argument("--lexicons", required=True)
    sub.add_argument("--infiller", choices=("baseline", "remote"), default="baseline")
    sub.add_argument("--endpoint", default=None)
    _add_common(sub)
    sub.set_defaults(func=_cmd_generate)

    sub = subs.add_parser("eval-blind", help="run one blind h/c judging session")
    sub.add_argument("--human", required=True)
    sub.add_argument("--generated", required=True)
    sub.add_argument("--n-items", type=int, default=50)
    sub.add_argument("--evaluator", required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_eval_blind)

    sub = subs.add_parser("report", help="aggregate sessions into a metrics report")
    sub.add_argument("--sessions", required=True)
    _add_common(sub)
    sub.set_defaults(func=_cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"usage error: bad --config: {exc}", file=sys.stderr)
        return 1
    try:
        args.func(args, config)
    except HumorkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
