"""Command-line front end: preprocess, build-vocab, train, eval, predict,
selfcheck.

Exit codes: 0 ok, 1 verification failure, 2 config/input error,
3 integrity error.
"""

import argparse
import hashlib
import json
import os
import sys
from importlib import resources
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__, evaluation, models, selfcheck, text_pipeline, training
from .checkpoint import IntegrityError, load_checkpoint, save_checkpoint
from .embeddings import EmbeddingParseError, build_matrix, load_embeddings
from .evaluation import CLASS_KEYS, CLASS_INDEX, DatasetError
from .models import ModelConfig, build_model
from .text_pipeline import (
    STOPWORDS_ENV_VAR,
    Vocabulary,
    build_vocabulary,
    clean_text,
    encode,
    load_stopwords,
    tokenize,
)
from .training import TrainConfig

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_INTEGRITY = 3


class ConfigError(ValueError):
    pass


# name -> (parser, default); None default means "required when used"
SETTINGS: Dict[str, Tuple[type, object]] = {
    "seed": (int, 0),
    "arch": (str, "cnn"),
    "embedding": (str, None),
    "embedding_format": (str, "headerless"),
    "embedding_dim": (int, None),
    "fine_tune": (bool, True),
    "epochs": (int, 25),
    "batch_size": (int, 32),
    "keep_prob": (float, 0.5),
    "seq_len": (int, 30),
    "min_count": (int, 1),
    "optimizer": (str, "adam"),
    "learning_rate": (float, 0.001),
    "out": (str, None),
    "train": (str, None),
    "dev": (str, None),
    "test": (str, None),
    "vocab": (str, None),
    "checkpoint": (str, None),
    "stopwords": (str, None),
    "strip_hash_only": (bool, False),
    "drop_mentions": (bool, False),
    "experiment": (str, ""),
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected true/false, got {text!r}")


def _coerce(name: str, raw: str):
    typ, _ = SETTINGS[name]
    if typ is bool:
        return _parse_bool(raw)
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_file(path: str) -> Dict[str, object]:
    """Flat ``key = value`` config, one per line, '#' comments."""
    values = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, raw = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in SETTINGS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _coerce(key, raw.strip())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return values


def resolve_settings(args: argparse.Namespace) -> Dict[str, Tuple[object, str]]:
    """Merge flags > config file > defaults; each value keeps its source."""
    effective = {name: (default, "default") for name, (_, default) in SETTINGS.items()}
    if getattr(args, "config", None):
        for key, value in parse_config_file(args.config).items():
            effective[key] = (value, "config")
    for name in SETTINGS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            effective[name] = (flag_value, "flag")
    return effective


def _require(settings, *names):
    for name in names:
        value, _ = settings[name]
        if value is None:
            raise ConfigError(f"missing required setting --{name.replace('_', '-')}")


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise ConfigError(f"{what} file not found: {path}")


def _file_hash(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _stopwords_hash(path: Optional[str]) -> str:
    if path is None:
        path = os.environ.get(STOPWORDS_ENV_VAR)
    if path is None:
        data = resources.files("crisisclass.data").joinpath("stopwords.txt").read_bytes()
        return hashlib.sha256(data).hexdigest()
    return _file_hash(path)


def _encode_dataset(tweets, stopwords, vocab, seq_len, strip_hash_only, drop_mentions):
    examples = []
    for tweet in tweets:
        tokens = tokenize(clean_text(
            tweet.text, stopwords,
            strip_hash_only=strip_hash_only, drop_mentions=drop_mentions))
        examples.append(encode(tokens, vocab, seq_len, label=CLASS_INDEX[tweet.label]))
    return examples


def _value(settings, name):
    return settings[name][0]


# ---------------------------------------------------------------------------
# commands


def cmd_preprocess(args) -> int:
    settings = resolve_settings(args)
    _require_file(args.input, "input")
    stopwords = load_stopwords(_value(settings, "stopwords"))
    tweets = text_pipeline.read_tsv(args.input)
    out = sys.stdout
    close = False
    out_dir = _value(settings, "out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        out = open(os.path.join(out_dir, "preprocessed.tsv"), "w", encoding="utf-8", newline="\n")
        close = True
    try:
        out.write("id\ttext\tlabel\n")
        for tweet in tweets:
            cleaned = clean_text(
                tweet.text, stopwords,
                strip_hash_only=_value(settings, "strip_hash_only"),
                drop_mentions=_value(settings, "drop_mentions"))
            out.write(f"{tweet.id}\t{cleaned}\t{tweet.label or ''}\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


def cmd_build_vocab(args) -> int:
    settings = resolve_settings(args)
    _require_file(args.input, "input")
    stopwords = load_stopwords(_value(settings, "stopwords"))
    tweets = text_pipeline.read_tsv(args.input)
    corpus = [tokenize(clean_text(t.text, stopwords)) for t in tweets]
    vocab = build_vocabulary(corpus, min_count=_value(settings, "min_count"))
    out_dir = _value(settings, "out") or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "vocab.txt")
    vocab.save(path)
    print(f"wrote {path} ({len(vocab)} entries incl. PAD/UNK)")
    return EXIT_OK


def cmd_train(args) -> int:
    settings = resolve_settings(args)
    _require(settings, "train", "dev", "embedding", "out")
    for name in ("train", "dev", "embedding"):
        _require_file(_value(settings, name), name)
    stopwords_path = _value(settings, "stopwords")
    if stopwords_path:
        _require_file(stopwords_path, "stopwords")
    stopwords = load_stopwords(stopwords_path)

    train_tweets, _ = evaluation.load_dataset(_value(settings, "train"))
    dev_tweets, _ = evaluation.load_dataset(_value(settings, "dev"))

    strip_hash_only = _value(settings, "strip_hash_only")
    drop_mentions = _value(settings, "drop_mentions")
    corpus = [
        tokenize(clean_text(t.text, stopwords,
                            strip_hash_only=strip_hash_only,
                            drop_mentions=drop_mentions))
        for t in train_tweets
    ]
    vocab = build_vocabulary(corpus, min_count=_value(settings, "min_count"))

    out_dir = _value(settings, "out")
    os.makedirs(out_dir, exist_ok=True)
    vocab_path = os.path.join(out_dir, "vocab.txt")
    vocab.save(vocab_path)

    try:
        kv = load_embeddings(_value(settings, "embedding"), _value(settings, "embedding_format"))
    except EmbeddingParseError as exc:
        raise ConfigError(str(exc)) from exc
    if _value(settings, "embedding_dim") is not None and kv.dim != _value(settings, "embedding_dim"):
        raise ConfigError(
            f"embedding file is {kv.dim}-dimensional, expected {_value(settings, 'embedding_dim')}")

    seed = _value(settings, "seed")
    emb = build_matrix(kv, vocab, seed=seed, trainable=_value(settings, "fine_tune"))
    config = ModelConfig(
        arch=_value(settings, "arch"),
        seq_len=_value(settings, "seq_len"),
        embedding_dim=kv.dim,
        keep_prob=_value(settings, "keep_prob"),
        fine_tune_embeddings=_value(settings, "fine_tune"),
    )
    model = build_model(config, emb, seed=seed)

    seq_len = config.seq_len
    train_set = _encode_dataset(train_tweets, stopwords, vocab, seq_len, strip_hash_only, drop_mentions)
    dev_set = _encode_dataset(dev_tweets, stopwords, vocab, seq_len, strip_hash_only, drop_mentions)

    train_cfg = TrainConfig(
        batch_size=_value(settings, "batch_size"),
        epochs=_value(settings, "epochs"),
        optimizer=_value(settings, "optimizer"),
        learning_rate=_value(settings, "learning_rate"),
        keep_prob=_value(settings, "keep_prob"),
        seed=seed,
    )
    model, history = training.train(model, train_set, dev_set, train_cfg)

    vocab_hash = _file_hash(vocab_path)
    stop_hash = _stopwords_hash(stopwords_path)
    ckpt_path = os.path.join(out_dir, "model.ckpt")
    save_checkpoint(ckpt_path, model, vocab_hash=vocab_hash, stopwords_hash=stop_hash)

    history_path = os.path.join(out_dir, "history.csv")
    with open(history_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(history.to_csv())

    cm = training.evaluate_confusion(model, dev_set)
    report = evaluation.metrics_report(cm)
    with open(os.path.join(out_dir, "dev_report.json"), "w", encoding="utf-8") as f:
        f.write(report.to_json() + "\n")

    manifest = {
        "toolkit_version": __version__,
        "settings": {
            name: {"value": value, "source": source}
            for name, (value, source) in sorted(settings.items())
        },
        "input_hashes": {
            "train": _file_hash(_value(settings, "train")),
            "dev": _file_hash(_value(settings, "dev")),
            "embedding": _file_hash(_value(settings, "embedding")),
            "stopwords": stop_hash,
            "vocab": vocab_hash,
        },
        "best_epoch": history.best_epoch,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    print(f"wrote {ckpt_path}, {history_path}, manifest.json "
          f"(best dev macro-F1 {max(r.dev_macro_f1 for r in history.records):.4f} "
          f"at epoch {history.best_epoch})")
    return EXIT_OK


def _load_checkpoint_with_vocab(settings):
    _require(settings, "checkpoint", "vocab")
    ckpt_path = _value(settings, "checkpoint")
    vocab_path = _value(settings, "vocab")
    _require_file(ckpt_path, "checkpoint")
    _require_file(vocab_path, "vocab")
    model, header = load_checkpoint(ckpt_path)
    actual = _file_hash(vocab_path)
    if header.get("vocab_hash") and header["vocab_hash"] != actual:
        raise IntegrityError(
            f"vocabulary hash mismatch: checkpoint expects {header['vocab_hash'][:12]}..., "
            f"{vocab_path} hashes to {actual[:12]}...")
    vocab = Vocabulary.load(vocab_path)
    if len(vocab) != header["vocab_size"]:
        raise IntegrityError(
            f"vocabulary size mismatch: checkpoint has {header['vocab_size']}, file has {len(vocab)}")
    return model, header, vocab


def cmd_eval(args) -> int:
    settings = resolve_settings(args)
    _require(settings, "test")
    _require_file(_value(settings, "test"), "test")
    model, header, vocab = _load_checkpoint_with_vocab(settings)
    stopwords = load_stopwords(_value(settings, "stopwords"))
    tweets, _ = evaluation.load_dataset(_value(settings, "test"))
    dataset = _encode_dataset(
        tweets, stopwords, vocab, model.config.seq_len,
        _value(settings, "strip_hash_only"), _value(settings, "drop_mentions"))
    cm = training.evaluate_confusion(model, dataset)
    report = evaluation.metrics_report(cm)
    print(report.to_text())
    out_dir = _value(settings, "out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "test_report.json"), "w", encoding="utf-8") as f:
            f.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_predict(args) -> int:
    settings = resolve_settings(args)
    model, header, vocab = _load_checkpoint_with_vocab(settings)
    stopwords = load_stopwords(_value(settings, "stopwords"))
    for line in sys.stdin:
        line = line.rstrip("\n")
        tokens = tokenize(clean_text(
            line, stopwords,
            strip_hash_only=_value(settings, "strip_hash_only"),
            drop_mentions=_value(settings, "drop_mentions")))
        example = encode(tokens, vocab, model.config.seq_len)
        dist, cls = models.predict(model, example)
        flag = "\t*" if not tokens else ""
        print(f"{CLASS_KEYS[cls]}\t{dist[cls]:.6f}{flag}")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = selfcheck.run_all(seeds=range(3))
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<28} value={r.value:.3e}  threshold={r.threshold:.1e}")
        if not r.passed:
            failed += 1
    if failed:
        print(f"{failed} check(s) failed")
        return EXIT_VERIFY
    print("all checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--arch", choices=["cnn", "bilstm"])
    p.add_argument("--embedding", help="embedding text file")
    p.add_argument("--embedding-format", dest="embedding_format",
                   choices=["headerless", "headered"])
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int)
    p.add_argument("--fine-tune", dest="fine_tune", type=_parse_bool, metavar="{true,false}")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--keep-prob", dest="keep_prob", type=float)
    p.add_argument("--seq-len", dest="seq_len", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--train", help="training TSV")
    p.add_argument("--dev", help="development TSV")
    p.add_argument("--test", help="test TSV")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--checkpoint", help="model checkpoint file")
    p.add_argument("--stopwords", help="stop-word list file")
    p.add_argument("--strip-hash-only", dest="strip_hash_only", type=_parse_bool,
                   metavar="{true,false}")
    p.add_argument("--drop-mentions", dest="drop_mentions", type=_parse_bool,
                   metavar="{true,false}")
    p.add_argument("--experiment", help="free-form experiment tag")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crisisclass",
        description="Tweet classification for crisis response (CNN / Bi-LSTM).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and tokenize a raw corpus TSV")
    p.add_argument("input", help="raw corpus TSV")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-vocab", help="build a vocabulary file from a TSV")
    p.add_argument("input", help="raw corpus TSV")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a classifier end to end")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a test TSV")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify raw text lines from stdin")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("selfcheck", help="run the gradient and oracle battery")
    _add_shared_flags(p)
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, text_pipeline.PipelineError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrityError as exc:
        print(f"integrity: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except training.TrainingError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
