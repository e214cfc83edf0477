"""Tweet text pipeline: cleaning, tokenization, vocabulary, integer encoding."""

import hashlib
import os
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, List, Optional, Sequence

import numpy as np

PAD_INDEX = 0
UNK_INDEX = 1
PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"

STOPWORDS_ENV_VAR = "CRISISCLASS_STOPWORDS"

# Unicode emoji blocks stripped during cleaning: Emoticons, Misc Symbols &
# Pictographs, Transport, Supplemental Symbols & Pictographs, plus the
# classic Misc Symbols / Dingbats range U+2600-U+27BF.
_EMOJI_RE = re.compile(
    "["
    "\U0001F300-\U0001F5FF"
    "\U0001F600-\U0001F64F"
    "\U0001F680-\U0001F6FF"
    "\U0001F900-\U0001F9FF"
    "\u2600-\u27BF"
    "]"
)

_HASHTAG_RE = re.compile(r"(?<!\S)#\S+")
_MENTION_RE = re.compile(r"(?<!\S)@\S+")

# Symbols removed alongside Unicode P* punctuation.
_EXTRA_PUNCT = set("$+<=>^`|~")


class PipelineError(ValueError):
    """Raised on invalid text-pipeline inputs (empty corpus, bad TSV row)."""


@dataclass
class RawTweet:
    id: str
    text: str
    label: Optional[str] = None


def _is_punct(ch: str) -> bool:
    return ch in _EXTRA_PUNCT or unicodedata.category(ch).startswith("P")


def _strip_punct(text: str) -> str:
    return "".join(ch for ch in text if not _is_punct(ch))


_DEFAULT_STOPWORDS: Optional[frozenset] = None


def load_stopwords(path: Optional[str] = None) -> frozenset:
    """Load a stop-word list file (one token per line, ``#`` comments).

    Resolution order: explicit ``path``, the ``CRISISCLASS_STOPWORDS``
    environment variable, then the bundled list.
    """
    if path is None:
        path = os.environ.get(STOPWORDS_ENV_VAR)
    if path is None:
        text = resources.files("crisisclass.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def _default_stopwords() -> frozenset:
    global _DEFAULT_STOPWORDS
    if STOPWORDS_ENV_VAR in os.environ:
        return load_stopwords()
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def clean_text(
    raw: str,
    stopwords: Optional[frozenset] = None,
    strip_hash_only: bool = False,
    drop_mentions: bool = False,
) -> str:
    """Normalize a raw tweet: drop URLs, hashtags, emoji, stop words and
    punctuation; lowercase; collapse whitespace.

    ``strip_hash_only=True`` keeps the text of a hashtag and removes only
    the ``#``. ``drop_mentions=True`` removes whole ``@handle`` tokens;
    by default only the ``@`` is stripped (as punctuation) and the handle
    survives.
    """
    if stopwords is None:
        stopwords = _default_stopwords()
    text = raw.lower()
    text = _EMOJI_RE.sub("", text)
    if not strip_hash_only:
        text = _HASHTAG_RE.sub(" ", text)
    if drop_mentions:
        text = _MENTION_RE.sub(" ", text)
    text = _strip_punct(text)
    # Token-level pass: URL remnants and stop words. Dropping any token
    # containing "http" (rather than only :// forms) guarantees no "http"
    # substring survives, even when punctuation removal fuses characters.
    tokens = [
        t for t in text.split()
        if "http" not in t and t not in stopwords
    ]
    return " ".join(tokens)


def tokenize(cleaned: str) -> List[str]:
    """Split cleaned text on whitespace. Expects `clean_text` output."""
    return cleaned.split()


@dataclass
class Vocabulary:
    """Token <-> index bijection with reserved PAD=0 and UNK=1."""

    token_to_index: dict = field(default_factory=dict)
    index_to_token: list = field(default_factory=lambda: [PAD_TOKEN, UNK_TOKEN])

    def __len__(self) -> int:
        return len(self.index_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def add(self, token: str) -> int:
        if token in self.token_to_index:
            return self.token_to_index[token]
        idx = len(self.index_to_token)
        self.token_to_index[token] = idx
        self.index_to_token.append(token)
        return idx

    def save(self, path: str) -> None:
        """Write corpus tokens, one per line, in index order (PAD/UNK implicit)."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for token in self.index_to_token[2:]:
                f.write(token + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        vocab = cls()
        with open(path, encoding="utf-8") as f:
            for line in f:
                token = line.rstrip("\n")
                if token:
                    vocab.add(token)
        return vocab


def vocab_file_hash(path: str) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def build_vocabulary(corpus: Sequence[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary over token sequences.

    Tokens with frequency >= min_count get indices >= 2 in descending
    frequency order, ties broken lexicographically.
    """
    if len(corpus) == 0:
        raise PipelineError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for seq in corpus:
        counts.update(seq)
    vocab = Vocabulary()
    for token, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if counts[token] >= min_count:
            vocab.add(token)
    return vocab


@dataclass
class EncodedExample:
    """Fixed-length index sequence with its unpadded length and class label."""

    indices: np.ndarray
    true_length: int
    label: int = -1


def encode(
    tokens: Sequence[str],
    vocab: Vocabulary,
    seq_len: int,
    label: int = -1,
) -> EncodedExample:
    """Map tokens to indices, truncate to seq_len, right-pad with PAD."""
    if seq_len < 1:
        raise PipelineError(f"seq_len must be >= 1, got {seq_len}")
    kept = tokens[:seq_len]
    indices = np.full(seq_len, PAD_INDEX, dtype=np.int64)
    for i, tok in enumerate(kept):
        indices[i] = vocab.lookup(tok)
    return EncodedExample(indices=indices, true_length=len(kept), label=label)


def read_tsv(path: str) -> List[RawTweet]:
    """Read a raw corpus TSV with header ``id<TAB>text<TAB>label``."""
    tweets = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header.split("\t") != ["id", "text", "label"]:
            raise PipelineError(f"{path}: expected header 'id\\ttext\\tlabel', got {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise PipelineError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            tweets.append(RawTweet(id=fields[0], text=fields[1], label=fields[2] or None))
    return tweets
