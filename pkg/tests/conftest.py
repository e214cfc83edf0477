import os

import numpy as np
import pytest

from crisisclass import build_vocabulary, load_dataset
from crisisclass.cli import _encode_dataset
from crisisclass.text_pipeline import clean_text, load_stopwords, tokenize

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture(scope="session")
def toy_corpus(stopwords):
    """The bundled 50-example separable corpus: (examples, vocab)."""
    tweets, _ = load_dataset(data_path("toy_separable.tsv"))
    vocab = build_vocabulary([tokenize(clean_text(t.text, stopwords)) for t in tweets])
    examples = _encode_dataset(tweets, stopwords, vocab, 30, False, False)
    return examples, vocab


@pytest.fixture(scope="session")
def mini_corpus(stopwords):
    """The bundled ~700-example imbalanced corpus: (train, dev, test, vocab)."""
    train, _ = load_dataset(data_path("mini_train.tsv"))
    dev, _ = load_dataset(data_path("mini_dev.tsv"))
    test, _ = load_dataset(data_path("mini_test.tsv"))
    vocab = build_vocabulary([tokenize(clean_text(t.text, stopwords)) for t in train])

    def enc(tweets):
        return _encode_dataset(tweets, stopwords, vocab, 30, False, False)

    return enc(train), enc(dev), enc(test), vocab
