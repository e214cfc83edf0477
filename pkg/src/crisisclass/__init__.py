"""crisisclass: tweet classification toolkit for crisis response.

CNN and Bi-LSTM classifiers over pretrained word embeddings, implemented
on numpy with hand-written backpropagation, deterministic training, and
macro-F1 evaluation.
"""

__version__ = "0.1.0"

from .text_pipeline import (
    EncodedExample,
    RawTweet,
    Vocabulary,
    build_vocabulary,
    clean_text,
    encode,
    load_stopwords,
    tokenize,
)
from .embeddings import EmbeddingMatrix, KeyedVectors, build_matrix, load_embeddings, lookup
from .models import Model, ModelConfig, build_model, forward, predict
from .training import TrainConfig, TrainHistory, minibatches, optimizer_step, train
from .evaluation import (
    CLASS_KEYS,
    ConfusionMatrix,
    MetricsReport,
    confusion,
    f1_from_counts,
    load_dataset,
    metrics_report,
)
from .checkpoint import load_checkpoint, save_checkpoint
