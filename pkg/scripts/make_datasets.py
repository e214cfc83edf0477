"""Generate the bundled synthetic corpora and the toy embedding file.

Outputs (under data/):
  toy_separable.tsv       50 examples, 7 classes, trivially separable
  mini_train.tsv          700 examples, class-imbalanced crisis-style corpus
  mini_dev.tsv            140 examples
  mini_test.tsv           140 examples
  toy_embedding_50d.txt   headerless 50-d embedding covering most of the vocab

Deterministic: re-running reproduces the same bytes.
"""

import os

import numpy as np

CLASS_KEYS = [
    "injured_or_dead_people",
    "missing_trapped_or_found_people",
    "infrastructure_and_utilities_damages",
    "sympathy_and_emotional_support",
    "donation_needs_or_offers_or_volunteering_services",
    "other_useful_information",
    "irrelevant",
]

CLASS_WORDS = [
    ["injured", "dead", "casualties", "killed", "victims", "wounded", "hospital", "bodies"],
    ["missing", "trapped", "found", "rescued", "search", "survivor", "rubble", "located"],
    ["damaged", "collapsed", "bridge", "roads", "power", "buildings", "destroyed", "outage"],
    ["prayers", "thoughts", "heartbroken", "stay", "strong", "sympathy", "condolences", "hope"],
    ["donate", "volunteers", "relief", "funds", "blood", "shelter", "supplies", "redcross"],
    ["update", "magnitude", "report", "alert", "warning", "news", "aftershock", "evacuation"],
    ["movie", "game", "coffee", "weekend", "music", "birthday", "shopping", "selfie"],
]

FILLER_WORDS = [
    "nepal", "city", "area", "people", "today", "morning", "quake", "flood",
    "storm", "region", "village", "team", "local", "emergency", "everyone",
    "night", "river", "coast", "families", "water",
]

NOISE_SNIPPETS = ["http://t.co/{}", "#crisis", "#breaking", "\U0001F64F", "\U0001F622", "!!!"]

STOPPERS = ["the", "a", "for", "in", "and", "to", "of", "is"]

# Train-set class proportions follow a heavily imbalanced 7-class corpus
# (roughly 8.5 / 4 / 3.6 / 8 / 12.5 / 30 / 33 percent).
MINI_TRAIN_COUNTS = [60, 28, 25, 57, 87, 211, 232]
MINI_DEV_COUNTS = [12, 6, 5, 11, 17, 42, 47]
MINI_TEST_COUNTS = [12, 6, 5, 11, 17, 42, 47]
TOY_COUNTS = [8, 7, 7, 7, 7, 7, 7]


def make_tweet(rng: np.random.Generator, cls: int, noisy: bool) -> str:
    n_class = int(rng.integers(3, 7))
    n_fill = int(rng.integers(1, 4))
    words = [CLASS_WORDS[cls][int(rng.integers(len(CLASS_WORDS[cls])))] for _ in range(n_class)]
    words += [FILLER_WORDS[int(rng.integers(len(FILLER_WORDS)))] for _ in range(n_fill)]
    words += [STOPPERS[int(rng.integers(len(STOPPERS)))] for _ in range(int(rng.integers(0, 3)))]
    rng.shuffle(words)
    if noisy and rng.random() < 0.4:
        snippet = NOISE_SNIPPETS[int(rng.integers(len(NOISE_SNIPPETS)))]
        words.insert(int(rng.integers(len(words) + 1)), snippet.format(rng.integers(10000)))
    if rng.random() < 0.3:
        pos = int(rng.integers(len(words)))
        words[pos] = words[pos].capitalize()
    return " ".join(words)


def write_split(path: str, counts, rng: np.random.Generator, prefix: str, noisy: bool = True):
    rows = []
    serial = 0
    for cls, count in enumerate(counts):
        for _ in range(count):
            rows.append((f"{prefix}{serial:05d}", make_tweet(rng, cls, noisy), CLASS_KEYS[cls]))
            serial += 1
    order = rng.permutation(len(rows))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("id\ttext\tlabel\n")
        for j in order:
            f.write("\t".join(rows[j]) + "\n")
    print(f"wrote {path} ({len(rows)} rows)")


def write_toy(path: str, rng: np.random.Generator):
    rows = []
    serial = 0
    for cls, count in enumerate(TOY_COUNTS):
        for _ in range(count):
            n = int(rng.integers(3, 6))
            words = [CLASS_WORDS[cls][int(rng.integers(len(CLASS_WORDS[cls])))] for _ in range(n)]
            rows.append((f"toy{serial:03d}", " ".join(words), CLASS_KEYS[cls]))
            serial += 1
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("id\ttext\tlabel\n")
        for row in rows:
            f.write("\t".join(row) + "\n")
    print(f"wrote {path} ({len(rows)} rows)")


def write_embedding(path: str, rng: np.random.Generator, dim: int = 50):
    words = sorted({w for pool in CLASS_WORDS for w in pool} | set(FILLER_WORDS))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for i, word in enumerate(words):
            if i % 10 == 9:
                continue  # leave ~10% of the vocabulary OOV
            vec = rng.uniform(-0.5, 0.5, dim)
            f.write(word + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
    print(f"wrote {path}")


def main():
    out_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(20260823)
    write_toy(os.path.join(out_dir, "toy_separable.tsv"), rng)
    write_split(os.path.join(out_dir, "mini_train.tsv"), MINI_TRAIN_COUNTS, rng, "tr")
    write_split(os.path.join(out_dir, "mini_dev.tsv"), MINI_DEV_COUNTS, rng, "dv")
    write_split(os.path.join(out_dir, "mini_test.tsv"), MINI_TEST_COUNTS, rng, "te")
    write_embedding(os.path.join(out_dir, "toy_embedding_50d.txt"), rng)


if __name__ == "__main__":
    main()
