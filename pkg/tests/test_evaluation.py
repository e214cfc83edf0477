import numpy as np
import pytest
from sklearn.metrics import accuracy_score, f1_score, precision_recall_fscore_support

from crisisclass.evaluation import (
    CLASS_KEYS,
    DatasetError,
    MetricsError,
    confusion,
    f1_from_counts,
    load_dataset,
    metrics_report,
)
from crisisclass.selfcheck import brute_force_counts

TABLE_TRAIN = [1611, 741, 676, 1526, 2352, 5690, 6254]
TABLE_DEV = [487, 221, 177, 436, 712, 1623, 1756]
TABLE_TEST = [233, 106, 94, 232, 350, 766, 886]


def write_fixture(path, counts):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("id\ttext\tlabel\n")
        n = 0
        for cls, count in enumerate(counts):
            for _ in range(count):
                f.write(f"t{n}\tsome tweet text {n}\t{CLASS_KEYS[cls]}\n")
                n += 1
    return str(path)


class TestLoadDataset:
    def test_train_fixture_counts(self, tmp_path):
        path = write_fixture(tmp_path / "train.tsv", TABLE_TRAIN)
        tweets, counts = load_dataset(path)
        assert counts == TABLE_TRAIN
        assert len(tweets) == 18850

    def test_test_fixture_total(self, tmp_path):
        path = write_fixture(tmp_path / "test.tsv", TABLE_TEST)
        tweets, _ = load_dataset(path)
        assert len(tweets) == 2667

    def test_empty_after_header(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("id\ttext\tlabel\n", encoding="utf-8")
        tweets, counts = load_dataset(str(path))
        assert tweets == [] and counts == [0] * 7

    def test_unknown_label_names_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("id\ttext\tlabel\na\tx\tirrelevant\nb\ty\tbogus\n", encoding="utf-8")
        with pytest.raises(DatasetError, match=":3"):
            load_dataset(str(path))


class TestConfusion:
    def test_direct_count(self):
        cm = confusion([0, 0], [0, 1])
        assert cm.tp(0) == 1 and cm.fn(0) == 1 and cm.fp(1) == 1

    def test_perfect_is_diagonal(self):
        golds = list(range(7)) * 2
        cm = confusion(golds, golds)
        assert np.array_equal(cm.counts, np.diag([2] * 7))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        golds = rng.integers(0, 7, 500)
        preds = rng.integers(0, 7, 500)
        cm = confusion(golds, preds)
        for c, (tp, fp, fn) in enumerate(brute_force_counts(golds.tolist(), preds.tolist(), 7)):
            assert (cm.tp(c), cm.fp(c), cm.fn(c)) == (tp, fp, fn)

    def test_length_mismatch(self):
        with pytest.raises(MetricsError):
            confusion([0, 1], [0])

    def test_out_of_range(self):
        with pytest.raises(MetricsError):
            confusion([0, 9], [0, 1])

    def test_tp_fp_and_tp_fn_sums_equal_n(self):
        rng = np.random.default_rng(1)
        golds = rng.integers(0, 7, 200)
        preds = rng.integers(0, 7, 200)
        cm = confusion(golds, preds)
        assert sum(cm.tp(c) + cm.fp(c) for c in range(7)) == 200
        assert sum(cm.tp(c) + cm.fn(c) for c in range(7)) == 200


class TestF1:
    @pytest.mark.parametrize("tp,fp,fn,expected", [
        (1, 0, 0, 1.0),
        (2, 1, 1, 4 / 6),
        (0, 3, 0, 0.0),
        (0, 0, 0, 0.0),
    ])
    def test_values(self, tp, fp, fn, expected):
        assert f1_from_counts(tp, fp, fn) == pytest.approx(expected, abs=1e-15)

    def test_harmonic_mean_identity(self):
        # 2TP/(2TP+FP+FN) == 2PR/(P+R) whenever P+R > 0
        rng = np.random.default_rng(2)
        for _ in range(200):
            tp, fp, fn = (int(v) for v in rng.integers(0, 50, 3))
            if tp + fp == 0 or tp + fn == 0:
                continue
            p, r = tp / (tp + fp), tp / (tp + fn)
            if p + r == 0:
                continue
            assert abs(f1_from_counts(tp, fp, fn) - 2 * p * r / (p + r)) < 1e-12

    def test_f1_between_precision_and_recall(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            tp, fp, fn = (int(v) for v in rng.integers(1, 50, 3))
            p, r = tp / (tp + fp), tp / (tp + fn)
            f1 = f1_from_counts(tp, fp, fn)
            assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12


class TestMetricsReport:
    def test_perfect(self):
        golds = list(range(7)) * 3
        report = metrics_report(confusion(golds, golds))
        assert report.macro_f1 == 1.0
        assert report.weighted_f1 == 1.0
        assert report.accuracy == 1.0

    def test_majority_class_collapse(self):
        # 14 examples, 2 per class, everything predicted as class 6:
        # F1_6 = 2*2/(2+14) = 0.25, macro = 0.25/7
        golds = [c for c in range(7) for _ in range(2)]
        preds = [6] * 14
        report = metrics_report(confusion(golds, preds))
        assert report.per_class[6].f1 == pytest.approx(0.25, abs=1e-15)
        assert report.macro_f1 == pytest.approx(0.25 / 7, abs=1e-15)

    def test_matches_sklearn(self):
        rng = np.random.default_rng(4)
        golds = rng.integers(0, 7, 400)
        preds = rng.integers(0, 7, 400)
        report = metrics_report(confusion(golds, preds))
        p, r, f1, _ = precision_recall_fscore_support(
            golds, preds, labels=range(7), zero_division=0)
        for c in range(7):
            assert abs(report.per_class[c].precision - p[c]) < 1e-12
            assert abs(report.per_class[c].recall - r[c]) < 1e-12
            assert abs(report.per_class[c].f1 - f1[c]) < 1e-12
        assert abs(report.macro_f1 - f1_score(golds, preds, average="macro", zero_division=0)) < 1e-12
        assert abs(report.weighted_f1 - f1_score(golds, preds, average="weighted", zero_division=0)) < 1e-12
        assert abs(report.accuracy - accuracy_score(golds, preds)) < 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        golds = rng.integers(0, 7, 100)
        preds = rng.integers(0, 7, 100)
        perm = rng.permutation(100)
        a = metrics_report(confusion(golds, preds))
        b = metrics_report(confusion(golds[perm], preds[perm]))
        assert a.to_dict() == b.to_dict()

    def test_exclusion_flag(self):
        golds = [c for c in range(7) for _ in range(2)]
        report = metrics_report(confusion(golds, golds), exclude=[6])
        assert report.macro_f1 == 1.0
        assert len(report.per_class) == 7  # still listed per class

    def test_empty_matrix_rejected(self):
        with pytest.raises(MetricsError):
            metrics_report(confusion([], []))

    def test_report_serialization(self):
        golds = list(range(7))
        report = metrics_report(confusion(golds, golds))
        d = report.to_dict()
        assert d["macro_f1"] == 1.0
        assert d["per_class"][0]["class"] == CLASS_KEYS[0]
        assert "macro_f1" in report.to_text()
