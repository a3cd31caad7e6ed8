import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualdomain.evalmetrics import (
    UndefinedMetricError,
    accuracy,
    auc_ovr,
    confusion,
    specificity,
)
from dualdomain.numerics import RngStream


def brute_force_auc(scores, positives):
    """Exhaustive pair counting: the oracle the rank formulation must match."""
    pos = scores[positives]
    neg = scores[~positives]
    if len(pos) == 0 or len(neg) == 0:
        return None
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def brute_force_macro_auc(scores, labels):
    vals = []
    for c in range(4):
        v = brute_force_auc(scores[:, c], labels == c)
        if v is not None:
            vals.append(v)
    return float(np.mean(vals))


def test_confusion_diagonal_when_perfect():
    labels = np.array([0, 0, 1, 2, 3, 3, 3])
    cm = confusion(labels, labels)
    assert np.array_equal(np.diag(cm), [2, 1, 1, 3])
    assert cm.sum() == 7 and np.trace(cm) == 7


def test_confusion_hand_tally():
    cm = confusion(preds=[1, 1, 2, 2], labels=[0, 1, 2, 3])
    expected = np.zeros((4, 4), dtype=np.int64)
    expected[0, 1] = 1
    expected[1, 1] = 1
    expected[2, 2] = 1
    expected[3, 2] = 1
    assert np.array_equal(cm, expected)


def test_confusion_empty():
    assert not confusion([], []).any()


def test_confusion_length_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        confusion([0, 1], [0])


def test_confusion_row_sums_are_true_counts():
    rng = RngStream(3)
    labels = np.array([rng.randint(0, 4) for _ in range(200)])
    preds = np.array([rng.randint(0, 4) for _ in range(200)])
    cm = confusion(preds, labels)
    for c in range(4):
        assert cm[c].sum() == int((labels == c).sum())


def test_accuracy_cases():
    labels = np.array([0, 1, 2, 3])
    assert accuracy(confusion(labels, labels)) == 1.0
    assert accuracy(confusion([1, 1, 2, 2], [0, 1, 2, 3])) == 0.5
    # uniform off-diagonal confusion, zero diagonal
    cm = np.ones((4, 4), dtype=np.int64) - np.eye(4, dtype=np.int64)
    assert accuracy(cm) == 0.0
    with pytest.raises(ValueError):
        accuracy(np.zeros((4, 4), dtype=np.int64))


def test_specificity_perfect():
    labels = np.array([0, 1, 2, 3, 0, 1, 2, 3])
    assert specificity(confusion(labels, labels)) == 1.0


def test_specificity_binary_collapsed_hand_case():
    # true class 0: 5 correct, 5 predicted as 1; true class 1: 10 correct
    cm = np.zeros((4, 4), dtype=np.int64)
    cm[0, 0], cm[0, 1], cm[1, 1] = 5, 5, 10
    # class 0: TN=10, FP=0 -> 1.0 ; class 1: TN=5, FP=5 -> 0.5 ; classes 2,3 inactive
    assert specificity(cm) == pytest.approx(0.75, abs=0)


def test_specificity_single_sink_class():
    # balanced truth, everything predicted as class 2
    labels = np.array([0, 1, 2, 3] * 5)
    preds = np.full(20, 2)
    # class 2: TN=0 -> 0 ; other classes: FP=0 -> 1 ; macro 0.75
    assert specificity(confusion(preds, labels)) == pytest.approx(0.75, abs=0)


def test_specificity_undefined_when_one_class_only():
    cm = np.zeros((4, 4), dtype=np.int64)
    cm[1, 1] = 9
    with pytest.raises(UndefinedMetricError):
        specificity(cm)


def test_auc_perfect_separation():
    labels = np.array([1, 1, 0, 0])
    scores = np.zeros((4, 4))
    scores[:, 1] = [0.9, 0.8, 0.7, 0.1]
    scores[:, 0] = 1.0 - scores[:, 1]
    got = auc_ovr(scores, labels)
    # class 1 separates perfectly and class 0 by symmetry: macro 1.0
    assert got == pytest.approx(1.0, abs=0)


def test_auc_three_quarters_hand_case():
    labels = np.array([1, 1, 0, 0])
    scores = np.zeros((4, 4))
    scores[:, 1] = [0.9, 0.4, 0.7, 0.1]
    scores[:, 0] = 1.0 - scores[:, 1]
    # class-1 pairs: (0.9,0.7) (0.9,0.1) (0.4,0.7) (0.4,0.1) -> 3 of 4 win
    class1 = brute_force_auc(scores[:, 1], labels == 1)
    assert class1 == pytest.approx(0.75, abs=0)
    assert auc_ovr(scores, labels) == pytest.approx(brute_force_macro_auc(scores, labels), abs=0)


def test_auc_all_ties():
    labels = np.array([0, 1, 2, 3, 0, 1])
    scores = np.full((6, 4), 0.25)
    assert auc_ovr(scores, labels) == pytest.approx(0.5, abs=0)


def test_auc_matches_pair_counting_on_random_sets():
    rng = RngStream(17)
    for trial in range(25):
        n = rng.randint(5, 120)
        labels = np.array([rng.randint(0, 4) for _ in range(n)])
        raw = rng.uniforms(n * 4).reshape(n, 4)
        # quantize some trials to force ties
        if trial % 3 == 0:
            raw = np.round(raw, 1)
        scores = raw / raw.sum(axis=1, keepdims=True)
        if len(np.unique(labels)) < 2:
            continue
        assert auc_ovr(scores, labels) == pytest.approx(
            brute_force_macro_auc(scores, labels), abs=1e-12
        )


def test_auc_undefined_single_class():
    with pytest.raises(UndefinedMetricError):
        auc_ovr(np.full((3, 4), 0.25), np.array([2, 2, 2]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=4, max_size=60), st.permutations([0, 1, 2, 3]))
def test_metrics_invariant_under_class_relabeling(label_list, perm):
    labels = np.array(label_list)
    rng = RngStream(hash(tuple(label_list)) & 0xFFFF)
    preds = np.array([rng.randint(0, 4) for _ in range(len(labels))])
    scores = rng.uniforms(len(labels) * 4).reshape(-1, 4)
    scores /= scores.sum(axis=1, keepdims=True)

    perm = np.array(perm)
    cm = confusion(preds, labels)
    cm_perm = confusion(perm[preds], perm[labels])
    inv = np.argsort(perm)
    # cm_perm[i, j] counts (true=inv[i], pred=inv[j]) under the old labeling
    assert np.array_equal(cm_perm, cm[np.ix_(inv, inv)])

    assert accuracy(cm_perm) == pytest.approx(accuracy(cm), abs=0)
    try:
        s = specificity(cm)
    except UndefinedMetricError:
        s = None
    if s is not None:
        assert specificity(cm_perm) == pytest.approx(s, abs=1e-12)
    if len(np.unique(labels)) >= 2:
        permuted_scores = scores[:, inv]
        assert auc_ovr(permuted_scores, perm[labels]) == pytest.approx(
            auc_ovr(scores, labels), abs=1e-12
        )
