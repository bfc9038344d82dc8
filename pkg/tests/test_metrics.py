import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from falldet.metrics import EvalReport, confusion, evaluate, render_table, report

from oracles import recount

labels = st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), min_size=1, max_size=80)


def test_identical_labels_give_diagonal_matrix():
    y = np.arange(12).repeat(3)
    cm = confusion(y, y)
    np.testing.assert_array_equal(cm, np.diag(np.full(12, 3)))


def test_confusion_hand_count():
    cm = confusion([0, 0, 1], [0, 1, 1])
    assert (cm[0, 0], cm[0, 1], cm[1, 1]) == (1, 1, 1)
    assert cm.sum() == 3


@pytest.mark.parametrize("t,p", [([0, 1], [0]), ([0, 12], [0, 1]), ([-1], [0]), ([0], [12])])
def test_confusion_errors(t, p):
    with pytest.raises(ValueError):
        confusion(t, p)


@given(labels)
def test_confusion_matches_recount(pairs):
    t, p = map(list, zip(*pairs))
    cm = confusion(t, p)
    assert cm.tolist() == recount(t, p)
    assert cm.sum() == len(t) and cm.min() >= 0


def test_perfect_predictions_score_one():
    r = evaluate(np.arange(12), np.arange(12))
    assert r.accuracy == 1.0
    assert r.macro == r.weighted == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_two_class_hand_example():
    r = report(np.array([[1, 1], [0, 1]]))
    np.testing.assert_allclose(r.precision, [1.0, 0.5], atol=1e-12)
    np.testing.assert_allclose(r.recall, [0.5, 1.0], atol=1e-12)
    np.testing.assert_allclose(r.f1, [2 / 3, 2 / 3], atol=1e-12)
    assert r.accuracy == pytest.approx(2 / 3, abs=1e-12)
    # supports 2 and 1
    assert r.weighted["precision"] == pytest.approx((2 * 1.0 + 1 * 0.5) / 3, abs=1e-12)
    assert r.macro["recall"] == pytest.approx(0.75, abs=1e-12)
    assert not r.zero_support_warning


def test_zero_support_class_counts_as_zero_and_sets_flag():
    cm = np.array([[2, 0, 0], [0, 2, 0], [0, 0, 0]])
    r = report(cm, average="macro")
    assert r.zero_support_warning
    assert r.recall[2] == 0.0 and r.f1[2] == 0.0
    assert r.macro["recall"] == pytest.approx(2 / 3, abs=1e-12)
    assert r.weighted["recall"] == pytest.approx(1.0, abs=1e-12)
    assert r.headline["recall"] == r.macro["recall"]


@pytest.mark.parametrize("cm", [np.zeros((0, 0)), np.zeros((3, 3)), np.zeros((2, 3))])
def test_report_rejects_empty_or_malformed(cm):
    with pytest.raises(ValueError):
        report(cm)


def test_report_rejects_unknown_average_and_configuration():
    with pytest.raises(ValueError):
        report(np.eye(2), average="micro")
    with pytest.raises(ValueError):
        report(np.eye(2), configuration="C3")


@given(labels, st.randoms(use_true_random=False))
def test_report_invariant_under_joint_permutation(pairs, rnd):
    t, p = map(np.array, zip(*pairs))
    perm = list(range(len(t)))
    rnd.shuffle(perm)
    assert evaluate(t, p).to_dict() == evaluate(t[perm], p[perm]).to_dict()


@given(labels)
def test_accuracy_equals_weighted_recall_and_values_in_unit_interval(pairs):
    t, p = zip(*pairs)
    r = evaluate(t, p)
    assert abs(r.accuracy - r.weighted["recall"]) <= 1e-12
    values = [r.accuracy, *r.precision, *r.recall, *r.f1, *r.macro.values(), *r.weighted.values()]
    assert all(0.0 <= v <= 1.0 for v in values)
    for pr, rc, f in zip(r.precision, r.recall, r.f1):
        assert f == (0.0 if pr + rc == 0 else pytest.approx(2 * pr * rc / (pr + rc), abs=1e-12))


def test_report_json_round_trip():
    r = evaluate([0, 1, 2, 2], [0, 2, 2, 2], configuration="S+C1+C2")
    back = EvalReport.from_dict(json.loads(r.to_json()))
    assert back == r
    assert back.configuration == "S+C1+C2"


def test_render_table_layout():
    text = render_table([("S", "sensor-mlp", 0.95, 0.9512, 0.95, 0.949)], title="demo")
    lines = text.splitlines()
    assert lines[0] == "demo"
    assert "Accuracy" in lines[2] and "F1-Score" in lines[2]
    assert "| 95.00 " in lines[4] and "| 95.12 " in lines[4] and "94.90" in lines[4]
    assert len({len(l) for l in lines[1:]}) == 1
