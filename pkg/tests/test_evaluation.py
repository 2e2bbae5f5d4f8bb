from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beanscope.classifier import (DEFECTIVE, QUALIFIED, LabeledSample, LinearModel,
                                  MulticlassModel, TrainConfig, predict_site, train_binary)
from beanscope.errors import DegenerateSplit, EmptyTestSet
from beanscope.evaluation import (ConfusionMatrix, EvaluationReport, confusion_matrix,
                                  default_ratios, evaluate_binary, format_percent,
                                  parse_ratios, ratio_sweep, run_once, stratified_split,
                                  train_count)
from beanscope.features import FeatureVector, two
from beanscope.imaging import Channel
from beanscope.seeding import derive_seed

TWO_R = two(Channel.RED)


def labeled(n_q, n_d, seed=0):
    rng = np.random.default_rng(seed)
    out = [LabeledSample(FeatureVector(TWO_R, rng.normal(-2, 1, 2), f"q{k}"), QUALIFIED)
           for k in range(n_q)]
    out += [LabeledSample(FeatureVector(TWO_R, rng.normal(2, 1, 2), f"d{k}"), DEFECTIVE)
            for k in range(n_d)]
    return out


def counts(data):
    return (sum(s.label == QUALIFIED for s in data), sum(s.label == DEFECTIVE for s in data))


def test_split_300_at_04():
    split = stratified_split(labeled(300, 300), 0.4, seed=1)
    assert counts(split.train) == (120, 120)
    assert counts(split.test) == (180, 180)


def test_split_10_at_05_disjoint_and_complete():
    data = labeled(10, 10)
    split = stratified_split(data, 0.5, seed=2)
    assert counts(split.train) == (5, 5) and counts(split.test) == (5, 5)
    ids_train = {s.features.bean_id for s in split.train}
    ids_test = {s.features.bean_id for s in split.test}
    assert not ids_train & ids_test
    assert ids_train | ids_test == {s.features.bean_id for s in data}


def test_split_218_at_005_rounds_half_up():
    split = stratified_split(labeled(218, 218), 0.05, seed=3)
    assert counts(split.train) == (11, 11)
    assert counts(split.test) == (207, 207)


def test_train_count_rounding():
    assert train_count(0.05, 218) == 11   # 10.9
    assert train_count(0.05, 10) == 1     # 0.5 rounds up
    assert train_count(0.15, 10) == 2     # 1.5 on the decimal form, not 1.4999...
    assert train_count(0.4, 300) == 120


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.integers(2, 60), st.integers(5, 95), st.integers(0, 2**32 - 1))
def test_split_partition_property(n_q, n_d, pct, seed):
    data = labeled(n_q, n_d)
    ratio = pct / 100
    try:
        split = stratified_split(data, ratio, seed)
    except DegenerateSplit:
        for n in (n_q, n_d):
            k = train_count(ratio, n)
            if 1 <= k < n:
                continue
            return
        raise
    assert counts(split.train) == (train_count(ratio, n_q), train_count(ratio, n_d))
    assert len(split.train) + len(split.test) == len(data)
    assert {id(s) for s in split.train}.isdisjoint({id(s) for s in split.test})
    again = stratified_split(data, ratio, seed)
    assert [id(s) for s in again.train] == [id(s) for s in split.train]


def test_degenerate_split():
    with pytest.raises(DegenerateSplit):
        stratified_split(labeled(10, 10), 1.0, 0)
    with pytest.raises(DegenerateSplit):
        stratified_split(labeled(3, 3), 0.05, 0)


def test_accuracy_examples():
    rep = EvaluationReport(pq=150, pd=146, test_total=360)
    assert rep.accuracy_fraction == Fraction(296, 360)
    assert format_percent(rep.accuracy) == "82.22%"


def test_perfect_and_constant_models():
    test = labeled(20, 20)
    perfect = LinearModel.identity(TWO_R, [1, 1], 0.0)
    assert evaluate_binary(perfect, test).accuracy == 1.0
    always_defective = LinearModel.identity(TWO_R, [0, 0], -1.0)
    rep = evaluate_binary(always_defective, test)
    assert (rep.pq, rep.pd, rep.accuracy) == (0, 20, 0.5)


def test_empty_test_set():
    with pytest.raises(EmptyTestSet):
        evaluate_binary(LinearModel.identity(TWO_R, [1, 1], 0.0), [])


def test_reference_confusion_accuracy():
    cm = ConfusionMatrix(("site1", "site2", "site3"),
                         [[114, 30, 10], [23, 500, 15], [8, 22, 128]])
    assert cm.total == 850
    assert Fraction(int(np.trace(cm.counts)), cm.total) == Fraction(742, 850)
    assert abs(100 * cm.accuracy - 87.29) <= 0.01
    assert format_percent(cm.accuracy) == "87.29%"


def _site_model():
    pair = {("a", "b"): LinearModel.identity(TWO_R, [1, 0], 0.0, label_map=("a", "b")),
            ("a", "c"): LinearModel.identity(TWO_R, [0, 1], 0.0, label_map=("a", "c")),
            ("b", "c"): LinearModel.identity(TWO_R, [-1, 1], 0.0, label_map=("b", "c"))}
    return MulticlassModel(("a", "b", "c"), pair, TWO_R)


def test_perfect_two_class_confusion_is_diagonal():
    pair = {("a", "b"): LinearModel.identity(TWO_R, [1, 0], 0.0, label_map=("a", "b"))}
    model = MulticlassModel(("a", "b"), pair, TWO_R)
    test = [LabeledSample(FeatureVector(TWO_R, [x, 0]), "a" if x < 0 else "b")
            for x in (-3, -2, -1, 1, 2)]
    cm = confusion_matrix(model, test)
    assert cm.counts.tolist() == [[3, 0], [0, 2]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10))
def test_confusion_matches_hand_tally(seed, n):
    rng = np.random.default_rng(seed)
    model = _site_model()
    test = [LabeledSample(FeatureVector(TWO_R, rng.normal(size=2) * 3),
                          ("a", "b", "c")[int(rng.integers(3))]) for _ in range(n)]
    tally = {}
    for s in test:
        key = (s.label, predict_site(model, s.features))
        tally[key] = tally.get(key, 0) + 1
    cm = confusion_matrix(model, test)
    for i, t in enumerate(cm.classes):
        for j, p in enumerate(cm.classes):
            assert cm.counts[i, j] == tally.get((t, p), 0)
    assert cm.total == n


def test_ratio_grids():
    assert default_ratios() == [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5,
                                0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
    assert parse_ratios("0.05:0.95:0.05") == default_ratios()
    assert parse_ratios("0.1,0.4") == [0.1, 0.4]


def test_single_ratio_sweep_is_one_manual_run():
    data = labeled(40, 40, seed=4)
    cfg = TrainConfig(seed=11)
    result = ratio_sweep(data, [0.4], cfg, repeats=1)
    seed = derive_seed(11, 0, 0)
    split = stratified_split(data, 0.4, seed)
    model = train_binary(split.train, TrainConfig(cfg.c, cfg.tolerance, cfg.max_epochs, seed))
    manual = evaluate_binary(model, split.test)
    assert len(result.rows) == 1
    assert result.rows[0].accuracy == manual.accuracy
    assert result.runs[0].report == manual
    assert run_once(data, 0.4, seed, cfg)[1] == manual


def test_sweep_default_grid_and_repeats():
    data = labeled(40, 40, seed=5)
    result = ratio_sweep(data, cfg=TrainConfig(seed=1), repeats=2)
    assert len(result.rows) == 19 and len(result.runs) == 38
    assert [r.ratio for r in result.rows] == default_ratios()
    for k, row in enumerate(result.rows):
        accs = [run.report.accuracy for run in result.runs[2 * k:2 * k + 2]]
        assert row.accuracy == pytest.approx(np.mean(accs))
    assert result.spread == max(r.accuracy for r in result.rows) - \
        min(r.accuracy for r in result.rows)
    again = ratio_sweep(data, cfg=TrainConfig(seed=1), repeats=2)
    assert again.rows == result.rows


def test_sweep_degenerate_ratio_names_it():
    with pytest.raises(DegenerateSplit, match="0.05"):
        ratio_sweep(labeled(4, 4), [0.05, 0.5])
