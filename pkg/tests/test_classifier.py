import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beanscope.classifier import (DEFECTIVE, QUALIFIED, LabeledSample, LinearModel,
                                  MulticlassModel, TrainConfig, decision_value, objective,
                                  optimal_bias, predict, predict_site, site_votes,
                                  train_binary, train_multiclass)
from beanscope.dataset import feature_records, samples, snapshot_beans
from beanscope.errors import FewerThanTwoClasses, SchemeMismatch, SingleClassTrainingSet
from beanscope.features import SIX, FeatureVector, two
from beanscope.imaging import Channel
from beanscope.synth import render_dataset
from oracles import primal, standardize

TWO_R = two(Channel.RED)


def fv(values, scheme=TWO_R):
    return FeatureVector(scheme, values)


def sample(values, label, scheme=TWO_R):
    return LabeledSample(fv(values, scheme), label)


def accuracy(model, data):
    return np.mean([predict(model, s.features) == s.label for s in data])


def test_decision_value_examples():
    m = LinearModel.identity(TWO_R, [1, 0], 0.0)
    assert decision_value(m, fv([-1, 7])) == -1
    zero = LinearModel.identity(SIX, np.zeros(6), 0.0)
    assert decision_value(zero, fv(np.arange(6.0), SIX)) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_decision_value_matches_loop(seed):
    rng = np.random.default_rng(seed)
    w, x = rng.normal(size=6), rng.normal(size=6) * 50
    shift, scale = rng.normal(size=6), rng.uniform(0.5, 3, size=6)
    b = float(rng.normal())
    m = LinearModel(SIX, w, b, shift, scale)
    want = sum(w[j] * (x[j] - shift[j]) / scale[j] for j in range(6)) - b
    assert decision_value(m, fv(x, SIX)) == pytest.approx(want, abs=1e-12)


def test_predict_boundary():
    m = LinearModel.identity(TWO_R, [1, 0], 0.0)
    assert predict(m, fv([-1, 0])) == QUALIFIED
    assert predict(m, fv([0, 5])) == DEFECTIVE


def test_scheme_mismatch():
    m = LinearModel.identity(TWO_R, [1, 0], 0.0)
    with pytest.raises(SchemeMismatch):
        decision_value(m, fv([0, 0], two(Channel.BLUE)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_positive_rescaling_preserves_predictions(seed, factor):
    rng = np.random.default_rng(seed)
    m = LinearModel(SIX, rng.normal(size=6), float(rng.normal()), rng.normal(size=6),
                    rng.uniform(0.5, 2, size=6))
    for x in rng.normal(size=(20, 6)):
        if abs(decision_value(m, fv(x, SIX))) > 1e-9:
            assert predict(m, fv(x, SIX)) == predict(m.scaled(factor), fv(x, SIX))


def test_train_1d_toy():
    data = [sample([x, 0.0], QUALIFIED) for x in (-2, -1)] + \
           [sample([x, 0.0], DEFECTIVE) for x in (1, 2)]
    model = train_binary(data, TrainConfig(c=10))
    assert accuracy(model, data) == 1.0
    for s in data:
        z = decision_value(model, s.features)
        assert (z < 0) == (s.label == QUALIFIED)


def test_single_class_rejected():
    with pytest.raises(SingleClassTrainingSet):
        train_binary([sample([1, 2], QUALIFIED), sample([3, 4], QUALIFIED)])


def test_mixed_schemes_rejected():
    with pytest.raises(SchemeMismatch):
        train_binary([sample([1, 2], QUALIFIED),
                      sample([3, 4], DEFECTIVE, two(Channel.BLUE))])


def test_objective_examples():
    data = [sample([1, 2], QUALIFIED), sample([3, 1], DEFECTIVE), sample([0, 0], DEFECTIVE)]
    zero = LinearModel.identity(TWO_R, [0, 0], 0.0)
    assert objective(zero, data, c=2.5) == 2.5 * 3
    sep = LinearModel.identity(TWO_R, [4, 0], 0.0)
    clean = [sample([-1, 0], QUALIFIED), sample([1, 0], DEFECTIVE)]
    assert objective(sep, clean, c=3.0) == 8.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_objective_matches_direct_summation(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(12, 2)) * 10
    labels = [QUALIFIED, DEFECTIVE] * 6
    data = [sample(x, lab) for x, lab in zip(X, labels)]
    w, b = rng.normal(size=2), float(rng.normal())
    shift, scale = X.mean(axis=0), X.std(axis=0)
    m = LinearModel(TWO_R, w, b, shift, scale)
    y = np.array([-1.0 if lab == QUALIFIED else 1.0 for lab in labels])
    want = 0.5 * (w[0] ** 2 + w[1] ** 2)
    for xi, yi in zip(X, y):
        z = sum(w[j] * (xi[j] - shift[j]) / scale[j] for j in range(2)) - b
        want += c * max(0.0, 1.0 - yi * z)
    assert objective(m, data, c) == pytest.approx(want, rel=1e-10, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_bias_beats_dense_scan(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    scores = rng.normal(size=n) * 2
    y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    y[0], y[1] = -1.0, 1.0
    hinge = lambda b: np.maximum(0, 1 - y * (scores - b)).sum()  # noqa: E731
    best = min(hinge(b) for b in np.linspace(-10, 10, 20001))
    assert hinge(optimal_bias(scores, y)) <= best + 1e-9


def test_training_survives_simplex_polish():
    # a long Nelder-Mead polish from the trained point must not find a better primal
    from scipy.optimize import minimize

    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(-1, 1, size=(30, 2)), rng.normal(1, 1, size=(30, 2))])
    labels = [QUALIFIED] * 30 + [DEFECTIVE] * 30
    data = [sample(x, lab) for x, lab in zip(X, labels)]
    model = train_binary(data, TrainConfig(c=1.0, tolerance=1e-6))
    Xs = standardize(X)
    y = np.array([-1.0] * 30 + [1.0] * 30)
    got = objective(model, data, 1.0)
    assert got == pytest.approx(primal(model.weights, model.bias, Xs, y, 1.0), rel=1e-12)
    res = minimize(lambda p: primal(p[:2], p[2], Xs, y, 1.0),
                   np.r_[model.weights, model.bias], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    assert got <= res.fun * (1 + 1e-4)


def test_epoch_objectives_non_increasing():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 6)) * 5
    labels = [QUALIFIED if x[0] + 0.5 * rng.normal() < 0 else DEFECTIVE for x in X]
    model = train_binary([sample(x, lab, SIX) for x, lab in zip(X, labels)],
                         TrainConfig(seed=4))
    h = np.array(model.epoch_objectives)
    assert len(h) >= 1 and (np.diff(h) <= 0).all()


def test_training_is_deterministic():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 2))
    data = [sample(x, QUALIFIED if x[1] < 0 else DEFECTIVE) for x in X]
    a = train_binary(data, TrainConfig(seed=5))
    b = train_binary(data, TrainConfig(seed=5))
    assert a.weights.tolist() == b.weights.tolist() and a.bias == b.bias


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(c=0)
    with pytest.raises(ValueError):
        TrainConfig(seed=-1)


def test_site1_training_accuracy(profiles):
    sites, defects = profiles
    snaps = render_dataset([sites["default1"]], defects["default"], {"site1": (120, 120)}, 3)
    data = samples(feature_records(snapshot_beans(snaps), SIX))
    model = train_binary(data, TrainConfig(seed=3))
    assert accuracy(model, data) >= 0.95


# --- multiclass -----------------------------------------------------------

def site_sample(values, site):
    return LabeledSample(FeatureVector(TWO_R, values), site)


def blobs(rng, centres, n=30):
    out = []
    for name, centre in centres.items():
        out += [site_sample(rng.normal(centre, 1.0), name) for _ in range(n)]
    return out


def test_two_sites_reduce_to_binary():
    rng = np.random.default_rng(0)
    data = blobs(rng, {"a": (0, 0), "b": (4, 4)})
    model = train_multiclass(data, TrainConfig(seed=1))
    assert list(model.pairwise) == [("a", "b")]
    pair = model.pairwise[("a", "b")]
    for x in rng.normal(2, 3, size=(50, 2)):
        assert predict_site(model, fv(x)) == predict(pair, fv(x))


def test_three_sites_three_models_and_accuracy():
    rng = np.random.default_rng(1)
    data = blobs(rng, {"s1": (0, 0), "s2": (6, 0), "s3": (0, 6)}, n=100)
    model = train_multiclass(data, TrainConfig(seed=2))
    assert len(model.pairwise) == 3
    for (a, b), pair in model.pairwise.items():
        subset = [s for s in data if s.label in (a, b)]
        assert accuracy(pair, subset) >= 0.95


def test_unanimous_vote():
    rng = np.random.default_rng(2)
    model = train_multiclass(blobs(rng, {"s1": (0, 0), "s2": (6, 0), "s3": (0, 6)}),
                             TrainConfig(seed=2))
    votes, _ = site_votes(model, fv([6, 0]))
    assert votes["s2"] == 2
    assert predict_site(model, fv([6, 0])) == "s2"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vote_winner_matches_hand_tally(seed):
    rng = np.random.default_rng(seed)
    classes = ("a", "b", "c")
    pairwise = {(p, q): LinearModel.identity(TWO_R, rng.normal(size=2), float(rng.normal()),
                                             label_map=(p, q))
                for p, q in (("a", "b"), ("a", "c"), ("b", "c"))}
    model = MulticlassModel(classes, pairwise, TWO_R)
    x = rng.normal(size=2) * 3
    tally = {c: 0 for c in classes}
    margin = {c: 0.0 for c in classes}
    for (p, q), m in pairwise.items():
        z = m.weights @ x - m.bias
        winner = p if z < 0 else q
        tally[winner] += 1
        margin[winner] += abs(z)
    top = max(tally.values())
    leaders = [c for c in classes if tally[c] == top]
    expected = leaders[0] if len(leaders) == 1 else max(leaders, key=lambda c: margin[c])
    assert predict_site(model, fv(x)) == expected


def test_fewer_than_two_sites():
    with pytest.raises(FewerThanTwoClasses):
        train_multiclass([site_sample([0, 0], "a"), site_sample([1, 1], "a")])
