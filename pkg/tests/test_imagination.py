from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clifer.classes import CLASSES, LabeledSequence
from clifer.errors import FitError, GenerationError, ProtocolError
from clifer.imagination import (
    OracleGenerator,
    SourceLeakGenerator,
    TranslationModel,
    fit_translation,
    imagine,
)


def one_hot_means(dim=6):
    return {c: np.eye(dim)[i] * 3.0 for i, c in enumerate(CLASSES)}


def test_fit_is_arithmetic_mean():
    support = [LabeledSequence("a", "happy", [[0.0, 2.0], [2.0, 0.0]])]
    support += [LabeledSequence("a", c, [[float(i), 0.0]]) for i, c in enumerate(CLASSES) if c != "happy"]
    model = fit_translation(support, 0.0)
    assert np.array_equal(model.class_means["happy"], [1.0, 1.0])
    # single frame per class: means equal those frames
    assert np.array_equal(model.class_means["sadness"], [5.0, 0.0])


def test_fit_pools_sequences_by_frame():
    support = [LabeledSequence("a", c, [[1.0]]) for c in CLASSES]
    support.append(LabeledSequence("b", "fear", [[4.0], [4.0], [4.0]]))
    model = fit_translation(support)
    assert model.class_means["fear"][0] == pytest.approx((1 + 12) / 4)


def test_fit_missing_class_named():
    support = [LabeledSequence("a", c, [[0.0]]) for c in CLASSES if c != "fear"]
    with pytest.raises(FitError, match="fear"):
        fit_translation(support)


def test_translation_exact_values():
    means = {c: np.zeros(2) for c in CLASSES}
    means["anger"] = np.array([3.0, 3.0])
    model = TranslationModel(means, 0.0)
    ((x, c),) = imagine(model, [(np.array([1.0, 1.0]), "neutral")], ["anger"], 1, seed=0)
    assert c == "anger" and np.array_equal(x, [4.0, 4.0])


def test_translation_of_class_mean_is_target_mean():
    means = one_hot_means()
    model = TranslationModel(means, 0.0)
    ((x, _),) = model.imagine([(means["neutral"], "neutral")], ["happy"], 1, 0)
    assert np.array_equal(x, means["happy"])


def test_counts_and_round_robin():
    model = TranslationModel(one_hot_means(), 0.0)
    protos = [(np.full(6, 10.0), "neutral"), (np.full(6, 20.0), "happy")]
    out = model.imagine(protos, CLASSES, 2, 0)
    assert len(out) == 12
    assert Counter(c for _, c in out) == {c: 2 for c in CLASSES}
    # prototypes alternate in input order across the whole request
    for k, (x, c) in enumerate(out):
        p, src = protos[k % 2]
        assert np.allclose(x, p - model.class_means[src] + model.class_means[c])


def test_errors():
    model = TranslationModel(one_hot_means(), 0.0)
    with pytest.raises(GenerationError):
        model.imagine([], CLASSES, 1, 0)
    with pytest.raises(ProtocolError):
        model.imagine([(np.zeros(6), "neutral")], ["disgust"], 1, 0)
    with pytest.raises(ProtocolError):
        model.imagine([(np.zeros(6), "contempt")], ["happy"], 1, 0)
    with pytest.raises(FitError):
        TranslationModel({"happy": np.zeros(6)})


vectors = arrays(np.float64, 6, elements=st.floats(-100, 100, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(vectors, st.sampled_from(CLASSES), st.sampled_from(CLASSES), st.sampled_from(CLASSES))
def test_zero_jitter_is_additive(p, src, c1, c2):
    model = TranslationModel(one_hot_means(), 0.0)
    ((x1, _),) = model.imagine([(p, src)], [c1], 1, 0)
    ((x2, _),) = model.imagine([(p, src)], [c2], 1, 0)
    assert np.allclose(x1 - x2, model.class_means[c1] - model.class_means[c2], atol=1e-9)
    ((same, _),) = model.imagine([(p, src)], [src], 1, 0)
    assert np.allclose(same, p, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(vectors, st.integers(0, 2**32), st.integers(0, 4))
def test_deterministic_given_seed(p, seed, n):
    model = TranslationModel(one_hot_means(), 0.3)
    a = model.imagine([(p, "fear")], CLASSES, n, seed)
    b = model.imagine([(p, "fear")], CLASSES, n, seed)
    assert len(a) == 6 * n
    assert all(np.array_equal(x, y) and c == d for (x, c), (y, d) in zip(a, b))


def test_jitter_scale():
    model = TranslationModel(one_hot_means(6), 0.5)
    p = np.zeros(6)
    out = model.imagine([(p, "neutral")], ["neutral"], 2000, 3)
    resid = np.array([x for x, _ in out])
    assert resid.std() == pytest.approx(0.5, rel=0.05)


def test_snapshot_round_trip():
    model = TranslationModel({c: np.random.default_rng(i).normal(size=5) for i, c in enumerate(CLASSES)}, 0.07)
    back = TranslationModel.from_dict(model.to_dict())
    assert back.jitter_sigma == model.jitter_sigma
    for c in CLASSES:
        assert np.array_equal(back.class_means[c], model.class_means[c])


def test_oracle_zero_sigma_returns_true_means():
    means = {"s1": one_hot_means()}
    out = OracleGenerator(means).oracle_imagine("s1", CLASSES, 1, 0.0, seed=4)
    assert [c for _, c in out] == list(CLASSES)
    for x, c in out:
        assert np.array_equal(x, means["s1"][c])


def test_oracle_counts_and_unknown_subject():
    oracle = OracleGenerator({"s1": one_hot_means()})
    assert len(oracle.oracle_imagine("s1", CLASSES, 3, 0.1, 0)) == 18
    with pytest.raises(LookupError):
        oracle.oracle_imagine("nobody", CLASSES, 1, 0.0, 0)
    with pytest.raises(LookupError):
        oracle.for_subject("nobody")


def test_subject_oracle_ignores_prototypes():
    oracle = OracleGenerator({"s1": one_hot_means()})
    bound = oracle.for_subject("s1")
    out = bound.imagine([(np.full(6, 9.0), "fear")], ["happy"], 1, 0)
    assert np.array_equal(out[0][0], one_hot_means()["happy"])


def test_source_leak_blend():
    base = TranslationModel(one_hot_means(), 0.0)
    p = np.full(6, 2.0)
    clean = base.imagine([(p, "fear")], ["happy"], 1, 0)[0][0]
    leaky = SourceLeakGenerator(base, {"fear": 0.25}).imagine([(p, "fear")], ["happy"], 1, 0)[0][0]
    assert np.allclose(leaky, 0.75 * clean + 0.25 * p)
    untouched = SourceLeakGenerator(base, {"anger": 1.0}).imagine([(p, "fear")], ["happy"], 1, 0)[0][0]
    assert np.array_equal(untouched, clean)
