import logging

import numpy as np
import pytest

from clifer.classes import CLASSES
from clifer.datasets import SynthConfig, generate_synthetic, save_csv, split
from clifer.errors import ConfigError, DataError, DegenerateDataError
from clifer.harness import (
    ExperimentConfig,
    ImaginationConfig,
    load_subjects,
    make_generator,
    run_cell,
    run_experiment1,
    run_experiment2,
    run_order_sensitivity,
    six_start_orders,
)
from clifer.report import records_csv
from clifer.stats import ConfusionMatrix, macro_f1

SMALL = SynthConfig(subjects=3, sequences_per_class=4, frames_per_sequence=4, dim=12)


def small_cfg(**kw):
    kw.setdefault("synth", SMALL)
    kw.setdefault("seeds", (0, 1))
    return ExperimentConfig(**kw)


@pytest.fixture(scope="module")
def exp_pair():
    cfg = small_cfg(variants=("gdm", "gdm_replay", "clifer", "baseline"))
    return cfg, run_experiment1(cfg), run_experiment2(cfg)


def test_record_count():
    recs = run_experiment1(small_cfg(variants=("gdm", "baseline")))
    assert len(recs) == 2 * 3 * 2 * 6
    assert all(1 <= r.episode <= 6 for r in recs)


def test_exp1_first_episode_is_single_class(exp_pair):
    _, exp1, _ = exp_pair
    for r in exp1:
        if r.episode == 1 and r.variant != "clifer":
            # only one class is known and only that class is scored
            assert r.score("semantic") == 1.0 and r.score("episodic") == 1.0


def test_exp2_first_episode_gdm_matches_constant_predictor(exp_pair):
    cfg, _, exp2 = exp_pair
    subjects, _ = load_subjects(cfg, 0)
    for sub in subjects:
        truth = [s.label for s in sub.test.sequences]
        const = macro_f1(ConfusionMatrix.from_predictions(truth, [CLASSES[0]] * len(truth)))
        (r,) = [r for r in exp2 if r.variant == "gdm" and r.seed == 0 and r.subject_id == sub.subject_id and r.episode == 1]
        assert r.semantic_f1 == pytest.approx(const) and r.episodic_f1 == pytest.approx(const)


def test_final_episode_scores_agree_across_experiments(exp_pair):
    _, exp1, exp2 = exp_pair
    final1 = {(r.variant, r.subject_id, r.seed): r for r in exp1 if r.episode == 6}
    final2 = {(r.variant, r.subject_id, r.seed): r for r in exp2 if r.episode == 6}
    assert final1.keys() == final2.keys()
    for k, a in final1.items():
        b = final2[k]
        assert (a.episodic_f1, a.semantic_f1, a.f1) == (b.episodic_f1, b.semantic_f1, b.f1)


def test_scores_in_unit_interval(exp_pair):
    _, exp1, exp2 = exp_pair
    for r in exp1 + exp2:
        for v in (r.episodic_f1, r.semantic_f1, r.f1, r.first_class_semantic_f1):
            assert v is None or 0.0 <= v <= 1.0


def test_training_is_independent_of_evaluation():
    cfg = small_cfg(seeds=(0,))
    subjects, oracle = load_subjects(cfg, 0)
    a = run_cell(cfg, "clifer", subjects, subjects[0], 0, cfg.class_order, oracle)
    b = run_cell(cfg, "clifer", subjects, subjects[0], 0, cfg.class_order, oracle)
    assert a.model.to_json() == b.model.to_json()
    assert [r.semantic_f1 for r in a.exp2] == [r.semantic_f1 for r in b.exp2]


def test_audit_counts_and_no_leakage():
    cfg = small_cfg(seeds=(0,))
    subjects, oracle = load_subjects(cfg, 0)
    audits = {v: run_cell(cfg, v, subjects, subjects[1], 0, cfg.class_order, oracle).audit for v in ("gdm", "gdm_replay", "clifer")}
    assert all(a.leaks == 0 for a in audits.values())
    assert audits["gdm"].counts["replay"] == 0 and audits["gdm_replay"].counts["replay"] >= 1
    assert audits["gdm"].counts["learn"] == audits["gdm_replay"].counts["learn"]
    assert audits["clifer"].counts["imagine"] == 6 * 6 * cfg.imagination.n_per_class


def test_audit_flags_test_frames():
    from clifer.harness import Audit

    frames = np.zeros((3, 2))
    audit = Audit([frames])
    audit("learn", frames)
    audit("learn", frames.copy())
    assert audit.leaks == 3


def test_records_are_deterministic_and_order_independent():
    cfg = small_cfg(variants=("gdm_replay", "clifer"), seeds=(3,))
    a = records_csv(run_experiment2(cfg))
    b = records_csv(run_experiment2(cfg))
    c = records_csv(run_experiment2(cfg.replace(jobs=2)))
    assert a == b == c


def test_translation_support_excludes_subject():
    cfg = small_cfg(seeds=(0,))
    subjects, oracle = load_subjects(cfg, 0)
    gen = make_generator(cfg, subjects, subjects[0], oracle)
    for c in CLASSES:
        frames = np.concatenate([s.frames for sub in subjects[1:] for s in sub.train.of_class(c)])
        assert np.allclose(gen.class_means[c], frames.mean(axis=0))


def test_oracle_generator_needs_synthetic_data(tmp_path):
    data = generate_synthetic(SMALL)
    path = save_csv(data, tmp_path / "d.csv")
    cfg = ExperimentConfig(synth=None, data_path=str(path), variants=("clifer",), imagination=ImaginationConfig(generator="oracle"))
    with pytest.raises(ConfigError):
        run_experiment2(cfg)


def test_subject_missing_class_is_skipped(tmp_path, caplog):
    data = generate_synthetic(SMALL)
    path = save_csv(data, tmp_path / "d.csv")
    lines = path.read_text().splitlines()
    kept = [ln for ln in lines if not (ln.startswith("s01,") and ",fear," in ln)]
    path.write_text("\n".join(kept) + "\n")
    cfg = ExperimentConfig(synth=None, data_path=str(path), variants=("gdm",))
    with caplog.at_level(logging.WARNING):
        recs = run_experiment1(cfg)
    assert {r.subject_id for r in recs} == {"s00", "s02"}
    assert "s01" in caplog.text and "fear" in caplog.text


def test_no_usable_subject_is_a_data_error(tmp_path):
    data = generate_synthetic(SynthConfig(subjects=1, dim=6, sequences_per_class=2, frames_per_sequence=1))
    path = save_csv(data, tmp_path / "d.csv")
    path.write_text("\n".join(ln for ln in path.read_text().splitlines() if ",happy," not in ln) + "\n")
    with pytest.raises(DataError):
        run_experiment1(ExperimentConfig(synth=None, data_path=str(path), variants=("gdm",)))


# ------------------------------------------------------------------- orders


@pytest.mark.parametrize("seed", [0, 1, 99])
def test_six_start_orders(seed):
    orders = six_start_orders(seed)
    assert sorted(o[0] for o in orders) == sorted(CLASSES)
    assert all(sorted(o) == sorted(CLASSES) for o in orders)
    assert orders == six_start_orders(seed)


def test_order_sensitivity_result_shape():
    cfg = small_cfg(variants=("gdm_replay",), seeds=(0,), orders_mode="six_starts")
    recs, res = run_order_sensitivity(cfg)
    assert len(res.orders) == 6 and all(len(g) == 3 for g in res.groups)
    assert set(res.means) == set(CLASSES)
    assert res.kw.degrees_of_freedom == 5 and 0.0 <= res.kw.p_value <= 1.0
    assert len(recs) == 6 * 3 * 6


def test_identical_groups_are_degenerate():
    # the sequential baseline ends up predicting its last class everywhere
    cfg = small_cfg(variants=("baseline",), seeds=(0,), orders_mode="six_starts")
    with pytest.raises(DegenerateDataError):
        run_order_sensitivity(cfg)


def test_order_sensitivity_config_checks():
    with pytest.raises(ConfigError):
        run_order_sensitivity(small_cfg(variants=("gdm",)))
    with pytest.raises(ConfigError):
        run_order_sensitivity(small_cfg(variants=("gdm", "clifer"), orders_mode="six_starts"))


# ------------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ConfigError):
        small_cfg(variants=("gdm", "svm"))
    with pytest.raises(ConfigError):
        small_cfg(seeds=())
    with pytest.raises(Exception):
        small_cfg(class_order=("neutral",) * 6)
    with pytest.raises(ConfigError):
        ExperimentConfig(synth=None, data_path=None)


def test_config_round_trip():
    cfg = small_cfg(
        variants=("clifer",),
        class_order=tuple(reversed(CLASSES)),
        imagination=ImaginationConfig(n_per_class=3, jitter_sigma=0.01, source_leak={"fear": 0.5}),
    )
    back = ExperimentConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()
    assert back.imagination.source_leak == {"fear": 0.5}


def test_config_partial_overlay():
    cfg = ExperimentConfig.from_dict({"episodic": {"insertion_threshold": 0.99}, "seeds": [4, 5]})
    assert cfg.episodic.insertion_threshold == 0.99
    assert cfg.episodic.eps_b == 0.5 and cfg.seeds == (4, 5)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
