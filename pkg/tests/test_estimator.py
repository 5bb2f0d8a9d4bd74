"""Estimator facade: sklearn API compliance and a small end-to-end fit."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rac import corpus
from rac.estimator import CodePredictor


def make_task(n_docs=30, n_codes=5, seed=2):
    ds = corpus.generate_synthetic(n_docs=n_docs, n_codes=n_codes, vocab_size=40,
                                   seed=seed, min_labels=1, max_labels=2,
                                   noise_sentences=2, noise_sentence_len=4)
    codes = ds.code_table.codes
    X = [d.text for d in ds.documents]
    y = np.array([[1 if c in d.codes else 0 for c in codes] for d in ds.documents])
    table = [(e.code, e.long_title, e.short_title) for e in ds.code_table]
    return X, y, table


def small_predictor(table, **overrides):
    params = dict(
        code_table=table, d=8, n_x=24, n_t=6, d_ff=16, sam_layers=1,
        conv_kernel=3, dropout=0.0, min_count=1, pretrain_epochs=0,
        learning_rate=2e-3, batch_size=4, max_epochs=3, patience=3,
        augment_fold=1, validation_fraction=0.2, seed=0,
    )
    params.update(overrides)
    return CodePredictor(**params)


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        predictor = CodePredictor(d=17)
        params = predictor.get_params()
        assert params["d"] == 17
        predictor.set_params(d=23, batch_size=4)
        assert predictor.d == 23 and predictor.batch_size == 4

    def test_clone(self):
        _, _, table = make_task()
        predictor = small_predictor(table)
        cloned = clone(predictor)
        assert cloned.get_params() == predictor.get_params()

    def test_unfitted_predict_raises(self):
        _, _, table = make_task()
        with pytest.raises(NotFittedError):
            small_predictor(table).predict(["some note"])

    def test_defaults_mirror_full_scale_settings(self):
        predictor = CodePredictor()
        assert predictor.d == 300
        assert predictor.n_x == 4096
        assert predictor.n_t == 36
        assert predictor.learning_rate == 8e-5
        assert predictor.batch_size == 16
        assert predictor.patience == 3
        assert predictor.swa_interval_epochs == 5
        assert predictor.augment_fold == 3


class TestValidation:
    def test_rejects_single_string(self):
        _, _, table = make_task()
        with pytest.raises(ValueError, match="sequence"):
            small_predictor(table).fit("one note", np.zeros((1, 5)))

    def test_rejects_non_binary_y(self):
        X, y, table = make_task()
        with pytest.raises(ValueError, match="0/1"):
            small_predictor(table).fit(X, y * 2.5)

    def test_rejects_row_mismatch(self):
        X, y, table = make_task()
        with pytest.raises(ValueError, match="rows"):
            small_predictor(table).fit(X[:-1], y)

    def test_rejects_label_count_mismatch(self):
        X, y, table = make_task()
        with pytest.raises(ValueError, match="codes"):
            small_predictor(table).fit(X, y[:, :-1])

    def test_requires_code_table(self):
        X, y, _ = make_task()
        with pytest.raises(ValueError, match="code_table"):
            small_predictor(None).fit(X, y)


class TestFitPredict:
    def test_fit_predict_shapes_and_ranges(self):
        X, y, table = make_task()
        predictor = small_predictor(table).fit(X, y)
        proba = predictor.predict_proba(X[:7])
        assert proba.shape == (7, 5)
        assert ((proba > 0) & (proba < 1)).all()
        hard = predictor.predict(X[:7])
        assert set(np.unique(hard)) <= {0, 1}

    def test_fitted_attributes(self):
        X, y, table = make_task()
        predictor = small_predictor(table).fit(X, y)
        assert predictor.classes_ == [t[0] for t in table]
        assert len(predictor.train_log_.epochs) <= 3
        assert predictor.vocabulary_ is not None

    def test_score_is_micro_f1(self):
        X, y, table = make_task()
        predictor = small_predictor(table).fit(X, y)
        value = predictor.score(X, y)
        assert 0.0 <= value <= 1.0

    def test_same_seed_reproducible(self):
        X, y, table = make_task()
        p1 = small_predictor(table).fit(X, y)
        p2 = small_predictor(table).fit(X, y)
        assert np.array_equal(p1.predict_proba(X[:3]), p2.predict_proba(X[:3]))

    def test_pretraining_path_runs(self):
        X, y, table = make_task()
        predictor = small_predictor(table, pretrain_epochs=1, max_epochs=1).fit(X, y)
        assert predictor.predict_proba(X[:2]).shape == (2, 5)
