# Copyright (C) 2026 The actflow authors
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

import actflow


@pytest.fixture(scope="module")
def trained():
    corpus = actflow.synth(conditions=2, dim=2, records=4000, separation=3.0, seed=1)
    model = actflow.train(corpus, hidden=32, blocks=2, epochs=8, lr=5e-3, weight_decay=0.0, seed=3)
    return corpus, model


def test_synth_is_deterministic():
    a = actflow.synth(records=50, seed=4)
    b = actflow.synth(records=50, seed=4)
    assert len(a) == 100
    assert a.activations.shape == (100, 2)
    np.testing.assert_array_equal(a.activations, b.activations)
    assert sorted(set(a.labels)) == [0, 1]


def test_corpus_round_trip(tmp_path):
    c = actflow.synth(records=10, dim=3, seed=2)
    c.save(tmp_path / "c.uafc")
    back = actflow.Corpus.load(tmp_path / "c.uafc")
    np.testing.assert_array_equal(back.activations, c.activations)
    assert back.condition_texts == c.condition_texts


def test_training_and_checkpoint(trained, tmp_path):
    corpus, model = trained
    assert len(model.epoch_losses) == 8
    assert np.isfinite(model.final_loss)
    model.save(tmp_path / "m.uafm")
    again = actflow.Model.load(tmp_path / "m.uafm")
    x = np.array([[0.5, -0.5]])
    np.testing.assert_array_equal(again.velocity(x, 0.3, corpus, 1), model.velocity(x, 0.3, corpus, 1))


def test_edit_identity_and_direction(trained):
    corpus, model = trained
    src = corpus.activations[np.array(corpus.labels) == 0][:40]
    same = actflow.edit(model, corpus, src, source=0, target=1, strength=0.0)
    np.testing.assert_array_equal(same, src)
    moved = actflow.edit(model, corpus, src, source=0, target=1, strength=1.0)
    assert moved.mean(axis=0).sum() < src.mean(axis=0).sum()


def test_classify_and_auc(trained):
    corpus, model = trained
    held = actflow.synth(records=30, separation=3.0, seed=9)
    predicted, energies = actflow.classify(model, corpus, held.activations)
    assert energies.shape == (60, 2)
    accuracy = np.mean(np.array(predicted) == np.array(held.labels))
    assert accuracy >= 0.9
    score = energies[:, 0] - energies[:, 1]
    assert actflow.auc(score.tolist(), held.labels) >= 0.9


def test_generate_and_directions(trained):
    corpus, model = trained
    samples = actflow.generate(model, corpus, condition=1, count=20, seed=5)
    assert samples.shape == (20, 2)
    d = actflow.caa_direction(np.ones((3, 2)), np.zeros((3, 2)))
    assert d == pytest.approx([2 ** -0.5, 2 ** -0.5])


def test_errors_are_value_errors(trained):
    corpus, model = trained
    with pytest.raises(ValueError):
        actflow.edit(model, corpus, np.zeros((1, 2)), source=0, target=9)
    with pytest.raises(ValueError):
        actflow.synth(dim=0)
