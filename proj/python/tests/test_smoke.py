"""Smoke tests for the python bindings.

Runs against the installed `failure_lens` package when available, or the
bare extension module from a CMake build tree (ctest sets PYTHONPATH to
the bindings output directory).
"""

import math

import numpy as np
import pytest

try:
    import failure_lens as fl
except ImportError:
    import _failure_lens as fl


def test_geometry_identities():
    r = np.zeros(8)
    r[0] = 1.0
    w = np.zeros(8)
    w[1] = 1.0
    out = fl.slerp(r, w, 0.5)
    assert out[0] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert np.linalg.norm(fl.slerp(r, w, 0.37)) == pytest.approx(1.0, abs=1e-9)
    assert fl.cosine(r, w) == 0.0


def test_micro_arithmetic():
    assert fl.balanced_accuracy(
        np.array([1, 1, -1, -1], dtype=np.int32),
        np.array([1, -1, -1, -1], dtype=np.int32),
    ) == 0.75
    weights = fl.balanced_weights(np.array([1, 1, 1, -1], dtype=np.int32))
    assert weights[0] == pytest.approx(2 / 3, abs=1e-15)
    assert weights[3] == 2.0
    assert fl.pearson([1, 2, 3], [2, 4, 6]).pearson == pytest.approx(1.0, abs=1e-12)


def test_emb1_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    data = rng.standard_normal((5, 4)).astype(np.float32)
    table = fl.EmbeddingTable(data)
    path = str(tmp_path / "t.emb1")
    fl.write_embeddings(table, path)
    back = fl.read_embeddings(path)
    assert back.n_rows == 5
    assert back.dim == 4
    assert np.array_equal(back.data, data)


def test_planted_pipeline():
    cfg = fl.SynthConfig()
    cfg.n_per_class = 120
    cfg.rho = 0.9
    cfg.seed = 7
    data = fl.generate(cfg)

    dcfg = fl.DistillConfig()
    dcfg.seed = 7
    run = fl.distill(data.val.embeddings, data.val.meta, dcfg)
    assert set(run.directions) == {0, 1}
    for direction in run.directions.values():
        assert 0.5 < direction.cv_score <= 1.0
        assert np.linalg.norm(direction.w_hat) == pytest.approx(1.0, abs=1e-9)

    scored = fl.score_split(run, data.test.embeddings, data.test.meta)
    assert len(scored) == 2 * cfg.n_per_class
    flagged = fl.flag_incorrect(scored)
    frac = fl.flagged_membership(scored, data.minority_group)
    assert frac is not None and frac > 0.5
    assert len(flagged) > 0

    per_class = [s for s in scored if s.class_id == 0]
    ks = [1, 5, len(per_class)]
    curve = fl.fraction_top_k(per_class, data.minority_group, ks, fl.Ordering.svm)
    base_rate = sum(1 for s in per_class if s.group == data.minority_group) / len(per_class)
    assert curve.fractions[-1] == pytest.approx(base_rate, abs=1e-12)
    assert curve.fractions[0] >= base_rate

    captions = fl.score_captions(run.directions[0], data.captions, run.profile)
    assert captions[-1].text.startswith("minority-style")


def test_grammar_expansion():
    grammar = fl.CaptionGrammar()
    grammar.adjectives = [None, "old", "young"]
    grammar.nouns = ["person", "man", "woman"]
    grammar.prepositions = [None, "who has a smile"]
    captions = fl.expand_grammar(grammar)
    assert len(captions) == 3 * 3 * 2
    assert "a photo of a person" in captions


def test_error_type():
    with pytest.raises(fl.FailureLensError):
        fl.cosine(np.zeros(3), np.ones(3))
