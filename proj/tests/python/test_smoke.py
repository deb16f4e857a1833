"""Smoke tests for the Python bindings."""

import math

import numpy as np
import pytest

import xview


def test_log_softmax_rows_normalize():
    lp = xview.log_softmax(np.array([[0.0, 0.0], [5.0, -5.0]]))
    assert np.allclose(np.exp(lp).sum(axis=1), 1.0, atol=1e-12)
    assert lp[0, 0] == pytest.approx(-math.log(2.0))


def test_kl_and_likelihood_values():
    assert xview.kl_to_standard_normal(np.zeros(4), np.zeros(4)) == 0.0
    assert xview.kl_to_standard_normal(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5)
    ll = xview.gaussian_log_likelihood(np.array([0.3]), np.array([0.3]), np.array([0.0]))
    assert ll == pytest.approx(-0.5 * math.log(2 * math.pi))


def test_sample_reparam_zero_noise():
    mean = np.array([0.5, -1.5])
    z = xview.sample_reparam(mean, np.zeros(2), np.zeros(2))
    assert np.allclose(z, mean)


def test_ctc_loss_single_path():
    lp = xview.log_softmax(np.array([[0.0, 2.0, -1.0]]))
    assert xview.ctc_loss(lp, [0]) == pytest.approx(-lp[0, 1])


def test_ctc_loss_grad_shape_and_direction():
    rng = np.random.default_rng(0)
    lp = xview.log_softmax(rng.normal(size=(5, 3)))
    loss, grad = xview.ctc_loss_grad(lp, [1, 0])
    assert grad.shape == lp.shape
    assert loss > 0.0
    assert grad.sum() < 0.0  # raising any aligned log prob lowers the loss


def test_ctc_infeasible_target_raises():
    lp = xview.log_softmax(np.zeros((1, 3)))
    with pytest.raises(xview.XviewError):
        xview.ctc_loss(lp, [0, 0])


def test_decoders_agree_on_peaked_input():
    logits = np.full((4, 3), -50.0)
    for t, k in enumerate([1, 1, 0, 2]):
        logits[t, k] = 50.0
    lp = xview.log_softmax(logits)
    greedy_hyp, _ = xview.ctc_greedy_decode(lp)
    beam_hyp, _ = xview.ctc_beam_search(lp, 8)
    assert greedy_hyp == [0, 1]
    assert beam_hyp == greedy_hyp


def test_scoring():
    assert xview.edit_distance([0, 1, 2], [0, 2]) == (0, 0, 1)
    assert xview.per([[0, 1, 2]], [[0, 2]]) == pytest.approx(1.0 / 3.0)


def test_window_frames_replicates_edges():
    out = xview.window_frames(np.array([[1.0], [2.0], [3.0]]), 3)
    assert out.shape == (3, 3)
    assert out[0].tolist() == [1.0, 1.0, 2.0]


def test_synth_corpus_is_deterministic():
    a = xview.synth_corpus(shared_dim=3, num_labels=3, source_utterances=2,
                           target_utterances=2, seed=5)
    b = xview.synth_corpus(shared_dim=3, num_labels=3, source_utterances=2,
                           target_utterances=2, seed=5)
    ua, ub = a["source"]["utterances"][0], b["source"]["utterances"][0]
    assert np.array_equal(ua["acoustic"], ub["acoustic"])
    assert ua["labels"] == ub["labels"]
    assert a["source"]["label_names"] == ["p0", "p1", "p2"]
