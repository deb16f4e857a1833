"""Cross-domain multi-view feature learning and CTC recognition toolkit.

Thin Python surface over the native core: CTC loss/decoding, variational
building blocks, PER scoring, frame windowing and the synthetic corpus
generator. Training and the experiment grid live in the `xview` CLI.
"""

from _xview import (
    XviewError,
    ctc_beam_search,
    ctc_greedy_decode,
    ctc_loss,
    ctc_loss_grad,
    edit_distance,
    gaussian_log_likelihood,
    kl_to_standard_normal,
    load_dataset,
    log_softmax,
    per,
    sample_reparam,
    synth_corpus,
    window_frames,
)

__all__ = [
    "XviewError",
    "ctc_beam_search",
    "ctc_greedy_decode",
    "ctc_loss",
    "ctc_loss_grad",
    "edit_distance",
    "gaussian_log_likelihood",
    "kl_to_standard_normal",
    "load_dataset",
    "log_softmax",
    "per",
    "sample_reparam",
    "synth_corpus",
    "window_frames",
]
