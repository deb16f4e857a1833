// Connectionist temporal classification: log-space forward/backward loss,
// greedy and lexicon-free prefix beam-search decoding, and edit-distance /
// phone-error-rate scoring.
//
// Label ids live in [0, V); column 0 of the (V+1)-wide log-probability
// matrices is the reserved blank, label l occupies column l+1.

#ifndef XVIEW_CTC_HPP
#define XVIEW_CTC_HPP

#include <cstddef>
#include <vector>

#include "xview/tensor.hpp"

namespace xview {

using LabelSequence = std::vector<int>;

struct DecodeResult {
  LabelSequence hypothesis;
  double score = 0.0;  // log-probability (total prefix mass for beam search,
                       // best-path mass for greedy)
};

// Minimum number of frames any alignment of `target` needs:
// |target| plus one separating blank per adjacent repeat.
std::size_t ctc_min_frames(const LabelSequence& target);

// Throws InfeasibleTargetError when T frames cannot align the target, or
// ValueError when a label id falls outside [0, num_labels).
void ctc_check_feasible(const LabelSequence& target, std::size_t frames, std::size_t num_labels);

// Negative log of the total probability of every blank-augmented alignment
// collapsing to `target`, computed by a log-space forward recursion over the
// 2|target|+1 extended sequence. log_probs: {T, V+1}, rows normalized.
// Differentiable (fused node with a forward/backward adjoint).
Tensor ctc_loss(Graph& g, const Tensor& log_probs, const LabelSequence& target);

// Value-only variant for decoding-time rescoring and evaluation.
double ctc_loss_value(const std::vector<double>& log_probs, std::size_t frames,
                      std::size_t vocab_with_blank, const LabelSequence& target);

// Per-frame argmax (ties toward the lowest index), collapse repeats, drop
// blanks.
DecodeResult ctc_greedy_decode(const std::vector<double>& log_probs, std::size_t frames,
                               std::size_t vocab_with_blank);
DecodeResult ctc_greedy_decode(const Tensor& log_probs);

// Lexicon-free prefix beam search keeping per-prefix blank/non-blank mass.
// Deterministic: ties break toward the lexicographically smaller prefix.
DecodeResult ctc_beam_search(const std::vector<double>& log_probs, std::size_t frames,
                             std::size_t vocab_with_blank, std::size_t beam);
DecodeResult ctc_beam_search(const Tensor& log_probs, std::size_t beam);

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;

  std::size_t total() const { return substitutions + insertions + deletions; }
};

// Unit-cost Levenshtein alignment; on ties the backtrace prefers
// substitution over insertion over deletion.
EditStats edit_distance(const LabelSequence& ref, const LabelSequence& hyp);

// Corpus PER: summed (S+I+D) over all utterances divided by the total
// reference length. Throws UndefinedMetricError when the references are
// empty, ValueError on corpus size mismatch.
double per(const std::vector<LabelSequence>& refs, const std::vector<LabelSequence>& hyps);

}  // namespace xview

#endif  // XVIEW_CTC_HPP
