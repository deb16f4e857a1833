#include "xview/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "xview/error.hpp"

namespace xview {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Column of extended-state s: blanks at even s, target labels at odd s.
inline std::size_t ext_col(const LabelSequence& target, std::size_t s) {
  return s % 2 == 0 ? 0 : static_cast<std::size_t>(target[s / 2]) + 1;
}

// Whether state s may be entered from s-2 (skipping the blank between two
// distinct labels).
inline bool allows_skip(const LabelSequence& target, std::size_t s) {
  return s % 2 == 1 && s >= 2 && target[s / 2] != target[s / 2 - 1];
}

struct Lattice {
  std::vector<double> alpha;  // T x S, log space
  double log_prob = kNegInf;
};

Lattice ctc_forward(const double* lp, std::size_t T, std::size_t width,
                    const LabelSequence& target) {
  const std::size_t S = 2 * target.size() + 1;
  Lattice lat;
  lat.alpha.assign(T * S, kNegInf);
  lat.alpha[0] = lp[0];  // blank
  if (S > 1) lat.alpha[1] = lp[ext_col(target, 1)];
  for (std::size_t t = 1; t < T; ++t) {
    const double* row = lp + t * width;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = lat.alpha[(t - 1) * S + s];
      if (s >= 1) acc = vals::logsumexp2(acc, lat.alpha[(t - 1) * S + s - 1]);
      if (allows_skip(target, s)) acc = vals::logsumexp2(acc, lat.alpha[(t - 1) * S + s - 2]);
      lat.alpha[t * S + s] = acc + row[ext_col(target, s)];
    }
  }
  lat.log_prob = lat.alpha[(T - 1) * S + S - 1];
  if (S > 1) lat.log_prob = vals::logsumexp2(lat.log_prob, lat.alpha[(T - 1) * S + S - 2]);
  return lat;
}

std::vector<double> ctc_backward_lattice(const double* lp, std::size_t T, std::size_t width,
                                         const LabelSequence& target) {
  const std::size_t S = 2 * target.size() + 1;
  std::vector<double> beta(T * S, kNegInf);
  beta[(T - 1) * S + S - 1] = lp[(T - 1) * width + ext_col(target, S - 1)];
  if (S > 1) beta[(T - 1) * S + S - 2] = lp[(T - 1) * width + ext_col(target, S - 2)];
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* row = lp + t * width;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = beta[(t + 1) * S + s];
      if (s + 1 < S) acc = vals::logsumexp2(acc, beta[(t + 1) * S + s + 1]);
      if (s + 2 < S && allows_skip(target, s + 2))
        acc = vals::logsumexp2(acc, beta[(t + 1) * S + s + 2]);
      beta[t * S + s] = acc + row[ext_col(target, s)];
    }
  }
  return beta;
}

}  // namespace

std::size_t ctc_min_frames(const LabelSequence& target) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return target.size() + repeats;
}

void ctc_check_feasible(const LabelSequence& target, std::size_t frames, std::size_t num_labels) {
  for (int label : target)
    if (label < 0 || static_cast<std::size_t>(label) >= num_labels)
      throw ValueError("ctc: label id " + std::to_string(label) + " outside [0, " +
                       std::to_string(num_labels) + ")");
  const std::size_t need = ctc_min_frames(target);
  if (frames < need)
    throw InfeasibleTargetError("ctc: target of length " + std::to_string(target.size()) +
                                " needs at least " + std::to_string(need) + " frames, got " +
                                std::to_string(frames));
}

double ctc_loss_value(const std::vector<double>& log_probs, std::size_t frames,
                      std::size_t vocab_with_blank, const LabelSequence& target) {
  if (vocab_with_blank < 2 || frames == 0 || log_probs.size() != frames * vocab_with_blank)
    throw ShapeError("ctc: log_probs of " + std::to_string(log_probs.size()) +
                     " values is not " + std::to_string(frames) + "x" +
                     std::to_string(vocab_with_blank));
  ctc_check_feasible(target, frames, vocab_with_blank - 1);
  return -ctc_forward(log_probs.data(), frames, vocab_with_blank, target).log_prob;
}

Tensor ctc_loss(Graph& g, const Tensor& log_probs, const LabelSequence& target) {
  if (log_probs.rank() != 2)
    throw ShapeError("ctc_loss: expected {T, V+1} log_probs, got " +
                     shape_str(log_probs.shape()));
  const std::size_t T = log_probs.dim(0);
  const std::size_t width = log_probs.dim(1);
  if (width < 2) throw ShapeError("ctc_loss: need at least blank plus one label");
  ctc_check_feasible(target, T, width - 1);

  auto lp = std::make_shared<const std::vector<double>>(log_probs.values());
  Lattice lat = ctc_forward(lp->data(), T, width, target);
  const double loss = -lat.log_prob;
  auto alpha = std::make_shared<const std::vector<double>>(std::move(lat.alpha));
  const double log_prob = lat.log_prob;

  return g.custom(
      {1}, {loss}, {log_probs},
      [lp, alpha, log_prob, T, width, target](const std::vector<double>& out_grad,
                                              const std::vector<std::vector<double>*>& sinks) {
        if (!sinks[0]) return;
        std::vector<double>& gin = *sinks[0];
        const double upstream = out_grad[0];
        if (upstream == 0.0) return;
        const std::size_t S = 2 * target.size() + 1;
        const std::vector<double> beta = ctc_backward_lattice(lp->data(), T, width, target);
        // d(-logP)/d lp[t][k] = -sum_{s: col(s)=k} exp(alpha + beta - lp - logP);
        // alpha and beta both include the emission at t, so it is divided
        // out once.
        std::vector<double> colsum(width);
        for (std::size_t t = 0; t < T; ++t) {
          std::fill(colsum.begin(), colsum.end(), kNegInf);
          for (std::size_t s = 0; s < S; ++s) {
            const std::size_t k = ext_col(target, s);
            colsum[k] = vals::logsumexp2(colsum[k], (*alpha)[t * S + s] + beta[t * S + s]);
          }
          for (std::size_t k = 0; k < width; ++k) {
            if (colsum[k] == kNegInf) continue;
            const double lpk = (*lp)[t * width + k];
            gin[t * width + k] -= upstream * std::exp(colsum[k] - lpk - log_prob);
          }
        }
      });
}

// ---- decoding -----------------------------------------------------------------

DecodeResult ctc_greedy_decode(const std::vector<double>& log_probs, std::size_t frames,
                               std::size_t vocab_with_blank) {
  DecodeResult result;
  int prev = -1;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = log_probs.data() + t * vocab_with_blank;
    std::size_t best = 0;
    for (std::size_t k = 1; k < vocab_with_blank; ++k)
      if (row[k] > row[best]) best = k;  // ties keep the lowest index
    result.score += row[best];
    const int sym = static_cast<int>(best);
    if (sym != 0 && sym != prev) result.hypothesis.push_back(sym - 1);
    prev = sym;
  }
  return result;
}

DecodeResult ctc_greedy_decode(const Tensor& log_probs) {
  return ctc_greedy_decode(log_probs.values(), log_probs.dim(0), log_probs.dim(1));
}

DecodeResult ctc_beam_search(const std::vector<double>& log_probs, std::size_t frames,
                             std::size_t vocab_with_blank, std::size_t beam) {
  if (beam == 0) throw ValueError("ctc_beam_search: beam must be >= 1");

  struct Mass {
    double blank = kNegInf;     // prefix mass for paths ending in blank
    double nonblank = kNegInf;  // ... ending in the prefix's last label
    double total() const { return vals::logsumexp2(blank, nonblank); }
  };
  using Beams = std::map<LabelSequence, Mass>;

  Beams beams;
  beams[{}] = Mass{0.0, kNegInf};

  const std::size_t labels = vocab_with_blank - 1;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = log_probs.data() + t * vocab_with_blank;
    Beams next;
    for (const auto& [prefix, mass] : beams) {
      const double total = mass.total();
      // Stay on this prefix via a blank frame.
      {
        Mass& m = next[prefix];
        m.blank = vals::logsumexp2(m.blank, total + row[0]);
      }
      // Stay on this prefix by repeating its last label.
      if (!prefix.empty()) {
        Mass& m = next[prefix];
        m.nonblank = vals::logsumexp2(m.nonblank,
                                      mass.nonblank + row[static_cast<std::size_t>(prefix.back()) + 1]);
      }
      // Extend by each label.
      for (std::size_t c = 0; c < labels; ++c) {
        const double lp_c = row[c + 1];
        LabelSequence extended = prefix;
        extended.push_back(static_cast<int>(c));
        Mass& m = next[extended];
        if (!prefix.empty() && static_cast<std::size_t>(prefix.back()) == c) {
          // A repeated label only follows a blank; the direct path merges
          // into the unchanged prefix above.
          m.nonblank = vals::logsumexp2(m.nonblank, mass.blank + lp_c);
        } else {
          m.nonblank = vals::logsumexp2(m.nonblank, total + lp_c);
        }
      }
    }
    // Prune to the beam. std::map iteration is lexicographic, and
    // stable_sort keeps that order among equal scores.
    std::vector<Beams::const_iterator> order;
    order.reserve(next.size());
    for (auto it = next.begin(); it != next.end(); ++it) order.push_back(it);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a->second.total() > b->second.total(); });
    if (order.size() > beam) order.resize(beam);
    Beams pruned;
    for (const auto& it : order) pruned.insert(*it);
    beams = std::move(pruned);
  }

  DecodeResult best;
  best.score = kNegInf;
  for (const auto& [prefix, mass] : beams) {
    const double total = mass.total();
    if (total > best.score) {  // lexicographically smallest wins ties
      best.score = total;
      best.hypothesis = prefix;
    }
  }
  return best;
}

DecodeResult ctc_beam_search(const Tensor& log_probs, std::size_t beam) {
  return ctc_beam_search(log_probs.values(), log_probs.dim(0), log_probs.dim(1), beam);
}

// ---- scoring ------------------------------------------------------------------

EditStats edit_distance(const LabelSequence& ref, const LabelSequence& hyp) {
  const std::size_t m = ref.size(), n = hyp.size();
  std::vector<std::size_t> dist((m + 1) * (n + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * (n + 1) + j]; };
  for (std::size_t i = 0; i <= m; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= n; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t ins = at(i, j - 1) + 1;
      const std::size_t del = at(i - 1, j) + 1;
      at(i, j) = std::min({sub, ins, del});
    }

  // Backtrace preferring substitution/match, then insertion, then deletion.
  EditStats stats;
  std::size_t i = m, j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++stats.substitutions;
      --i;
      --j;
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++stats.insertions;
      --j;
    } else {
      ++stats.deletions;
      --i;
    }
  }
  return stats;
}

double per(const std::vector<LabelSequence>& refs, const std::vector<LabelSequence>& hyps) {
  if (refs.size() != hyps.size())
    throw ValueError("per: corpus sizes differ, " + std::to_string(refs.size()) + " refs vs " +
                     std::to_string(hyps.size()) + " hyps");
  std::size_t errors = 0, ref_len = 0;
  for (std::size_t u = 0; u < refs.size(); ++u) {
    errors += edit_distance(refs[u], hyps[u]).total();
    ref_len += refs[u].size();
  }
  if (ref_len == 0) throw UndefinedMetricError("per: total reference length is zero");
  return static_cast<double>(errors) / static_cast<double>(ref_len);
}

}  // namespace xview
