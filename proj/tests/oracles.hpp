// Test-only oracles, independent of the implementation paths they check:
// central finite differences, exhaustive CTC alignment enumeration, a
// Monte-Carlo KL estimator, Simpson quadrature, the recursive edit-distance
// definition, a small linear-CCA solver and a chi-square statistic.

#ifndef XVIEW_TESTS_ORACLES_HPP
#define XVIEW_TESTS_ORACLES_HPP

#include <functional>
#include <utility>
#include <vector>

#include "xview/ctc.hpp"
#include "xview/nets.hpp"
#include "xview/tensor.hpp"

namespace xview::testing {

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Compares the analytic gradient of loss_fn w.r.t. every parameter against
// central finite differences (default step 1e-6). loss_fn must be a pure
// function of the current parameter values. The relative error is guarded
// at unit scale: |a - f| / max(|a|, |f|, 1).
GradCheck check_gradients(const std::function<Tensor(Graph&)>& loss_fn,
                          const std::vector<ParamPtr>& params, double step = 1e-6);

// Sums the probability of every length-T alignment string that collapses to
// `target`; returns the negative log of that sum. Exponential in T.
double ctc_brute_force_loss(const std::vector<double>& log_probs, std::size_t frames,
                            std::size_t vocab_with_blank, const LabelSequence& target);

// Accumulates mass per collapsed labeling over all alignment strings and
// returns the argmax labeling with its log mass (lexicographic tie-break).
std::pair<LabelSequence, double> ctc_exhaustive_best(const std::vector<double>& log_probs,
                                                     std::size_t frames,
                                                     std::size_t vocab_with_blank);

// Mass of one specific labeling under exhaustive enumeration (-inf when no
// alignment produces it).
double ctc_exhaustive_mass(const std::vector<double>& log_probs, std::size_t frames,
                           std::size_t vocab_with_blank, const LabelSequence& labeling);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// E_q[log q(z) - log N(z; 0, I)] estimated with `samples` reparameterized
// draws.
MonteCarloEstimate mc_kl_estimate(const DiagGaussian& q, std::size_t samples, Rng rng);

// Simpson integration of f over [lo, hi] with n (even) intervals.
double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t n);

// Literal recursive edit distance with the substitution > insertion >
// deletion tie preference.
EditStats edit_distance_recursive(const LabelSequence& ref, const LabelSequence& hyp);

// Sum of the top `k` canonical correlations between paired samples
// X (n x dx) and Y (n x dy), via whitened cross-covariance.
double cca_top_correlations(const std::vector<double>& x, std::size_t dx,
                            const std::vector<double>& y, std::size_t dy, std::size_t n,
                            std::size_t k);

// Pearson chi-square statistic of an observed contingency table against
// independence of rows and columns.
double chi_square_statistic(const std::vector<std::vector<std::size_t>>& table);

}  // namespace xview::testing

#endif  // XVIEW_TESTS_ORACLES_HPP
