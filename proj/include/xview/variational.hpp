// Diagonal-Gaussian machinery and the variational training objectives:
// the multi-view VCCAP bound, its single-view VAE/VAEP counterparts for the
// target domain, and the beta-weighted combination of the two.
//
// All objectives are expressed as losses to minimize (negated evidence
// bounds). Reconstruction likelihoods are Gaussian with unit variance, so
// the expectation terms reduce to scaled squared error plus a constant.

#ifndef XVIEW_VARIATIONAL_HPP
#define XVIEW_VARIATIONAL_HPP

#include <optional>
#include <vector>

#include "xview/nets.hpp"
#include "xview/rng.hpp"
#include "xview/tensor.hpp"

namespace xview {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// KL(q || N(0, I)) summed over every (row, coordinate) of the batch:
// 0.5 * sum(mu^2 + exp(lv) - 1 - lv). Nonnegative; zero iff q is standard
// normal.
Tensor kl_to_standard_normal(Graph& g, const DiagGaussianT& q);
double kl_to_standard_normal(const DiagGaussian& q);

// z = mu + exp(lv / 2) * eps. Gradients flow into mu and lv only.
Tensor sample_reparam(Graph& g, const DiagGaussianT& q, const Tensor& eps);
std::vector<double> sample_reparam(const DiagGaussian& q, const std::vector<double>& eps);

// sum_i -0.5 * (log 2pi + lv_i + (x_i - mu_i)^2 / exp(lv_i)), summed over
// the whole batch.
Tensor gaussian_log_likelihood(Graph& g, const Tensor& x, const Tensor& mean,
                               const Tensor& log_var);
double gaussian_log_likelihood(const std::vector<double>& x, const std::vector<double>& mean,
                               const std::vector<double>& log_var);

// The five networks of the multi-view model. q_hy / p_y are absent for the
// acoustic-only (VAEP) source variant.
struct VccapNets {
  GaussianEncoder q_z;
  GaussianEncoder q_hx;
  GaussianEncoder q_hy;
  Decoder p_x;
  Decoder p_y;
};

struct VaepNets {
  GaussianEncoder q_z;
  std::optional<GaussianEncoder> q_h;  // absent: plain VAE
  Decoder p_x;
};

struct LossOptions {
  int mc_samples = 1;          // K reparameterized draws per expectation
  double dropout_rate = 0.0;   // encoder trunk dropout (training mode only)
  bool training = false;
};

// Negated multi-view bound for a batch of pairs, averaged over the batch:
// three KL terms minus the two expected reconstruction log-likelihoods.
// x: {B, dx}, y: {B, dy}.
Tensor vccap_loss(Graph& g, const VccapNets& nets, const Tensor& x, const Tensor& y,
                  const Rng& rng, const LossOptions& opts = {});

// Negated single-view bound with a private variable (two KL terms, one
// reconstruction term), averaged over the batch. Degenerates to vae_loss
// when nets.q_h is absent.
Tensor vaep_loss(Graph& g, const VaepNets& nets, const Tensor& x, const Rng& rng,
                 const LossOptions& opts = {});

// Negated plain VAE bound (one KL, one reconstruction), averaged.
Tensor vae_loss(Graph& g, const GaussianEncoder& q_z, const Decoder& p_x, const Tensor& x,
                const Rng& rng, const LossOptions& opts = {});

// (1 - beta) * vccap + beta * vaep over the two domain batches.
Tensor combined_unsupervised_loss(Graph& g, const VccapNets& src_nets, const VaepNets& tgt_nets,
                                  const Tensor& batch_src_x, const Tensor& batch_src_y,
                                  const Tensor& batch_tgt_x, double beta, const Rng& rng,
                                  const LossOptions& opts = {});

// Per-frame posterior means of q_z: the learned features. Deterministic;
// no sampling, no dropout. frames: T x d flattened row-major.
std::vector<double> extract_features(const GaussianEncoder& q_z, const std::vector<double>& frames,
                                     std::size_t num_frames);

}  // namespace xview

#endif  // XVIEW_VARIATIONAL_HPP
