#include "xview/variational.hpp"

#include <cmath>

#include "xview/error.hpp"

namespace xview {

Tensor kl_to_standard_normal(Graph& g, const DiagGaussianT& q) {
  if (q.mean.shape() != q.log_var.shape())
    throw ShapeError("kl: mean " + shape_str(q.mean.shape()) + " vs log_var " +
                     shape_str(q.log_var.shape()));
  Tensor t = g.add(g.square(q.mean), g.exp(q.log_var));
  t = g.sub(t, g.add_const(q.log_var, 1.0));
  return g.scale(g.sum(t), 0.5);
}

double kl_to_standard_normal(const DiagGaussian& q) {
  if (q.mean.size() != q.log_var.size())
    throw ShapeError("kl: mean and log_var lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.mean.size(); ++i)
    acc += q.mean[i] * q.mean[i] + std::exp(q.log_var[i]) - 1.0 - q.log_var[i];
  return 0.5 * acc;
}

Tensor sample_reparam(Graph& g, const DiagGaussianT& q, const Tensor& eps) {
  if (eps.shape() != q.mean.shape())
    throw ShapeError("sample_reparam: eps " + shape_str(eps.shape()) + " vs mean " +
                     shape_str(q.mean.shape()));
  return g.add(q.mean, g.mul(g.exp(g.scale(q.log_var, 0.5)), eps));
}

std::vector<double> sample_reparam(const DiagGaussian& q, const std::vector<double>& eps) {
  if (eps.size() != q.mean.size())
    throw ShapeError("sample_reparam: eps length " + std::to_string(eps.size()) +
                     " vs mean length " + std::to_string(q.mean.size()));
  std::vector<double> z(q.mean.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = q.mean[i] + std::exp(0.5 * q.log_var[i]) * eps[i];
  return z;
}

Tensor gaussian_log_likelihood(Graph& g, const Tensor& x, const Tensor& mean,
                               const Tensor& log_var) {
  if (x.shape() != mean.shape() || x.shape() != log_var.shape())
    throw ShapeError("gaussian_log_likelihood: shapes differ, x " + shape_str(x.shape()) +
                     ", mean " + shape_str(mean.shape()) + ", log_var " +
                     shape_str(log_var.shape()));
  Tensor diff = g.sub(x, mean);
  Tensor term = g.add(log_var, g.mul(g.square(diff), g.exp(g.neg(log_var))));
  return g.scale(g.sum(g.add_const(term, kLogTwoPi)), -0.5);
}

double gaussian_log_likelihood(const std::vector<double>& x, const std::vector<double>& mean,
                               const std::vector<double>& log_var) {
  if (x.size() != mean.size() || x.size() != log_var.size())
    throw ShapeError("gaussian_log_likelihood: lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    acc += kLogTwoPi + log_var[i] + d * d * std::exp(-log_var[i]);
  }
  return -0.5 * acc;
}

namespace {

Tensor eps_for(const Rng& rng, const char* role, int k, std::size_t batch, std::size_t dim) {
  Rng stream = rng.child(role).child(static_cast<std::uint64_t>(k));
  return Tensor({batch, dim}, stream.normal_vec(batch * dim));
}

}  // namespace

Tensor vccap_loss(Graph& g, const VccapNets& nets, const Tensor& x, const Tensor& y,
                  const Rng& rng, const LossOptions& opts) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0))
    throw ShapeError("vccap_loss: expected paired batches, got x " + shape_str(x.shape()) +
                     ", y " + shape_str(y.shape()));
  const std::size_t batch = x.dim(0);
  if (batch == 0) throw ValueError("vccap_loss: empty batch");
  const int K = opts.mc_samples;
  if (K < 1) throw ValueError("vccap_loss: mc_samples must be >= 1");

  DiagGaussianT q_z = nets.q_z.forward(g, x, opts.dropout_rate, rng.child("do_qz"), opts.training);
  DiagGaussianT q_hx =
      nets.q_hx.forward(g, x, opts.dropout_rate, rng.child("do_qhx"), opts.training);
  DiagGaussianT q_hy =
      nets.q_hy.forward(g, y, opts.dropout_rate, rng.child("do_qhy"), opts.training);

  Tensor kl = g.add(g.add(kl_to_standard_normal(g, q_z), kl_to_standard_normal(g, q_hx)),
                    kl_to_standard_normal(g, q_hy));

  const Tensor unit_lv_x = Tensor::zeros(x.shape());
  const Tensor unit_lv_y = Tensor::zeros(y.shape());
  Tensor rec;
  for (int k = 0; k < K; ++k) {
    Tensor z = sample_reparam(g, q_z, eps_for(rng, "eps_z", k, batch, nets.q_z.latent_dim));
    Tensor hx = sample_reparam(g, q_hx, eps_for(rng, "eps_hx", k, batch, nets.q_hx.latent_dim));
    Tensor hy = sample_reparam(g, q_hy, eps_for(rng, "eps_hy", k, batch, nets.q_hy.latent_dim));
    Tensor ll_x = gaussian_log_likelihood(g, x, nets.p_x.forward(g, g.concat_cols(z, hx)), unit_lv_x);
    Tensor ll_y = gaussian_log_likelihood(g, y, nets.p_y.forward(g, g.concat_cols(z, hy)), unit_lv_y);
    Tensor both = g.add(ll_x, ll_y);
    rec = (k == 0) ? both : g.add(rec, both);
  }
  if (K > 1) rec = g.scale(rec, 1.0 / K);
  return g.scale(g.sub(kl, rec), 1.0 / static_cast<double>(batch));
}

Tensor vaep_loss(Graph& g, const VaepNets& nets, const Tensor& x, const Rng& rng,
                 const LossOptions& opts) {
  if (x.rank() != 2) throw ShapeError("vaep_loss: expected batch, got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  if (batch == 0) throw ValueError("vaep_loss: empty batch");
  const int K = opts.mc_samples;
  if (K < 1) throw ValueError("vaep_loss: mc_samples must be >= 1");

  DiagGaussianT q_z = nets.q_z.forward(g, x, opts.dropout_rate, rng.child("do_qz"), opts.training);
  Tensor kl = kl_to_standard_normal(g, q_z);
  std::optional<DiagGaussianT> q_h;
  if (nets.q_h) {
    q_h = nets.q_h->forward(g, x, opts.dropout_rate, rng.child("do_qh"), opts.training);
    kl = g.add(kl, kl_to_standard_normal(g, *q_h));
  }

  const Tensor unit_lv = Tensor::zeros(x.shape());
  Tensor rec;
  for (int k = 0; k < K; ++k) {
    Tensor z = sample_reparam(g, q_z, eps_for(rng, "eps_z", k, batch, nets.q_z.latent_dim));
    Tensor code = z;
    if (q_h) {
      Tensor h = sample_reparam(g, *q_h, eps_for(rng, "eps_h", k, batch, nets.q_h->latent_dim));
      code = g.concat_cols(z, h);
    }
    Tensor ll = gaussian_log_likelihood(g, x, nets.p_x.forward(g, code), unit_lv);
    rec = (k == 0) ? ll : g.add(rec, ll);
  }
  if (K > 1) rec = g.scale(rec, 1.0 / K);
  return g.scale(g.sub(kl, rec), 1.0 / static_cast<double>(batch));
}

Tensor vae_loss(Graph& g, const GaussianEncoder& q_z, const Decoder& p_x, const Tensor& x,
                const Rng& rng, const LossOptions& opts) {
  return vaep_loss(g, VaepNets{q_z, std::nullopt, p_x}, x, rng, opts);
}

Tensor combined_unsupervised_loss(Graph& g, const VccapNets& src_nets, const VaepNets& tgt_nets,
                                  const Tensor& batch_src_x, const Tensor& batch_src_y,
                                  const Tensor& batch_tgt_x, double beta, const Rng& rng,
                                  const LossOptions& opts) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ValueError("combined loss: beta " + std::to_string(beta) + " outside [0, 1]");
  if (batch_src_x.size() == 0 || batch_src_y.size() == 0)
    throw ValueError("combined loss: empty source batch");
  if (batch_tgt_x.size() == 0) throw ValueError("combined loss: empty target batch");
  Tensor vc = vccap_loss(g, src_nets, batch_src_x, batch_src_y, rng.child("S"), opts);
  Tensor va = vaep_loss(g, tgt_nets, batch_tgt_x, rng.child("T"), opts);
  return g.add(g.scale(vc, 1.0 - beta), g.scale(va, beta));
}

std::vector<double> extract_features(const GaussianEncoder& q_z, const std::vector<double>& frames,
                                     std::size_t num_frames) {
  return q_z.mean_values(frames, num_frames);
}

}  // namespace xview
