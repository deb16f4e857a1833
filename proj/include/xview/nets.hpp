// Persistent named parameters and the small feed-forward building blocks
// (linear layers, ReLU MLPs, Gaussian encoder heads, decoders) used by both
// the variational models and the recognizers.
//
// Sharing is by identity: two modules holding the same ParamPtr train one
// set of weights. Initialization is keyed by (seed, parameter name), so a
// parameter gets the same initial values in every architecture that names
// it identically.

#ifndef XVIEW_NETS_HPP
#define XVIEW_NETS_HPP

#include <memory>
#include <string>
#include <vector>

#include "xview/rng.hpp"
#include "xview/tensor.hpp"

namespace xview {

struct Param {
  std::string name;
  Shape shape;
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
};

using ParamPtr = std::shared_ptr<Param>;

// Ordered registry of every trainable parameter of a model. Insertion order
// is the optimizer's iteration order.
class ParamStore {
 public:
  // Creates a parameter, or returns the existing one when `name` is already
  // registered (this is how shared sub-networks join one store).
  ParamPtr create(const std::string& name, Shape shape, std::vector<double> init);
  ParamPtr lookup(const std::string& name) const;  // nullptr when absent
  void adopt(const ParamPtr& p);                   // register an existing parameter

  const std::vector<ParamPtr>& all() const { return params_; }
  std::size_t total_size() const;

 private:
  std::vector<ParamPtr> params_;
};

// Enters a parameter into a graph as a (deduplicated) leaf.
Tensor enter(Graph& g, const ParamPtr& p);

// Fan-in scaled uniform weights, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), drawn
// from the stream derived from (rng, name).
std::vector<double> init_uniform_fan_in(const Rng& rng, const std::string& name,
                                        std::size_t fan_in, std::size_t count);

struct Linear {
  ParamPtr weight;  // {in, out}
  ParamPtr bias;    // {out}

  static Linear create(ParamStore& store, const Rng& init_rng, const std::string& name,
                       std::size_t in, std::size_t out, double bias_init = 0.0);

  std::size_t in_dim() const { return weight->shape[0]; }
  std::size_t out_dim() const { return weight->shape[1]; }

  // x: {B, in} -> {B, out}
  Tensor forward(Graph& g, const Tensor& x) const;
  // Plain (non-recorded) forward for evaluation paths.
  std::vector<double> forward_values(const std::vector<double>& x, std::size_t batch) const;
};

// Stack of linear layers with ReLU after every layer except the last.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp create(ParamStore& store, const Rng& init_rng, const std::string& name,
                    std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out);

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  Tensor forward(Graph& g, const Tensor& x) const;
  std::vector<double> forward_values(const std::vector<double>& x, std::size_t batch) const;
};

// Batched diagonal Gaussian recorded on a graph.
struct DiagGaussianT {
  Tensor mean;     // {B, d}
  Tensor log_var;  // {B, d}
};

// Value-level diagonal Gaussian (mean/log-variance pair).
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_var;
};

// Projection network: ReLU trunk plus a linear head emitting mean and
// log-variance side by side. The log-variance is clamped to [-10, 10]
// before use as an overflow guard; the clamp is inactive in normal
// training.
struct GaussianEncoder {
  std::vector<Linear> layers;  // trunk (ReLU) layers then the head
  std::size_t latent_dim = 0;

  static GaussianEncoder create(ParamStore& store, const Rng& init_rng, const std::string& name,
                                std::size_t in, const std::vector<std::size_t>& hidden,
                                std::size_t latent);

  // Builds an encoder whose layers with index >= split_index are the given
  // shared layers; layers below are fresh per-domain parameters.
  static GaussianEncoder create_partially_shared(ParamStore& store, const Rng& init_rng,
                                                 const std::string& name,
                                                 const GaussianEncoder& shared,
                                                 std::size_t split_index);

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t depth() const { return layers.size(); }

  DiagGaussianT forward(Graph& g, const Tensor& x, double dropout_rate = 0.0,
                        Rng dropout_rng = Rng(0), bool training = false) const;
  // Posterior means only, without graph recording; this is the feature
  // extraction path (deterministic: no sampling, no dropout).
  std::vector<double> mean_values(const std::vector<double>& x, std::size_t batch) const;
};

// Reconstruction network: ReLU trunk, linear output head producing the
// reconstruction mean (unit output variance by convention).
struct Decoder {
  Mlp net;

  static Decoder create(ParamStore& store, const Rng& init_rng, const std::string& name,
                        std::size_t latent_in, const std::vector<std::size_t>& hidden,
                        std::size_t out);

  Tensor forward(Graph& g, const Tensor& z) const { return net.forward(g, z); }
};

}  // namespace xview

#endif  // XVIEW_NETS_HPP
