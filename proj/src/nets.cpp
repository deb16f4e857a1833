#include "xview/nets.hpp"

#include <cmath>

#include "xview/error.hpp"

namespace xview {

ParamPtr ParamStore::create(const std::string& name, Shape shape, std::vector<double> init) {
  if (ParamPtr existing = lookup(name)) {
    if (existing->shape != shape)
      throw ConfigError("parameter " + name + " re-created with shape " + shape_str(shape) +
                        ", existing " + shape_str(existing->shape));
    return existing;
  }
  if (shape_numel(shape) != init.size())
    throw ShapeError("parameter " + name + ": shape " + shape_str(shape) + " does not hold " +
                     std::to_string(init.size()) + " values");
  auto p = std::make_shared<Param>(Param{name, std::move(shape), std::move(init)});
  params_.push_back(p);
  return p;
}

ParamPtr ParamStore::lookup(const std::string& name) const {
  for (const ParamPtr& p : params_)
    if (p->name == name) return p;
  return nullptr;
}

void ParamStore::adopt(const ParamPtr& p) {
  for (const ParamPtr& q : params_)
    if (q.get() == p.get()) return;
  if (lookup(p->name))
    throw ConfigError("parameter name collision on adopt: " + p->name);
  params_.push_back(p);
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const ParamPtr& p : params_) n += p->size();
  return n;
}

Tensor enter(Graph& g, const ParamPtr& p) {
  return g.leaf_keyed(p.get(), p->shape, p->value);
}

std::vector<double> init_uniform_fan_in(const Rng& rng, const std::string& name,
                                        std::size_t fan_in, std::size_t count) {
  Rng stream = rng.child("init").child(name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> out(count);
  for (auto& v : out) v = stream.uniform(-bound, bound);
  return out;
}

// ---- Linear -----------------------------------------------------------------

Linear Linear::create(ParamStore& store, const Rng& init_rng, const std::string& name,
                      std::size_t in, std::size_t out, double bias_init) {
  Linear l;
  l.weight = store.create(name + "/W", {in, out}, init_uniform_fan_in(init_rng, name + "/W", in, in * out));
  l.bias = store.create(name + "/b", {out}, std::vector<double>(out, bias_init));
  return l;
}

Tensor Linear::forward(Graph& g, const Tensor& x) const {
  return g.add_rowwise(g.matmul(x, enter(g, weight)), enter(g, bias));
}

std::vector<double> Linear::forward_values(const std::vector<double>& x, std::size_t batch) const {
  const std::size_t in = in_dim(), out = out_dim();
  if (x.size() != batch * in)
    throw ShapeError("linear: input of " + std::to_string(x.size()) + " values is not " +
                     std::to_string(batch) + "x" + std::to_string(in));
  std::vector<double> y(batch * out, 0.0);
  vals::matmul(x.data(), weight->value.data(), y.data(), batch, in, out);
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t j = 0; j < out; ++j) y[i * out + j] += bias->value[j];
  return y;
}

// ---- Mlp --------------------------------------------------------------------

Mlp Mlp::create(ParamStore& store, const Rng& init_rng, const std::string& name, std::size_t in,
                const std::vector<std::size_t>& hidden, std::size_t out) {
  Mlp mlp;
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    mlp.layers.push_back(
        Linear::create(store, init_rng, name + "/" + std::to_string(i), prev, hidden[i]));
    prev = hidden[i];
  }
  mlp.layers.push_back(
      Linear::create(store, init_rng, name + "/" + std::to_string(hidden.size()), prev, out));
  return mlp;
}

Tensor Mlp::forward(Graph& g, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(g, h);
    if (i + 1 < layers.size()) h = g.relu(h);
  }
  return h;
}

std::vector<double> Mlp::forward_values(const std::vector<double>& x, std::size_t batch) const {
  std::vector<double> h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward_values(h, batch);
    if (i + 1 < layers.size())
      for (auto& v : h) v = v > 0.0 ? v : 0.0;
  }
  return h;
}

// ---- GaussianEncoder ----------------------------------------------------------

GaussianEncoder GaussianEncoder::create(ParamStore& store, const Rng& init_rng,
                                        const std::string& name, std::size_t in,
                                        const std::vector<std::size_t>& hidden,
                                        std::size_t latent) {
  if (latent == 0) throw ConfigError("encoder " + name + ": latent dimension must be positive");
  GaussianEncoder enc;
  enc.latent_dim = latent;
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    enc.layers.push_back(
        Linear::create(store, init_rng, name + "/" + std::to_string(i), prev, hidden[i]));
    prev = hidden[i];
  }
  enc.layers.push_back(
      Linear::create(store, init_rng, name + "/head", prev, 2 * latent));
  return enc;
}

GaussianEncoder GaussianEncoder::create_partially_shared(ParamStore& store, const Rng& init_rng,
                                                         const std::string& name,
                                                         const GaussianEncoder& shared,
                                                         std::size_t split_index) {
  if (split_index >= shared.depth())
    throw ConfigError("partial sharing split_index " + std::to_string(split_index) +
                      " leaves no shared layer in a depth-" + std::to_string(shared.depth()) +
                      " encoder");
  GaussianEncoder enc;
  enc.latent_dim = shared.latent_dim;
  for (std::size_t i = 0; i < shared.depth(); ++i) {
    if (i < split_index) {
      const Linear& ref = shared.layers[i];
      enc.layers.push_back(Linear::create(store, init_rng, name + "/" + std::to_string(i),
                                          ref.in_dim(), ref.out_dim()));
    } else {
      store.adopt(shared.layers[i].weight);
      store.adopt(shared.layers[i].bias);
      enc.layers.push_back(shared.layers[i]);
    }
  }
  return enc;
}

DiagGaussianT GaussianEncoder::forward(Graph& g, const Tensor& x, double dropout_rate,
                                       Rng dropout_rng, bool training) const {
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = g.relu(layers[i].forward(g, h));
    if (dropout_rate > 0.0)
      h = g.dropout(h, dropout_rate, dropout_rng.child(i), training);
  }
  Tensor head = layers.back().forward(g, h);
  Tensor mean = g.slice_cols(head, 0, latent_dim);
  Tensor log_var = g.clamp(g.slice_cols(head, latent_dim, latent_dim), -10.0, 10.0);
  return {mean, log_var};
}

std::vector<double> GaussianEncoder::mean_values(const std::vector<double>& x,
                                                 std::size_t batch) const {
  std::vector<double> h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = layers[i].forward_values(h, batch);
    for (auto& v : h) v = v > 0.0 ? v : 0.0;
  }
  h = layers.back().forward_values(h, batch);
  std::vector<double> mean(batch * latent_dim);
  const std::size_t width = 2 * latent_dim;
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t j = 0; j < latent_dim; ++j) mean[i * latent_dim + j] = h[i * width + j];
  return mean;
}

// ---- Decoder ------------------------------------------------------------------

Decoder Decoder::create(ParamStore& store, const Rng& init_rng, const std::string& name,
                        std::size_t latent_in, const std::vector<std::size_t>& hidden,
                        std::size_t out) {
  return Decoder{Mlp::create(store, init_rng, name, latent_in, hidden, out)};
}

}  // namespace xview
