#include "xview/optim.hpp"

#include <cmath>

#include "xview/error.hpp"

namespace xview {

void OptimizerConfig::validate() const {
  // lr = 0 is allowed so no-op schedules stay expressible.
  if (!(lr >= 0.0)) throw ConfigError("optimizer: learning rate must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("optimizer: adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer: adam epsilon must be positive");
}

void adam_step(std::vector<double>& value, const std::vector<double>& grad, AdamState& state,
               long t, const OptimizerConfig& cfg) {
  if (grad.size() != value.size() || state.m.size() != value.size() ||
      state.v.size() != value.size())
    throw ShapeError("adam_step: state/gradient sizes do not match the parameter");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void sgd_step(std::vector<double>& value, const std::vector<double>& grad, double lr) {
  if (grad.size() != value.size())
    throw ShapeError("sgd_step: gradient size does not match the parameter");
  for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
}

Optimizer::Optimizer(OptimizerConfig cfg, std::vector<ParamPtr> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  state_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    state_[i].m.assign(params_[i]->size(), 0.0);
    state_[i].v.assign(params_[i]->size(), 0.0);
  }
}

void Optimizer::step(const Graph& g) {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    const std::vector<double>* grad = g.grad_for_key(&p);
    std::vector<double> zeros;
    if (!grad) {
      zeros.assign(p.size(), 0.0);
      grad = &zeros;
    }
    if (cfg_.kind == OptKind::adam) {
      adam_step(p.value, *grad, state_[i], t_, cfg_);
    } else {
      sgd_step(p.value, *grad, cfg_.lr);
    }
  }
}

}  // namespace xview
