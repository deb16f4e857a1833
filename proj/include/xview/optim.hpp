// Adam (with bias correction) and vanilla SGD over a model's parameter
// store. Gradients are pulled from the step's graph; parameters that never
// entered the graph are treated as having zero gradient.

#ifndef XVIEW_OPTIM_HPP
#define XVIEW_OPTIM_HPP

#include <string>
#include <vector>

#include "xview/nets.hpp"

namespace xview {

enum class OptKind { adam, sgd };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

// One Adam update at (1-based) step t; standard first/second moment decay
// with bias correction.
void adam_step(std::vector<double>& value, const std::vector<double>& grad, AdamState& state,
               long t, const OptimizerConfig& cfg);

// value -= lr * grad.
void sgd_step(std::vector<double>& value, const std::vector<double>& grad, double lr);

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::vector<ParamPtr> params);

  // Applies one update using the gradients recorded on g.
  void step(const Graph& g);

  long steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::vector<ParamPtr> params_;
  std::vector<AdamState> state_;
  long t_ = 0;
};

}  // namespace xview

#endif  // XVIEW_OPTIM_HPP
