// Generic epoch loop: run steps, average component losses, evaluate dev
// PER once per epoch, keep the best checkpoint (argmin dev PER, earlier
// epoch on ties), abort on divergence.

#ifndef XVIEW_TRAIN_HPP
#define XVIEW_TRAIN_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xview/model.hpp"
#include "xview/optim.hpp"

namespace xview {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::map<std::string, double> components;  // per-step averages
  std::optional<double> dev_per;
};

// Flat snapshot of a parameter store, aligned with store order.
using ParamSnapshot = std::vector<std::vector<double>>;

ParamSnapshot snapshot_params(const ParamStore& store);
void restore_params(ParamStore& store, const ParamSnapshot& snap);

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // epoch whose parameters are in best_params
  std::optional<double> best_dev_per;
  ParamSnapshot best_params;
};

struct TrainHooks {
  // Builds the step's graph and returns the scalar loss plus component
  // values. `step_rng` is the derived per-step stream.
  std::function<LossParts(Graph& g, const Rng& step_rng)> step;
  // Optional per-epoch dev evaluation returning PER.
  std::function<double()> eval_dev_per;
  // Optional observer, called after each epoch record is final.
  std::function<void(const EpochRecord&)> on_epoch;
};

// Runs `epochs` x `steps_per_epoch` optimization steps. The per-step rng is
// rng.child("step").child(global_step). Throws DivergedError when a step
// loss is not finite.
TrainResult train(ModelGraph& model, Optimizer& opt, int epochs, int steps_per_epoch,
                  const Rng& rng, const TrainHooks& hooks);

}  // namespace xview

#endif  // XVIEW_TRAIN_HPP
