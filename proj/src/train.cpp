#include "xview/train.hpp"

#include <cmath>

#include "xview/error.hpp"

namespace xview {

ParamSnapshot snapshot_params(const ParamStore& store) {
  ParamSnapshot snap;
  snap.reserve(store.all().size());
  for (const ParamPtr& p : store.all()) snap.push_back(p->value);
  return snap;
}

void restore_params(ParamStore& store, const ParamSnapshot& snap) {
  if (snap.size() != store.all().size())
    throw ContractError("restore_params: snapshot does not match the store");
  for (std::size_t i = 0; i < snap.size(); ++i) {
    if (snap[i].size() != store.all()[i]->value.size())
      throw ContractError("restore_params: parameter " + store.all()[i]->name + " size changed");
    store.all()[i]->value = snap[i];
  }
}

TrainResult train(ModelGraph& model, Optimizer& opt, int epochs, int steps_per_epoch,
                  const Rng& rng, const TrainHooks& hooks) {
  if (epochs < 1 || steps_per_epoch < 1)
    throw ValueError("train: epochs and steps per epoch must be >= 1");
  if (!hooks.step) throw ContractError("train: no step hook");

  TrainResult result;
  long global_step = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0;
    std::map<std::string, double> part_sums;
    for (int s = 0; s < steps_per_epoch; ++s, ++global_step) {
      Graph g;
      LossParts out = hooks.step(g, rng.child("step").child(static_cast<std::uint64_t>(global_step)));
      const double loss = out.total.value();
      if (!std::isfinite(loss))
        throw DivergedError("training diverged: loss " + std::to_string(loss) + " at epoch " +
                            std::to_string(epoch) + ", step " + std::to_string(s));
      g.backward(out.total);
      opt.step(g);
      loss_sum += loss;
      for (const auto& [k, v] : out.parts) part_sums[k] += v;
    }
    record.train_loss = loss_sum / steps_per_epoch;
    for (const auto& [k, v] : part_sums) record.components[k] = v / steps_per_epoch;
    if (hooks.eval_dev_per) record.dev_per = hooks.eval_dev_per();

    // Without dev evaluation the final epoch wins; with it, the argmin of
    // dev PER (strict comparison, so ties keep the earlier epoch).
    bool take = true;
    if (hooks.eval_dev_per && result.best_dev_per)
      take = record.dev_per && *record.dev_per < *result.best_dev_per;
    if (take) {
      result.best_epoch = epoch;
      result.best_dev_per = record.dev_per;
      result.best_params = snapshot_params(model.params);
    }
    result.history.push_back(std::move(record));
    if (hooks.on_epoch) hooks.on_epoch(result.history.back());
  }
  return result;
}

}  // namespace xview
