// Declarative experiment configuration: JSON files validated in full
// against the schema before any work starts, plus the (de)serialization of
// architecture configs shared with the checkpoint manifest.

#ifndef XVIEW_CONFIG_HPP
#define XVIEW_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "xview/data.hpp"
#include "xview/model.hpp"
#include "xview/optim.hpp"

namespace xview {

using OrderedJson = nlohmann::ordered_json;

struct TrainingConfig {
  int feature_epochs = 20;
  std::size_t feature_batch_frames = 200;
  int recognizer_epochs = 15;
  std::size_t utterance_batch = 2;
  double mix_ratio = 0.5;  // source share of a mixed minibatch
  int mc_samples = 1;
  std::string init_features_from;  // optional warm-start checkpoint
};

struct DataConfig {
  std::optional<SynthConfig> synth;
  std::string source;
  std::string target_train;
  std::string target_dev;
  std::string target_test;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir;
  DataConfig data;
  ArchitectureConfig arch;
  OptimizerConfig optimizer;
  TrainingConfig training;
  LossWeights loss;
  std::size_t decode_beam = 8;
};

// Reads, fully validates (unknown keys, types, ranges) and returns the
// config; throws ConfigError with the offending path on any problem.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin);

// Architecture config <-> JSON (used by checkpoints; strict on load).
OrderedJson arch_to_json(const ArchitectureConfig& cfg);
ArchitectureConfig arch_from_json(const OrderedJson& j, const std::string& origin);

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name, const std::string& origin);
const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name, const std::string& origin);
const char* rec_input_name(RecInput r);
RecInput rec_input_from_name(const std::string& name, const std::string& origin);

}  // namespace xview

#endif  // XVIEW_CONFIG_HPP
