// The experiment harness behind the CLI subcommands: synth, train-features,
// train-recognizer, train-joint, decode, evaluate. Every command is
// deterministic given (config, seed) and writes its outputs under the run's
// output directory, which is guarded by a lock file.

#ifndef XVIEW_COMMANDS_HPP
#define XVIEW_COMMANDS_HPP

#include <string>

#include "xview/checkpoint.hpp"
#include "xview/config.hpp"

namespace xview {

// File names within an output directory.
inline constexpr const char* kSourceFile = "source.xvds";
inline constexpr const char* kTargetTrainFile = "target_train.xvds";
inline constexpr const char* kTargetDevFile = "target_dev.xvds";
inline constexpr const char* kTargetTestFile = "target_test.xvds";
inline constexpr const char* kLabelsFile = "labels.txt";
inline constexpr const char* kHypsFile = "hyps.txt";
inline constexpr const char* kScoresFile = "hyps.scores.txt";
inline constexpr const char* kLockFile = ".xview.lock";

void cmd_synth(const ExperimentConfig& cfg);
void cmd_train_features(const ExperimentConfig& cfg);
void cmd_train_recognizer(const ExperimentConfig& cfg);
// mode: multitask | joint_recognizers | adaptation.
void cmd_train_joint(const ExperimentConfig& cfg, const std::string& mode);
void cmd_decode(const std::string& checkpoint_path, const std::string& dataset_path,
                std::size_t beam, const std::string& out_dir);
// refs: an XVDS dataset or a hypothesis-format text file; hyps: hypothesis
// format ("id<TAB>label names"). Prints the per-utterance table and the
// corpus summary; returns the corpus PER.
double cmd_evaluate(const std::string& refs_path, const std::string& hyps_path);

// Checkpoint file name a training command writes ("features.ckpt", ...).
std::string checkpoint_file_name(ModelKind kind);

// Greedy/beam decoding of a whole dataset through a trained model; used by
// cmd_decode and the per-epoch dev evaluation.
std::vector<DecodeResult> decode_dataset(const ModelGraph& model, const Dataset& ds,
                                         std::size_t beam);

// Dev PER of a model against a labeled dataset (beam 1).
double dev_per(const ModelGraph& model, const Dataset& dev);

}  // namespace xview

#endif  // XVIEW_COMMANDS_HPP
