// xview command-line experiment harness.
//
//   xview synth            --config cfg.json [--seed N] [--out DIR]
//   xview train-features   --config cfg.json [--seed N] [--out DIR]
//   xview train-recognizer --config cfg.json [--seed N] [--out DIR]
//   xview train-joint      --config cfg.json --mode NAME [--seed N] [--out DIR]
//   xview decode           CKPT DATASET [--beam N] [--out DIR] [--config cfg.json]
//   xview evaluate         REFS HYPS
//
// Any error defined by the invoked operation exits nonzero with a one-line
// message on stderr. XVIEW_LOG_LEVEL in {error, info, debug} controls
// console verbosity.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xview/commands.hpp"
#include "xview/error.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* config = cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  if (config_required) config->required();
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--out", args.out_dir, "output directory override");
}

xview::ExperimentConfig resolve_config(const CommonArgs& args) {
  xview::ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = xview::load_experiment_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-domain multi-view feature learning and CTC recognition toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, feat_args, rec_args, joint_args;
  std::string joint_mode;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic paired-view corpus");
  add_common(synth, synth_args, true);

  CLI::App* feat = app.add_subcommand("train-features", "unsupervised feature learning");
  add_common(feat, feat_args, true);

  CLI::App* rec = app.add_subcommand("train-recognizer", "CTC recognizer training");
  add_common(rec, rec_args, true);

  CLI::App* joint = app.add_subcommand("train-joint", "joint / multitask / adaptation training");
  add_common(joint, joint_args, true);
  joint->add_option("--mode", joint_mode, "multitask | joint_recognizers | adaptation")->required();

  CommonArgs decode_args;
  std::string decode_ckpt, decode_data;
  std::optional<std::size_t> decode_beam;
  CLI::App* decode = app.add_subcommand("decode", "beam-search decoding of a dataset");
  decode->add_option("checkpoint", decode_ckpt, "trained checkpoint")->required();
  decode->add_option("dataset", decode_data, "XVDS dataset to decode")->required();
  decode->add_option("--beam", decode_beam, "beam width");
  add_common(decode, decode_args, false);

  std::string eval_refs, eval_hyps;
  CLI::App* evaluate = app.add_subcommand("evaluate", "PER scoring of hypotheses");
  evaluate->add_option("refs", eval_refs, "reference dataset (.xvds) or hypothesis-format file")
      ->required();
  evaluate->add_option("hyps", eval_hyps, "hypothesis file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      xview::cmd_synth(resolve_config(synth_args));
    } else if (feat->parsed()) {
      xview::cmd_train_features(resolve_config(feat_args));
    } else if (rec->parsed()) {
      xview::cmd_train_recognizer(resolve_config(rec_args));
    } else if (joint->parsed()) {
      xview::cmd_train_joint(resolve_config(joint_args), joint_mode);
    } else if (decode->parsed()) {
      xview::ExperimentConfig cfg = resolve_config(decode_args);
      const std::size_t beam = decode_beam ? *decode_beam : cfg.decode_beam;
      if (cfg.out_dir.empty())
        throw xview::ConfigError("decode: no output directory (pass --out or set it in the config)");
      xview::cmd_decode(decode_ckpt, decode_data, beam, cfg.out_dir);
    } else if (evaluate->parsed()) {
      xview::cmd_evaluate(eval_refs, eval_hyps);
    }
  } catch (const xview::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
