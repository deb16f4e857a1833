#include <doctest.h>

#include <nlohmann/json.hpp>

#include "xview/config.hpp"
#include "xview/error.hpp"

using namespace xview;

TEST_CASE("experiment config parses with full schema validation") {
  const char* text = R"({
    "seed": 11,
    "out": "runs/demo",
    "data": {"synth": {"num_labels": 5, "acoustic_dim": 10}, "source": "s.xvds"},
    "architecture": {
      "variant": "a_plus_d",
      "shared_dim": 4,
      "encoder_hidden": [8, 8],
      "sharing": {"mode": "partial", "split_index": 1},
      "recognizer": {"hidden": 6, "layers": 2, "dropout": 0.25}
    },
    "optimizer": {"kind": "sgd", "lr": 0.01},
    "training": {"feature_epochs": 3, "recognizer_epochs": 2, "utterance_batch": 2},
    "loss": {"alpha": 0.7, "beta": 0.3},
    "decode": {"beam": 12}
  })";
  ExperimentConfig cfg = parse_experiment_config(text, "test");
  CHECK(cfg.seed == 11);
  CHECK(cfg.out_dir == "runs/demo");
  REQUIRE(cfg.data.synth.has_value());
  CHECK(cfg.data.synth->num_labels == 5);
  CHECK(cfg.data.synth->acoustic_dim == 10);
  CHECK(cfg.arch.variant == Variant::a_plus_d);
  CHECK(cfg.arch.sharing.mode == SharingSpec::Mode::partial);
  CHECK(cfg.arch.sharing.split_index == 1);
  CHECK(cfg.arch.recognizer.hidden == 6);
  CHECK(cfg.optimizer.kind == OptKind::sgd);
  CHECK(cfg.optimizer.lr == 0.01);
  CHECK(cfg.training.feature_epochs == 3);
  CHECK(cfg.loss.alpha == 0.7);
  CHECK(cfg.decode_beam == 12);
}

TEST_CASE("unknown keys, bad enums and bad ranges are rejected up front") {
  CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"sneed": 1})", "t"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_experiment_config(R"({"architecture": {"variant": "a_plus_z"}})", "t"),
      doctest::Contains("variant"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"loss": {"alpha": 1.5}})", "t"), ValueError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"optimizer": {"lr": -0.5}})", "t"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"seed": "abc"})", "t"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("{nonsense", "t"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"decode": {"beam": 0}})", "t"), ConfigError);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/path.json"), ConfigError);
}

TEST_CASE("architecture config survives a JSON round trip") {
  ArchitectureConfig cfg;
  cfg.variant = Variant::vaep_plus_vaep;
  cfg.shared_dim = 7;
  cfg.encoder_hidden = {9, 5};
  cfg.target_private_dim = 0;
  cfg.acoustic_window = 5;
  cfg.recognizer.dropout = 0.15;
  cfg.rec_input = RecInput::windowed;
  cfg.recognizer.window = 5;
  cfg.joint_share_top = false;

  ArchitectureConfig back = arch_from_json(arch_to_json(cfg), "round");
  CHECK(back.variant == cfg.variant);
  CHECK(back.shared_dim == cfg.shared_dim);
  CHECK(back.encoder_hidden == cfg.encoder_hidden);
  CHECK(back.target_private_dim == 0);
  CHECK(back.acoustic_window == 5);
  CHECK(back.recognizer.dropout == 0.15);
  CHECK(back.rec_input == RecInput::windowed);
  CHECK(back.joint_share_top == false);
  CHECK(arch_to_json(back) == arch_to_json(cfg));
}
