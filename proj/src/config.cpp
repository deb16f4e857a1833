#include "xview/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xview/error.hpp"

namespace xview {

namespace {

using Json = nlohmann::ordered_json;

// Checked accessor for one JSON object: typed reads plus detection of keys
// the schema does not know.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const Json& raw(const char* key) {
    touch(key);
    return j_.at(key);
  }

  Section object(const char* key) {
    touch(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  std::string str(const char* key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(path_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }

  bool boolean(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(path_ + "." + key + ": expected a boolean");
    return v.get<bool>();
  }

  double real(const char* key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const char* key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(path_ + "." + key + ": expected an integer");
    return v.get<std::int64_t>();
  }

  std::size_t size(const char* key, std::size_t fallback) {
    const std::int64_t v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(path_ + "." + key + ": must be nonnegative");
    return static_cast<std::size_t>(v);
  }

  std::vector<std::size_t> size_list(const char* key, std::vector<std::size_t> fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_array()) throw ConfigError(path_ + "." + key + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
        throw ConfigError(path_ + "." + key + ": expected nonnegative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  // Every key must have been touched by the schema walk.
  void finish() {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
  }

  const std::string& path() const { return path_; }

 private:
  void touch(const char* key) {
    if (!j_.contains(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    seen_.insert(key);
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::a_only: return "a_only";
    case Variant::a_plus_b: return "a_plus_b";
    case Variant::a_plus_c: return "a_plus_c";
    case Variant::a_plus_d: return "a_plus_d";
    case Variant::vaep_plus_vaep: return "vaep_plus_vaep";
  }
  return "?";
}

Variant variant_from_name(const std::string& name, const std::string& origin) {
  for (Variant v : {Variant::a_only, Variant::a_plus_b, Variant::a_plus_c, Variant::a_plus_d,
                    Variant::vaep_plus_vaep})
    if (name == variant_name(v)) return v;
  throw ConfigError(origin + ": unknown variant '" + name + "'");
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::features: return "features";
    case ModelKind::recognizer: return "recognizer";
    case ModelKind::multitask: return "multitask";
    case ModelKind::joint_recognizers: return "joint_recognizers";
    case ModelKind::adaptation: return "adaptation";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& name, const std::string& origin) {
  for (ModelKind k : {ModelKind::features, ModelKind::recognizer, ModelKind::multitask,
                      ModelKind::joint_recognizers, ModelKind::adaptation})
    if (name == model_kind_name(k)) return k;
  throw ConfigError(origin + ": unknown model kind '" + name + "'");
}

const char* rec_input_name(RecInput r) {
  switch (r) {
    case RecInput::raw: return "raw";
    case RecInput::windowed: return "windowed";
    case RecInput::features: return "features";
  }
  return "?";
}

RecInput rec_input_from_name(const std::string& name, const std::string& origin) {
  for (RecInput r : {RecInput::raw, RecInput::windowed, RecInput::features})
    if (name == rec_input_name(r)) return r;
  throw ConfigError(origin + ": unknown recognizer input '" + name + "'");
}

OrderedJson arch_to_json(const ArchitectureConfig& cfg) {
  Json j;
  j["variant"] = variant_name(cfg.variant);
  j["shared_dim"] = cfg.shared_dim;
  j["private_x_dim"] = cfg.private_x_dim;
  j["private_y_dim"] = cfg.private_y_dim;
  j["target_private_dim"] = cfg.target_private_dim;
  j["encoder_hidden"] = cfg.encoder_hidden;
  j["decoder_hidden"] = cfg.decoder_hidden;
  j["sharing"] = Json{{"mode", cfg.sharing.mode == SharingSpec::Mode::full ? "full" : "partial"},
                      {"split_index", cfg.sharing.split_index}};
  j["adaptation_layers"] = cfg.adaptation_layers;
  j["adapter_hidden"] = cfg.adapter_hidden;
  j["frontend_dnn_layers"] = cfg.frontend_dnn_layers;
  j["acoustic_window"] = cfg.acoustic_window;
  j["artic_window"] = cfg.artic_window;
  j["recognizer"] = Json{{"hidden", cfg.recognizer.hidden},
                         {"layers", cfg.recognizer.num_layers},
                         {"window", cfg.recognizer.window},
                         {"dropout", cfg.recognizer.dropout}};
  j["rec_input"] = rec_input_name(cfg.rec_input);
  j["source_rec_input"] = rec_input_name(cfg.source_rec_input);
  j["joint_share_top"] = cfg.joint_share_top;
  j["source_recognizer_hidden"] = cfg.source_recognizer_hidden;
  return j;
}

ArchitectureConfig arch_from_json(const OrderedJson& j, const std::string& origin) {
  ArchitectureConfig cfg;
  Section s(j, origin);
  cfg.variant = variant_from_name(s.str("variant", variant_name(cfg.variant)), origin);
  cfg.shared_dim = s.size("shared_dim", cfg.shared_dim);
  cfg.private_x_dim = s.size("private_x_dim", cfg.private_x_dim);
  cfg.private_y_dim = s.size("private_y_dim", cfg.private_y_dim);
  cfg.target_private_dim = s.size("target_private_dim", cfg.target_private_dim);
  cfg.encoder_hidden = s.size_list("encoder_hidden", cfg.encoder_hidden);
  cfg.decoder_hidden = s.size_list("decoder_hidden", cfg.decoder_hidden);
  if (s.has("sharing")) {
    Section sh = s.object("sharing");
    const std::string mode = sh.str("mode", "full");
    if (mode == "full") {
      cfg.sharing.mode = SharingSpec::Mode::full;
    } else if (mode == "partial") {
      cfg.sharing.mode = SharingSpec::Mode::partial;
    } else {
      throw ConfigError(sh.path() + ".mode: expected 'full' or 'partial'");
    }
    cfg.sharing.split_index = sh.size("split_index", cfg.sharing.split_index);
    sh.finish();
  }
  cfg.adaptation_layers = s.boolean("adaptation_layers", cfg.adaptation_layers);
  cfg.adapter_hidden = s.size("adapter_hidden", cfg.adapter_hidden);
  cfg.frontend_dnn_layers = s.size("frontend_dnn_layers", cfg.frontend_dnn_layers);
  cfg.acoustic_window = s.size("acoustic_window", cfg.acoustic_window);
  cfg.artic_window = s.size("artic_window", cfg.artic_window);
  if (s.has("recognizer")) {
    Section r = s.object("recognizer");
    cfg.recognizer.hidden = r.size("hidden", cfg.recognizer.hidden);
    cfg.recognizer.num_layers = r.size("layers", cfg.recognizer.num_layers);
    cfg.recognizer.window = r.size("window", cfg.recognizer.window);
    cfg.recognizer.dropout = r.real("dropout", cfg.recognizer.dropout);
    r.finish();
  }
  cfg.rec_input = rec_input_from_name(s.str("rec_input", rec_input_name(cfg.rec_input)), origin);
  cfg.source_rec_input =
      rec_input_from_name(s.str("source_rec_input", rec_input_name(cfg.source_rec_input)), origin);
  cfg.joint_share_top = s.boolean("joint_share_top", cfg.joint_share_top);
  cfg.source_recognizer_hidden = s.size("source_recognizer_hidden", cfg.source_recognizer_hidden);
  s.finish();
  return cfg;
}

namespace {

SynthConfig synth_from_json(Section& s) {
  SynthConfig cfg;
  cfg.shared_dim = s.size("shared_dim", cfg.shared_dim);
  cfg.private_x_dim = s.size("private_x_dim", cfg.private_x_dim);
  cfg.private_y_dim = s.size("private_y_dim", cfg.private_y_dim);
  cfg.acoustic_dim = s.size("acoustic_dim", cfg.acoustic_dim);
  cfg.artic_dim = s.size("artic_dim", cfg.artic_dim);
  cfg.num_labels = s.size("num_labels", cfg.num_labels);
  cfg.min_frames = s.size("min_frames", cfg.min_frames);
  cfg.max_frames = s.size("max_frames", cfg.max_frames);
  cfg.source_min_frames = s.size("source_min_frames", cfg.source_min_frames);
  cfg.source_max_frames = s.size("source_max_frames", cfg.source_max_frames);
  cfg.min_segment = s.size("min_segment", cfg.min_segment);
  cfg.max_segment = s.size("max_segment", cfg.max_segment);
  cfg.source_utterances = s.size("source_utterances", cfg.source_utterances);
  cfg.target_train_utterances = s.size("target_train_utterances", cfg.target_train_utterances);
  cfg.target_dev_utterances = s.size("target_dev_utterances", cfg.target_dev_utterances);
  cfg.target_test_utterances = s.size("target_test_utterances", cfg.target_test_utterances);
  cfg.within_class_scale = s.real("within_class_scale", cfg.within_class_scale);
  cfg.noise_level = s.real("noise_level", cfg.noise_level);
  cfg.shift_strength = s.real("shift_strength", cfg.shift_strength);
  cfg.shift_noise = s.real("shift_noise", cfg.shift_noise);
  cfg.nuisance_correlation = s.real("nuisance_correlation", cfg.nuisance_correlation);
  cfg.view_scale = s.real("view_scale", cfg.view_scale);
  cfg.identity_mixing = s.boolean("identity_mixing", cfg.identity_mixing);
  s.finish();
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  ExperimentConfig cfg;
  Section s(j, origin);
  {
    const std::int64_t seed = s.integer("seed", static_cast<std::int64_t>(cfg.seed));
    if (seed < 0) throw ConfigError(origin + ".seed: must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }
  cfg.out_dir = s.str("out", cfg.out_dir);
  if (s.has("data")) {
    Section d = s.object("data");
    if (d.has("synth")) {
      Section sy = d.object("synth");
      cfg.data.synth = synth_from_json(sy);
    }
    cfg.data.source = d.str("source", "");
    cfg.data.target_train = d.str("target_train", "");
    cfg.data.target_dev = d.str("target_dev", "");
    cfg.data.target_test = d.str("target_test", "");
    d.finish();
  }
  if (s.has("architecture")) cfg.arch = arch_from_json(s.raw("architecture"), origin + ".architecture");
  if (s.has("optimizer")) {
    Section o = s.object("optimizer");
    const std::string kind = o.str("kind", "adam");
    if (kind == "adam") {
      cfg.optimizer.kind = OptKind::adam;
    } else if (kind == "sgd") {
      cfg.optimizer.kind = OptKind::sgd;
    } else {
      throw ConfigError(o.path() + ".kind: expected 'adam' or 'sgd'");
    }
    cfg.optimizer.lr = o.real("lr", cfg.optimizer.lr);
    cfg.optimizer.beta1 = o.real("beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = o.real("beta2", cfg.optimizer.beta2);
    cfg.optimizer.eps = o.real("eps", cfg.optimizer.eps);
    o.finish();
    cfg.optimizer.validate();
  }
  if (s.has("training")) {
    Section t = s.object("training");
    cfg.training.feature_epochs = static_cast<int>(t.integer("feature_epochs", cfg.training.feature_epochs));
    cfg.training.feature_batch_frames = t.size("feature_batch_frames", cfg.training.feature_batch_frames);
    cfg.training.recognizer_epochs =
        static_cast<int>(t.integer("recognizer_epochs", cfg.training.recognizer_epochs));
    cfg.training.utterance_batch = t.size("utterance_batch", cfg.training.utterance_batch);
    cfg.training.mix_ratio = t.real("mix_ratio", cfg.training.mix_ratio);
    cfg.training.mc_samples = static_cast<int>(t.integer("mc_samples", cfg.training.mc_samples));
    cfg.training.init_features_from = t.str("init_features_from", "");
    t.finish();
    if (cfg.training.feature_epochs < 1 || cfg.training.recognizer_epochs < 1)
      throw ConfigError(origin + ".training: epoch counts must be >= 1");
    if (cfg.training.feature_batch_frames == 0 || cfg.training.utterance_batch == 0)
      throw ConfigError(origin + ".training: batch sizes must be positive");
    if (cfg.training.mc_samples < 1)
      throw ConfigError(origin + ".training: mc_samples must be >= 1");
  }
  if (s.has("loss")) {
    Section l = s.object("loss");
    cfg.loss.alpha = l.real("alpha", cfg.loss.alpha);
    cfg.loss.beta = l.real("beta", cfg.loss.beta);
    l.finish();
    cfg.loss.validate();
  }
  if (s.has("decode")) {
    Section d = s.object("decode");
    cfg.decode_beam = d.size("beam", cfg.decode_beam);
    d.finish();
    if (cfg.decode_beam == 0) throw ConfigError(origin + ".decode.beam: must be >= 1");
  }
  s.finish();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), path);
}

}  // namespace xview
