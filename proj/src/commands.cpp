#include "xview/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "xview/error.hpp"
#include "xview/log.hpp"
#include "xview/train.hpp"

namespace xview {

namespace fs = std::filesystem;

namespace {

// Exclusive lock on an output directory for the lifetime of a command.
class OutputLock {
 public:
  explicit OutputLock(const std::string& dir) {
    if (dir.empty()) throw ConfigError("no output directory configured (set 'out' or pass --out)");
    fs::create_directories(dir);
    path_ = (fs::path(dir) / kLockFile).string();
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw IoError("output directory " + dir + " is locked by another run (" + path_ + " exists)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() { ::unlink(path_.c_str()); }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::string path_;
};

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

Dataset load_required_dataset(const std::string& path, const char* what) {
  if (path.empty())
    throw ConfigError(std::string("config is missing the ") + what + " dataset path");
  return load_dataset(path);
}

void require_labels(const Dataset& ds, const char* what) {
  for (const Utterance& u : ds.utterances)
    if (!u.labels)
      throw ContractError(std::string(what) + " dataset: utterance " + u.id + " has no labels");
}

InputDims dims_of(const Dataset& acoustic_ds, std::size_t artic_dim) {
  return InputDims{acoustic_ds.acoustic_dim, artic_dim, acoustic_ds.num_labels()};
}

// Flattened frame pools for feature-phase minibatching.
struct FramePool {
  std::size_t dim = 0;
  std::vector<double> data;  // n x dim

  std::size_t count() const { return dim ? data.size() / dim : 0; }

  Tensor gather(const std::vector<std::size_t>& rows) const {
    std::vector<double> out(rows.size() * dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(rows[i] * dim), dim,
                  out.begin() + static_cast<std::ptrdiff_t>(i * dim));
    return Tensor({rows.size(), dim}, std::move(out));
  }
};

FramePool windowed_pool(const Dataset& ds, std::size_t window) {
  FramePool pool;
  pool.dim = ds.acoustic_dim * window;
  pool.data.reserve(ds.total_frames() * pool.dim);
  for (const Utterance& u : ds.utterances) {
    std::vector<double> w = window_frames(u.acoustic, u.frames(), u.acoustic_dim, window);
    pool.data.insert(pool.data.end(), w.begin(), w.end());
  }
  return pool;
}

struct PairPools {
  FramePool x;
  FramePool y;
};

PairPools pair_pools(const Dataset& source, const ArchitectureConfig& arch) {
  PairPools pools;
  pools.x = windowed_pool(source, arch.acoustic_window);
  pools.y.dim = source.artic_dim * arch.artic_window;
  pools.y.data.reserve(source.total_frames() * pools.y.dim);
  for (const Utterance& u : source.utterances) {
    std::vector<double> w = window_frames(u.artic, u.frames(), u.artic_dim, arch.artic_window);
    pools.y.data.insert(pools.y.data.end(), w.begin(), w.end());
  }
  return pools;
}

std::vector<std::size_t> draw_indices(Rng rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> out(count);
  for (auto& v : out) v = rng.uniform_index(n);
  return out;
}

int steps_for(std::size_t items, std::size_t batch) {
  return static_cast<int>((items + batch - 1) / batch);
}

void log_epoch(RunLog& log, const char* phase, const EpochRecord& rec,
               const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  std::vector<std::pair<std::string, std::string>> fields;
  fields.emplace_back("phase", phase);
  fields.emplace_back("epoch", std::to_string(rec.epoch));
  fields.emplace_back("total", RunLog::fmt(rec.train_loss));
  for (const auto& [k, v] : rec.components) fields.emplace_back(k, RunLog::fmt(v));
  if (rec.dev_per) fields.emplace_back("dev_per", RunLog::fmt(*rec.dev_per));
  for (const auto& f : extra) fields.push_back(f);
  log.metric(fields);
}

void save_trained(const std::string& path, ModelGraph& model, const TrainResult& result,
                  const std::vector<std::string>& label_names) {
  restore_params(model.params, result.best_params);
  CheckpointMeta meta;
  meta.kind = model.kind;
  meta.arch = model.cfg;
  meta.dims = model.dims;
  meta.label_names = label_names;
  meta.epoch = result.best_epoch;
  meta.dev_per = result.best_dev_per;
  save_checkpoint(path, meta, model.params);
}

Tensor decode_input(const ModelGraph& model, const Utterance& u) {
  if (!model.rec_t) throw ContractError("checkpoint contains no recognizer");
  switch (model.kind) {
    case ModelKind::multitask:
    case ModelKind::adaptation:
      return Tensor({u.frames(), model.cfg.shared_dim}, extract_target_features(model, u));
    default:
      return prepare_raw_input(*model.rec_t, u);
  }
}

std::vector<double> decode_log_probs(const ModelGraph& model, const Utterance& u) {
  Graph g;
  Tensor logits = recognizer_logits(g, *model.rec_t, decode_input(model, u), false, Rng(0));
  return g.log_softmax(logits).values();
}

}  // namespace

std::string checkpoint_file_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::features: return "features.ckpt";
    case ModelKind::recognizer: return "recognizer.ckpt";
    case ModelKind::multitask: return "multitask.ckpt";
    case ModelKind::joint_recognizers: return "joint.ckpt";
    case ModelKind::adaptation: return "adaptation.ckpt";
  }
  return "model.ckpt";
}

std::vector<DecodeResult> decode_dataset(const ModelGraph& model, const Dataset& ds,
                                         std::size_t beam) {
  std::vector<DecodeResult> out;
  out.reserve(ds.utterances.size());
  for (const Utterance& u : ds.utterances) {
    std::vector<double> lp = decode_log_probs(model, u);
    out.push_back(ctc_beam_search(lp, u.frames(), ds.num_labels() + 1, beam));
  }
  return out;
}

double dev_per(const ModelGraph& model, const Dataset& dev) {
  std::vector<LabelSequence> refs, hyps;
  refs.reserve(dev.utterances.size());
  for (const Utterance& u : dev.utterances) {
    if (!u.labels) throw ContractError("dev dataset: utterance " + u.id + " has no labels");
    refs.push_back(*u.labels);
    std::vector<double> lp = decode_log_probs(model, u);
    hyps.push_back(ctc_greedy_decode(lp, u.frames(), dev.num_labels() + 1).hypothesis);
  }
  return per(refs, hyps);
}

// ---- synth ------------------------------------------------------------------------

void cmd_synth(const ExperimentConfig& cfg) {
  if (!cfg.data.synth) throw ConfigError("synth: config has no data.synth section");
  OutputLock lock(cfg.out_dir);
  RunLog log(join_path(cfg.out_dir, "synth.log"));

  SynthConfig sc = *cfg.data.synth;
  sc.seed = cfg.seed;
  SynthCorpus corpus = synth_multiview(sc);
  save_dataset(corpus.source, join_path(cfg.out_dir, kSourceFile));
  save_dataset(corpus.target_train, join_path(cfg.out_dir, kTargetTrainFile));
  save_dataset(corpus.target_dev, join_path(cfg.out_dir, kTargetDevFile));
  save_dataset(corpus.target_test, join_path(cfg.out_dir, kTargetTestFile));
  save_label_inventory(corpus.source.label_names, join_path(cfg.out_dir, kLabelsFile));
  log.metric({{"phase", "synth"},
              {"source_utts", std::to_string(corpus.source.utterances.size())},
              {"target_train_utts", std::to_string(corpus.target_train.utterances.size())},
              {"target_dev_utts", std::to_string(corpus.target_dev.utterances.size())},
              {"target_test_utts", std::to_string(corpus.target_test.utterances.size())},
              {"source_frames", std::to_string(corpus.source.total_frames())}});
}

// ---- train-features ------------------------------------------------------------------

void cmd_train_features(const ExperimentConfig& cfg) {
  if (cfg.arch.adaptation_layers)
    throw ConfigError(
        "train-features: adaptation layers require labels; use train-joint --mode adaptation");
  OutputLock lock(cfg.out_dir);
  RunLog log(join_path(cfg.out_dir, "train_features.log"));

  Dataset source = load_required_dataset(cfg.data.source, "source");
  const bool wants_target = cfg.arch.variant != Variant::a_only;
  Dataset target;
  if (wants_target) target = load_required_dataset(cfg.data.target_train, "target_train");

  InputDims dims = dims_of(source, source.artic_dim);
  ModelGraph model = build_model(cfg.arch, dims, ModelKind::features, Rng(cfg.seed));

  const bool multiview = cfg.arch.variant != Variant::vaep_plus_vaep;
  PairPools src_pools;
  if (multiview) {
    if (source.artic_dim == 0)
      throw ConfigError("train-features: source dataset has no articulatory view");
    src_pools = pair_pools(source, cfg.arch);
  } else {
    src_pools.x = windowed_pool(source, cfg.arch.acoustic_window);
  }
  FramePool tgt_pool;
  if (wants_target) tgt_pool = windowed_pool(target, cfg.arch.acoustic_window);

  const std::size_t n_src = src_pools.x.count();
  const std::size_t n_tgt = tgt_pool.count();
  const std::size_t batch = cfg.training.feature_batch_frames;
  const int steps = steps_for(n_src + n_tgt, batch);

  Optimizer opt(cfg.optimizer, model.params.all());
  const LossOptions opts{cfg.training.mc_samples, 0.0, true};
  std::size_t consumed_src = 0, consumed_tgt = 0;

  TrainHooks hooks;
  hooks.step = [&](Graph& g, const Rng& srng) {
    Tensor src_x, src_y, tgt_x;
    if (wants_target) {
      Rng mix_rng = srng.child("mix");
      MixedBatch mb = mixed_minibatch(n_src, n_tgt, batch, cfg.training.mix_ratio, mix_rng);
      src_x = src_pools.x.gather(mb.src);
      if (multiview) src_y = src_pools.y.gather(mb.src);
      tgt_x = tgt_pool.gather(mb.tgt);
      consumed_src += mb.src.size();
      consumed_tgt += mb.tgt.size();
    } else {
      std::vector<std::size_t> rows = draw_indices(srng.child("batch_src"), n_src, batch);
      src_x = src_pools.x.gather(rows);
      if (multiview) src_y = src_pools.y.gather(rows);
      consumed_src += rows.size();
    }
    return unsupervised_loss(g, model, src_x, src_y, tgt_x, cfg.loss.beta, srng, opts);
  };
  hooks.on_epoch = [&](const EpochRecord& rec) {
    log_epoch(log, "features", rec,
              {{"beta", RunLog::fmt(cfg.loss.beta)},
               {"src_items", std::to_string(consumed_src)},
               {"tgt_items", std::to_string(consumed_tgt)}});
  };

  TrainResult result = train(model, opt, cfg.training.feature_epochs, steps, Rng(cfg.seed), hooks);
  save_trained(join_path(cfg.out_dir, checkpoint_file_name(ModelKind::features)), model, result,
               source.label_names);
}

// ---- train-recognizer -----------------------------------------------------------------

void cmd_train_recognizer(const ExperimentConfig& cfg) {
  OutputLock lock(cfg.out_dir);
  RunLog log(join_path(cfg.out_dir, "train_recognizer.log"));

  Dataset train_ds = load_required_dataset(cfg.data.target_train, "target_train");
  Dataset dev_ds = load_required_dataset(cfg.data.target_dev, "target_dev");
  require_labels(train_ds, "target_train");
  require_labels(dev_ds, "target_dev");

  const bool on_features = cfg.arch.rec_input == RecInput::features;
  ModelGraph model;
  if (on_features) {
    if (cfg.training.init_features_from.empty())
      throw ConfigError("train-recognizer: rec_input=features needs training.init_features_from");
    LoadedCheckpoint feats = load_checkpoint(cfg.training.init_features_from);
    ArchitectureConfig arch = feats.meta.arch;
    arch.recognizer = cfg.arch.recognizer;
    arch.rec_input = RecInput::features;
    InputDims dims = feats.meta.dims;
    dims.num_labels = train_ds.num_labels();
    model = build_model(arch, dims, ModelKind::multitask, Rng(cfg.seed));
    warm_start(model, feats);
  } else {
    model = build_model(cfg.arch, dims_of(train_ds, 0), ModelKind::recognizer, Rng(cfg.seed));
  }

  // Per-utterance recognizer inputs, fixed for the whole run.
  std::vector<Tensor> inputs;
  inputs.reserve(train_ds.utterances.size());
  for (const Utterance& u : train_ds.utterances) {
    if (on_features) {
      inputs.emplace_back(Shape{u.frames(), model.cfg.shared_dim},
                          extract_target_features(model, u));
    } else {
      inputs.push_back(prepare_raw_input(*model.rec_t, u));
    }
  }

  const std::size_t batch = cfg.training.utterance_batch;
  const int steps = steps_for(train_ds.utterances.size(), batch);
  Optimizer opt(cfg.optimizer, model.params.all());

  TrainHooks hooks;
  hooks.step = [&](Graph& g, const Rng& srng) {
    std::vector<std::size_t> idx =
        draw_indices(srng.child("batch_tgt"), train_ds.utterances.size(), batch);
    std::vector<Tensor> batch_inputs;
    std::vector<const LabelSequence*> targets;
    for (std::size_t i : idx) {
      batch_inputs.push_back(inputs[i]);
      targets.push_back(&*train_ds.utterances[i].labels);
    }
    LossParts out;
    out.total = ctc_batch_loss(g, *model.rec_t, batch_inputs, targets, true,
                               srng.child("rec_dropout"));
    out.parts["ctc"] = out.total.value();
    return out;
  };
  hooks.eval_dev_per = [&] { return dev_per(model, dev_ds); };
  hooks.on_epoch = [&](const EpochRecord& rec) { log_epoch(log, "recognizer", rec); };

  TrainResult result =
      train(model, opt, cfg.training.recognizer_epochs, steps, Rng(cfg.seed), hooks);
  save_trained(join_path(cfg.out_dir, checkpoint_file_name(ModelKind::recognizer)), model, result,
               train_ds.label_names);
}

// ---- train-joint -----------------------------------------------------------------------

namespace {

void train_multitask(const ExperimentConfig& cfg, RunLog& log) {
  Dataset source = load_required_dataset(cfg.data.source, "source");
  Dataset train_ds = load_required_dataset(cfg.data.target_train, "target_train");
  Dataset dev_ds = load_required_dataset(cfg.data.target_dev, "target_dev");
  require_labels(train_ds, "target_train");
  require_labels(dev_ds, "target_dev");

  InputDims dims = dims_of(train_ds, source.artic_dim);
  ModelGraph model = build_model(cfg.arch, dims, ModelKind::multitask, Rng(cfg.seed));
  if (!cfg.training.init_features_from.empty())
    warm_start(model, load_checkpoint(cfg.training.init_features_from));

  const bool multiview = cfg.arch.variant != Variant::vaep_plus_vaep;
  PairPools src_pools;
  if (multiview) {
    if (source.artic_dim == 0)
      throw ConfigError("train-joint: source dataset has no articulatory view");
    src_pools = pair_pools(source, cfg.arch);
  } else {
    src_pools.x = windowed_pool(source, cfg.arch.acoustic_window);
  }

  const std::size_t batch = cfg.training.utterance_batch;
  const int steps = steps_for(train_ds.utterances.size(), batch);
  Optimizer opt(cfg.optimizer, model.params.all());

  TrainHooks hooks;
  hooks.step = [&](Graph& g, const Rng& srng) {
    MultitaskBatch mb;
    std::vector<std::size_t> tgt_idx =
        draw_indices(srng.child("batch_tgt"), train_ds.utterances.size(), batch);
    for (std::size_t i : tgt_idx) mb.tgt_utts.push_back(&train_ds.utterances[i]);
    if (cfg.loss.alpha > 0.0) {
      std::vector<std::size_t> src_idx = draw_indices(
          srng.child("batch_src"), src_pools.x.count(), cfg.training.feature_batch_frames);
      mb.src_x = src_pools.x.gather(src_idx);
      if (multiview) mb.src_y = src_pools.y.gather(src_idx);
    }
    return multitask_loss(g, model, mb, cfg.loss, srng, true);
  };
  hooks.eval_dev_per = [&] { return dev_per(model, dev_ds); };
  hooks.on_epoch = [&](const EpochRecord& rec) {
    log_epoch(log, "multitask", rec,
              {{"alpha", RunLog::fmt(cfg.loss.alpha)}, {"beta", RunLog::fmt(cfg.loss.beta)}});
  };

  TrainResult result =
      train(model, opt, cfg.training.recognizer_epochs, steps, Rng(cfg.seed), hooks);
  save_trained(join_path(cfg.out_dir, checkpoint_file_name(ModelKind::multitask)), model, result,
               train_ds.label_names);
}

void train_joint_recognizers(const ExperimentConfig& cfg, RunLog& log) {
  Dataset source = load_required_dataset(cfg.data.source, "source");
  Dataset train_ds = load_required_dataset(cfg.data.target_train, "target_train");
  Dataset dev_ds = load_required_dataset(cfg.data.target_dev, "target_dev");
  require_labels(source, "source");
  require_labels(train_ds, "target_train");
  require_labels(dev_ds, "target_dev");
  if (source.num_labels() != train_ds.num_labels())
    throw ConfigError("train-joint: source and target label inventories differ");

  InputDims dims = dims_of(train_ds, source.artic_dim);
  ModelGraph model = build_model(cfg.arch, dims, ModelKind::joint_recognizers, Rng(cfg.seed));

  // Fixed per-utterance source recognizer inputs: frozen features from a
  // checkpoint, or (windowed) raw acoustics.
  std::vector<Tensor> src_inputs;
  src_inputs.reserve(source.utterances.size());
  if (cfg.arch.source_rec_input == RecInput::features) {
    if (cfg.training.init_features_from.empty())
      throw ConfigError("train-joint: source_rec_input=features needs training.init_features_from");
    LoadedCheckpoint feats = load_checkpoint(cfg.training.init_features_from);
    for (const Utterance& u : source.utterances)
      src_inputs.emplace_back(Shape{u.frames(), feats.meta.arch.shared_dim},
                              extract_source_features(feats.model, u));
  } else {
    for (const Utterance& u : source.utterances)
      src_inputs.push_back(prepare_raw_input(*model.rec_s, u));
  }

  const std::size_t batch = cfg.training.utterance_batch;
  const int steps = steps_for(train_ds.utterances.size(), batch);
  Optimizer opt(cfg.optimizer, model.params.all());

  TrainHooks hooks;
  hooks.step = [&](Graph& g, const Rng& srng) {
    std::vector<std::size_t> src_idx =
        draw_indices(srng.child("batch_src"), source.utterances.size(), batch);
    std::vector<std::size_t> tgt_idx =
        draw_indices(srng.child("batch_tgt"), train_ds.utterances.size(), batch);
    std::vector<Tensor> inputs;
    std::vector<const LabelSequence*> src_targets;
    for (std::size_t i : src_idx) {
      inputs.push_back(src_inputs[i]);
      src_targets.push_back(&*source.utterances[i].labels);
    }
    std::vector<const Utterance*> tgt_utts;
    for (std::size_t i : tgt_idx) tgt_utts.push_back(&train_ds.utterances[i]);
    return joint_recognizers_loss(g, model, inputs, src_targets, tgt_utts, srng, true);
  };
  hooks.eval_dev_per = [&] { return dev_per(model, dev_ds); };
  hooks.on_epoch = [&](const EpochRecord& rec) { log_epoch(log, "joint_recognizers", rec); };

  TrainResult result =
      train(model, opt, cfg.training.recognizer_epochs, steps, Rng(cfg.seed), hooks);
  save_trained(join_path(cfg.out_dir, checkpoint_file_name(ModelKind::joint_recognizers)), model,
               result, train_ds.label_names);
}

void train_adaptation(const ExperimentConfig& cfg, RunLog& log) {
  Dataset train_ds = load_required_dataset(cfg.data.target_train, "target_train");
  Dataset dev_ds = load_required_dataset(cfg.data.target_dev, "target_dev");
  require_labels(train_ds, "target_train");
  require_labels(dev_ds, "target_dev");
  if (cfg.training.init_features_from.empty())
    throw ConfigError("train-joint: adaptation mode needs training.init_features_from");

  LoadedCheckpoint feats = load_checkpoint(cfg.training.init_features_from);
  ArchitectureConfig arch = cfg.arch;
  arch.adaptation_layers = true;
  InputDims dims = dims_of(train_ds, feats.meta.dims.artic_dim);
  ModelGraph model = build_model(arch, dims, ModelKind::adaptation, Rng(cfg.seed));
  warm_start(model, feats);

  const std::size_t batch = cfg.training.utterance_batch;
  const int steps = steps_for(train_ds.utterances.size(), batch);
  Optimizer opt(cfg.optimizer, model.params.all());

  TrainHooks hooks;
  hooks.step = [&](Graph& g, const Rng& srng) {
    std::vector<std::size_t> idx =
        draw_indices(srng.child("batch_tgt"), train_ds.utterances.size(), batch);
    std::vector<const Utterance*> utts;
    for (std::size_t i : idx) utts.push_back(&train_ds.utterances[i]);
    return adaptation_loss(g, model, utts, srng, true);
  };
  hooks.eval_dev_per = [&] { return dev_per(model, dev_ds); };
  hooks.on_epoch = [&](const EpochRecord& rec) { log_epoch(log, "adaptation", rec); };

  TrainResult result =
      train(model, opt, cfg.training.recognizer_epochs, steps, Rng(cfg.seed), hooks);
  save_trained(join_path(cfg.out_dir, checkpoint_file_name(ModelKind::adaptation)), model, result,
               train_ds.label_names);
}

}  // namespace

void cmd_train_joint(const ExperimentConfig& cfg, const std::string& mode) {
  OutputLock lock(cfg.out_dir);
  if (mode == "multitask") {
    RunLog log(join_path(cfg.out_dir, "train_multitask.log"));
    train_multitask(cfg, log);
  } else if (mode == "joint_recognizers") {
    RunLog log(join_path(cfg.out_dir, "train_joint_recognizers.log"));
    train_joint_recognizers(cfg, log);
  } else if (mode == "adaptation") {
    RunLog log(join_path(cfg.out_dir, "train_adaptation.log"));
    train_adaptation(cfg, log);
  } else {
    throw ConfigError("train-joint: unknown mode '" + mode +
                      "' (expected multitask, joint_recognizers or adaptation)");
  }
}

// ---- decode -------------------------------------------------------------------------

void cmd_decode(const std::string& checkpoint_path, const std::string& dataset_path,
                std::size_t beam, const std::string& out_dir) {
  if (beam == 0) throw ValueError("decode: beam must be >= 1");
  OutputLock lock(out_dir);
  RunLog log(join_path(out_dir, "decode.log"));

  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(dataset_path);
  if (ckpt.meta.label_names != ds.label_names)
    throw ValueError("decode: label inventory mismatch between checkpoint (" +
                     std::to_string(ckpt.meta.label_names.size()) + " labels) and dataset (" +
                     std::to_string(ds.label_names.size()) + " labels)");

  std::vector<DecodeResult> results = decode_dataset(ckpt.model, ds, beam);

  std::ofstream hyps(join_path(out_dir, kHypsFile));
  std::ofstream scores(join_path(out_dir, kScoresFile));
  if (!hyps || !scores) throw IoError("cannot open hypothesis outputs under " + out_dir);
  for (std::size_t i = 0; i < results.size(); ++i) {
    hyps << ds.utterances[i].id << '\t';
    for (std::size_t k = 0; k < results[i].hypothesis.size(); ++k) {
      if (k) hyps << ' ';
      hyps << ds.label_names[static_cast<std::size_t>(results[i].hypothesis[k])];
    }
    hyps << '\n';
    scores << ds.utterances[i].id << '\t' << RunLog::fmt(results[i].score) << '\n';
  }
  hyps.flush();
  scores.flush();
  if (!hyps || !scores) throw IoError("write of hypothesis outputs failed");
  log.metric({{"phase", "decode"},
              {"utterances", std::to_string(results.size())},
              {"beam", std::to_string(beam)}});
}

// ---- evaluate ------------------------------------------------------------------------

namespace {

using NamedSeqs = std::vector<std::pair<std::string, std::vector<std::string>>>;

NamedSeqs parse_hyp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  NamedSeqs out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw FormatError(path + ": line without a tab separator: '" + line + "'");
    std::vector<std::string> tokens;
    std::istringstream rest(line.substr(tab + 1));
    std::string tok;
    while (rest >> tok) tokens.push_back(tok);
    out.emplace_back(line.substr(0, tab), std::move(tokens));
  }
  return out;
}

bool looks_like_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && magic[0] == 'X' && magic[1] == 'V' && magic[2] == 'D' &&
         magic[3] == 'S';
}

NamedSeqs load_references(const std::string& path) {
  if (!looks_like_dataset(path)) return parse_hyp_file(path);
  Dataset ds = load_dataset(path);
  NamedSeqs out;
  for (const Utterance& u : ds.utterances) {
    if (!u.labels)
      throw ContractError("evaluate: reference utterance " + u.id + " has no labels");
    std::vector<std::string> tokens;
    for (int label : *u.labels) tokens.push_back(ds.label_names[static_cast<std::size_t>(label)]);
    out.emplace_back(u.id, std::move(tokens));
  }
  return out;
}

}  // namespace

double cmd_evaluate(const std::string& refs_path, const std::string& hyps_path) {
  RunLog log;
  NamedSeqs refs = load_references(refs_path);
  NamedSeqs hyps = parse_hyp_file(hyps_path);

  std::map<std::string, const std::vector<std::string>*> hyp_by_id;
  for (const auto& [id, tokens] : hyps) {
    if (!hyp_by_id.emplace(id, &tokens).second)
      throw ValueError("evaluate: duplicate hypothesis id " + id);
  }
  if (refs.size() != hyps.size())
    throw ValueError("evaluate: id mismatch: " + std::to_string(refs.size()) + " references vs " +
                     std::to_string(hyps.size()) + " hypotheses");

  // Token names map onto a shared integer alphabet for scoring.
  std::map<std::string, int> alphabet;
  auto to_ids = [&](const std::vector<std::string>& tokens) {
    LabelSequence seq;
    for (const auto& t : tokens) seq.push_back(alphabet.emplace(t, static_cast<int>(alphabet.size())).first->second);
    return seq;
  };

  EditStats corpus;
  std::size_t ref_len = 0;
  std::ostringstream table;
  std::vector<LabelSequence> ref_seqs, hyp_seqs;
  for (const auto& [id, ref_tokens] : refs) {
    auto it = hyp_by_id.find(id);
    if (it == hyp_by_id.end())
      throw ValueError("evaluate: id mismatch: no hypothesis for reference " + id);
    LabelSequence r = to_ids(ref_tokens);
    LabelSequence h = to_ids(*it->second);
    EditStats st = edit_distance(r, h);
    corpus.substitutions += st.substitutions;
    corpus.insertions += st.insertions;
    corpus.deletions += st.deletions;
    ref_len += r.size();
    table << id << '\t' << "S=" << st.substitutions << " I=" << st.insertions
          << " D=" << st.deletions << " len=" << r.size() << '\n';
    ref_seqs.push_back(std::move(r));
    hyp_seqs.push_back(std::move(h));
  }
  const double rate = per(ref_seqs, hyp_seqs);

  std::cout << table.str();
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.2f", 100.0 * rate);
  std::cout << "PER " << pct << "% (S=" << corpus.substitutions << " I=" << corpus.insertions
            << " D=" << corpus.deletions << " / N=" << ref_len << ")\n";
  log.metric({{"phase", "evaluate"},
              {"per", RunLog::fmt(rate)},
              {"substitutions", std::to_string(corpus.substitutions)},
              {"insertions", std::to_string(corpus.insertions)},
              {"deletions", std::to_string(corpus.deletions)},
              {"ref_len", std::to_string(ref_len)}});
  return rate;
}

}  // namespace xview
