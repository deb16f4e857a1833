#include "xview/model.hpp"

#include <cmath>

#include "xview/error.hpp"

namespace xview {

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ValueError("loss weights: alpha " + std::to_string(alpha) + " outside [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ValueError("loss weights: beta " + std::to_string(beta) + " outside [0, 1]");
}

const GaussianEncoder& FeatureModel::source_q_z() const {
  if (vccap) return vccap->q_z;
  if (src_vaep) return src_vaep->q_z;
  if (solo_q_z) return *solo_q_z;
  throw ContractError("model has no source feature branch");
}

const GaussianEncoder& FeatureModel::target_q_z() const {
  if (tgt) return tgt->q_z;
  return source_q_z();  // a_only: the source projection is used as-is
}

namespace {

void validate_config(const ArchitectureConfig& cfg, const InputDims& dims, ModelKind kind) {
  if (dims.acoustic_dim == 0) throw ConfigError("model: acoustic input dimension must be positive");
  if (cfg.shared_dim == 0) throw ConfigError("model: shared latent dimension must be positive");
  if (cfg.acoustic_window % 2 == 0 || cfg.artic_window % 2 == 0)
    throw ConfigError("model: window widths must be odd");
  const bool needs_artic =
      cfg.variant != Variant::vaep_plus_vaep &&
      (kind == ModelKind::features || kind == ModelKind::multitask);
  if (needs_artic && dims.artic_dim == 0)
    throw ConfigError("model: variant needs an articulatory view but the data has none");
  if (cfg.variant == Variant::a_plus_d) {
    if (cfg.sharing.mode != SharingSpec::Mode::partial)
      throw ConfigError("model: a_plus_d requires sharing.mode = partial");
  } else if (cfg.sharing.mode == SharingSpec::Mode::partial) {
    throw ConfigError("model: partial sharing is only defined for variant a_plus_d");
  }
  if (cfg.sharing.mode == SharingSpec::Mode::partial &&
      cfg.sharing.split_index >= cfg.encoder_depth())
    throw ConfigError("model: split_index " + std::to_string(cfg.sharing.split_index) +
                      " exceeds encoder depth " + std::to_string(cfg.encoder_depth()) +
                      " (at least the top layer must be shared)");
  if (cfg.recognizer.num_layers == 0 || cfg.recognizer.hidden == 0)
    throw ConfigError("model: recognizer needs at least one layer and a positive hidden size");
  if (cfg.recognizer.window % 2 == 0)
    throw ConfigError("model: recognizer window width must be odd");
  if (!(cfg.recognizer.dropout >= 0.0 && cfg.recognizer.dropout < 1.0))
    throw ConfigError("model: dropout rate must lie in [0, 1)");
  const bool needs_labels = kind != ModelKind::features;
  if (needs_labels && dims.num_labels == 0)
    throw ConfigError("model: recognizer roles need a non-empty label inventory");
}

LstmStack build_stack(ParamStore& store, const Rng& rng, const std::string& name, std::size_t in,
                      std::size_t hidden, std::size_t num_layers, std::size_t num_labels,
                      double dropout, const std::string& shared_top_name) {
  LstmStack stack;
  stack.dropout_rate = dropout;
  std::size_t cur = in;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const bool is_top = l + 1 == num_layers;
    const std::string base =
        (is_top && !shared_top_name.empty()) ? shared_top_name : name + "/" + std::to_string(l);
    stack.layers.push_back(LstmLayer{LstmCell::create(store, rng, base + "/fwd", cur, hidden),
                                     LstmCell::create(store, rng, base + "/bwd", cur, hidden)});
    cur = 2 * hidden;
  }
  stack.out_proj = Linear::create(store, rng, name + "/out", cur, num_labels + 1);
  return stack;
}

Recognizer build_recognizer(ParamStore& store, const Rng& rng, const std::string& name,
                            RecInput input, const ArchitectureConfig& cfg, const InputDims& dims,
                            std::size_t hidden, const std::string& shared_top_name) {
  Recognizer rec;
  rec.input = input;
  rec.window = cfg.recognizer.window;
  std::size_t in = 0;
  switch (input) {
    case RecInput::raw:
      in = dims.acoustic_dim;
      break;
    case RecInput::windowed:
      in = dims.acoustic_dim * rec.window;
      break;
    case RecInput::features:
      in = cfg.shared_dim;
      break;
  }
  if (cfg.frontend_dnn_layers > 0 && input != RecInput::features) {
    const std::size_t width = 2 * hidden;
    std::vector<std::size_t> hidden_layers(cfg.frontend_dnn_layers - 1, width);
    rec.frontend = Mlp::create(store, rng, name + "/frontend", in, hidden_layers, width);
    in = width;
  }
  rec.lstm = build_stack(store, rng, name + "/lstm", in, hidden, cfg.recognizer.num_layers,
                         dims.num_labels, cfg.recognizer.dropout, shared_top_name);
  return rec;
}

}  // namespace

ModelGraph build_model(const ArchitectureConfig& cfg, const InputDims& dims, ModelKind kind,
                       const Rng& rng) {
  validate_config(cfg, dims, kind);
  ModelGraph model;
  model.cfg = cfg;
  model.dims = dims;
  model.kind = kind;
  ParamStore& store = model.params;

  const std::size_t enc_x_in = dims.acoustic_dim * cfg.acoustic_window;
  const std::size_t enc_y_in = dims.artic_dim * cfg.artic_window;

  const bool wants_features = kind == ModelKind::features || kind == ModelKind::multitask;
  if (wants_features) {
    GaussianEncoder q_z =
        GaussianEncoder::create(store, rng, "feat/q_z", enc_x_in, cfg.encoder_hidden, cfg.shared_dim);

    if (cfg.variant == Variant::vaep_plus_vaep) {
      if (cfg.private_x_dim == 0)
        throw ConfigError("model: vaep_plus_vaep needs a positive source private dimension");
      GaussianEncoder q_hx = GaussianEncoder::create(store, rng, "feat/q_hx", enc_x_in,
                                                     cfg.encoder_hidden, cfg.private_x_dim);
      Decoder p_x = Decoder::create(store, rng, "feat/p_x", cfg.shared_dim + cfg.private_x_dim,
                                    cfg.decoder_hidden, enc_x_in);
      model.feat.src_vaep = VaepNets{q_z, q_hx, p_x};
    } else {
      if (cfg.private_x_dim == 0 || cfg.private_y_dim == 0)
        throw ConfigError("model: multi-view variants need positive private dimensions");
      GaussianEncoder q_hx = GaussianEncoder::create(store, rng, "feat/q_hx", enc_x_in,
                                                     cfg.encoder_hidden, cfg.private_x_dim);
      GaussianEncoder q_hy = GaussianEncoder::create(store, rng, "feat/q_hy", enc_y_in,
                                                     cfg.encoder_hidden, cfg.private_y_dim);
      Decoder p_x = Decoder::create(store, rng, "feat/p_x", cfg.shared_dim + cfg.private_x_dim,
                                    cfg.decoder_hidden, enc_x_in);
      Decoder p_y = Decoder::create(store, rng, "feat/p_y", cfg.shared_dim + cfg.private_y_dim,
                                    cfg.decoder_hidden, enc_y_in);
      model.feat.vccap = VccapNets{q_z, q_hx, q_hy, p_x, p_y};
    }

    if (cfg.variant != Variant::a_only) {
      GaussianEncoder tgt_q_z = q_z;  // full sharing: identical parameter objects
      if (cfg.variant == Variant::a_plus_d)
        tgt_q_z = GaussianEncoder::create_partially_shared(store, rng, "feat/q_z_tgt", q_z,
                                                           cfg.sharing.split_index);
      const bool with_private =
          cfg.variant != Variant::a_plus_b && cfg.target_private_dim > 0;
      std::optional<GaussianEncoder> q_ht;
      std::size_t code_dim = cfg.shared_dim;
      if (with_private) {
        q_ht = GaussianEncoder::create(store, rng, "feat/q_ht", enc_x_in, cfg.encoder_hidden,
                                       cfg.target_private_dim);
        code_dim += cfg.target_private_dim;
      }
      Decoder p_xt =
          Decoder::create(store, rng, "feat/p_xt", code_dim, cfg.decoder_hidden, enc_x_in);
      model.feat.tgt = VaepNets{tgt_q_z, q_ht, p_xt};
    }
  }

  if (kind == ModelKind::adaptation) {
    if (!cfg.adaptation_layers)
      throw ConfigError("model: adaptation role requires adaptation_layers = true");
    // The shared projection network the adapter feeds; warm-started from a
    // features checkpoint by the caller.
    model.feat.solo_q_z =
        GaussianEncoder::create(store, rng, "feat/q_z", enc_x_in, cfg.encoder_hidden, cfg.shared_dim);
    const std::size_t adapter_hidden = cfg.adapter_hidden ? cfg.adapter_hidden : enc_x_in;
    model.adapter = Mlp::create(store, rng, "adapter", enc_x_in, {adapter_hidden}, enc_x_in);
  }

  switch (kind) {
    case ModelKind::features:
      break;
    case ModelKind::recognizer:
      model.rec_t = build_recognizer(store, rng, "rec_t", cfg.rec_input, cfg, dims,
                                     cfg.recognizer.hidden, "");
      break;
    case ModelKind::multitask:
    case ModelKind::adaptation:
      model.rec_t =
          build_recognizer(store, rng, "rec_t", RecInput::features, cfg, dims,
                           cfg.recognizer.hidden, "");
      break;
    case ModelKind::joint_recognizers: {
      const std::string shared_top = cfg.joint_share_top ? "rec_shared/top" : "";
      const std::size_t src_hidden =
          cfg.source_recognizer_hidden ? cfg.source_recognizer_hidden : cfg.recognizer.hidden;
      model.rec_t = build_recognizer(store, rng, "rec_t", RecInput::raw, cfg, dims,
                                     cfg.recognizer.hidden, shared_top);
      model.rec_s = build_recognizer(store, rng, "rec_s", cfg.source_rec_input, cfg, dims,
                                     src_hidden, shared_top);
      break;
    }
  }
  return model;
}

// ---- feature extraction ----------------------------------------------------------

namespace {

std::vector<double> windowed_frames(const ArchitectureConfig& cfg, const Utterance& u) {
  return window_frames(u.acoustic, u.frames(), u.acoustic_dim, cfg.acoustic_window);
}

}  // namespace

std::vector<double> extract_target_features(const ModelGraph& model, const Utterance& u) {
  std::vector<double> w = windowed_frames(model.cfg, u);
  const std::size_t T = u.frames();
  if (model.adapter) {
    w = model.adapter->forward_values(w, T);
  }
  return model.feat.target_q_z().mean_values(w, T);
}

std::vector<double> extract_source_features(const ModelGraph& model, const Utterance& u) {
  return model.feat.source_q_z().mean_values(windowed_frames(model.cfg, u), u.frames());
}

Tensor adaptation_forward(Graph& g, const ModelGraph& model, const Tensor& windowed_x) {
  if (!model.adapter) throw ContractError("adaptation_forward: model has no adaptation layers");
  Tensor transformed = model.adapter->forward(g, windowed_x);
  return model.feat.source_q_z().forward(g, transformed).mean;
}

// ---- losses -----------------------------------------------------------------------

LossParts unsupervised_loss(Graph& g, const ModelGraph& model, const Tensor& src_x,
                            const Tensor& src_y, const Tensor& tgt_x, double beta, const Rng& rng,
                            const LossOptions& opts) {
  const ArchitectureConfig& cfg = model.cfg;
  LossParts out;
  if (cfg.variant == Variant::a_only) {
    out.total = vccap_loss(g, *model.feat.vccap, src_x, src_y, rng.child("S"), opts);
    out.parts["vccap"] = out.total.value();
    return out;
  }
  Tensor src_term;
  if (cfg.variant == Variant::vaep_plus_vaep) {
    src_term = vaep_loss(g, *model.feat.src_vaep, src_x, rng.child("S"), opts);
    out.parts["src_vaep"] = src_term.value();
  } else {
    src_term = vccap_loss(g, *model.feat.vccap, src_x, src_y, rng.child("S"), opts);
    out.parts["vccap"] = src_term.value();
  }
  Tensor tgt_term = vaep_loss(g, *model.feat.tgt, tgt_x, rng.child("T"), opts);
  out.parts["vaep"] = tgt_term.value();
  out.total = g.add(g.scale(src_term, 1.0 - beta), g.scale(tgt_term, beta));
  return out;
}

Tensor recognizer_logits(Graph& g, const Recognizer& rec, const Tensor& input_frames,
                         bool training, Rng dropout_rng) {
  Tensor h = input_frames;
  if (rec.frontend) h = rec.frontend->forward(g, h);
  return lstm_forward(g, rec.lstm, h, training, dropout_rng);
}

Tensor ctc_batch_loss(Graph& g, const Recognizer& rec, const std::vector<Tensor>& inputs,
                      const std::vector<const LabelSequence*>& targets, bool training,
                      Rng dropout_rng) {
  if (inputs.empty()) throw ValueError("ctc_batch_loss: empty batch");
  if (inputs.size() != targets.size())
    throw ContractError("ctc_batch_loss: " + std::to_string(inputs.size()) + " inputs vs " +
                        std::to_string(targets.size()) + " targets");
  Tensor total;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!targets[i]) throw ContractError("ctc_batch_loss: utterance without labels");
    Tensor logits = recognizer_logits(g, rec, inputs[i], training, dropout_rng.child(i));
    Tensor loss = ctc_loss(g, g.log_softmax(logits), *targets[i]);
    total = (i == 0) ? loss : g.add(total, loss);
  }
  return g.scale(total, 1.0 / static_cast<double>(inputs.size()));
}

LossParts multitask_loss(Graph& g, const ModelGraph& model, const MultitaskBatch& batch,
                         const LossWeights& weights, const Rng& rng, bool training) {
  weights.validate();
  if (!model.rec_t) throw ContractError("multitask_loss: model has no target recognizer");
  if (batch.tgt_utts.empty()) throw ValueError("multitask_loss: empty target batch");
  for (const Utterance* u : batch.tgt_utts)
    if (!u->labels) throw ContractError("multitask_loss: target utterance " + u->id +
                                        " has no labels");
  const double alpha = weights.alpha;
  LossParts out;

  Tensor ctc_term;
  if (alpha < 1.0) {
    std::vector<Tensor> inputs;
    inputs.reserve(batch.tgt_utts.size());
    for (std::size_t i = 0; i < batch.tgt_utts.size(); ++i) {
      const Utterance& u = *batch.tgt_utts[i];
      const std::size_t T = u.frames();
      if (alpha == 0.0) {
        // Pure recognizer training on extracted features: the encoder is
        // out of the graph entirely.
        inputs.emplace_back(Shape{T, model.cfg.shared_dim}, extract_target_features(model, u));
      } else {
        std::vector<double> w = windowed_frames(model.cfg, u);
        const std::size_t wdim = w.size() / T;
        Tensor wx(Shape{T, wdim}, std::move(w));
        DiagGaussianT q = model.feat.target_q_z().forward(
            g, wx, model.cfg.recognizer.dropout, rng.child("feat_dropout").child(i), training);
        inputs.push_back(q.mean);
      }
    }
    std::vector<const LabelSequence*> targets;
    targets.reserve(batch.tgt_utts.size());
    for (const Utterance* u : batch.tgt_utts) targets.push_back(&*u->labels);
    ctc_term = ctc_batch_loss(g, *model.rec_t, inputs, targets, training, rng.child("rec_dropout"));
    out.parts["ctc"] = ctc_term.value();
  }

  Tensor unsup_term;
  if (alpha > 0.0) {
    // The target bound runs over the frames of the drawn utterances.
    std::vector<double> tgt_frames;
    std::size_t total_frames = 0;
    for (const Utterance* u : batch.tgt_utts) {
      std::vector<double> w = windowed_frames(model.cfg, *u);
      tgt_frames.insert(tgt_frames.end(), w.begin(), w.end());
      total_frames += u->frames();
    }
    const std::size_t tgt_dim = tgt_frames.size() / total_frames;
    Tensor tgt_x(Shape{total_frames, tgt_dim}, std::move(tgt_frames));
    LossParts unsup =
        unsupervised_loss(g, model, batch.src_x, batch.src_y, tgt_x, weights.beta, rng,
                          LossOptions{1, model.cfg.recognizer.dropout, training});
    unsup_term = unsup.total;
    out.parts.insert(unsup.parts.begin(), unsup.parts.end());
    out.parts["unsup"] = unsup_term.value();
  }

  if (alpha == 0.0) {
    out.total = ctc_term;
  } else if (alpha == 1.0) {
    out.total = unsup_term;
  } else {
    out.total = g.add(g.scale(unsup_term, alpha), g.scale(ctc_term, 1.0 - alpha));
  }
  return out;
}

LossParts joint_recognizers_loss(Graph& g, const ModelGraph& model,
                                 const std::vector<Tensor>& src_inputs,
                                 const std::vector<const LabelSequence*>& src_targets,
                                 const std::vector<const Utterance*>& tgt_utts, const Rng& rng,
                                 bool training) {
  if (!model.rec_s || !model.rec_t)
    throw ContractError("joint_recognizers_loss: model lacks the two domain recognizers");
  if (src_inputs.empty() && tgt_utts.empty())
    throw ValueError("joint_recognizers_loss: both sub-batches are empty");
  LossParts out;
  Tensor total;
  if (!src_inputs.empty()) {
    Tensor src_loss = ctc_batch_loss(g, *model.rec_s, src_inputs, src_targets, training,
                                     rng.child("src_dropout"));
    out.parts["ctc_src"] = src_loss.value();
    total = src_loss;
  }
  if (!tgt_utts.empty()) {
    std::vector<Tensor> inputs;
    std::vector<const LabelSequence*> targets;
    inputs.reserve(tgt_utts.size());
    for (const Utterance* u : tgt_utts) {
      if (!u->labels) throw ContractError("joint_recognizers_loss: target utterance " + u->id +
                                          " has no labels");
      inputs.push_back(prepare_raw_input(*model.rec_t, *u));
      targets.push_back(&*u->labels);
    }
    Tensor tgt_loss =
        ctc_batch_loss(g, *model.rec_t, inputs, targets, training, rng.child("rec_dropout"));
    out.parts["ctc_tgt"] = tgt_loss.value();
    total = total.size() ? g.add(total, tgt_loss) : tgt_loss;
  }
  out.total = total;
  return out;
}

LossParts adaptation_loss(Graph& g, const ModelGraph& model,
                          const std::vector<const Utterance*>& tgt_utts, const Rng& rng,
                          bool training) {
  if (!model.rec_t || !model.adapter)
    throw ContractError("adaptation_loss: model lacks adapter or recognizer");
  if (tgt_utts.empty()) throw ValueError("adaptation_loss: empty batch");
  std::vector<Tensor> inputs;
  std::vector<const LabelSequence*> targets;
  inputs.reserve(tgt_utts.size());
  for (const Utterance* u : tgt_utts) {
    if (!u->labels)
      throw ContractError("adaptation_loss: target utterance " + u->id + " has no labels");
    const std::size_t T = u->frames();
    std::vector<double> w = windowed_frames(model.cfg, *u);
    const std::size_t wdim = w.size() / T;
    Tensor wx(Shape{T, wdim}, std::move(w));
    inputs.push_back(adaptation_forward(g, model, wx));
    targets.push_back(&*u->labels);
  }
  LossParts out;
  out.total = ctc_batch_loss(g, *model.rec_t, inputs, targets, training, rng.child("rec_dropout"));
  out.parts["ctc"] = out.total.value();
  return out;
}

// ---- minibatching -------------------------------------------------------------------

MixedBatch mixed_minibatch(std::size_t num_src, std::size_t num_tgt, std::size_t batch_size,
                           double ratio, Rng& rng) {
  if (num_src == 0 || num_tgt == 0) throw ValueError("mixed_minibatch: empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ValueError("mixed_minibatch: ratio " + std::to_string(ratio) + " outside (0, 1)");
  if (batch_size == 0) throw ValueError("mixed_minibatch: batch size must be positive");
  const std::size_t n_src =
      static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(batch_size)));
  MixedBatch batch;
  batch.src.reserve(n_src);
  for (std::size_t i = 0; i < n_src; ++i) batch.src.push_back(rng.uniform_index(num_src));
  batch.tgt.reserve(batch_size - n_src);
  for (std::size_t i = n_src; i < batch_size; ++i) batch.tgt.push_back(rng.uniform_index(num_tgt));
  return batch;
}

Tensor prepare_raw_input(const Recognizer& rec, const Utterance& u) {
  const std::size_t T = u.frames();
  switch (rec.input) {
    case RecInput::raw:
      return Tensor(Shape{T, u.acoustic_dim}, u.acoustic);
    case RecInput::windowed: {
      std::vector<double> w = window_frames(u.acoustic, T, u.acoustic_dim, rec.window);
      return Tensor(Shape{T, u.acoustic_dim * rec.window}, std::move(w));
    }
    case RecInput::features:
      throw ContractError("prepare_raw_input: feature inputs are prepared by the caller");
  }
  throw ContractError("prepare_raw_input: unreachable");
}

}  // namespace xview
