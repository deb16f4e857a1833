// Assembly of the cross-domain model variants: the multi-view source model
// combined with a target-domain VAE/VAEP under full or partial encoder
// sharing, adaptation layers, CTC recognizers with an optionally shared top
// recurrent layer, and the composite multitask objective.

#ifndef XVIEW_MODEL_HPP
#define XVIEW_MODEL_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xview/data.hpp"
#include "xview/lstm.hpp"
#include "xview/nets.hpp"
#include "xview/variational.hpp"

namespace xview {

enum class Variant { a_only, a_plus_b, a_plus_c, a_plus_d, vaep_plus_vaep };

enum class ModelKind { features, recognizer, multitask, joint_recognizers, adaptation };

enum class RecInput { raw, windowed, features };

struct SharingSpec {
  enum class Mode { full, partial };
  Mode mode = Mode::full;
  // Partial mode: encoder layers with index < split_index are per-domain,
  // layers at or above it (through the head) are shared.
  std::size_t split_index = 0;
};

struct LossWeights {
  double alpha = 0.5;  // recognizer vs feature-learning tradeoff
  double beta = 0.5;   // target vs source domain mix

  void validate() const;
};

struct RecognizerSpec {
  std::size_t hidden = 64;
  std::size_t num_layers = 2;
  std::size_t window = 1;  // input window width for windowed raw input
  double dropout = 0.3;
};

struct ArchitectureConfig {
  Variant variant = Variant::a_plus_c;
  std::size_t shared_dim = 8;
  std::size_t private_x_dim = 8;
  std::size_t private_y_dim = 8;
  std::size_t target_private_dim = 8;  // 0 degenerates the target branch to a plain VAE
  std::vector<std::size_t> encoder_hidden = {128, 128};
  std::vector<std::size_t> decoder_hidden = {128, 128};
  SharingSpec sharing;
  bool adaptation_layers = false;
  std::size_t adapter_hidden = 0;  // 0: same as the encoder input dim
  std::size_t frontend_dnn_layers = 0;
  std::size_t acoustic_window = 7;  // feature-learning input window (odd)
  std::size_t artic_window = 1;
  RecognizerSpec recognizer;
  RecInput rec_input = RecInput::features;
  RecInput source_rec_input = RecInput::features;  // joint mode source side
  bool joint_share_top = true;
  std::size_t source_recognizer_hidden = 0;  // 0: same as recognizer.hidden

  std::size_t encoder_depth() const { return encoder_hidden.size() + 1; }
};

struct InputDims {
  std::size_t acoustic_dim = 0;
  std::size_t artic_dim = 0;
  std::size_t num_labels = 0;
};

struct Recognizer {
  RecInput input = RecInput::raw;
  std::size_t window = 1;
  std::optional<Mlp> frontend;
  LstmStack lstm;
};

struct FeatureModel {
  std::optional<VccapNets> vccap;        // source multi-view branch (a_* variants)
  std::optional<VaepNets> src_vaep;      // acoustic-only source branch (vaep_plus_vaep)
  std::optional<VaepNets> tgt;           // target branch; absent for a_only
  std::optional<GaussianEncoder> solo_q_z;  // bare shared projection (adaptation role)

  const GaussianEncoder& source_q_z() const;
  const GaussianEncoder& target_q_z() const;
};

struct ModelGraph {
  ArchitectureConfig cfg;
  InputDims dims;
  ModelKind kind = ModelKind::features;
  ParamStore params;
  FeatureModel feat;
  std::optional<Mlp> adapter;       // linear-ReLU-linear front end (adaptation mode)
  std::optional<Recognizer> rec_t;  // target recognizer
  std::optional<Recognizer> rec_s;  // source recognizer (joint mode)
};

// Validates the configuration and instantiates every network the given
// role needs, with the declared parameter sharing. Deterministic in
// (cfg, dims, kind, seed): identically named parameters get identical
// initial values across variants.
ModelGraph build_model(const ArchitectureConfig& cfg, const InputDims& dims, ModelKind kind,
                       const Rng& init_rng);

// ---- feature extraction paths ------------------------------------------------

// Windowed target frames -> per-frame posterior means of the target-side
// shared encoder (the learned features). Deterministic, no graph.
std::vector<double> extract_target_features(const ModelGraph& model, const Utterance& u);
// Same through the source-side encoder (source-domain feature input).
std::vector<double> extract_source_features(const ModelGraph& model, const Utterance& u);

// In-graph feature path through adaptation layers: encoder posterior mean
// of adapter(x). Gradients flow into both the adapter and the encoder.
Tensor adaptation_forward(Graph& g, const ModelGraph& model, const Tensor& windowed_x);

// ---- losses -------------------------------------------------------------------

struct LossParts {
  Tensor total;
  std::map<std::string, double> parts;
};

// Dispatches the combined objective per variant: multi-view source bound
// (or acoustic-only source bound for vaep_plus_vaep) mixed with the target
// bound at weight beta. For a_only the source bound alone is returned and
// beta is ignored.
LossParts unsupervised_loss(Graph& g, const ModelGraph& model, const Tensor& src_x,
                            const Tensor& src_y, const Tensor& tgt_x, double beta, const Rng& rng,
                            const LossOptions& opts);

// In-graph recognizer forward. `input_frames` is whatever the recognizer
// consumes ({T, lstm-or-frontend input dim}).
Tensor recognizer_logits(Graph& g, const Recognizer& rec, const Tensor& input_frames,
                         bool training, Rng dropout_rng);

// Mean CTC loss of a labeled utterance batch through a recognizer whose
// per-utterance inputs are given.
Tensor ctc_batch_loss(Graph& g, const Recognizer& rec, const std::vector<Tensor>& inputs,
                      const std::vector<const LabelSequence*>& targets, bool training,
                      Rng dropout_rng);

struct MultitaskBatch {
  Tensor src_x;  // source frame pairs
  Tensor src_y;
  std::vector<const Utterance*> tgt_utts;  // labeled target utterances
};

// alpha * [(1-beta) L_vccap + beta L_vaep] + (1-alpha) * L_ctc(features).
// The CTC term consumes the target encoder's per-frame posterior means: at
// alpha = 0 they are detached constants (pure recognizer training on
// extracted features); for alpha > 0 they stay in the graph so the CTC
// gradient trains the encoder end-to-end. At the exact endpoints the
// surviving term is returned unchanged.
LossParts multitask_loss(Graph& g, const ModelGraph& model, const MultitaskBatch& batch,
                         const LossWeights& weights, const Rng& rng, bool training);

// Sum of the two domain CTC losses, each averaged over its sub-batch.
// `src_inputs` carries the per-utterance source recognizer inputs (raw,
// windowed, or frozen features prepared by the caller).
LossParts joint_recognizers_loss(Graph& g, const ModelGraph& model,
                                 const std::vector<Tensor>& src_inputs,
                                 const std::vector<const LabelSequence*>& src_targets,
                                 const std::vector<const Utterance*>& tgt_utts, const Rng& rng,
                                 bool training);

// Mean CTC loss over target utterances routed through the adaptation
// layers and encoder into the recognizer, all trained end-to-end.
LossParts adaptation_loss(Graph& g, const ModelGraph& model,
                          const std::vector<const Utterance*>& tgt_utts, const Rng& rng,
                          bool training);

// ---- minibatching ----------------------------------------------------------------

struct MixedBatch {
  std::vector<std::size_t> src;  // indices into the source collection
  std::vector<std::size_t> tgt;
};

// ceil(ratio * batch_size) source draws plus the remainder from the target,
// all independent uniform draws with replacement.
MixedBatch mixed_minibatch(std::size_t num_src, std::size_t num_tgt, std::size_t batch_size,
                           double ratio, Rng& rng);

// Utterance input preparation shared by training and decoding: raw or
// windowed frames as a constant tensor.
Tensor prepare_raw_input(const Recognizer& rec, const Utterance& u);

}  // namespace xview

#endif  // XVIEW_MODEL_HPP
