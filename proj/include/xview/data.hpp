// Dataset representation, frame windowing, the XVDS container format and a
// synthetic paired-two-view generator that stands in for real corpora at
// desk scale.
//
// XVDS container (little-endian):
//   magic "XVDS", version u32
//   domain u8 (0 source, 1 target)
//   acoustic_dim u32, articulatory_dim u32 (0 = view absent)
//   label inventory: count u32, then per label u16 length + name bytes
//     (line/list index = label id; blank is implicit and never listed)
//   utterance count u32, then per utterance:
//     id u16 length + bytes, T u32, has_labels u8,
//     acoustic frames T*acoustic_dim f32,
//     articulatory frames T*articulatory_dim f32,
//     [labels: count u32, ids u16 each]
// Values are stored as f32 and widened to f64 in memory.

#ifndef XVIEW_DATA_HPP
#define XVIEW_DATA_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "xview/ctc.hpp"
#include "xview/rng.hpp"

namespace xview {

enum class DomainTag : std::uint8_t { source = 0, target = 1 };

struct Utterance {
  std::string id;
  std::size_t acoustic_dim = 0;
  std::vector<double> acoustic;  // T x acoustic_dim, row-major
  std::size_t artic_dim = 0;
  std::vector<double> artic;  // T x artic_dim, empty when the view is absent
  std::optional<LabelSequence> labels;

  std::size_t frames() const { return acoustic_dim ? acoustic.size() / acoustic_dim : 0; }
};

struct Dataset {
  DomainTag domain = DomainTag::target;
  std::size_t acoustic_dim = 0;
  std::size_t artic_dim = 0;                // 0 when no articulatory view
  std::vector<std::string> label_names;     // index = label id
  std::vector<Utterance> utterances;

  std::size_t num_labels() const { return label_names.size(); }
  std::size_t total_frames() const;
};

// One aligned source-domain sample: windowed acoustic vector plus
// (optionally windowed) articulatory vector.
struct MultiViewPair {
  std::vector<double> x;
  std::vector<double> y;
};

// Per-frame concatenation of `width` consecutive frames centered on each
// frame, replicating the edges; T rows in, T rows out. Width must be odd.
std::vector<double> window_frames(const std::vector<double>& frames, std::size_t num_frames,
                                  std::size_t dim, std::size_t width);

// Flattens a source dataset into frame-level pairs with the given window
// widths applied to each view.
std::vector<MultiViewPair> make_pairs(const Dataset& source, std::size_t acoustic_window,
                                      std::size_t artic_window);

// ---- synthetic corpus ----------------------------------------------------------

struct SynthConfig {
  std::size_t shared_dim = 8;        // z*
  std::size_t private_x_dim = 8;     // acoustic nuisance
  std::size_t private_y_dim = 4;     // articulatory nuisance
  std::size_t acoustic_dim = 24;
  std::size_t artic_dim = 16;
  std::size_t num_labels = 8;        // V
  std::size_t min_frames = 12;       // per utterance
  std::size_t max_frames = 40;
  std::size_t source_min_frames = 0;  // 0: use the global frame range
  std::size_t source_max_frames = 0;
  std::size_t min_segment = 2;       // frames per label segment
  std::size_t max_segment = 5;
  std::size_t source_utterances = 200;
  std::size_t target_train_utterances = 200;
  std::size_t target_dev_utterances = 40;
  std::size_t target_test_utterances = 40;
  double within_class_scale = 0.35;  // latent variation inside a segment
  double noise_level = 0.15;         // observation noise on both views
  double shift_strength = 0.4;       // off-identity scale of the target affine map
  double shift_noise = 0.1;          // extra noise after the domain shift
  // AR(1) coefficient of the private and within-class latents across frames
  // (0 = white; near 1 = slowly drifting speaker/channel-like nuisance).
  double nuisance_correlation = 0.9;
  // Amplitude of both views before observation noise. Decoders use unit
  // output variance, so this sets the reconstruction-vs-KL balance.
  double view_scale = 1.0;
  bool identity_mixing = false;  // x = [z*, h_x] verbatim (dims must match)
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  Dataset source;        // both views, labeled
  Dataset target_train;  // acoustic only, labeled
  Dataset target_dev;
  Dataset target_test;
};

// Samples a corpus where the shared latent carries the label signal, each
// view mixes the shared latent with its own private nuisance through a
// random nonlinear map, and target acoustics additionally pass through an
// affine domain shift. Deterministic in cfg.seed.
SynthCorpus synth_multiview(const SynthConfig& cfg);

// ---- container IO ----------------------------------------------------------------

void save_dataset(const Dataset& ds, const std::string& path);
// Validates every record (labels in range, CTC-feasible); throws
// FormatError / TruncatedError / DataValidationError and never returns a
// partial dataset.
Dataset load_dataset(const std::string& path);

// Plain-text label inventory sidecar: one name per line, line index =
// label id (blank is implicit and never listed).
void save_label_inventory(const std::vector<std::string>& names, const std::string& path);
std::vector<std::string> load_label_inventory(const std::string& path);

}  // namespace xview

#endif  // XVIEW_DATA_HPP
