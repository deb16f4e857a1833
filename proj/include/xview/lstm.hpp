// Bidirectional LSTM recognizer stack: stacked bidirectional layers whose
// per-frame forward/backward outputs are concatenated before the next
// layer, followed by a linear projection to V+1 logits (blank at index 0).

#ifndef XVIEW_LSTM_HPP
#define XVIEW_LSTM_HPP

#include <cstddef>
#include <vector>

#include "xview/nets.hpp"
#include "xview/rng.hpp"
#include "xview/tensor.hpp"

namespace xview {

// One direction of one layer. Gate order within the 4h-wide blocks is
// input, forget, cell candidate, output.
struct LstmCell {
  ParamPtr w_in;   // {in, 4h}
  ParamPtr w_rec;  // {h, 4h}
  ParamPtr bias;   // {4h}; forget-gate block initialized to 1

  static LstmCell create(ParamStore& store, const Rng& init_rng, const std::string& name,
                         std::size_t in, std::size_t hidden);
  std::size_t hidden() const { return w_rec->shape[0]; }
};

struct LstmLayer {
  LstmCell fwd;
  LstmCell bwd;
};

struct LstmStack {
  std::vector<LstmLayer> layers;
  Linear out_proj;  // {2h, V+1}
  double dropout_rate = 0.0;

  static LstmStack create(ParamStore& store, const Rng& init_rng, const std::string& name,
                          std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                          std::size_t num_labels, double dropout_rate);

  std::size_t input_dim() const { return layers.front().fwd.w_in->shape[0]; }
  std::size_t hidden() const { return layers.front().fwd.hidden(); }
  std::size_t vocab_with_blank() const { return out_proj.out_dim(); }
};

// frames: {T, d} -> logits {T, V+1}. Dropout is applied to the concatenated
// layer outputs between layers in training mode.
Tensor lstm_forward(Graph& g, const LstmStack& stack, const Tensor& frames, bool training,
                    Rng dropout_rng);

}  // namespace xview

#endif  // XVIEW_LSTM_HPP
