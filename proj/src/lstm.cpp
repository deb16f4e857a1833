#include "xview/lstm.hpp"

#include "xview/error.hpp"

namespace xview {

LstmCell LstmCell::create(ParamStore& store, const Rng& init_rng, const std::string& name,
                          std::size_t in, std::size_t hidden) {
  LstmCell cell;
  cell.w_in = store.create(name + "/W", {in, 4 * hidden},
                           init_uniform_fan_in(init_rng, name + "/W", in, in * 4 * hidden));
  cell.w_rec = store.create(name + "/U", {hidden, 4 * hidden},
                            init_uniform_fan_in(init_rng, name + "/U", hidden, hidden * 4 * hidden));
  // Forget-gate bias starts at 1 so early gradients pass through the cell.
  std::vector<double> b(4 * hidden, 0.0);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
  cell.bias = store.create(name + "/b", {4 * hidden}, std::move(b));
  return cell;
}

LstmStack LstmStack::create(ParamStore& store, const Rng& init_rng, const std::string& name,
                            std::size_t input_dim, std::size_t hidden, std::size_t num_layers,
                            std::size_t num_labels, double dropout_rate) {
  if (num_layers == 0) throw ConfigError("lstm " + name + ": need at least one layer");
  if (hidden == 0) throw ConfigError("lstm " + name + ": hidden size must be positive");
  LstmStack stack;
  stack.dropout_rate = dropout_rate;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::string base = name + "/" + std::to_string(l);
    stack.layers.push_back(LstmLayer{LstmCell::create(store, init_rng, base + "/fwd", in, hidden),
                                     LstmCell::create(store, init_rng, base + "/bwd", in, hidden)});
    in = 2 * hidden;
  }
  stack.out_proj = Linear::create(store, init_rng, name + "/out", in, num_labels + 1);
  return stack;
}

namespace {

// Runs one direction over precomputed input projections and returns the
// per-frame hidden states stacked in time order, {T, h}.
Tensor run_direction(Graph& g, const LstmCell& cell, const Tensor& input_proj, bool reverse) {
  const std::size_t T = input_proj.dim(0);
  const std::size_t h = cell.hidden();
  Tensor u = enter(g, cell.w_rec);

  std::vector<Tensor> outputs(T);
  Tensor h_prev = Tensor::zeros({1, h});
  Tensor c_prev = Tensor::zeros({1, h});
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    Tensor pre = g.add(g.rows(input_proj, t, 1), g.matmul(h_prev, u));
    Tensor gate_i = g.sigmoid(g.slice_cols(pre, 0, h));
    Tensor gate_f = g.sigmoid(g.slice_cols(pre, h, h));
    Tensor gate_g = g.tanh(g.slice_cols(pre, 2 * h, h));
    Tensor gate_o = g.sigmoid(g.slice_cols(pre, 3 * h, h));
    Tensor c = g.add(g.mul(gate_f, c_prev), g.mul(gate_i, gate_g));
    Tensor out = g.mul(gate_o, g.tanh(c));
    outputs[t] = out;
    h_prev = out;
    c_prev = c;
  }
  return g.concat_rows(outputs);
}

}  // namespace

Tensor lstm_forward(Graph& g, const LstmStack& stack, const Tensor& frames, bool training,
                    Rng dropout_rng) {
  if (frames.rank() != 2 || frames.dim(1) != stack.input_dim())
    throw ShapeError("lstm_forward: frames " + shape_str(frames.shape()) + " do not match input dim " +
                     std::to_string(stack.input_dim()));
  Tensor h = frames;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const LstmLayer& layer = stack.layers[l];
    // Input projections for the whole sequence at once, one matmul per
    // direction; the recurrent part runs per frame.
    Tensor proj_f = g.add_rowwise(g.matmul(h, enter(g, layer.fwd.w_in)), enter(g, layer.fwd.bias));
    Tensor proj_b = g.add_rowwise(g.matmul(h, enter(g, layer.bwd.w_in)), enter(g, layer.bwd.bias));
    Tensor out_f = run_direction(g, layer.fwd, proj_f, false);
    Tensor out_b = run_direction(g, layer.bwd, proj_b, true);
    h = g.concat_cols(out_f, out_b);
    if (l + 1 < stack.layers.size() && stack.dropout_rate > 0.0)
      h = g.dropout(h, stack.dropout_rate, dropout_rng.child(l), training);
  }
  return stack.out_proj.forward(g, h);
}

}  // namespace xview
