// Python bindings for the main numerical operations: CTC loss/decoding,
// the variational building blocks, scoring, windowing and the synthetic
// corpus generator.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xview/ctc.hpp"
#include "xview/data.hpp"
#include "xview/error.hpp"
#include "xview/variational.hpp"

namespace py = pybind11;
using namespace xview;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Array1d = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array1d& a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

struct Rows {
  std::vector<double> values;
  std::size_t rows;
  std::size_t cols;
};

Rows to_rows(const Array2d& a, const char* what) {
  if (a.ndim() != 2) throw ShapeError(std::string(what) + ": expected a 2-d array");
  Rows r;
  r.rows = static_cast<std::size_t>(a.shape(0));
  r.cols = static_cast<std::size_t>(a.shape(1));
  r.values.assign(a.data(), a.data() + a.size());
  return r;
}

py::array_t<double> from_rows(const std::vector<double>& values, std::size_t rows,
                              std::size_t cols) {
  py::array_t<double> out({rows, cols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::dict utt_to_dict(const Utterance& u) {
  py::dict d;
  d["id"] = u.id;
  d["acoustic"] = from_rows(u.acoustic, u.frames(), u.acoustic_dim);
  if (u.artic_dim)
    d["articulatory"] = from_rows(u.artic, u.frames(), u.artic_dim);
  if (u.labels) d["labels"] = *u.labels;
  return d;
}

py::dict dataset_to_dict(const Dataset& ds) {
  py::dict d;
  d["domain"] = ds.domain == DomainTag::source ? "source" : "target";
  d["label_names"] = ds.label_names;
  py::list utts;
  for (const Utterance& u : ds.utterances) utts.append(utt_to_dict(u));
  d["utterances"] = utts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_xview, m) {
  m.doc() = "cross-domain multi-view feature learning and CTC toolkit (native core)";

  py::register_exception<Error>(m, "XviewError");

  m.def(
      "log_softmax",
      [](const Array2d& x) {
        Rows r = to_rows(x, "log_softmax");
        return from_rows(vals::log_softmax_rows(r.values, r.rows, r.cols), r.rows, r.cols);
      },
      py::arg("logits"), "Row-wise numerically stable log softmax.");

  m.def(
      "kl_to_standard_normal",
      [](const Array1d& mean, const Array1d& log_var) {
        return kl_to_standard_normal(DiagGaussian{to_vec(mean), to_vec(log_var)});
      },
      py::arg("mean"), py::arg("log_var"),
      "KL divergence from a diagonal Gaussian to N(0, I).");

  m.def(
      "gaussian_log_likelihood",
      [](const Array1d& x, const Array1d& mean, const Array1d& log_var) {
        return gaussian_log_likelihood(to_vec(x), to_vec(mean), to_vec(log_var));
      },
      py::arg("x"), py::arg("mean"), py::arg("log_var"));

  m.def(
      "sample_reparam",
      [](const Array1d& mean, const Array1d& log_var, const Array1d& eps) {
        std::vector<double> z =
            sample_reparam(DiagGaussian{to_vec(mean), to_vec(log_var)}, to_vec(eps));
        py::array_t<double> out(static_cast<py::ssize_t>(z.size()));
        std::copy(z.begin(), z.end(), out.mutable_data());
        return out;
      },
      py::arg("mean"), py::arg("log_var"), py::arg("eps"));

  m.def(
      "ctc_loss",
      [](const Array2d& log_probs, const LabelSequence& target) {
        Rows r = to_rows(log_probs, "ctc_loss");
        return ctc_loss_value(r.values, r.rows, r.cols, target);
      },
      py::arg("log_probs"), py::arg("target"),
      "Negative log probability of all alignments collapsing to target.");

  m.def(
      "ctc_loss_grad",
      [](const Array2d& log_probs, const LabelSequence& target) {
        Rows r = to_rows(log_probs, "ctc_loss_grad");
        Graph g;
        Tensor lp = g.leaf({r.rows, r.cols}, r.values);
        Tensor loss = ctc_loss(g, lp, target);
        g.backward(loss);
        return py::make_tuple(loss.value(), from_rows(g.grad(lp), r.rows, r.cols));
      },
      py::arg("log_probs"), py::arg("target"),
      "CTC loss and its gradient with respect to the log probabilities.");

  m.def(
      "ctc_greedy_decode",
      [](const Array2d& log_probs) {
        Rows r = to_rows(log_probs, "ctc_greedy_decode");
        DecodeResult res = ctc_greedy_decode(r.values, r.rows, r.cols);
        return py::make_tuple(res.hypothesis, res.score);
      },
      py::arg("log_probs"));

  m.def(
      "ctc_beam_search",
      [](const Array2d& log_probs, std::size_t beam) {
        Rows r = to_rows(log_probs, "ctc_beam_search");
        DecodeResult res = ctc_beam_search(r.values, r.rows, r.cols, beam);
        return py::make_tuple(res.hypothesis, res.score);
      },
      py::arg("log_probs"), py::arg("beam"));

  m.def(
      "edit_distance",
      [](const LabelSequence& ref, const LabelSequence& hyp) {
        EditStats st = edit_distance(ref, hyp);
        return py::make_tuple(st.substitutions, st.insertions, st.deletions);
      },
      py::arg("ref"), py::arg("hyp"), "Returns (substitutions, insertions, deletions).");

  m.def("per", &per, py::arg("refs"), py::arg("hyps"),
        "Corpus phone error rate: (S+I+D) / total reference length.");

  m.def(
      "window_frames",
      [](const Array2d& frames, std::size_t width) {
        Rows r = to_rows(frames, "window_frames");
        return from_rows(window_frames(r.values, r.rows, r.cols, width), r.rows, r.cols * width);
      },
      py::arg("frames"), py::arg("width"),
      "Center-windowed frame stacking with edge replication.");

  m.def(
      "synth_corpus",
      [](std::size_t shared_dim, std::size_t num_labels, std::size_t source_utterances,
         std::size_t target_utterances, std::uint64_t seed) {
        SynthConfig cfg;
        cfg.shared_dim = shared_dim;
        cfg.num_labels = num_labels;
        cfg.source_utterances = source_utterances;
        cfg.target_train_utterances = target_utterances;
        cfg.target_dev_utterances = std::max<std::size_t>(1, target_utterances / 4);
        cfg.target_test_utterances = std::max<std::size_t>(1, target_utterances / 4);
        cfg.seed = seed;
        SynthCorpus corpus = synth_multiview(cfg);
        py::dict d;
        d["source"] = dataset_to_dict(corpus.source);
        d["target_train"] = dataset_to_dict(corpus.target_train);
        d["target_dev"] = dataset_to_dict(corpus.target_dev);
        d["target_test"] = dataset_to_dict(corpus.target_test);
        return d;
      },
      py::arg("shared_dim") = 8, py::arg("num_labels") = 8, py::arg("source_utterances") = 10,
      py::arg("target_utterances") = 10, py::arg("seed") = 1,
      "Small synthetic paired-view corpus as nested dictionaries.");

  m.def(
      "load_dataset",
      [](const std::string& path) { return dataset_to_dict(load_dataset(path)); },
      py::arg("path"), "Reads an XVDS dataset container.");
}
