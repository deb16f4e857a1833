#include "xview/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xview/error.hpp"

namespace xview {

std::size_t Dataset::total_frames() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.frames();
  return n;
}

// ---- windowing -----------------------------------------------------------------

std::vector<double> window_frames(const std::vector<double>& frames, std::size_t num_frames,
                                  std::size_t dim, std::size_t width) {
  if (width % 2 == 0 || width == 0)
    throw ValueError("window_frames: width must be odd and positive, got " +
                     std::to_string(width));
  if (frames.size() != num_frames * dim)
    throw ShapeError("window_frames: " + std::to_string(frames.size()) + " values is not " +
                     std::to_string(num_frames) + "x" + std::to_string(dim));
  if (width == 1) return frames;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t T = static_cast<std::ptrdiff_t>(num_frames);
  std::vector<double> out(num_frames * width * dim);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    double* row = out.data() + static_cast<std::size_t>(t) * width * dim;
    for (std::ptrdiff_t offset = -half; offset <= half; ++offset) {
      std::ptrdiff_t src = t + offset;
      if (src < 0) src = 0;          // edge replication
      if (src >= T) src = T - 1;
      std::memcpy(row + static_cast<std::size_t>(offset + half) * dim,
                  frames.data() + static_cast<std::size_t>(src) * dim, dim * sizeof(double));
    }
  }
  return out;
}

std::vector<MultiViewPair> make_pairs(const Dataset& source, std::size_t acoustic_window,
                                      std::size_t artic_window) {
  if (source.artic_dim == 0)
    throw ValueError("make_pairs: dataset has no articulatory view");
  std::vector<MultiViewPair> pairs;
  pairs.reserve(source.total_frames());
  for (const Utterance& u : source.utterances) {
    const std::size_t T = u.frames();
    std::vector<double> wx = window_frames(u.acoustic, T, u.acoustic_dim, acoustic_window);
    std::vector<double> wy = window_frames(u.artic, T, u.artic_dim, artic_window);
    const std::size_t dx = u.acoustic_dim * acoustic_window;
    const std::size_t dy = u.artic_dim * artic_window;
    for (std::size_t t = 0; t < T; ++t) {
      pairs.push_back(MultiViewPair{
          std::vector<double>(wx.begin() + static_cast<std::ptrdiff_t>(t * dx),
                              wx.begin() + static_cast<std::ptrdiff_t>((t + 1) * dx)),
          std::vector<double>(wy.begin() + static_cast<std::ptrdiff_t>(t * dy),
                              wy.begin() + static_cast<std::ptrdiff_t>((t + 1) * dy))});
    }
  }
  return pairs;
}

// ---- synthetic corpus ------------------------------------------------------------

namespace {

// Random affine-plus-tanh map v -> A v + 0.5 * W2 tanh(W1 v). The affine
// part keeps the shared signal linearly recoverable, the tanh part makes
// the mixing genuinely nonlinear.
struct MixingMap {
  std::size_t in = 0, out = 0, hidden = 0;
  std::vector<double> a, w1, w2;

  static MixingMap create(Rng rng, std::size_t in, std::size_t out) {
    MixingMap m;
    m.in = in;
    m.out = out;
    m.hidden = 2 * in;
    const double sa = 1.0 / std::sqrt(static_cast<double>(in));
    m.a.resize(out * in);
    for (auto& v : m.a) v = rng.normal() * sa;
    m.w1.resize(m.hidden * in);
    for (auto& v : m.w1) v = rng.normal() * sa;
    m.w2.resize(out * m.hidden);
    for (auto& v : m.w2) v = rng.normal() / std::sqrt(static_cast<double>(m.hidden));
    return m;
  }

  void apply(const double* v, double* dst) const {
    std::vector<double> h(hidden, 0.0);
    for (std::size_t i = 0; i < hidden; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < in; ++j) acc += w1[i * in + j] * v[j];
      h[i] = std::tanh(acc);
    }
    for (std::size_t i = 0; i < out; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < in; ++j) acc += a[i * in + j] * v[j];
      for (std::size_t j = 0; j < hidden; ++j) acc += 0.5 * w2[i * hidden + j] * h[j];
      dst[i] = acc;
    }
  }
};

struct DomainShift {
  std::size_t dim = 0;
  std::vector<double> a;  // dim x dim
  std::vector<double> c;

  static DomainShift create(Rng rng, std::size_t dim, double strength) {
    DomainShift s;
    s.dim = dim;
    s.a.assign(dim * dim, 0.0);
    const double scale = strength / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        s.a[i * dim + j] = (i == j ? 1.0 : 0.0) + rng.normal() * scale;
    s.c.resize(dim);
    for (auto& v : s.c) v = rng.normal() * strength;
    return s;
  }

  void apply_in_place(double* v) const {
    std::vector<double> out(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = c[i];
      for (std::size_t j = 0; j < dim; ++j) acc += a[i * dim + j] * v[j];
      out[i] = acc;
    }
    std::memcpy(v, out.data(), dim * sizeof(double));
  }
};

struct Generator {
  const SynthConfig& cfg;
  std::vector<double> embeddings;  // V x shared_dim
  MixingMap fx, fy;
  DomainShift shift;

  explicit Generator(const SynthConfig& c, Rng rng)
      : cfg(c),
        fx(MixingMap::create(rng.child("fx"), c.shared_dim + c.private_x_dim, c.acoustic_dim)),
        fy(MixingMap::create(rng.child("fy"), c.shared_dim + c.private_y_dim, c.artic_dim)),
        shift(DomainShift::create(rng.child("shift"), c.acoustic_dim, c.shift_strength)) {
    if (cfg.identity_mixing) {
      if (cfg.acoustic_dim != cfg.shared_dim + cfg.private_x_dim ||
          cfg.artic_dim != cfg.shared_dim + cfg.private_y_dim)
        throw ConfigError("synth: identity mixing needs view dims equal to shared+private dims");
    }
    Rng emb = rng.child("emb");
    embeddings.resize(cfg.num_labels * cfg.shared_dim);
    for (auto& v : embeddings) v = emb.normal();
  }

  Utterance make_utterance(Rng rng, const std::string& id, bool with_artic, bool shifted) const {
    Utterance u;
    u.id = id;
    u.acoustic_dim = cfg.acoustic_dim;
    u.artic_dim = with_artic ? cfg.artic_dim : 0;
    std::size_t lo = cfg.min_frames, hi = cfg.max_frames;
    if (with_artic && cfg.source_min_frames > 0) {
      lo = cfg.source_min_frames;
      hi = cfg.source_max_frames;
    }
    const std::size_t T = lo + rng.uniform_index(hi - lo + 1);

    // Segment the utterance into label runs; adjacent repeats are allowed
    // only when every segment is long enough to stay CTC-feasible.
    LabelSequence labels;
    std::vector<int> frame_label(T);
    std::size_t t = 0;
    const bool allow_repeats = cfg.min_segment >= 2;
    while (t < T) {
      std::size_t seg = cfg.min_segment + rng.uniform_index(cfg.max_segment - cfg.min_segment + 1);
      if (T - t < seg || T - t - seg < cfg.min_segment) seg = T - t;
      int label = static_cast<int>(rng.uniform_index(cfg.num_labels));
      if (!allow_repeats && !labels.empty())
        while (label == labels.back()) label = static_cast<int>(rng.uniform_index(cfg.num_labels));
      labels.push_back(label);
      for (std::size_t k = 0; k < seg; ++k) frame_label[t + k] = label;
      t += seg;
    }
    u.labels = labels;

    u.acoustic.resize(T * cfg.acoustic_dim);
    if (with_artic) u.artic.resize(T * cfg.artic_dim);

    // Private and within-class latents drift as stationary AR(1) processes,
    // so temporal smoothing alone cannot strip them from the views.
    const double rho = cfg.nuisance_correlation;
    const double innovation = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    std::vector<double> u_state(cfg.shared_dim), hx_state(cfg.private_x_dim),
        hy_state(cfg.private_y_dim);
    for (auto& v : u_state) v = rng.normal();
    for (auto& v : hx_state) v = rng.normal();
    for (auto& v : hy_state) v = rng.normal();
    auto ar_step = [&](std::vector<double>& state) {
      for (auto& v : state) v = rho * v + innovation * rng.normal();
    };
    auto white_step = [&](std::vector<double>& state) {
      for (auto& v : state) v = rng.normal();
    };

    std::vector<double> zin(cfg.shared_dim + std::max(cfg.private_x_dim, cfg.private_y_dim));
    for (std::size_t f = 0; f < T; ++f) {
      if (f > 0) {
        // Within-class variation stays white (both views share it anyway);
        // only the view-private channels drift.
        white_step(u_state);
        ar_step(hx_state);
        ar_step(hy_state);
      }
      const double* emb = embeddings.data() + static_cast<std::size_t>(frame_label[f]) * cfg.shared_dim;
      std::vector<double> z(cfg.shared_dim);
      for (std::size_t j = 0; j < cfg.shared_dim; ++j)
        z[j] = emb[j] + cfg.within_class_scale * u_state[j];

      double* xrow = u.acoustic.data() + f * cfg.acoustic_dim;
      std::copy(z.begin(), z.end(), zin.begin());
      for (std::size_t j = 0; j < cfg.private_x_dim; ++j) zin[cfg.shared_dim + j] = hx_state[j];
      if (cfg.identity_mixing) {
        for (std::size_t j = 0; j < cfg.acoustic_dim; ++j) xrow[j] = zin[j];
      } else {
        fx.apply(zin.data(), xrow);
      }
      for (std::size_t j = 0; j < cfg.acoustic_dim; ++j)
        xrow[j] = cfg.view_scale * xrow[j] + cfg.noise_level * rng.normal();

      if (with_artic) {
        double* yrow = u.artic.data() + f * cfg.artic_dim;
        std::copy(z.begin(), z.end(), zin.begin());
        for (std::size_t j = 0; j < cfg.private_y_dim; ++j) zin[cfg.shared_dim + j] = hy_state[j];
        if (cfg.identity_mixing) {
          for (std::size_t j = 0; j < cfg.artic_dim; ++j) yrow[j] = zin[j];
        } else {
          fy.apply(zin.data(), yrow);
        }
        for (std::size_t j = 0; j < cfg.artic_dim; ++j)
          yrow[j] = cfg.view_scale * yrow[j] + cfg.noise_level * rng.normal();
      }

      if (shifted) {
        shift.apply_in_place(xrow);
        for (std::size_t j = 0; j < cfg.acoustic_dim; ++j)
          xrow[j] += cfg.shift_noise * rng.normal();
      }
    }
    return u;
  }
};

std::vector<std::string> default_label_names(std::size_t count) {
  std::vector<std::string> names(count);
  for (std::size_t i = 0; i < count; ++i) names[i] = "p" + std::to_string(i);
  return names;
}

Dataset make_split(const Generator& gen, Rng rng, const std::string& prefix, std::size_t count,
                   bool with_artic, bool shifted, DomainTag domain) {
  Dataset ds;
  ds.domain = domain;
  ds.acoustic_dim = gen.cfg.acoustic_dim;
  ds.artic_dim = with_artic ? gen.cfg.artic_dim : 0;
  ds.label_names = default_label_names(gen.cfg.num_labels);
  ds.utterances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::ostringstream id;
    id << prefix << '-' << i;
    ds.utterances.push_back(gen.make_utterance(rng.child(i), id.str(), with_artic, shifted));
  }
  return ds;
}

}  // namespace

SynthCorpus synth_multiview(const SynthConfig& cfg) {
  if (cfg.shared_dim == 0 || cfg.acoustic_dim == 0 || cfg.artic_dim == 0 || cfg.num_labels == 0)
    throw ConfigError("synth: dimensions and label count must be positive");
  if (cfg.min_frames == 0 || cfg.max_frames < cfg.min_frames)
    throw ConfigError("synth: bad frames-per-utterance range");
  if (cfg.source_min_frames > 0 && cfg.source_max_frames < cfg.source_min_frames)
    throw ConfigError("synth: bad source frames-per-utterance range");
  if (cfg.min_segment == 0 || cfg.max_segment < cfg.min_segment)
    throw ConfigError("synth: bad segment length range");
  if (cfg.noise_level < 0.0 || cfg.shift_noise < 0.0)
    throw ConfigError("synth: noise levels must be nonnegative");
  if (!(cfg.nuisance_correlation >= 0.0 && cfg.nuisance_correlation < 1.0))
    throw ConfigError("synth: nuisance correlation must lie in [0, 1)");
  if (!(cfg.view_scale > 0.0)) throw ConfigError("synth: view scale must be positive");

  Rng rng(cfg.seed);
  Generator gen(cfg, rng.child("maps"));
  SynthCorpus corpus;
  corpus.source = make_split(gen, rng.child("src"), "src", cfg.source_utterances, true, false,
                             DomainTag::source);
  corpus.target_train = make_split(gen, rng.child("tgt_train"), "tgt-tr",
                                   cfg.target_train_utterances, false, true, DomainTag::target);
  corpus.target_dev = make_split(gen, rng.child("tgt_dev"), "tgt-dev", cfg.target_dev_utterances,
                                 false, true, DomainTag::target);
  corpus.target_test = make_split(gen, rng.child("tgt_test"), "tgt-te", cfg.target_test_utterances,
                                  false, true, DomainTag::target);
  return corpus;
}

// ---- container IO -----------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'X', 'V', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
  }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xff));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v & 0xffff));
    u16(static_cast<std::uint16_t>(v >> 16));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void str16(const std::string& s) {
    if (s.size() > 0xffff) throw IoError("string too long for container");
    u16(static_cast<std::uint16_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void close(const std::string& path) {
    out_.flush();
    if (!out_) throw IoError("write to " + path + " failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string path) : data_(std::move(bytes)), path_(std::move(path)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    return static_cast<std::uint16_t>(lo | (static_cast<std::uint16_t>(u8()) << 8));
  }
  std::uint32_t u32() {
    const std::uint32_t lo = u16();
    return lo | (static_cast<std::uint32_t>(u16()) << 16);
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str16() {
    const std::size_t n = u16();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool exhausted() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size())
      throw TruncatedError(path_ + ": truncated payload at offset " + std::to_string(pos_));
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

Reader read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return Reader(buf.str(), path);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(ds.domain));
  w.u32(static_cast<std::uint32_t>(ds.acoustic_dim));
  w.u32(static_cast<std::uint32_t>(ds.artic_dim));
  w.u32(static_cast<std::uint32_t>(ds.label_names.size()));
  for (const auto& name : ds.label_names) w.str16(name);
  w.u32(static_cast<std::uint32_t>(ds.utterances.size()));
  for (const Utterance& u : ds.utterances) {
    w.str16(u.id);
    w.u32(static_cast<std::uint32_t>(u.frames()));
    w.u8(u.labels ? 1 : 0);
    for (double v : u.acoustic) w.f32(static_cast<float>(v));
    for (double v : u.artic) w.f32(static_cast<float>(v));
    if (u.labels) {
      w.u32(static_cast<std::uint32_t>(u.labels->size()));
      for (int label : *u.labels) w.u16(static_cast<std::uint16_t>(label));
    }
  }
  w.close(path);
}

Dataset load_dataset(const std::string& path) {
  Reader r = read_file(path);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": not an XVDS dataset (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError(path + ": unsupported dataset version " + std::to_string(version));

  Dataset ds;
  const std::uint8_t domain = r.u8();
  if (domain > 1) throw FormatError(path + ": bad domain tag " + std::to_string(domain));
  ds.domain = static_cast<DomainTag>(domain);
  ds.acoustic_dim = r.u32();
  ds.artic_dim = r.u32();
  if (ds.acoustic_dim == 0) throw FormatError(path + ": zero acoustic dimension");
  const std::uint32_t num_labels = r.u32();
  ds.label_names.reserve(num_labels);
  for (std::uint32_t i = 0; i < num_labels; ++i) ds.label_names.push_back(r.str16());

  const std::uint32_t num_utts = r.u32();
  ds.utterances.reserve(num_utts);
  for (std::uint32_t i = 0; i < num_utts; ++i) {
    Utterance u;
    u.id = r.str16();
    const std::uint32_t T = r.u32();
    const bool has_labels = r.u8() != 0;
    if (T == 0) throw DataValidationError(path + ": utterance " + u.id + " has zero frames");
    u.acoustic_dim = ds.acoustic_dim;
    u.acoustic.resize(static_cast<std::size_t>(T) * ds.acoustic_dim);
    for (auto& v : u.acoustic) v = static_cast<double>(r.f32());
    u.artic_dim = ds.artic_dim;
    u.artic.resize(static_cast<std::size_t>(T) * ds.artic_dim);
    for (auto& v : u.artic) v = static_cast<double>(r.f32());
    if (has_labels) {
      const std::uint32_t n = r.u32();
      LabelSequence labels(n);
      for (auto& label : labels) label = static_cast<int>(r.u16());
      for (int label : labels)
        if (label < 0 || static_cast<std::size_t>(label) >= num_labels)
          throw DataValidationError(path + ": utterance " + u.id + " has label id " +
                                    std::to_string(label) + " outside the inventory");
      try {
        ctc_check_feasible(labels, T, num_labels);
      } catch (const InfeasibleTargetError& e) {
        throw DataValidationError(path + ": utterance " + u.id + " rejected: " + e.what());
      }
      u.labels = std::move(labels);
    }
    ds.utterances.push_back(std::move(u));
  }
  if (!r.exhausted()) throw FormatError(path + ": trailing bytes after payload");
  return ds;
}

void save_label_inventory(const std::vector<std::string>& names, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& name : names) out << name << '\n';
  out.flush();
  if (!out) throw IoError("write to " + path + " failed");
}

std::vector<std::string> load_label_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

}  // namespace xview
