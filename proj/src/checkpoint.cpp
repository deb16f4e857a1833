#include "xview/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xview/config.hpp"
#include "xview/error.hpp"

namespace xview {

namespace {

constexpr char kMagic[4] = {'X', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>(v >> 8));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffULL));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

class Cursor {
 public:
  Cursor(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

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
  double f64() {
    const std::uint64_t lo = u32();
    const std::uint64_t bits = lo | (static_cast<std::uint64_t>(u32()) << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
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
      throw TruncatedError(path_ + ": truncated checkpoint at offset " + std::to_string(pos_));
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

OrderedJson meta_to_json(const CheckpointMeta& meta) {
  OrderedJson j;
  j["format"] = kVersion;
  j["kind"] = model_kind_name(meta.kind);
  j["arch"] = arch_to_json(meta.arch);
  j["dims"] = OrderedJson{{"acoustic_dim", meta.dims.acoustic_dim},
                          {"artic_dim", meta.dims.artic_dim},
                          {"num_labels", meta.dims.num_labels}};
  j["labels"] = meta.label_names;
  j["epoch"] = meta.epoch;
  if (meta.dev_per) {
    j["dev_per"] = *meta.dev_per;
  } else {
    j["dev_per"] = nullptr;
  }
  return j;
}

CheckpointMeta meta_from_json(const std::string& text, const std::string& origin) {
  OrderedJson j;
  try {
    j = OrderedJson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(origin + ": bad checkpoint manifest: " + e.what());
  }
  CheckpointMeta meta;
  try {
    if (j.at("format").get<std::uint32_t>() != kVersion)
      throw FormatError(origin + ": unsupported manifest format");
    meta.kind = model_kind_from_name(j.at("kind").get<std::string>(), origin);
    meta.arch = arch_from_json(j.at("arch"), origin + ":arch");
    meta.dims.acoustic_dim = j.at("dims").at("acoustic_dim").get<std::size_t>();
    meta.dims.artic_dim = j.at("dims").at("artic_dim").get<std::size_t>();
    meta.dims.num_labels = j.at("dims").at("num_labels").get<std::size_t>();
    meta.label_names = j.at("labels").get<std::vector<std::string>>();
    meta.epoch = j.at("epoch").get<int>();
    if (!j.at("dev_per").is_null()) meta.dev_per = j.at("dev_per").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": bad checkpoint manifest: " + e.what());
  }
  return meta;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const std::string manifest = meta_to_json(meta).dump();
  put_u32(out, static_cast<std::uint32_t>(manifest.size()));
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  put_u32(out, static_cast<std::uint32_t>(params.all().size()));
  for (const ParamPtr& p : params.all()) {
    if (p->name.size() > 0xffff) throw IoError("parameter name too long: " + p->name);
    put_u16(out, static_cast<std::uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    out.put(static_cast<char>(p->shape.size()));
    for (std::size_t d : p->shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p->value) put_f64(out, v);
  }
  out.flush();
  if (!out) throw IoError("write to " + path + " failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Cursor c(buf.str(), path);

  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(c.u8());
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": not an XVCK checkpoint (bad magic)");
  const std::uint32_t version = c.u32();
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

  const std::uint32_t manifest_len = c.u32();
  CheckpointMeta meta = meta_from_json(c.str(manifest_len), path);

  LoadedCheckpoint result{meta, build_model(meta.arch, meta.dims, meta.kind, Rng(0))};

  const std::uint32_t count = c.u32();
  std::size_t filled = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = c.str(c.u16());
    const std::size_t rank = c.u8();
    Shape shape(rank);
    for (auto& d : shape) d = c.u32();
    std::vector<double> value(shape_numel(shape));
    for (auto& v : value) v = c.f64();
    ParamPtr p = result.model.params.lookup(name);
    if (!p)
      throw DataValidationError(path + ": checkpoint parameter " + name +
                                " does not exist in the rebuilt model");
    if (p->shape != shape)
      throw DataValidationError(path + ": parameter " + name + " has shape " + shape_str(shape) +
                                " on disk but " + shape_str(p->shape) + " in the model");
    p->value = std::move(value);
    ++filled;
  }
  if (filled != result.model.params.all().size())
    throw DataValidationError(path + ": checkpoint fills " + std::to_string(filled) + " of " +
                              std::to_string(result.model.params.all().size()) +
                              " model parameters");
  if (!c.exhausted()) throw FormatError(path + ": trailing bytes after payload");
  return result;
}

std::size_t warm_start(ModelGraph& model, const LoadedCheckpoint& ckpt) {
  std::size_t copied = 0;
  for (const ParamPtr& src : ckpt.model.params.all()) {
    if (ParamPtr dst = model.params.lookup(src->name)) {
      if (dst->shape != src->shape)
        throw DataValidationError("warm start: parameter " + src->name + " has shape " +
                                  shape_str(src->shape) + " in the checkpoint but " +
                                  shape_str(dst->shape) + " in the model");
      dst->value = src->value;
      ++copied;
    }
  }
  if (copied == 0) throw DataValidationError("warm start: no overlapping parameters");
  return copied;
}

}  // namespace xview
