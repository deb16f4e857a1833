// Versioned binary checkpoint container: a JSON manifest (model kind,
// architecture, input dims, label inventory, epoch, dev PER) followed by
// flat f64 parameter blobs keyed by hierarchical names. Re-saving an
// unmodified checkpoint is byte-identical.

#ifndef XVIEW_CHECKPOINT_HPP
#define XVIEW_CHECKPOINT_HPP

#include <optional>
#include <string>
#include <vector>

#include "xview/model.hpp"

namespace xview {

struct CheckpointMeta {
  ModelKind kind = ModelKind::features;
  ArchitectureConfig arch;
  InputDims dims;
  std::vector<std::string> label_names;
  int epoch = 0;
  std::optional<double> dev_per;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParamStore& params);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  ModelGraph model;  // rebuilt from the manifest with parameters filled in
};

// Throws FormatError / TruncatedError / DataValidationError; never returns
// a partially filled model.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies every checkpoint parameter whose name exists in `model` (warm
// start). Returns the number of parameters copied; throws
// DataValidationError on shape mismatches or when nothing matches.
std::size_t warm_start(ModelGraph& model, const LoadedCheckpoint& ckpt);

}  // namespace xview

#endif  // XVIEW_CHECKPOINT_HPP
