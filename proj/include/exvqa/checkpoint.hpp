#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "exvqa/params.hpp"
#include "exvqa/tensor_file.hpp"

namespace exvqa::io {

/// Model state on disk: named parameters plus a config echo and the RNG
/// state, both stored as byte tensors named "meta.config" and "meta.rng".
struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string config_json;
  std::string rng_state;
};

inline constexpr const char* kMetaConfig = "meta.config";
inline constexpr const char* kMetaRng = "meta.rng";

Checkpoint make_checkpoint(const ParamList& params, std::string config_json, const Rng& rng);
/// Copies stored values into `params`; names and shapes must match exactly.
void restore_params(const Checkpoint& ckpt, const ParamList& params);
Rng restore_rng(const Checkpoint& ckpt);

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace exvqa::io
