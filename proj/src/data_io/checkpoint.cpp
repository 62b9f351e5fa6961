#include "exvqa/checkpoint.hpp"

#include <sstream>
#include <unordered_map>

#include "exvqa/error.hpp"

namespace exvqa::io {

Checkpoint make_checkpoint(const ParamList& params, std::string config_json, const Rng& rng) {
  Checkpoint ckpt;
  for (const auto& p : params) ckpt.tensors.push_back({p.name, Tensor::from(p.tensor->dims(), p.tensor->storage())});
  ckpt.config_json = std::move(config_json);
  std::ostringstream os;
  os << rng;
  ckpt.rng_state = os.str();
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, const ParamList& params) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& nt : ckpt.tensors) by_name.emplace(nt.name, &nt.tensor);
  if (by_name.size() != params.size())
    throw FormatError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor '" + p.name + "'");
    if (it->second->dims() != p.tensor->dims())
      throw DimensionError("checkpoint tensor '" + p.name + "' has shape " + shape_str(it->second->dims()) +
                           ", model expects " + shape_str(p.tensor->dims()));
  }
  for (const auto& p : params) p.tensor->storage() = by_name.at(p.name)->storage();
}

Rng restore_rng(const Checkpoint& ckpt) {
  Rng rng;
  std::istringstream is(ckpt.rng_state);
  is >> rng;
  if (!is) throw FormatError("checkpoint RNG state is unreadable");
  return rng;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<NamedTensor> all = ckpt.tensors;
  all.push_back({kMetaConfig, bytes_to_tensor(ckpt.config_json)});
  all.push_back({kMetaRng, bytes_to_tensor(ckpt.rng_state)});
  auto tmp = path;
  tmp += ".tmp";
  write_tensor_file(tmp, all);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt;
  bool have_config = false, have_rng = false;
  for (auto& nt : read_tensor_file(path)) {
    if (nt.name == kMetaConfig) {
      ckpt.config_json = tensor_to_bytes(nt.tensor);
      have_config = true;
    } else if (nt.name == kMetaRng) {
      ckpt.rng_state = tensor_to_bytes(nt.tensor);
      have_rng = true;
    } else {
      ckpt.tensors.push_back(std::move(nt));
    }
  }
  if (!have_config || !have_rng) throw FormatError(path.string() + " is a tensor table but not a checkpoint");
  return ckpt;
}

}  // namespace exvqa::io
