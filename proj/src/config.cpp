#include "exvqa/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <type_traits>

#include <json.hpp>

#include "exvqa/error.hpp"

namespace exvqa {

using nlohmann::json;

namespace {

// One accessor per key keeps serialization and parsing in sync.
struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
  FieldKind kind;
};

template <class T>
constexpr FieldKind kind_of() {
  if constexpr (std::is_same_v<T, bool>) return FieldKind::kBool;
  else if constexpr (std::is_unsigned_v<T>) return FieldKind::kUnsigned;
  else if constexpr (std::is_floating_point_v<T>) return FieldKind::kDouble;
  else return FieldKind::kString;
}

const std::set<std::string> kPathFields = {"dataset", "knowledge_base", "vocab", "index",
                                           "checkpoint", "predictions", "report", "retrieval_cache"};

const char* const kModelFields[] = {"d", "image_size", "grid", "enc_layers", "enc_heads", "enc_max_len",
                                    "dec_layers", "dec_heads", "dec_max_positions", "ffn_hidden", "fusion_hidden"};

template <class T>
Field field(T RunConfig::*member) {
  return {[member](const RunConfig& c) { return json(c.*member); },
          [member](RunConfig& c, const json& v) {
            if constexpr (std::is_same_v<T, bool>) {
              if (!v.is_boolean()) throw json::type_error::create(302, "expected a boolean", &v);
            } else if constexpr (std::is_unsigned_v<T>) {
              if (!v.is_number_unsigned()) throw json::type_error::create(302, "expected a non-negative integer", &v);
            } else if constexpr (std::is_floating_point_v<T>) {
              if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
            }
            c.*member = v.get<T>();
          },
          kind_of<T>()};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"d", field(&RunConfig::d)},
      {"image_size", field(&RunConfig::image_size)},
      {"grid", field(&RunConfig::grid)},
      {"enc_layers", field(&RunConfig::enc_layers)},
      {"enc_heads", field(&RunConfig::enc_heads)},
      {"enc_max_len", field(&RunConfig::enc_max_len)},
      {"dec_layers", field(&RunConfig::dec_layers)},
      {"dec_heads", field(&RunConfig::dec_heads)},
      {"dec_max_positions", field(&RunConfig::dec_max_positions)},
      {"ffn_hidden", field(&RunConfig::ffn_hidden)},
      {"fusion_hidden", field(&RunConfig::fusion_hidden)},
      {"captions", field(&RunConfig::captions)},
      {"knowledge", field(&RunConfig::knowledge)},
      {"min_freq", field(&RunConfig::min_freq)},
      {"val_ratio", field(&RunConfig::val_ratio)},
      {"test_ratio", field(&RunConfig::test_ratio)},
      {"split", field(&RunConfig::split)},
      {"batch_size", field(&RunConfig::batch_size)},
      {"epochs", field(&RunConfig::epochs)},
      {"max_steps", field(&RunConfig::max_steps)},
      {"lr_start", field(&RunConfig::lr_start)},
      {"lr_end", field(&RunConfig::lr_end)},
      {"flip_prob", field(&RunConfig::flip_prob)},
      {"supervise_question", field(&RunConfig::supervise_question)},
      {"no_captions", field(&RunConfig::no_captions)},
      {"no_knowledge", field(&RunConfig::no_knowledge)},
      {"seed", field(&RunConfig::seed)},
      {"max_len", field(&RunConfig::max_len)},
      {"beam", field(&RunConfig::beam)},
      {"accuracy", field(&RunConfig::accuracy)},
      {"dataset", field(&RunConfig::dataset)},
      {"knowledge_base", field(&RunConfig::knowledge_base)},
      {"vocab", field(&RunConfig::vocab)},
      {"index", field(&RunConfig::index)},
      {"checkpoint", field(&RunConfig::checkpoint)},
      {"predictions", field(&RunConfig::predictions)},
      {"report", field(&RunConfig::report)},
      {"retrieval_cache", field(&RunConfig::retrieval_cache)},
  };
  return f;
}

void positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string("config field '") + name + "' must be positive");
}

}  // namespace

void RunConfig::validate() const {
  positive(d, "d");
  positive(image_size, "image_size");
  positive(grid, "grid");
  positive(enc_layers, "enc_layers");
  positive(enc_heads, "enc_heads");
  positive(enc_max_len, "enc_max_len");
  positive(dec_layers, "dec_layers");
  positive(dec_heads, "dec_heads");
  positive(dec_max_positions, "dec_max_positions");
  positive(ffn_hidden, "ffn_hidden");
  positive(fusion_hidden, "fusion_hidden");
  positive(captions, "captions");
  positive(knowledge, "knowledge");
  positive(min_freq, "min_freq");
  positive(val_ratio, "val_ratio");
  positive(test_ratio, "test_ratio");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  positive(max_len, "max_len");
  positive(beam, "beam");
  if (image_size % grid != 0) throw ConfigError("config field 'grid' must divide 'image_size'");
  if (d % enc_heads != 0) throw ConfigError("config field 'enc_heads' must divide 'd'");
  if (d % dec_heads != 0) throw ConfigError("config field 'dec_heads' must divide 'd'");
  if (grid * grid > enc_max_len) throw ConfigError("config field 'enc_max_len' must be at least grid^2");
  if (!(lr_start > 0.0)) throw ConfigError("config field 'lr_start' must be positive");
  if (!(lr_end > 0.0)) throw ConfigError("config field 'lr_end' must be positive");
  if (lr_end > lr_start) throw ConfigError("config field 'lr_end' must not exceed 'lr_start'");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("config field 'flip_prob' must lie in [0, 1]");
  if (split != "all" && split != "train" && split != "val" && split != "test")
    throw ConfigError("config field 'split' must be one of all, train, val, test");
  if (accuracy != "exact" && accuracy != "vqa_soft")
    throw ConfigError("config field 'accuracy' must be exact or vqa_soft");
  // Files written by a run must not overwrite each other.
  std::map<std::string, std::string> written;
  for (auto [name, path] : {std::pair<const char*, const std::string*>{"vocab", &vocab},
                            {"index", &index},
                            {"checkpoint", &checkpoint},
                            {"predictions", &predictions},
                            {"report", &report},
                            {"retrieval_cache", &retrieval_cache}}) {
    if (path->empty()) continue;
    auto [it, fresh] = written.emplace(*path, name);
    if (!fresh)
      throw ConfigError(std::string("config field '") + name + "' reuses the path of '" + it->second + "'");
  }
}

std::string RunConfig::to_json(bool include_paths) const {
  json j = json::object();
  for (const auto& [name, f] : fields())
    if (include_paths || !kPathFields.count(name)) j[name] = f.get(*this);
  return j.dump();
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto it = fields().find(std::string(key));
  if (it == fields().end()) throw ConfigError("unknown config field '" + std::string(key) + "'");
  const std::string name(key), text(value);
  const auto bad = [&](const char* what) {
    return ConfigError("config field '" + name + "' expects " + what + ", got '" + text + "'");
  };
  json v;
  switch (it->second.kind) {
    case FieldKind::kBool:
      if (text == "true" || text == "1") v = true;
      else if (text == "false" || text == "0") v = false;
      else throw bad("true or false");
      break;
    case FieldKind::kUnsigned: {
      std::uint64_t n = 0;
      const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
      if (text.empty() || ec != std::errc() || end != text.data() + text.size()) throw bad("a non-negative integer");
      v = n;
      break;
    }
    case FieldKind::kDouble: {
      char* end = nullptr;
      const double x = std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(x)) throw bad("a number");
      v = x;
      break;
    }
    case FieldKind::kString:
      v = text;
      break;
  }
  it->second.set(*this, v);
}

void RunConfig::adopt_model(const RunConfig& other) {
  for (const char* k : kModelFields) fields().at(k).set(*this, fields().at(k).get(other));
  no_captions = other.no_captions;
  no_knowledge = other.no_knowledge;
}

std::vector<FieldInfo> config_fields() {
  std::vector<FieldInfo> out;
  for (const auto& [name, f] : fields()) out.push_back({name, f.kind, kPathFields.count(name) > 0});
  return out;
}

void RunConfig::merge_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config field '" + key + "'");
    try {
      it->second.set(*this, value);
    } catch (const json::exception&) {
      throw ConfigError("config field '" + key + "' has the wrong type or a negative value");
    }
  }
}

RunConfig RunConfig::from_json(std::string_view text) {
  RunConfig c;
  c.merge_json(text);
  return c;
}

std::string RunConfig::model_signature() const {
  json j;
  for (const char* k : kModelFields)
    j[k] = fields().at(k).get(*this);
  return j.dump();
}

RunConfig toy_config() {
  RunConfig c;
  c.d = 32;
  c.image_size = 28;
  c.grid = 7;
  c.enc_layers = 1;
  c.enc_heads = 2;
  c.enc_max_len = 64;
  c.dec_layers = 2;
  c.dec_heads = 2;
  c.dec_max_positions = 64;
  c.ffn_hidden = 64;
  c.fusion_hidden = 128;
  c.batch_size = 16;
  c.epochs = 1000;
  c.max_steps = 1000;
  c.lr_start = 3e-3;
  c.lr_end = 1e-3;
  return c;
}

}  // namespace exvqa
