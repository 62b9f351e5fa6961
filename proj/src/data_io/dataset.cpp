#include "exvqa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <unordered_set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exvqa/error.hpp"
#include "exvqa/tensor_file.hpp"
#include "exvqa/text.hpp"

namespace exvqa::data {

using nlohmann::json;

std::string Instance::ground_truth() const { return question + " " + target(); }

std::string Instance::target() const { return answer + " because " + explanation; }

std::vector<std::string> Instance::reference_targets() const {
  std::vector<std::string> refs{target()};
  for (const auto& e : explanations)
    if (e != explanation) refs.push_back(answer + " because " + e);
  return refs;
}

namespace {

std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

const json& require(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw DataError(where(line) + "missing field '" + field + "'");
  return *it;
}

std::string text_field(const json& v, const char* field, std::size_t line) {
  if (!v.is_string()) throw DataError(where(line) + "field '" + field + "' must be a string");
  try {
    return text::normalize(v.get<std::string>());
  } catch (const Error& e) {
    throw DataError(where(line) + "field '" + field + "': " + e.what());
  }
}

std::vector<std::string> text_list(const json& v, const char* field, std::size_t line) {
  if (!v.is_array()) throw DataError(where(line) + "field '" + field + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) out.push_back(text_field(item, field, line));
  return out;
}

bool has_because(const std::string& normalized) {
  for (const auto& tok : text::split_tokens(normalized))
    if (tok == "because") return true;
  return false;
}

Instance parse_instance(const json& obj, const std::filesystem::path& base_dir, std::size_t line,
                        const LoadOptions& options) {
  if (!obj.is_object()) throw DataError(where(line) + "expected a JSON object");
  Instance inst;
  const json& id = require(obj, "id", line);
  if (id.is_string())
    inst.id = id.get<std::string>();
  else if (id.is_number_integer())
    inst.id = std::to_string(id.get<long long>());
  else
    throw DataError(where(line) + "field 'id' must be a string or integer");
  if (inst.id.empty()) throw DataError(where(line) + "empty id");

  const json& image = require(obj, "image", line);
  if (!image.is_string()) throw DataError(where(line) + "field 'image' must be a string");
  std::filesystem::path img = image.get<std::string>();
  inst.image = img.is_absolute() ? img : base_dir / img;

  inst.question = text_field(require(obj, "question", line), "question", line);
  inst.answer = text_field(require(obj, "answer", line), "answer", line);
  inst.explanation = text_field(require(obj, "explanation", line), "explanation", line);
  inst.captions = text_list(require(obj, "captions", line), "captions", line);

  if (inst.answer.empty()) throw DataError(where(line) + "empty answer");
  if (has_because(inst.answer))
    throw DataError(where(line) + "answer contains the reserved word 'because'");
  if (inst.explanation.empty()) throw DataError(where(line) + "empty explanation");
  if (inst.captions.empty()) throw DataError(where(line) + "captions must be non-empty");
  for (const auto& c : inst.captions)
    if (c.empty()) throw DataError(where(line) + "empty caption");

  if (auto it = obj.find("answers"); it != obj.end()) inst.answers = text_list(*it, "answers", line);
  if (auto it = obj.find("explanations"); it != obj.end())
    inst.explanations = text_list(*it, "explanations", line);
  if (auto it = obj.find("split"); it != obj.end()) {
    if (!it->is_string()) throw DataError(where(line) + "field 'split' must be a string");
    inst.split = it->get<std::string>();
  }

  if (inst.captions.size() != options.expected_captions)
    spdlog::warn("{}instance '{}' has {} captions, expected {}", where(line), inst.id, inst.captions.size(),
                 options.expected_captions);
  return inst;
}

}  // namespace

std::vector<Instance> parse_dataset(std::string_view text, const std::filesystem::path& base_dir,
                                    const LoadOptions& options) {
  std::vector<Instance> out;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where(line_no) + "invalid JSON: " + e.what());
    }
    Instance inst = parse_instance(obj, base_dir, line_no, options);
    if (!seen.insert(inst.id).second) throw DataError(where(line_no) + "duplicate id '" + inst.id + "'");
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  const auto bytes = io::read_file(path);
  return parse_dataset(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                       path.parent_path(), options);
}

DatasetSplit split_dataset(std::span<const Instance> instances, SplitRatio ratio, std::uint64_t seed) {
  if (ratio.val == 0 || ratio.test == 0) throw ConfigError("split ratio parts must be positive");
  DatasetSplit split;
  split.ratio = ratio;
  split.seed = seed;
  std::vector<std::string> pool;
  for (const auto& inst : instances) {
    if (inst.split && *inst.split == "train")
      split.train.push_back(inst.id);
    else
      pool.push_back(inst.id);
  }
  const std::size_t parts = ratio.val + ratio.test;
  if (pool.size() < parts)
    throw DataError("eval pool of " + std::to_string(pool.size()) + " cannot realize a " + std::to_string(ratio.val) +
                    ":" + std::to_string(ratio.test) + " split");
  // Fisher-Yates with an explicit draw so the result does not depend on the
  // standard library's std::shuffle.
  std::mt19937_64 rng(seed);
  for (std::size_t i = pool.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(pool[i - 1], pool[j]);
  }
  // Rounded share: 7 -> 3/4, 3500 -> 1500/2000.
  const std::size_t n_val = (pool.size() * ratio.val * 2 + parts) / (2 * parts);
  split.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
  return split;
}

namespace {

class PpmReader {
 public:
  explicit PpmReader(std::span<const std::uint8_t> b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) ++pos_;
    if (start == pos_) throw FormatError(std::string("PPM header: expected ") + what);
    std::size_t v = 0;
    auto first = reinterpret_cast<const char*>(b_.data() + start);
    auto [p, ec] = std::from_chars(first, first + (pos_ - start), v);
    if (ec != std::errc()) throw FormatError(std::string("PPM header: bad ") + what);
    return v;
  }

  std::size_t pos_ = 0;
  std::span<const std::uint8_t> b_;
};

}  // namespace

Tensor decode_ppm(std::span<const std::uint8_t> bytes, std::size_t size) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("not a binary PPM (expected P6)");
  PpmReader r(bytes);
  r.pos_ = 2;
  const std::size_t w = r.number("width");
  const std::size_t h = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (w == 0 || h == 0) throw FormatError("PPM has zero extent");
  if (maxval != 255) throw FormatError("PPM maxval must be 255");
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw FormatError("PPM header not terminated");
  ++r.pos_;
  if (bytes.size() - r.pos_ < w * h * 3) throw FormatError("PPM payload truncated");
  const std::uint8_t* px = bytes.data() + r.pos_;

  std::vector<float> out(size * size * 3);
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = y * h / size;
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = x * w / size;
      for (std::size_t c = 0; c < 3; ++c)
        out[(y * size + x) * 3 + c] = static_cast<float>(px[(sy * w + sx) * 3 + c]) / 255.0f;
    }
  }
  return Tensor::from({size, size, 3}, std::move(out));
}

Tensor load_image(const std::filesystem::path& path, std::size_t size) {
  try {
    return decode_ppm(io::read_file(path), size);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3) throw DimensionError("encode_ppm expects [H x W x 3]");
  const std::string header =
      "P6\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (float v : image.data()) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<std::uint8_t>(c * 255.0f + 0.5f));
  }
  return out;
}

}  // namespace exvqa::data
