#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exvqa/tensor.hpp"

namespace exvqa::data {

/// One VQA record. All text fields are stored normalized.
struct Instance {
  std::string id;
  std::filesystem::path image;  // resolved against the dataset file's directory
  std::string question;
  std::string answer;
  std::string explanation;
  std::vector<std::string> captions;
  std::vector<std::string> answers;       // optional multi-annotator answers
  std::vector<std::string> explanations;  // optional extra reference explanations
  std::optional<std::string> split;       // "train" or an eval hint

  /// "{question} {answer} because {explanation}"
  std::string ground_truth() const;
  /// "{answer} because {explanation}", the decoder's target.
  std::string target() const;
  /// Reference targets for metrics: target() plus one per extra explanation.
  std::vector<std::string> reference_targets() const;
};

struct LoadOptions {
  std::size_t expected_captions = 5;
};

/// Parses a JSON-lines dataset. Instance order equals line order; blank
/// lines are skipped. Throws DataError/FormatError naming the line number.
std::vector<Instance> load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
std::vector<Instance> parse_dataset(std::string_view text, const std::filesystem::path& base_dir,
                                    const LoadOptions& options = {});

struct SplitRatio {
  std::size_t val = 3;
  std::size_t test = 4;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  SplitRatio ratio;
  std::uint64_t seed = 0;
};

/// Instances hinted "train" go to train; the rest form the eval pool, which
/// is shuffled with `seed` and divided val:test. With no hints at all, every
/// instance is in the eval pool.
DatasetSplit split_dataset(std::span<const Instance> instances, SplitRatio ratio, std::uint64_t seed);

inline constexpr std::size_t kImageSize = 224;

/// Reads a binary PPM (P6, maxval 255) as [size x size x 3] in [0,1], RGB,
/// nearest-neighbour resized when the source differs.
Tensor load_image(const std::filesystem::path& path, std::size_t size = kImageSize);
Tensor decode_ppm(std::span<const std::uint8_t> bytes, std::size_t size = kImageSize);
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

}  // namespace exvqa::data
