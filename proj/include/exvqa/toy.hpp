#pragma once

// Synthetic memorization set: 16 instances whose answer is "<color> <object>".
// The image carries only the color, the captions only the object, and the
// explanation repeats both plus a fact from the object's knowledge item.

#include <cstdint>
#include <filesystem>

namespace exvqa::toy {

struct ToyFiles {
  std::filesystem::path dir;
  std::filesystem::path dataset;    // dataset.jsonl
  std::filesystem::path knowledge;  // knowledge.jsonl (4 items)
};

/// Writes dataset.jsonl, knowledge.jsonl and images/*.ppm into `dir`.
/// `seed` only perturbs pixel noise.
ToyFiles write_memorization_set(const std::filesystem::path& dir, std::uint64_t seed = 0,
                                std::size_t image_size = 28);

}  // namespace exvqa::toy
