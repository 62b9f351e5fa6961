#pragma once

// Binary tensor table shared by checkpoints and knowledge indexes.
//
//   magic    8 bytes  "EXVQA1\0\0"
//   version  u32 LE
//   count    u32 LE
//   count x { u32 name_len, name (UTF-8), u32 rank, rank x u32 dim, f32 LE data }
//   checksum u64 LE, FNV-1a 64 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exvqa/tensor.hpp"

namespace exvqa::io {

inline constexpr std::uint32_t kFormatVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<std::uint8_t> encode_tensor_table(std::span<const NamedTensor> tensors,
                                              std::uint32_t version = kFormatVersion);
/// Throws MagicError, VersionError, ChecksumError or FormatError.
std::vector<NamedTensor> decode_tensor_table(std::span<const std::uint8_t> bytes);

void write_tensor_file(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

/// Opaque text stored as a rank-1 tensor of byte values (0..255), one per
/// element; exact in 32-bit floats.
Tensor bytes_to_tensor(std::string_view bytes);
std::string tensor_to_bytes(const Tensor& t);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace exvqa::io
