#include "exvqa/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "exvqa/error.hpp"
#include "exvqa/hash.hpp"

namespace exvqa::io {

namespace {

constexpr char kMagic[8] = {'E', 'X', 'V', 'Q', 'A', '1', '\0', '\0'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("tensor table truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor_table(std::span<const NamedTensor> tensors, std::uint32_t version) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, version);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out.insert(out.end(), nt.name.begin(), nt.name.end());
    put_u32(out, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (std::size_t d : nt.tensor.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : nt.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  Fnv1a64 h;
  h.update(out);
  put_u64(out, h.digest());
  return out;
}

std::vector<NamedTensor> decode_tensor_table(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw MagicError("not a tensor table (bad magic)");
  if (bytes.size() < sizeof kMagic + 4 + 4 + 8) throw FormatError("tensor table truncated");
  Reader header(bytes.subspan(sizeof kMagic));
  const std::uint32_t version = header.u32();
  if (version != kFormatVersion)
    throw VersionError("unsupported tensor table version " + std::to_string(version) + " (expected " +
                       std::to_string(kFormatVersion) + ")");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[body.size() + i]) << (8 * i);
  Fnv1a64 h;
  h.update(body);
  if (h.digest() != stored) throw ChecksumError("tensor table checksum mismatch");

  Reader r(body.subspan(sizeof kMagic + 4));
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank == 0) throw FormatError("tensor '" + nt.name + "' has rank 0");
    Shape dims;
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      dims.push_back(r.u32());
      n *= dims.back();
    }
    if (n > r.remaining() / 4) throw FormatError("tensor '" + nt.name + "' payload truncated");
    std::vector<float> data(n);
    for (float& v : data) v = std::bit_cast<float>(r.u32());
    nt.tensor = Tensor::from(std::move(dims), std::move(data));
    out.push_back(std::move(nt));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensor table");
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_tensor_file(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  write_file(path, encode_tensor_table(tensors));
}

std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor_table(read_file(path));
}

Tensor bytes_to_tensor(std::string_view bytes) {
  // Slot 0 is a marker so that empty text still has a positive extent.
  std::vector<float> v{1.0f};
  v.reserve(bytes.size() + 1);
  for (char c : bytes) v.push_back(static_cast<float>(static_cast<unsigned char>(c)));
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

std::string tensor_to_bytes(const Tensor& t) {
  if (t.rank() != 1 || t.size() == 0 || t[0] != 1.0f) throw FormatError("tensor is not a byte blob");
  std::string s;
  s.reserve(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) {
    const float v = t[i];
    if (v < 0.0f || v > 255.0f || v != static_cast<float>(static_cast<int>(v)))
      throw FormatError("byte blob holds a non-byte value");
    s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return s;
}

}  // namespace exvqa::io
