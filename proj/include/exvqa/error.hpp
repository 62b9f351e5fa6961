#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exvqa {

enum class ErrorCode {
  kDimension,
  kIndex,
  kContract,
  kEmptyLoss,
  kData,
  kFormat,
  kChecksum,
  kVersion,
  kMagic,
  kConfig,
  kStaleIndex,
  kIo,
  kUsage,
};

std::string_view error_code_name(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets the
/// CLI print a stable machine-parseable tag.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define EXVQA_DEFINE_ERROR(Name, Code)                                \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Code, what) {}     \
  };

EXVQA_DEFINE_ERROR(DimensionError, ErrorCode::kDimension)
EXVQA_DEFINE_ERROR(IndexError, ErrorCode::kIndex)
EXVQA_DEFINE_ERROR(ContractError, ErrorCode::kContract)
EXVQA_DEFINE_ERROR(EmptyLossError, ErrorCode::kEmptyLoss)
EXVQA_DEFINE_ERROR(DataError, ErrorCode::kData)
EXVQA_DEFINE_ERROR(FormatError, ErrorCode::kFormat)
EXVQA_DEFINE_ERROR(ChecksumError, ErrorCode::kChecksum)
EXVQA_DEFINE_ERROR(VersionError, ErrorCode::kVersion)
EXVQA_DEFINE_ERROR(MagicError, ErrorCode::kMagic)
EXVQA_DEFINE_ERROR(ConfigError, ErrorCode::kConfig)
EXVQA_DEFINE_ERROR(StaleIndexError, ErrorCode::kStaleIndex)
EXVQA_DEFINE_ERROR(IoError, ErrorCode::kIo)
EXVQA_DEFINE_ERROR(UsageError, ErrorCode::kUsage)

#undef EXVQA_DEFINE_ERROR

}  // namespace exvqa
