#include "exvqa/error.hpp"

namespace exvqa {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kIndex: return "index";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kEmptyLoss: return "empty_loss";
    case ErrorCode::kData: return "data";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kMagic: return "magic";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kStaleIndex: return "stale_index";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

}  // namespace exvqa
