#include "gcinfer/error.hpp"

namespace gcinfer {

const char* errc_name(Errc e) {
  switch (e) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnsupportedLayer: return "UnsupportedLayer";
    case Errc::CyclicCombinationalPath: return "CyclicCombinationalPath";
    case Errc::MultipleDrivers: return "MultipleDrivers";
    case Errc::DanglingWire: return "DanglingWire";
    case Errc::ParseError: return "ParseError";
    case Errc::MalformedTables: return "MalformedTables";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::ChannelError: return "ChannelError";
    case Errc::BatchSizeMismatch: return "BatchSizeMismatch";
    case Errc::GroupElementInvalid: return "GroupElementInvalid";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::ShareSizeMismatch: return "ShareSizeMismatch";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ZeroNormSample: return "ZeroNormSample";
    case Errc::RankDeficiency: return "RankDeficiency";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace gcinfer
