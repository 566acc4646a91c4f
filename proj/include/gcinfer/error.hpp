#pragma once

#include <stdexcept>
#include <string>

namespace gcinfer {

enum class Errc {
  ShapeMismatch,
  UnsupportedLayer,
  CyclicCombinationalPath,
  MultipleDrivers,
  DanglingWire,
  ParseError,
  MalformedTables,
  InvalidLabel,
  ChannelError,
  BatchSizeMismatch,
  GroupElementInvalid,
  DigestMismatch,
  ProtocolViolation,
  ShareSizeMismatch,
  DimMismatch,
  ZeroNormSample,
  RankDeficiency,
  InvalidArgument,
};

const char* errc_name(Errc e);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace gcinfer
