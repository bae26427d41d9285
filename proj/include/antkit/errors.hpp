#pragma once

#include <stdexcept>
#include <string>

namespace antkit {

// Malformed external input: spec files, dataset files, checkpoints.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace antkit
