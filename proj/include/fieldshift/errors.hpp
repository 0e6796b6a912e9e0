#pragma once

#include <stdexcept>
#include <string>

namespace fieldshift {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape mismatch; the message names the offending axis.
struct DimensionError : Error {
  using Error::Error;
};

/// Invalid scalar argument (rate out of range, bad stride, ...).
struct ParameterError : Error {
  using Error::Error;
};

/// Invalid network or run configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed file contents (bad magic, bad header).
struct FormatError : Error {
  using Error::Error;
};

/// File uses a datatype the reader does not support; names the code.
struct UnsupportedDtypeError : FormatError {
  using FormatError::FormatError;
};

/// Filesystem level failure (open, truncated read, write).
struct IoError : Error {
  using Error::Error;
};

/// Dataset construction failure (empty input, too few slices).
struct DatasetError : Error {
  using Error::Error;
};

/// Checkpoint blob does not match its manifest.
struct CorruptionError : Error {
  using Error::Error;
};

/// Checkpoint written by an unknown format version.
struct VersionError : Error {
  using Error::Error;
};

/// Training produced a non-finite loss; carries the step index.
struct DivergenceError : Error {
  long step;
  DivergenceError(long step_index, const std::string& msg)
      : Error(msg), step(step_index) {}
};

/// Gradient checking failed structurally (non-finite gradient).
struct GradCheckError : Error {
  using Error::Error;
};

}  // namespace fieldshift
