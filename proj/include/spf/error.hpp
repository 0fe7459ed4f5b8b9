#pragma once

#include <stdexcept>
#include <string>

namespace spf {

// Base for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / argument contract violations.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration values.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finiteness is required (loss, gradients).
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Filesystem / decoding problems.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Checkpoint parsing failures, one code per distinct defect.
enum class CheckpointDefect { BadMagic, VersionMismatch, Truncated, BadConfigBlob };

struct CheckpointError : Error {
  CheckpointDefect defect;
  CheckpointError(CheckpointDefect d, const std::string& msg) : Error(msg), defect(d) {}
};

}  // namespace spf
