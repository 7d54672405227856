#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dnirb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or channel counts disagree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is out of its valid range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported input data (images, manifests).
class DataError : public Error {
 public:
  using Error::Error;
};

class ImageFormatError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedDepthError : public ImageFormatError {
 public:
  using ImageFormatError::ImageFormatError;
};

class TruncatedImageError : public ImageFormatError {
 public:
  using ImageFormatError::ImageFormatError;
};

/// Checkpoint errors. Each failure mode gets its own type so callers can
/// tell a corrupt file from an incompatible one.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class HyperparameterMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::int64_t step)
      : Error(what), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace dnirb
