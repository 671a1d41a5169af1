#pragma once

#include <stdexcept>
#include <string>

namespace gcn {

// Incompatible tensor dimensions.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input file (embeddings, datasets, configs). Carries the
// offending line when known.
struct ParseError : std::runtime_error {
  ParseError(std::string msg, std::size_t line_no = 0)
      : std::runtime_error(std::move(msg)), line(line_no) {}
  std::size_t line;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation not defined for the model variant (e.g. gate inspection on a
// non-gated model).
struct UnsupportedOperation : std::logic_error {
  using std::logic_error::logic_error;
};

struct CheckpointError : std::runtime_error {
  enum class Kind { BadMagic, BadVersion, Truncated, BadHeader };
  CheckpointError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// Non-finite loss during training; reports where it happened.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(std::size_t epoch_no, std::size_t batch_no, const std::string& msg)
      : std::runtime_error(msg), epoch(epoch_no), batch(batch_no) {}
  std::size_t epoch;
  std::size_t batch;
};

}  // namespace gcn
