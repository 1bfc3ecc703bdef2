#pragma once

#include <stdexcept>
#include <string>

namespace modnn {

// Numeric values double as CLI exit codes.
enum class ErrorCode : int {
  kInternal = 1,
  kConfig = 2,
  kTraining = 3,
  kIntegrity = 4,
  kNumerical = 5,
  kInvalidArgument = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Caller broke a documented precondition (wrong scalar-ness, bad bounds, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ErrorCode::kTraining, what) {}
};

// Malformed CSV, corrupted checkpoint, unreadable file.
class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& what) : Error(ErrorCode::kIntegrity, what) {}
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error(ErrorCode::kIntegrity, what) {}
};

class SimulationError : public Error {
 public:
  explicit SimulationError(const std::string& what) : Error(ErrorCode::kNumerical, what) {}
};

class ActuationError : public Error {
 public:
  explicit ActuationError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error(ErrorCode::kNumerical, what) {}
};

class OptimizerError : public Error {
 public:
  explicit OptimizerError(const std::string& what) : Error(ErrorCode::kNumerical, what) {}
};

}  // namespace modnn
