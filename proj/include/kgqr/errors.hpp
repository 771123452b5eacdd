#pragma once

#include <stdexcept>
#include <string>

namespace kgqr {

// Error categories map onto CLI exit codes: usage=1, config=2, data=3, numeric=4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error("config error at '" + key + "': " + what), key(key) {}
  std::string key;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- kg-store --------------------------------------------------------------
struct ParseError : DataError {
  ParseError(int line, const std::string& what)
      : DataError("parse error at line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};
struct EmptyGraphError : DataError {
  using DataError::DataError;
};
struct IdOutOfRangeError : DataError {
  using DataError::DataError;
};

// -- query-model -----------------------------------------------------------
struct ArityMismatchError : DataError {
  using DataError::DataError;
};
struct UnknownRelationError : DataError {
  using DataError::DataError;
};
struct UnknownEntityError : DataError {
  using DataError::DataError;
};
struct PositionOverflowError : DataError {
  using DataError::DataError;
};
struct NodeNotFoundError : DataError {
  using DataError::DataError;
};
struct UnsupportedUnionShapeError : DataError {
  using DataError::DataError;
};

// -- traversal-oracle --------------------------------------------------------
struct GroundingFailedError : DataError {
  using DataError::DataError;
};

// -- diff-engine -------------------------------------------------------------
struct ShapeMismatchError : NumericError {
  using NumericError::NumericError;
};
struct DomainError : NumericError {
  using NumericError::NumericError;
};
struct NonScalarRootError : NumericError {
  using NumericError::NumericError;
};

// -- backends ----------------------------------------------------------------
struct FewerThanTwoError : DataError {
  using DataError::DataError;
};
struct EmptyDisjunctsError : DataError {
  using DataError::DataError;
};
struct NegationUnsupportedError : DataError {
  using DataError::DataError;
};
struct DimMismatchError : NumericError {
  using NumericError::NumericError;
};
struct CheckpointError : DataError {
  using DataError::DataError;
};

// -- trainer -------------------------------------------------------------------
struct NoNegativesAvailableError : DataError {
  using DataError::DataError;
};
struct VarianceOnBoxBackendError : ConfigError {
  explicit VarianceOnBoxBackendError(const std::string& what) : ConfigError("variance_weight", what) {}
};
struct DivergedLossError : NumericError {
  DivergedLossError(long long step, const std::string& what)
      : NumericError("loss diverged at step " + std::to_string(step) + ": " + what), step(step) {}
  long long step;
};

// -- evaluator ------------------------------------------------------------------
struct TargetFilteredError : DataError {
  using DataError::DataError;
};
struct EmptyGroupError : DataError {
  using DataError::DataError;
};
struct CoverageMismatchError : DataError {
  using DataError::DataError;
};

}  // namespace kgqr
