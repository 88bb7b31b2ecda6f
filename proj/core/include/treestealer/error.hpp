#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace treestealer {

// Base of every error raised by the library. Callers that only need a
// message catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("input has " + std::to_string(got) + " features, expected " +
              std::to_string(expected)),
        expected_(expected),
        got_(got) {}
  std::size_t expected() const { return expected_; }
  std::size_t got() const { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

class MalformedTree : public Error {
 public:
  using Error::Error;
};

// Tree JSON or report JSON that does not follow the schema. `field()` names
// the offending key.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error("schema error at '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class InfeasibleGrid : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

// The PHR-channel lost decisions closest to the root because the trace does
// not fit the register budget.
class TruncatedTrace : public Error {
 public:
  TruncatedTrace(std::size_t recovered, std::size_t expected)
      : Error("branch trace truncated: recovered " + std::to_string(recovered) +
              " of " + std::to_string(expected) + " decisions"),
        recovered_(recovered),
        expected_(expected) {}
  std::size_t recovered() const { return recovered_; }
  std::size_t expected() const { return expected_; }

 private:
  std::size_t recovered_;
  std::size_t expected_;
};

class DecodeError : public Error {
 public:
  DecodeError(std::size_t block, const std::string& what)
      : Error("PHR decode failed at block " + std::to_string(block) + ": " + what),
        block_(block) {}
  std::size_t block() const { return block_; }

 private:
  std::size_t block_;
};

// READ_PHR could not single out one candidate doublet at `position`.
class CollisionReadError : public Error {
 public:
  CollisionReadError(std::size_t position, const std::string& what)
      : Error("collision read failed at position " + std::to_string(position) + ": " +
              what),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class StepLogError : public Error {
 public:
  using Error::Error;
};

class FeatureNotFound : public Error {
 public:
  explicit FeatureNotFound(int node_id)
      : Error("no feature flips the decision of shadow node " + std::to_string(node_id)),
        node_id_(node_id) {}
  int node_id() const { return node_id_; }

 private:
  int node_id_;
};

// A crafted input left the path to the node under attack. Happens when the
// extraction resolution is too coarse for the target's threshold spacing.
class PathDeviation : public Error {
 public:
  PathDeviation(int node_id, const std::string& what)
      : Error("path deviation at shadow node " + std::to_string(node_id) + ": " + what),
        node_id_(node_id) {}
  int node_id() const { return node_id_; }

 private:
  int node_id_;
};

class ChannelInconsistency : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace treestealer
