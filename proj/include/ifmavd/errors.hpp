#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ifmavd {

/// Root of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : Error("parse error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& field, const std::string& msg)
      : Error("schema error in field '" + field + "': " + msg), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DanglingEdge : public Error {
 public:
  explicit DanglingEdge(std::int64_t node_id)
      : Error("edge references missing node_id " + std::to_string(node_id)), node_id_(node_id) {}
  std::int64_t node_id() const noexcept { return node_id_; }

 private:
  std::int64_t node_id_;
};

class UnknownNode : public Error {
 public:
  explicit UnknownNode(std::int64_t node_id)
      : Error("node_id " + std::to_string(node_id) + " is not in the graph"), node_id_(node_id) {}
  std::int64_t node_id() const noexcept { return node_id_; }

 private:
  std::int64_t node_id_;
};

class UnknownFunction : public Error {
 public:
  explicit UnknownFunction(const std::string& id) : Error("unknown function id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

#define IFMAVD_SIMPLE_ERROR(Name)      \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  };

IFMAVD_SIMPLE_ERROR(ShapeMismatch)
IFMAVD_SIMPLE_ERROR(EmptyGraph)
IFMAVD_SIMPLE_ERROR(EmptyCorpus)
IFMAVD_SIMPLE_ERROR(DegenerateLabels)
IFMAVD_SIMPLE_ERROR(EmptyMask)
IFMAVD_SIMPLE_ERROR(LengthMismatch)
IFMAVD_SIMPLE_ERROR(TooFewRecords)
IFMAVD_SIMPLE_ERROR(VersionError)
IFMAVD_SIMPLE_ERROR(IoError)
IFMAVD_SIMPLE_ERROR(NotSymmetric)
IFMAVD_SIMPLE_ERROR(ZeroDegree)
IFMAVD_SIMPLE_ERROR(ConfigError)

#undef IFMAVD_SIMPLE_ERROR

/// Failure inside one pipeline stage, tagged with the stage and the offending record.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string function_id, const std::string& what)
      : Error("[" + stage + "] " + (function_id.empty() ? std::string{} : "function '" + function_id + "': ") + what),
        stage_(std::move(stage)),
        function_id_(std::move(function_id)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& function_id() const noexcept { return function_id_; }

 private:
  std::string stage_;
  std::string function_id_;
};

}  // namespace ifmavd
