#pragma once

#include <stdexcept>
#include <string>

namespace advsim {

// Failure classes map onto distinct CLI exit codes.
enum class ErrorClass { config, data, runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

// Scenario/model/config file does not match its schema. `field` is a JSON-pointer-like path.
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error(ErrorClass::data, "parse error at '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Well-formed data that breaks a domain invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string agent_id, double t, const std::string& what)
      : Error(ErrorClass::data, "validation error (agent '" + agent_id + "', t=" + std::to_string(t) + "): " + what),
        agent_id_(std::move(agent_id)),
        t_(t) {}
  explicit ValidationError(const std::string& what) : Error(ErrorClass::data, "validation error: " + what) {}
  const std::string& agent_id() const noexcept { return agent_id_; }
  double time() const noexcept { return t_; }

 private:
  std::string agent_id_;
  double t_ = 0.0;
};

class GridError : public Error {
 public:
  explicit GridError(const std::string& what) : Error(ErrorClass::data, "grid error: " + what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what) : Error(ErrorClass::data, "insufficient data: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::config, "config error: " + what) {}
};

class NoOpponentError : public Error {
 public:
  explicit NoOpponentError(const std::string& what) : Error(ErrorClass::runtime, "no opponent: " + what) {}
};

class DegenerateCorpusError : public Error {
 public:
  explicit DegenerateCorpusError(const std::string& what) : Error(ErrorClass::data, "degenerate corpus: " + what) {}
};

class PathLostError : public Error {
 public:
  explicit PathLostError(const std::string& what) : Error(ErrorClass::runtime, "path lost: " + what) {}
};

}  // namespace advsim
