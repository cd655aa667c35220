#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace releaser {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally valid input that breaks a data-model invariant.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent configuration. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Argument outside an operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or inconsistent checkpoint. `section()` names where it broke.
class CheckpointError : public Error {
 public:
  CheckpointError(std::string section, const std::string& what)
      : Error("checkpoint section '" + section + "': " + what), section_(std::move(section)) {}

  const std::string& section() const noexcept { return section_; }

 private:
  std::string section_;
};

}  // namespace releaser
