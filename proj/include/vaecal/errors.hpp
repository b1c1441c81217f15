#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vaecal {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Column names or vector sizes disagree with what a fitted object expects.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A quantity is undefined because its input has no spread (constant column,
/// constant truth vector, all-excluded accuracy terms, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ModelFileError : public Error {
 public:
  using Error::Error;
};

class ModelVersionError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

class ChecksumError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

}  // namespace vaecal
