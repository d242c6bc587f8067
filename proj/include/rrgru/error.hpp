#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rrgru {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands of an array operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an operation (bad argument, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered in parameters, gradients or losses.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Anything wrong with an input file. Carries the offending line when known.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::string file = {}, std::size_t line = 0)
      : Error(format(what, file, line)), file_(std::move(file)), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& what, const std::string& file, std::size_t line) {
    std::string out;
    if (!file.empty()) out += file + ":";
    if (line != 0) out += std::to_string(line) + ":";
    if (!out.empty()) out += " ";
    return out + what;
  }

  std::string file_;
  std::size_t line_;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rrgru
