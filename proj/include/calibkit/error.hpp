#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calibkit {

// Base for every error the library reports. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input text (JSON syntax, unknown enum values, bad count-table rows).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that breaks a data-model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class TokenizeError : public Error {
 public:
  TokenizeError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::size_t subword_index)
      : Error(what), subword_index_(subword_index) {}

  // Zero-based index of the first subword that could not be placed.
  std::size_t subword_index() const { return subword_index_; }

 private:
  std::size_t subword_index_;
};

}  // namespace calibkit
