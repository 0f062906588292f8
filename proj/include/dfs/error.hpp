#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfs {

// Base for every error the toolkit raises on bad input or bad state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or flag values (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyCorpusError : public DataError {
 public:
  using DataError::DataError;
};

// Model file could not be decoded: bad magic, wrong version, truncation.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Broken internal invariant, e.g. indexer/weight-block mismatch (CLI exit code 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

#define DFS_CHECK(cond, msg)                                                 \
  do {                                                                       \
    if (!(cond)) throw ::dfs::InvariantError(std::string(__FILE__) + ":" +   \
                                             std::to_string(__LINE__) + ": " + \
                                             (msg));                         \
  } while (0)

}  // namespace dfs
