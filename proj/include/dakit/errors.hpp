#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dakit {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fusion inputs carry no usable uncertainty information (both variances
// zero with disagreeing values).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Adaptive integration could not continue (step underflow or step budget).
// `last_good_time` is the furthest time with an accepted state.
struct IntegrationError : Error {
  IntegrationError(const std::string& msg, double last_good_time_)
      : Error(msg), last_good_time(last_good_time_) {}
  double last_good_time;
};

// Query outside the span covered by a trajectory or series.
struct OutOfRangeError : Error {
  using Error::Error;
};

// Invalid run configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input file; the message carries "<path>:<line>".
struct ParseError : Error {
  ParseError(const std::string& path, std::size_t line_no, const std::string& what_)
      : Error(path + ":" + std::to_string(line_no) + ": " + what_),
        file(path),
        line(line_no) {}
  std::string file;
  std::size_t line;
};

// Filesystem failure while reading inputs or writing outputs.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dakit
