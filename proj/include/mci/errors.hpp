#pragma once

#include <stdexcept>
#include <string>

namespace mci {

// Base for every failure the library reports. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches, malformed label columns, bad arguments.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (non-positive bandwidth, epsilon, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or failed factorizations.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Data that makes a statistic undefined (all-identical samples, every class skipped).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// An operation was called before a required step (e.g. pseudo-labels not initialized).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Feature-file problems; the message carries the 1-based line number when known.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace mci
