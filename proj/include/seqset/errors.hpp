#pragma once

#include <stdexcept>
#include <string>

namespace seqset {

// Base class for every error the library throws. Subclasses classify the
// failure so callers (notably the CLI) can map them to exit codes without
// string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes disagree (matmul inner dims, elementwise mismatch, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A runtime input is unusable: empty source sequence, out-of-range token id.
class InputError : public Error {
 public:
  using Error::Error;
};

// Corpus or file content is malformed (bad line, alias cycle, too few records).
class DataError : public Error {
 public:
  using Error::Error;
};

// A configuration value is invalid or a requested setup is infeasible.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An operation precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A computation produced or received non-finite values where finite ones are
// required (NaN loss, NaN gradient).
class NumericError : public Error {
 public:
  using Error::Error;
};

// The decoder was asked to run past its configured maximum length.
class DecodeLengthError : public Error {
 public:
  using Error::Error;
};

// The gradient-check harness itself cannot proceed (e.g. the loss function is
// not deterministic, so finite differences are meaningless).
class CheckError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqset
