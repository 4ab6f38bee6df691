// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pad {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid construction parameters or mismatched dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidTokenError : public Error {
 public:
  using Error::Error;
};

// Residual requested for a (p_target, p_draft) pair with no rejection mass.
class DegenerateResidualError : public Error {
 public:
  using Error::Error;
};

class EmptyStatsError : public Error {
 public:
  using Error::Error;
};

// Training or evaluation data lacking one of the two classes.
class DegenerateDatasetError : public Error {
 public:
  using Error::Error;
};

// Input file with a missing or mismatched schema header.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace pad
