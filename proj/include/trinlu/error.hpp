#pragma once

#include <stdexcept>
#include <string>

namespace trinlu {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation or a wiring override.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed corpus, embedding, or checkpoint input.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, or a gradient check above tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or an inconsistent parameter set.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace trinlu
