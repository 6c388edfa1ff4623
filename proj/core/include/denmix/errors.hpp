#pragma once

#include <stdexcept>

namespace denmix {

// Base class for every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad vocabulary layout or config file contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An argument or spec violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Sequence budgets cannot host the requested corruption parameters.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// An example needs more sentinel ids than the vocabulary provides.
class SentinelError : public Error {
 public:
  using Error::Error;
};

// Malformed example grammar or stream encoding.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Unknown preset name.
class CatalogError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class TrainError : public Error {
 public:
  using Error::Error;
};

}  // namespace denmix
