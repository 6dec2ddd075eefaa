#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ird {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wrong parameter length, mismatched sequence lengths, bad case index.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// No finite-kernel starting point was found for a chain.
class InitializationError : public Error {
 public:
  InitializationError(std::string coordinate, const std::string& what)
      : Error(what), coordinate_(std::move(coordinate)) {}
  const std::string& coordinate() const noexcept { return coordinate_; }

 private:
  std::string coordinate_;
};

// Importance weights too degenerate to resample from.
class DegeneracyError : public Error {
 public:
  DegeneracyError(std::size_t case_index, double weight_ess, const std::string& what)
      : Error(what), case_index_(case_index), weight_ess_(weight_ess) {}
  std::size_t case_index() const noexcept { return case_index_; }
  double weight_ess() const noexcept { return weight_ess_; }

 private:
  std::size_t case_index_;
  double weight_ess_;
};

// A case whose cross-validation draws have zero spread.
class DegenerateCaseError : public Error {
 public:
  DegenerateCaseError(std::size_t case_index, const std::string& what)
      : Error(what), case_index_(case_index) {}
  std::size_t case_index() const noexcept { return case_index_; }

 private:
  std::size_t case_index_;
};

// The leave-one-out posterior of a case does not integrate (improper priors
// with no information in the retained data).
class ImproperPosteriorError : public Error {
 public:
  ImproperPosteriorError(std::size_t case_index, const std::string& what)
      : Error(what), case_index_(case_index) {}
  std::size_t case_index() const noexcept { return case_index_; }

 private:
  std::size_t case_index_;
};

// Reference draws of T with zero spread; standardization is undefined.
class DegenerateReferenceError : public Error {
 public:
  using Error::Error;
};

class StudyAbortError : public Error {
 public:
  using Error::Error;
};

}  // namespace ird
