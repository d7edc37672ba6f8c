#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vvcguard {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A bus id that is not part of the network.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_mismatch);
  double last_mismatch() const noexcept { return last_mismatch_; }

 private:
  double last_mismatch_;
};

/// Voltage collapse during a power-flow sweep.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class MalformedCurveError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, std::size_t step);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class AttackConstructionError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Feature dimension, column order or schema hash disagree.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or corrupt file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace vvcguard
