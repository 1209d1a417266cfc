#pragma once

#include <stdexcept>
#include <string>

namespace mfglab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: mismatched particle counts, out-of-range parameters.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A Hamiltonian or data model violating its construction invariants.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Phase state became non-finite or exceeded the blow-up threshold.
class BlowUpError : public Error {
 public:
  BlowUpError(double time, const std::string& what)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Newton inversion of the time-t flow map did not converge.
class InversionFailure : public Error {
 public:
  InversionFailure(double residual, const std::string& what)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// det D_z xi changed sign along a trajectory.
class ConjugatePointError : public Error {
 public:
  ConjugatePointError(double time, const std::string& what)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Path minimisation (shooting and direct) failed.
class OptimizationFailure : public Error {
 public:
  using Error::Error;
};

/// Fourier truncation box too small for the kernel.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed to parse or validate.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfglab
