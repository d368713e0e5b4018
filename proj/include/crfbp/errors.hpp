#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace crfbp {

// Base class for every recoverable numerical failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMassError : public Error {
 public:
  using Error::Error;
};

// Raised when a reciprocal distance is requested at (or numerically on) a primary.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, Eigen::VectorXd last_state, double last_time)
      : Error(what), last_state_(std::move(last_state)), last_time_(last_time) {}
  const Eigen::VectorXd& last_state() const { return last_state_; }
  double last_time() const { return last_time_; }

 private:
  Eigen::VectorXd last_state_;
  double last_time_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

class NonSimpleExponentError : public Error {
 public:
  using Error::Error;
};

class ResonanceError : public Error {
 public:
  ResonanceError(const std::string& what, int a1, int a2) : Error(what), a1_(a1), a2_(a2) {}
  int alpha1() const { return a1_; }
  int alpha2() const { return a2_; }

 private:
  int a1_, a2_;
};

class SymmetryError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

// Newton converged on the reduced system but the dropped boundary component disagrees.
class PseudoSolutionError : public Error {
 public:
  PseudoSolutionError(const std::string& what, double mismatch) : Error(what), mismatch_(mismatch) {}
  double mismatch() const { return mismatch_; }

 private:
  double mismatch_;
};

}  // namespace crfbp
