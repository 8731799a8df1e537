#pragma once

#include <stdexcept>
#include <string>

namespace passivity_lab {

// Precondition violations (bad indices, nonpositive parameters, window overruns).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed trajectory / result / config files. The message names the line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(double t)
      : std::runtime_error("simulation diverged: non-finite state at t=" + std::to_string(t)),
        time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

// An analysis input that cannot produce a meaningful answer: all-zero theta,
// a negative region that does not enclose the origin, no feasible level value.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The input-corrected L_fS estimator needs g(x) (or its sign surrogate b).
class MissingPriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace passivity_lab
