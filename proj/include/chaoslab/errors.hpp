#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaoslab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tabulated data queried outside its sampled hull.
class ExtrapolationError : public Error {
 public:
  ExtrapolationError(const std::string& what, double r) : Error(what), radius(r) {}
  double radius;
};

// Gradient requested at a point where a strongly singular kernel blows up.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double r, std::size_t i = 0, std::size_t j = 0)
      : Error(what), radius(r), first(i), second(j) {}
  double radius;
  std::size_t first;
  std::size_t second;
};

// Ordering could not be preserved even after the maximal number of halvings.
class StepSizeError : public Error {
 public:
  StepSizeError(const std::string& what, double dt_reached) : Error(what), dt(dt_reached) {}
  double dt;
};

// Stochastic step produced a non-finite coordinate.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double max_drift_dt)
      : Error(what), max_drift_times_dt(max_drift_dt) {}
  double max_drift_times_dt;
};

// Inner minimization hit its iteration cap; the last iterate is attached.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last, double residual)
      : Error(what), last_iterate(std::move(last)), gradient_norm(residual) {}
  std::vector<double> last_iterate;
  double gradient_norm;
};

// Config parsing collects every violation before failing.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), violations(std::move(problems)) {}
  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
};

}  // namespace chaoslab
