#pragma once

// Experiment configuration: a flat text format with one section per module,
//
//   [run]
//   command = sweep
//   output = out/chaos
//
//   [model]
//   kernel = logarithmic
//   external = quadratic
//
// Blank lines and text after '#' are ignored. Every key is typed; unknown keys are errors.

#include <cstdint>
#include <string>
#include <vector>

#include "chaoslab/diagnostics.hpp"
#include "chaoslab/potentials.hpp"

namespace chaoslab::cli {

enum class Command { simulate, jko, oracle, compare, sweep, validate };
enum class BetaSchedule { constant, sqrtN };
enum class ReferenceKind { automatic, heat, ou, burgers, jko, dyson };

std::string to_string(Command c);
std::string to_string(BetaSchedule s);
std::string to_string(ReferenceKind r);

struct ExperimentConfig {
  // [run]
  Command command = Command::simulate;
  std::string output = "chaoslab_out";
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  // [model]
  std::string kernel = "zero";  // zero | logarithmic | repulsive_power | attractive_power | morse | tabulated
  double s = 0.5;
  double alpha = 0.0;
  double morse_c_rep = 1.0, morse_l_rep = 1.0, morse_c_att = 0.5, morse_l_att = 2.0;
  std::string table;
  std::string external = "zero";  // zero | quadratic | polynomial
  double c = 1.0;
  std::vector<double> coefficients;
  double beta = kInf;
  BetaSchedule beta_schedule = BetaSchedule::constant;

  // [initial]
  std::string family = "gaussian";  // gaussian | uniform | quantile_file
  std::string placement = "iid";    // iid | quantile
  double mean = 0.0, sigma = 1.0;
  double lo = 0.0, hi = 1.0;
  std::string path;

  // [particles]
  std::size_t N = 64;
  std::vector<std::size_t> N_grid;
  std::size_t seeds = 8;
  std::size_t dim = 1;
  Dynamics dynamics = Dynamics::stochastic;
  Scheme scheme = Scheme::rk4;
  NoiseScheme noise = NoiseScheme::split_implicit;
  double dt = 1e-3;

  // [jko]
  double tau = 1e-3;
  std::size_t M = 512;

  // [time]
  double T = 1.0;
  std::vector<double> output_times;  // empty: {0, T}

  // [reference]
  ReferenceKind reference = ReferenceKind::automatic;
  double reference_tau = 1e-3;
  std::size_t reference_M = 512;
  double tolerance = kInf;  // compare: largest accepted W2 to the reference

  bool operator==(const ExperimentConfig&) const = default;

  std::vector<double> effective_output_times() const;
  double beta_for(std::size_t N) const;
  PotentialSpec potential() const;
  InitialMeasure initial() const;
};

struct ParseResult {
  ExperimentConfig config;
  std::vector<std::string> errors;  // every violation found, empty when valid
  std::size_t syntax_errors = 0;    // leading entries of `errors` that come from reading the text

  bool ok() const { return errors.empty(); }
};

ParseResult parse_config_text(const std::string& text, const std::string& base_dir = ".");
ParseResult parse_config(const std::string& path);
// Range and cross-field checks; parse_config_text already applies them.
std::vector<std::string> validate(const ExperimentConfig& c);
// Effective configuration with every key, defaults included.
std::string emit_config(const ExperimentConfig& c);

std::size_t edit_distance(const std::string& a, const std::string& b);
std::vector<std::string> known_keys();

}  // namespace chaoslab::cli
