#pragma once

// Propagation-of-chaos sweeps, contractivity and dissipation checks, and the
// convexity / mean-energy / beta-stability property tests.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/gradient_flow.hpp"
#include "chaoslab/oracles.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/potentials.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab {

// Runs job(0) .. job(n - 1); implementations may run them concurrently.
using Executor = std::function<void(std::size_t n, const std::function<void(std::size_t)>& job)>;
Executor sequential_executor();

// Named initial law with a particle placement rule.
struct InitialMeasure {
  enum class Kind { gaussian, uniform, quantile_file };
  enum class Placement { iid, quantile };

  Kind kind = Kind::gaussian;
  Placement placement = Placement::iid;
  double a = 0.0;  // gaussian: mean; uniform: left end
  double b = 1.0;  // gaussian: sigma; uniform: right end
  std::string path;
  std::optional<QuantileMeasure> grid;  // loaded quantile file

  static InitialMeasure gaussian(double mean, double sigma, Placement p = Placement::iid);
  static InitialMeasure uniform(double lo, double hi, Placement p = Placement::iid);
  static InitialMeasure quantile_file(const std::string& path, Placement p = Placement::iid);

  // N x dim positions, 1D sorted; quantile placement is 1D only and ignores the seed.
  std::vector<double> sample(std::size_t N, std::size_t dim, std::uint64_t seed) const;
  QuantileMeasure quantiles(std::size_t M) const;
  PiecewiseMeasure piecewise() const;
  std::string describe() const;
};

// Distance from an empirical measure to the reference law at time t.
struct Reference {
  std::function<double(const EmpiricalMeasure&, double)> distance;
  double valid_until = kInf;
  std::string name;
  // Self-refinement error of the reference at each sweep time, when known.
  std::vector<double> refinement_error;
};

Reference reference_from_flow(JKOFlow flow);
Reference reference_from_burgers(const PiecewiseMeasure& mu0);
Reference reference_from_quantiles(std::function<QuantileMeasure(double)> law, std::string name);

struct JKOReferenceOptions {
  double tau = 1e-3;
  std::size_t M = 512;
  bool refine = true;  // also run (tau / 2, 2M) and record the self-refinement error
};

Reference jko_reference(const InitialMeasure& mu0, const PotentialSpec& p, double beta, double T,
                        const std::vector<double>& times, const JKOReferenceOptions& options = {});

struct ChaosConfig {
  PotentialSpec potential = PotentialSpec::zero();
  double beta = kInf;
  InitialMeasure initial;
  std::vector<std::size_t> N_grid;
  std::size_t seeds = 8;
  std::vector<double> times;
  double dt = 1e-3;
  Dynamics dynamics = Dynamics::stochastic;  // sticky or deterministic for beta = inf
  NoiseScheme noise = NoiseScheme::split_implicit;
  std::uint64_t master_seed = 0;
  std::size_t dim = 1;
};

struct ChaosCell {
  std::size_t N;
  std::size_t seed;
  double time;
  double distance;  // NaN when the run failed
};

struct ChaosSummary {
  std::size_t N;
  double time;
  double mean;
  double stderr_;
  std::size_t count;
};

struct ChaosReport {
  std::vector<std::size_t> N_grid;
  std::vector<double> times;
  std::vector<ChaosCell> cells;        // ordered by (N, seed, time)
  std::vector<ChaosSummary> summary;   // ordered by (N, time)
  std::vector<double> slopes;          // log-log slope of mean vs N per time, top half of the grid
  std::vector<std::string> failures;   // "N=.., seed=..: message"
  bool reference_limited = false;
  bool deterministic = false;  // seed ignored, cells replicated

  const ChaosSummary& at(std::size_t N, double time) const;
};

ChaosReport chaos_sweep(const ChaosConfig& config, const Reference& reference,
                        const Executor& executor = sequential_executor());

// Least-squares slope of log(mean) against log(N) over the top half of the N grid.
double fit_slope(const std::vector<std::size_t>& N, const std::vector<double>& mean);

void write_chaos_csv(const std::string& path, const ChaosReport& r);
void write_chaos_summary_csv(const std::string& path, const ChaosReport& r);
// Line chart of mean distance against N (log-log), one line per time.
void write_chaos_svg(const std::string& path, const ChaosReport& r);

struct ContractivityRow {
  double time;
  double ratio;
  double bound;  // e^{-lambda t}
};

std::vector<ContractivityRow> contractivity_test(const QuantileMeasure& mu0, const QuantileMeasure& nu0,
                                                 const PotentialSpec& p, double beta, double tau,
                                                 const std::vector<double>& times, const JKOOptions& options = {});

struct DissipationResult {
  bool pass;
  double worst_violation;  // largest increase beyond the tolerance budget (<= 0 on pass)
  std::size_t worst_step;
  double worst_time;
};

DissipationResult dissipation_certificate(const Trajectory& traj, double rel_tol = 1e-9);
DissipationResult dissipation_certificate(const JKOFlow& flow, double rel_tol = 1e-12);

struct CommutationRow {
  std::size_t N;
  double sup_difference;  // sup over t of |mean_exact - mean_regularized|
  double pooled_stderr;   // at the time of the sup
  bool within_two_stderr;
};

struct CommutationReport {
  ChaosReport exact, regularized;
  std::vector<CommutationRow> rows;
  bool decaying;  // sup difference decreases along the N grid
};

// Exact singular drift against w regularized at epsilon_N (and R = 1e3) with the same seeds.
CommutationReport regularization_commutation(const ChaosConfig& config, const Reference& reference,
                                             const std::function<double(std::size_t)>& epsilon_N,
                                             const Executor& executor = sequential_executor());

struct ConvexityResult {
  double worst_violation;  // max over pairs and s of lhs - rhs
  std::size_t checks;
};

// F((1-s) U0 + s U1) <= (1-s) F(U0) + s F(U1) - lambda/2 s(1-s) W2^2 on random sorted pairs.
ConvexityResult geodesic_convexity_check(const PotentialSpec& p, double beta, std::size_t pairs, std::size_t M,
                                         const std::vector<double>& s_grid, std::uint64_t seed);

struct MeanEnergyGap {
  double gap;    // |E^(N)(x) / N - E_{W_R, V}(delta_N)|
  double C_R;    // max |w_R| over the sampled distances and 0, times N / (N - 1)
  double bound;  // C_R / N
};

MeanEnergyGap mean_energy_consistency(const RegularizedPotential& wr, const ParticleState& x);

// W2(mu_T^beta, mu_T^inf) for each finite beta.
std::vector<double> beta_stability(const QuantileMeasure& mu0, const PotentialSpec& p, const std::vector<double>& betas,
                                   double tau, double T, const JKOOptions& options = {});

}  // namespace chaoslab
