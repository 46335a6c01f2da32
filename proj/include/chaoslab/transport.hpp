#pragma once

// Wasserstein distances, the empirical-measure embedding and 1D quantile
// representations.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/particles.hpp"

namespace chaoslab {

// Weighted discrete measure: atoms at `positions` (n x dim) with `weights`.
struct EmpiricalMeasure {
  std::size_t dim = 1;
  std::vector<double> positions;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> at(std::size_t i) const { return {positions.data() + i * dim, dim}; }

  static EmpiricalMeasure uniform(std::vector<double> positions, std::size_t dim = 1);
  // Throws unless weights are positive, sum to 1 within 1e-12 and positions are finite.
  void validate() const;
  // Coincident atoms combined, 1D atoms sorted.
  EmpiricalMeasure merged() const;
};

// 1D measure through its quantile function sampled at s_k = (k + 1/2) / M.
struct QuantileMeasure {
  std::vector<double> U;

  std::size_t M() const { return U.size(); }
  static double level(std::size_t k, std::size_t M) { return (static_cast<double>(k) + 0.5) / static_cast<double>(M); }
  double mean() const;
  double second_moment() const;
  double variance() const;
  bool nondecreasing() const;
  void validate() const;
};

EmpiricalMeasure empirical(const ParticleState& state);
EmpiricalMeasure empirical(const StickyState& state);
EmpiricalMeasure empirical(const QuantileMeasure& q);

// Exact 1D W_p between weighted atom sets by walking the merged CDF breakpoints.
double wp_discrete_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p);

double w2_quantile(const QuantileMeasure& a, const QuantileMeasure& b);

inline constexpr std::size_t kAssignmentCap = 512;

// Exact W2 between uniform clouds of equal size through an optimal assignment.
double w2_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

struct ApproximateDistance {
  double value;
  bool approximate;
};

// Sliced W2 over random directions; for clouds above the assignment cap.
ApproximateDistance w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t directions,
                              std::uint64_t seed);

// Exact when possible (1D any size, D >= 2 uniform equal size within the cap), sliced otherwise.
ApproximateDistance w2_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

QuantileMeasure quantile_from_empirical(const EmpiricalMeasure& a, std::size_t M);
// Inverts a CDF by bisection at the midpoint levels.
QuantileMeasure quantile_from_density(const std::function<double(double)>& cdf, std::size_t M);
QuantileMeasure quantile_from_function(const std::function<double(double)>& quantile, std::size_t M);

QuantileMeasure generalized_geodesic(const QuantileMeasure& mu0, const QuantileMeasure& mu1, double s);

// CSV schemas: quantiles as a single column whose header cell is M;
// empirical measures as x_1..x_D,weight.
void write_quantile_csv(const std::string& path, const QuantileMeasure& q);
QuantileMeasure read_quantile_csv(const std::string& path);
void write_empirical_csv(const std::string& path, const EmpiricalMeasure& m);
EmpiricalMeasure read_empirical_csv(const std::string& path);

}  // namespace chaoslab
