#pragma once

// Reference solutions with independently known answers: Gaussian heat and
// Ornstein-Uhlenbeck flows, the Burgers entropy solution of the 1D |x|
// aggregation model, the Dyson equilibrium and the Hilbert transform.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/potentials.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab {

struct Gaussian {
  double mean = 0.0;
  double sigma = 1.0;
};

double normal_quantile(double p);
QuantileMeasure gaussian_quantiles(const Gaussian& g, std::size_t M);

// N(m, sigma^2 + 2t/beta).
Gaussian heat_flow_law(const Gaussian& mu0, double beta, double t);
QuantileMeasure heat_flow(const Gaussian& mu0, double beta, double t, std::size_t M);

// Mean m e^{-ct}, variance sigma^2 e^{-2ct} + (1 - e^{-2ct}) / (c beta).
Gaussian ou_flow_law(const Gaussian& mu0, double c, double beta, double t);
QuantileMeasure ou_flow(const Gaussian& mu0, double c, double beta, double t, std::size_t M);

// Largest residual of the Gaussian law against the Fokker-Planck equation
// rho_t = (1/beta) rho_xx + (c x rho)_x by central differences on a grid.
double gaussian_fokker_planck_residual(const Gaussian& mu0, double c, double beta, double t);

// 1D measure made of atoms (a == b) and uniform pieces on [a, b], sorted and disjoint.
struct PiecewiseMeasure {
  struct Piece {
    double a, b, mass;
  };
  std::vector<Piece> pieces;
  double truncated_mass = 0.0;  // mass dropped when built from an unbounded law

  static PiecewiseMeasure uniform(double a, double b);
  static PiecewiseMeasure atoms(const EmpiricalMeasure& m);
  // Linear interpolation of `cdf` on [lo, hi] with n pieces; the tails are dropped.
  static PiecewiseMeasure from_cdf(const std::function<double(double)>& cdf, double lo, double hi, std::size_t n);
  void validate() const;
  double lo() const { return pieces.front().a; }
  double hi() const { return pieces.back().b; }
};

struct BurgersAtom {
  double position, mass;
  double F_left, F_right;  // CDF limits on each side
  double speed;            // 1 - F_left - F_right
};

// Entropy solution of the aggregation equation with w = |x|, V = 0, read
// through u = 2F - 1, which solves (after x -> -x) u_t + u u_x = u_xx / beta.
class BurgersSolution {
 public:
  BurgersSolution(PiecewiseMeasure mu0, double t, double beta);

  double cdf(double x) const;
  double quantile(double s) const;
  QuantileMeasure quantiles(std::size_t M) const;
  // Atoms of mu_t (beta = inf only); masses resolved to about 1e-10.
  std::vector<BurgersAtom> atoms() const;
  // Exact W2 to a weighted atomic measure by adaptive quadrature over quantile levels.
  double w2_to(const EmpiricalMeasure& m) const;
  double mean() const;

  double time() const { return t_; }
  double beta() const { return beta_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  double G(double x) const;  // int_{-inf}^x F_0
  double F0(double x) const;
  double minimizer(double x) const;
  double phi(double xp, double x) const;
  double cole_hopf_cdf(double x) const;

  PiecewiseMeasure mu0_;
  std::vector<double> bx_, bF_, bFm_, bG_;  // breakpoints, F_0 right and left limits, G at breakpoints
  double t_, beta_;
  std::vector<std::string> warnings_;
};

BurgersSolution burgers_entropy(const PiecewiseMeasure& mu0, double t, double beta);

// Largest |numerical atom speed - (1 - F_left - F_right)| over atoms at time t, central differences with step h.
double rankine_hugoniot_residual(const PiecewiseMeasure& mu0, double t, double h = 1e-4);

struct DysonOptions {
  double tol = 1e-10;  // on the optimality residual
  std::size_t max_iterations = 200;  // Newton iterations
  std::string cache_dir;  // empty: no disk cache
};

struct DysonEquilibrium {
  QuantileMeasure mu;
  double residual;  // max_k |U_k - (1/M) sum_{l != k} 1 / (U_k - U_l)|
  std::size_t iterations;
  bool from_cache;
};

// Minimizer over nondecreasing U of (1/M) sum U_k^2 / 2 - 1/(2 M^2) sum_{k != l} log |U_k - U_l|,
// by damped inexact Newton steps from semicircle quantiles; the ordering is kept by backtracking.
DysonEquilibrium dyson_equilibrium(std::size_t M = 4096, const DysonOptions& options = {});
double dyson_optimality_residual(const QuantileMeasure& mu);
double semicircle_cdf(double x);

struct HilbertValue {
  double value;
  double error_estimate;  // last increment of the extrapolated sequence
  bool diverged;
};

// Truncated integral int_{|x - y| >= eps} dmu(y) / (x - y).
double hilbert_truncated(const EmpiricalMeasure& mu, double x, double eps);
// Quantile grids are read as a piecewise-uniform density with end atoms of mass 1/(2M).
double hilbert_truncated(const QuantileMeasure& mu, double x, double eps);

HilbertValue hilbert_transform(const EmpiricalMeasure& mu, double x, const std::vector<double>& eps);
HilbertValue hilbert_transform(const QuantileMeasure& mu, double x, const std::vector<double>& eps);

}  // namespace chaoslab
