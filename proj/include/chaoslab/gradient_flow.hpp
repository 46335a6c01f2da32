#pragma once

// Minimizing-movement (JKO) flow of
//
//   F_beta(mu) = 1/2 iint w(x - y) + int V + H(mu) / beta
//
// on 1D measures stored as midpoint quantile grids.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chaoslab/potentials.hpp"
#include "chaoslab/transport.hpp"

namespace chaoslab {

struct FreeEnergyReport {
  double interaction = 0.0;
  double potential = 0.0;
  double entropy = 0.0;  // +inf on a zero gap
  double total = 0.0;
  double beta = kInf;
};

FreeEnergyReport free_energy(const QuantileMeasure& mu, const PotentialSpec& p, double beta);

// Modulus of F along generalized geodesics: lambda_V + min(lambda_w, 0).
double free_energy_lambda(const PotentialSpec& p);

// Pool-adjacent-violators projection onto nondecreasing vectors (least squares).
std::vector<double> isotonic_projection(std::vector<double> y);

enum class InnerMethod {
  // tridiagonal-preconditioned projected gradient, Newton-like near the solution
  preconditioned,
  // projected gradient with Barzilai-Borwein steps
  spectral,
};

struct JKOOptions {
  double tol_inner = -1.0;  // default 1e-10 * M on the projected-gradient norm of M * J
  std::size_t max_iterations = 10000;
  InnerMethod method = InnerMethod::preconditioned;
};

struct JKOStats {
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  std::size_t evaluations = 0;
};

struct JKOStepResult {
  QuantileMeasure mu;
  JKOStats stats;
};

// argmin over nondecreasing U of 1/(2 tau) W2^2(U, prev) + F_beta(U).
JKOStepResult jko_step(const QuantileMeasure& prev, double tau, const PotentialSpec& p, double beta,
                       const JKOOptions& options = {}, const QuantileMeasure* warm_start = nullptr);

struct JKOFlowStep {
  double time;
  QuantileMeasure mu;
  FreeEnergyReport energy;
  JKOStats stats;  // zeros for the initial entry
};

struct JKOFlow {
  double tau = 0.0;
  double beta = kInf;
  PotentialSpec potential = PotentialSpec::zero();
  std::vector<JKOFlowStep> steps;  // steps[0] is the initial datum at t = 0

  // Piecewise constant in time: the last iterate with time <= t.
  const QuantileMeasure& at(double t) const;
  double final_time() const { return steps.back().time; }
};

using StepObserver = std::function<void(const JKOFlowStep&)>;

JKOFlow jko_flow(const QuantileMeasure& mu0, double tau, double T, const PotentialSpec& p, double beta,
                 const JKOOptions& options = {}, const StepObserver& observer = {});

// W2 between quantile measures of any sizes.
double w2_between(const QuantileMeasure& a, const QuantileMeasure& b);

// (time, 1/2 d+/dt W2^2(mu_t, v) + F(mu_t) + lambda/2 W2^2(mu_t, v) - F(v)) at every step but the last.
std::vector<std::pair<double, double>> evi_residual(const JKOFlow& flow, const QuantileMeasure& v, double lambda);

// C in tol_evi(tau) = C sqrt(tau), from the heat flow started at N(0, 1) tested against v = mu_0.
double calibrate_evi_constant(double tau = 1e-2, std::size_t M = 256);
inline double evi_tolerance(double tau, double C) { return C * std::sqrt(tau); }

struct TestFunction {
  std::function<double(double)> phi, dphi, d2phi;
};

// Smooth compactly supported bump equal to phi on [-a, a], vanishing outside [-b, b].
TestFunction truncated_test_function(std::function<double(double)> phi, std::function<double(double)> dphi,
                                     std::function<double(double)> d2phi, double a, double b);

// For every test function (outer) and step j >= 1 (inner):
//   (int phi dmu_j - int phi dmu_{j-1}) / tau
//     - [ 1/beta int phi'' - int V' phi' - 1/2 iint w'(x - y) (phi'(x) - phi'(y)) ]  at mu_j.
std::vector<std::vector<double>> weak_mkv_residual(const JKOFlow& flow, const PotentialSpec& p, double beta,
                                                   const std::vector<TestFunction>& tests);

// Flow export: time,quantile_index,U and time,interaction,potential,entropy,total.
void write_flow_csv(const std::string& path, const JKOFlow& flow);
void write_flow_summary_csv(const std::string& path, const JKOFlow& flow);

}  // namespace chaoslab
