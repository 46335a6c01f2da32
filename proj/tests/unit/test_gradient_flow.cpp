#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "chaoslab/errors.hpp"
#include "chaoslab/gradient_flow.hpp"

using namespace chaoslab;

namespace {

QuantileMeasure normal_grid(std::size_t M, double mean = 0.0, double sigma = 1.0) {
  return quantile_from_density([=](double x) { return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0))); }, M);
}

QuantileMeasure uniform_grid(std::size_t M) {
  return quantile_from_function([](double s) { return s; }, M);
}

const PotentialSpec quadratic_V = PotentialSpec::zero().with_external(ExternalPotential::quadratic());
const PotentialSpec dyson = PotentialSpec::logarithmic().with_external(ExternalPotential::quadratic());

}  // namespace

TEST_CASE("free energy decomposition") {
  const auto u = free_energy(uniform_grid(1000), PotentialSpec::zero(), 1.0);
  CHECK(std::abs(u.entropy) < 1e-2);
  CHECK(std::abs(u.total) < 1e-2);

  const auto g = free_energy(normal_grid(1024), PotentialSpec::zero(), 1.0);
  CHECK(std::abs(g.entropy + 0.5 * std::log(2 * std::numbers::pi * std::numbers::e)) < 1e-2);

  // mean of |x - y| over the unit square is 1/3
  for (std::size_t M : {100, 1000}) {
    const auto a = free_energy(uniform_grid(M), PotentialSpec::attractive_power(0.0), kInf);
    CHECK(std::abs(a.interaction - 1.0 / 6.0) <= 1.0 / M);
    CHECK(a.total == a.interaction);
  }

  const auto q = free_energy(normal_grid(512, 0.0, 2.0), quadratic_V, 2.0);
  CHECK(q.total == doctest::Approx(q.interaction + q.potential + q.entropy / 2.0));
  CHECK(q.potential == doctest::Approx(2.0).epsilon(2e-2));

  const auto z = free_energy(QuantileMeasure{{0.0, 0.0, 1.0}}, PotentialSpec::zero(), 1.0);
  CHECK(std::isinf(z.entropy));
  CHECK(std::isinf(free_energy(QuantileMeasure{{0.0, 0.0, 1.0}}, PotentialSpec::logarithmic(), kInf).interaction));
}

TEST_CASE("isotonic projection") {
  CHECK(isotonic_projection({2.0, 1.0, 3.0}) == std::vector<double>{1.5, 1.5, 3.0});
  CHECK(isotonic_projection({3.0, 2.0, 1.0}) == std::vector<double>{2.0, 2.0, 2.0});
  // optimality: the projection error is orthogonal to the projection and to constants on each block
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<double> y(50);
  for (auto& v : y) v = n01(rng);
  const auto x = isotonic_projection(y);
  for (std::size_t i = 1; i < x.size(); ++i) CHECK(x[i] >= x[i - 1]);
  double inner = 0.0, total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    inner += (y[i] - x[i]) * x[i];
    total += y[i] - x[i];
  }
  CHECK(std::abs(inner) < 1e-12);
  CHECK(std::abs(total) < 1e-12);
}

TEST_CASE("single minimizing-movement steps") {
  const auto mu = normal_grid(64);
  CHECK(jko_step(mu, 0.1, PotentialSpec::zero(), kInf).mu.U == mu.U);

  const double tau = 0.1;
  const auto r = jko_step(mu, tau, quadratic_V, kInf);
  for (std::size_t k = 0; k < mu.M(); ++k) CHECK(r.mu.U[k] == doctest::Approx(mu.U[k] / (1 + tau)).epsilon(1e-10));

  // two atoms under the logarithmic kernel: one implicit Euler step of g' = 1/g
  const double g0 = 1e-3;
  const auto two = jko_step(QuantileMeasure{{-g0 / 2, g0 / 2}}, 1e-3, PotentialSpec::logarithmic(), kInf);
  const double g1 = 0.5 * (g0 + std::sqrt(g0 * g0 + 4e-3));
  CHECK(two.mu.U[1] - two.mu.U[0] == doctest::Approx(g1).epsilon(1e-8));

  const auto spread = jko_step(QuantileMeasure{std::vector<double>(16, 0.0)}, 1e-3, PotentialSpec::logarithmic(), kInf);
  for (std::size_t k = 1; k < 16; ++k) CHECK(spread.mu.U[k] > spread.mu.U[k - 1]);

  CHECK(r.stats.gradient_norm <= 1e-10 * 64);
  CHECK_THROWS_AS(jko_step(mu, 100.0, PotentialSpec::morse(2, 1, 1, 2), kInf), Error);
}

TEST_CASE("inner solvers agree") {
  const auto mu = normal_grid(64);
  JKOOptions bb;
  bb.method = InnerMethod::spectral;
  const auto a = jko_step(mu, 0.01, dyson, 2.0);
  const auto b = jko_step(mu, 0.01, dyson, 2.0, bb);
  CHECK(w2_quantile(a.mu, b.mu) < 1e-8);
}

TEST_CASE("heat flow variance and dissipation") {
  const auto flow = jko_flow(normal_grid(512), 1e-3, 1.0, PotentialSpec::zero(), 1.0);
  CHECK(flow.steps.back().mu.variance() == doctest::Approx(3.0).epsilon(0.05));
  CHECK(flow.final_time() == doctest::Approx(1.0));
  for (std::size_t j = 1; j < flow.steps.size(); ++j)
    CHECK(flow.steps[j].energy.total <= flow.steps[j - 1].energy.total + 1e-12 * (1 + std::abs(flow.steps[j - 1].energy.total)));
}

TEST_CASE("free energy decreases for every catalog setup") {
  const std::vector<PotentialSpec> setups = {dyson, PotentialSpec::repulsive_power(0.5), PotentialSpec::attractive_power(0.0),
                                             PotentialSpec::attractive_power(1.0), PotentialSpec::morse(2, 1, 1, 2)};
  for (const auto& p : setups) {
    for (double beta : {kInf, 4.0}) {
      const auto flow = jko_flow(normal_grid(64), 0.02, 0.4, p, beta);
      for (std::size_t j = 1; j < flow.steps.size(); ++j)
        CHECK(flow.steps[j].energy.total <= flow.steps[j - 1].energy.total + 1e-12 * (1 + std::abs(flow.steps[j - 1].energy.total)));
    }
  }
}

TEST_CASE("EVI residuals") {
  const double C = calibrate_evi_constant();
  CHECK(C > 0.0);

  SUBCASE("heat flow against its initial datum at a finer step") {
    const auto mu0 = normal_grid(256);
    const double tau = 5e-3;
    const auto flow = jko_flow(mu0, tau, 1.0, PotentialSpec::zero(), 1.0);
    for (const auto& [t, r] : evi_residual(flow, mu0, 0.0)) CHECK(r <= evi_tolerance(tau, C));
  }
  SUBCASE("stationary Gibbs state") {
    const auto mu0 = normal_grid(256);
    const double tau = 1e-2;
    const auto flow = jko_flow(mu0, tau, 0.5, quadratic_V, 1.0);
    for (const auto& [t, r] : evi_residual(flow, flow.steps.back().mu, 1.0)) CHECK(r <= evi_tolerance(tau, C));
  }
  SUBCASE("Dyson flow against the semicircle") {
    const auto semi = quantile_from_function(
        [](double s) {
          double lo = -std::sqrt(2.0), hi = std::sqrt(2.0);
          for (int i = 0; i < 100; ++i) {
            const double x = 0.5 * (lo + hi);
            const double F = 0.5 + (0.5 * x * std::sqrt(2 - x * x) + std::asin(x / std::sqrt(2.0))) / std::numbers::pi;
            (F < s ? lo : hi) = x;
          }
          return 0.5 * (lo + hi);
        },
        256);
    const double tau = 0.05;
    const auto flow = jko_flow(normal_grid(256, 0.5, 0.5), tau, 3.0, dyson, kInf);
    for (const auto& [t, r] : evi_residual(flow, semi, 1.0)) CHECK(r <= evi_tolerance(tau, C));
    const double Fs = free_energy(semi, dyson, kInf).total;
    CHECK(flow.steps.back().energy.total - Fs < 1e-2);
    CHECK(flow.steps.back().energy.total < flow.steps.front().energy.total);
  }
}

TEST_CASE("weak McKean-Vlasov residual") {
  const auto cst = truncated_test_function([](double) { return 1.0; }, [](double) { return 0.0; },
                                           [](double) { return 0.0; }, 20.0, 30.0);
  const auto square = truncated_test_function([](double x) { return x * x; }, [](double x) { return 2 * x; },
                                              [](double) { return 2.0; }, 8.0, 12.0);
  const auto bump = truncated_test_function([](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
                                            [](double x) { return -std::sin(x); }, 3.0, 6.0);

  SUBCASE("constant test function gives zero") {
    const auto flow = jko_flow(normal_grid(128), 0.01, 0.2, dyson, 2.0);
    const auto res = weak_mkv_residual(flow, dyson, 2.0, {cst});
    for (double r : res[0]) CHECK(r == 0.0);
  }
  SUBCASE("Gibbs state is stationary") {
    const auto flow = jko_flow(normal_grid(512), 1e-2, 0.2, quadratic_V, 1.0);
    const auto res = weak_mkv_residual(flow, quadratic_V, 1.0, {square, bump});
    for (double r : res[0]) CHECK(std::abs(r) < 2e-2);
  }
  SUBCASE("second moment of the heat flow grows at 2 / beta") {
    const auto flow = jko_flow(normal_grid(512), 1e-3, 0.2, PotentialSpec::zero(), 1.0);
    const auto& mu = flow.steps;
    const double rate = (mu.back().mu.second_moment() - mu[mu.size() - 2].mu.second_moment()) / 1e-3;
    CHECK(rate == doctest::Approx(2.0).epsilon(2e-2));
    const auto res = weak_mkv_residual(flow, PotentialSpec::zero(), 1.0, {square});
    for (double r : res[0]) CHECK(std::abs(r) < 5e-2);
  }
  SUBCASE("residual shrinks under joint refinement") {
    double prev = kInf;
    for (auto [tau, M] : {std::pair{4e-2, std::size_t{64}}, {2e-2, 128}, {1e-2, 256}}) {
      const auto flow = jko_flow(normal_grid(M, 0.3, 0.7), tau, 0.4, dyson, 2.0);
      double worst = 0.0;
      const auto res = weak_mkv_residual(flow, dyson, 2.0, {bump});
      for (double r : res[0]) worst = std::max(worst, std::abs(r));
      CHECK(worst < prev);
      prev = worst;
    }
  }
}

TEST_CASE("flow export") {
  const auto flow = jko_flow(normal_grid(8), 0.1, 0.2, quadratic_V, kInf);
  write_flow_csv("flow_test.csv", flow);
  write_flow_summary_csv("flow_summary_test.csv", flow);
  std::ifstream a("flow_test.csv"), b("flow_summary_test.csv");
  std::string h1, h2;
  std::getline(a, h1);
  std::getline(b, h2);
  CHECK(h1 == "time,quantile_index,U");
  CHECK(h2 == "time,interaction,potential,entropy,total");
}
