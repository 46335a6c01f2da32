#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "chaoslab/errors.hpp"
#include "chaoslab/oracles.hpp"

using namespace chaoslab;

namespace {

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// zeros of the physicists' Hermite polynomial H_M as Jacobi-matrix eigenvalues
std::vector<double> hermite_zeros(std::size_t M) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(M, M);
  for (std::size_t k = 1; k < M; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + M};
}

}  // namespace

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.75) == doctest::Approx(0.6744897501960817).epsilon(1e-14));
  for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) CHECK(phi_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-13));
}

TEST_CASE("heat flow") {
  const Gaussian n01{0.0, 1.0};
  CHECK(heat_flow(n01, 1.0, 0.0, 64).U == gaussian_quantiles(n01, 64).U);
  const auto g = heat_flow_law(n01, 1.0, 1.0);
  CHECK(g.sigma * g.sigma == doctest::Approx(3.0));
  CHECK(heat_flow(n01, 1.0, 1.0, 256).U == gaussian_quantiles({0.0, std::sqrt(3.0)}, 256).U);
  for (double t : {0.0, 0.5, 3.0}) CHECK(heat_flow({2.0, 1.0}, 1.0, t, 101).mean() == doctest::Approx(2.0).epsilon(1e-14));
  for (double t : {0.0, 0.1, 0.5, 2.0}) CHECK(gaussian_fokker_planck_residual(n01, 0.0, 1.0, t) <= 1e-8);
}

TEST_CASE("Ornstein-Uhlenbeck flow") {
  const auto inf = ou_flow_law({3.0, 0.2}, 1.0, 1.0, 60.0);
  CHECK(inf.mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(inf.sigma == doctest::Approx(1.0).epsilon(1e-12));
  const auto det = ou_flow({1.0, 0.0}, 1.0, kInf, 1.0, 16);
  for (double u : det.U) CHECK(u == doctest::Approx(std::exp(-1.0)));
  const Gaussian mu0{0.4, 1.7};
  CHECK(ou_flow(mu0, 2.0, 3.0, 0.0, 32).U == gaussian_quantiles(mu0, 32).U);
  for (double t : {0.0, 0.1, 0.5, 2.0}) CHECK(gaussian_fokker_planck_residual(mu0, 2.0, 3.0, t) <= 1e-8);
}

TEST_CASE("Burgers entropy solution, atomic data") {
  EmpiricalMeasure two;
  two.positions = {0.0, 1.0};
  two.weights = {0.5, 0.5};
  const auto mu0 = PiecewiseMeasure::atoms(two);
  for (double t : {0.2, 0.6, 0.9}) {
    const auto atoms = BurgersSolution(mu0, t, kInf).atoms();
    REQUIRE(atoms.size() == 2);
    CHECK(atoms[0].position == doctest::Approx(t / 2).epsilon(1e-9));
    CHECK(atoms[1].position == doctest::Approx(1 - t / 2).epsilon(1e-9));
    CHECK(atoms[0].mass == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(rankine_hugoniot_residual(mu0, t) <= 1e-6);
  }
  const auto merged = BurgersSolution(mu0, 1.2, kInf).atoms();
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].position == doctest::Approx(0.5).epsilon(1e-9));

  EmpiricalMeasure d0;
  d0.positions = {0.0};
  d0.weights = {1.0};
  for (double t : {0.5, 5.0}) {
    const auto a = BurgersSolution(PiecewiseMeasure::atoms(d0), t, kInf).atoms();
    REQUIRE(a.size() == 1);
    CHECK(std::abs(a[0].position) < 1e-12);
  }
}

TEST_CASE("Burgers entropy solution, uniform data") {
  const auto u = PiecewiseMeasure::uniform(0.0, 1.0);
  // the ramp u_0 = 2x - 1 steepens as 1 / (1 - 2t): quantiles contract linearly towards 1/2
  for (double t : {0.1, 0.25, 0.4}) {
    const auto q = BurgersSolution(u, t, kInf).quantiles(64);
    for (std::size_t k = 0; k < 64; ++k)
      CHECK(q.U[k] == doctest::Approx(0.5 + (QuantileMeasure::level(k, 64) - 0.5) * (1 - 2 * t)).epsilon(1e-9));
  }
  for (double t : {0.5, 0.75, 1.0}) {
    const auto a = BurgersSolution(u, t, kInf).atoms();
    REQUIRE(a.size() == 1);
    CHECK(a[0].position == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(a[0].mass == doctest::Approx(1.0).epsilon(1e-9));
  }
  for (double t : {0.1, 0.3, 0.7}) {
    const BurgersSolution s(u, t, kInf);
    CHECK(s.mean() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.cdf(10.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.cdf(-10.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("viscous Burgers by Cole-Hopf") {
  const auto u = PiecewiseMeasure::uniform(0.0, 1.0);
  const double beta = 5.0, t = 0.25, h = 1e-3;
  // F_t = (2F - 1) F_x + F_xx / beta in the x variable
  for (double x : {0.1, 0.3, 0.5, 0.8, 1.1}) {
    const BurgersSolution a(u, t - h, beta), b(u, t + h, beta), c(u, t, beta);
    const double Ft = (b.cdf(x) - a.cdf(x)) / (2 * h);
    const double F = c.cdf(x), Fx = (c.cdf(x + h) - c.cdf(x - h)) / (2 * h);
    const double Fxx = (c.cdf(x + h) - 2 * F + c.cdf(x - h)) / (h * h);
    CHECK(std::abs(Ft - ((2 * F - 1) * Fx + Fxx / beta)) < 1e-4);
  }
  CHECK(BurgersSolution(u, t, beta).mean() == doctest::Approx(0.5).epsilon(1e-9));
  // small viscosity approaches the entropy solution
  const auto inviscid = BurgersSolution(u, t, kInf).quantiles(128);
  double prev = kInf;
  for (double b : {10.0, 100.0, 1000.0}) {
    const double d = w2_quantile(BurgersSolution(u, t, b).quantiles(128), inviscid);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("Burgers distance to atoms") {
  const auto u = PiecewiseMeasure::uniform(0.0, 1.0);
  EmpiricalMeasure half;
  half.positions = {0.5};
  half.weights = {1.0};
  // W2(uniform[0,1], delta_{1/2})^2 = 1/12
  CHECK(BurgersSolution(u, 0.0, kInf).w2_to(half) == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-9));
  CHECK(BurgersSolution(u, 0.6, kInf).w2_to(half) < 1e-9);
}

TEST_CASE("Dyson equilibrium") {
  const auto zeros = hermite_zeros(256);
  const auto small = dyson_equilibrium(256);
  CHECK(small.residual <= 1e-6);
  for (std::size_t k = 0; k < 256; ++k) CHECK(small.mu.U[k] == doctest::Approx(zeros[k] / std::sqrt(256.0)).epsilon(1e-9));

  DysonOptions opts;
  opts.cache_dir = "dyson_cache";
  std::filesystem::remove_all(opts.cache_dir);
  const auto eq = dyson_equilibrium(4096, opts);
  const auto& U = eq.mu.U;
  CHECK(eq.residual <= 1e-6);
  CHECK(std::abs(U.back() - std::sqrt(2.0)) < 1e-2);
  CHECK(std::abs(U.front() + std::sqrt(2.0)) < 1e-2);
  for (std::size_t k = 0; k < U.size(); ++k) CHECK(std::abs(U[k] + U[U.size() - 1 - k]) < 1e-10);
  // second moment of (1/pi) sqrt(2 - x^2) by the midpoint rule, against the oracle's own moment
  double m2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = -std::sqrt(2.0) + (i + 0.5) * 2 * std::sqrt(2.0) / n;
    m2 += x * x * std::sqrt(2 - x * x) / std::numbers::pi * 2 * std::sqrt(2.0) / n;
  }
  CHECK(m2 == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(eq.mu.second_moment() - m2) < 1e-2);
  CHECK(dyson_optimality_residual(eq.mu) == doctest::Approx(eq.residual));

  const auto cached = dyson_equilibrium(4096, opts);
  CHECK(cached.from_cache);
  CHECK(cached.mu.U == U);
}

TEST_CASE("Hilbert transform") {
  const auto uni = quantile_from_function([](double s) { return 2 * s - 1; }, 4096);
  const std::vector<double> eps = {1e-1, 5e-2, 2.5e-2, 1.25e-2};
  CHECK(std::abs(hilbert_transform(uni, 0.0, eps).value) < 1e-10);
  const auto far = hilbert_transform(uni, 2.0, eps);
  CHECK(far.value == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-5));
  CHECK_FALSE(far.diverged);
  const auto inside = hilbert_transform(uni, 0.3, eps);
  CHECK(inside.value == doctest::Approx(0.5 * std::log(1.3 / 0.7)).epsilon(1e-4));
  CHECK_FALSE(inside.diverged);

  EmpiricalMeasure d0;
  d0.positions = {0.0};
  d0.weights = {1.0};
  CHECK(hilbert_transform(d0, 1.0, eps).value == doctest::Approx(1.0));
  CHECK_THROWS_AS(hilbert_transform(d0, 0.0, eps), Error);

  // density y^{-1/2} / 2 on (0, 1]: the truncated integral at 0 grows like eps^{-1/2}
  const auto sing = quantile_from_function([](double s) { return s * s; }, 1 << 16);
  CHECK(hilbert_transform(sing, 0.0, {1e-2, 1e-3, 1e-4, 1e-5}).diverged);
}
