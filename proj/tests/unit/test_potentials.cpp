#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "chaoslab/errors.hpp"
#include "chaoslab/potentials.hpp"

using namespace chaoslab;

namespace {

double central(const PotentialSpec& p, double r, double h = 1e-6) { return (p.w(r + h) - p.w(r - h)) / (2 * h); }

std::vector<PotentialSpec> catalog() {
  return {PotentialSpec::logarithmic(),         PotentialSpec::repulsive_power(0.5),
          PotentialSpec::repulsive_power(1.0), PotentialSpec::repulsive_power(-0.5),
          PotentialSpec::attractive_power(0.0), PotentialSpec::attractive_power(1.0),
          PotentialSpec::attractive_power(0.5), PotentialSpec::morse(2, 1, 1, 2)};
}

}  // namespace

TEST_CASE("kernel values") {
  CHECK(eval_w(PotentialSpec::attractive_power(0.0), 2.0) == 2.0);
  CHECK(eval_w(PotentialSpec::logarithmic(), 1.0) == 0.0);
  CHECK(eval_w(PotentialSpec::morse(2, 1, 1, 2), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval_w(PotentialSpec::repulsive_power(0.5), 4.0) == doctest::Approx(0.5));
  CHECK(eval_w(PotentialSpec::repulsive_power(-0.5), 4.0) == doctest::Approx(-2.0));
  CHECK(std::isinf(eval_w(PotentialSpec::logarithmic(), 0.0)));
  CHECK(std::isinf(eval_w(PotentialSpec::repulsive_power(0.5), 0.0)));
  CHECK(eval_w(PotentialSpec::attractive_power(1.0), 0.0) == 0.0);
}

TEST_CASE("kernels are even") {
  for (const auto& p : catalog())
    for (double r : {0.3, 1.0, 2.7}) CHECK(p.pair1(r, 0.0) == p.pair1(-r, 0.0));
}

TEST_CASE("gradients") {
  const double zero[] = {0.0};
  CHECK(eval_grad_w(PotentialSpec::attractive_power(0.0), zero)[0] == 0.0);
  const double half[] = {0.5};
  CHECK(eval_grad_w(PotentialSpec::logarithmic(), half)[0] == doctest::Approx(-2.0));
  const double v34[] = {3.0, 4.0};
  const auto g = eval_grad_w(PotentialSpec::attractive_power(1.0), v34);
  CHECK(g[0] == doctest::Approx(6.0));
  CHECK(g[1] == doctest::Approx(8.0));
  // central differences of |x|^2 in each coordinate
  auto f = [](double x, double y) { return x * x + y * y; };
  CHECK(g[0] == doctest::Approx((f(3 + 1e-6, 4) - f(3 - 1e-6, 4)) / 2e-6).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx((f(3, 4 + 1e-6) - f(3, 4 - 1e-6)) / 2e-6).epsilon(1e-8));

  SUBCASE("singular kernel at the origin") {
    try {
      eval_grad_w(PotentialSpec::logarithmic(), zero);
      FAIL("expected a singularity error");
    } catch (const SingularityError& e) {
      CHECK(e.radius == 0.0);
    }
  }
}

TEST_CASE("gradient matches finite differences on random radii") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> r(0.1, 10.0);
  for (const auto& p : catalog()) {
    for (int i = 0; i < 100; ++i) {
      const double x = r(rng);
      CHECK(std::abs(p.dw(x) - central(p, x)) <= 1e-5);
    }
  }
}

TEST_CASE("tangent-line regularization") {
  const auto lr = regularize(PotentialSpec::logarithmic(), 0.1, 10.0);
  CHECK(lr(0.05) == doctest::Approx(-std::log(0.1) - (0.05 - 0.1) / 0.1).epsilon(1e-12));
  CHECK(lr(0.05) == doctest::Approx(2.8026).epsilon(1e-4));
  CHECK(lr(1.0) == doctest::Approx(0.0));
  const auto ar = regularize(PotentialSpec::attractive_power(0.0), 0.1, 10.0);
  CHECK(ar(0.05) == doctest::Approx(0.05));
  CHECK(std::isfinite(lr(0.0)));

  for (const auto& p : catalog()) {
    if (p.name() == "morse") continue;
    const auto reg = regularize(p, 0.1, 10.0);
    for (double r : linear_grid(0.001, 30.0, 500)) {
      CHECK(reg(r) <= p.w(r) + 1e-12 * (1 + std::abs(p.w(r))));
      if (r >= 0.1 && r <= 10.0) CHECK(reg(r) == doctest::Approx(p.w(r)).epsilon(1e-12));
    }
    CHECK(certify_lambda(reg.spec, linear_grid(1e-3, 30.0, 3001)).pass);
  }

  SUBCASE("increases as epsilon shrinks") {
    const auto p = PotentialSpec::repulsive_power(0.5);
    const double eps[] = {0.4, 0.2, 0.1, 0.05, 0.025};
    for (double r : {0.01, 0.03, 0.08}) {
      double prev = -kInf;
      for (double e : eps) {
        const double v = regularize(p, e, 10.0)(r);
        CHECK(v >= prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("lambda certificates") {
  const auto c2 = certify_lambda(PotentialSpec::attractive_power(1.0), linear_grid(0.1, 10.0, 200));
  CHECK(c2.pass);
  CHECK(c2.lambda_observed == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(certify_lambda(PotentialSpec::logarithmic(), linear_grid(0.1, 10.0, 200)).pass);

  // Morse (2, 1, 1, 2): w'' = 2 e^{-r} - e^{-r/2} / 4, minimised where e^{-r/2} = 1/16
  auto w2 = [](double r) { return 2 * std::exp(-r) - 0.25 * std::exp(-r / 2); };
  double lam = kInf;
  for (int i = 0; i <= 200000; ++i) lam = std::min(lam, w2(i * 1e-4));
  CHECK(lam == doctest::Approx(-1.0 / 128.0).epsilon(1e-6));
  const auto m = PotentialSpec::morse(2, 1, 1, 2);
  CHECK(m.lambda() == doctest::Approx(lam).epsilon(1e-6));
  CHECK(certify_lambda(m, log_grid(1e-3, 50.0, 2000)).pass);
  CHECK(m.monotonicity() == Monotonicity::mixed);

  for (const auto& p : catalog()) CHECK(certify_lambda(p, log_grid(1e-3, 100.0, 1000)).pass);

  CHECK_THROWS_AS(certify_lambda(PotentialSpec::logarithmic(), {0.0, 1.0, 2.0}), SingularityError);
  CHECK_FALSE(certify_lambda(PotentialSpec::attractive_power(1.0).with_lambda(3.0), linear_grid(0.1, 10, 50)).pass);
}

TEST_CASE("monotonicity") {
  const auto grid = log_grid(1e-2, 1e2, 200);
  CHECK(check_monotonicity(PotentialSpec::logarithmic(), grid));
  CHECK(check_monotonicity(PotentialSpec::repulsive_power(-0.5), grid));
  CHECK(check_monotonicity(PotentialSpec::attractive_power(0.0), grid));
  CHECK(PotentialSpec::logarithmic().monotonicity() == Monotonicity::repulsive);
}

TEST_CASE("tabulated kernel") {
  std::vector<double> r, w;
  for (int i = 0; i <= 50; ++i) {
    r.push_back(0.2 + 0.2 * i);
    w.push_back(r.back() * r.back());
  }
  const auto p = PotentialSpec::tabulated(r, w);
  CHECK(p.w(2.0) == doctest::Approx(4.0).epsilon(1e-3));
  CHECK_THROWS_AS(p.w(20.0), ExtrapolationError);
  CHECK(p.monotonicity() == Monotonicity::attractive);

  const std::string path = "tabulated_kernel_test.csv";
  {
    std::ofstream out(path);
    out << "r,w\n";
    for (std::size_t i = 0; i < r.size(); ++i) out << r[i] << ',' << w[i] << '\n';
  }
  CHECK(PotentialSpec::tabulated_csv(path).w(3.0) == doctest::Approx(p.w(3.0)));
}

TEST_CASE("spin-weighted kernel") {
  SpinWeight g{[](std::span<const double> x, std::span<const double> y) { return 1.0 + 0.5 * std::cos(x[0] + y[0]); },
               [](std::span<const double> x, std::span<const double> y, std::span<double> out) {
                 out[0] = -0.5 * std::sin(x[0] + y[0]);
               }};
  const auto p = PotentialSpec::spin_weighted(0.5, g);
  CHECK_FALSE(p.translation_invariant());
  const double x = 0.3, y = 1.1, h = 1e-6;
  const double fd = (p.pair1(x + h, y) - p.pair1(x - h, y)) / (2 * h);
  CHECK(p.pair_gradient1(x, y) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("external potentials") {
  const auto v = ExternalPotential::quadratic(2.0);
  CHECK(v.value(3.0) == doctest::Approx(9.0));
  CHECK(v.derivative(3.0) == doctest::Approx(6.0));
  CHECK(v.lambda() == 2.0);
  const auto q = ExternalPotential::polynomial({0, 0, 0, 0, 1});  // x^4
  CHECK(q.lambda() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(q.derivative(2.0) == doctest::Approx(32.0));
}
