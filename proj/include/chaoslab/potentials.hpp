#pragma once

// Pair interaction kernels w and external potentials V.
//
// A PotentialSpec couples a pair kernel W(x, y) (usually w(|x - y|)) with a
// separable external potential V(x) = sum_d v(x_d). Every kernel carries a
// convexity modulus lambda such that w(r) - lambda r^2 / 2 is convex on
// (0, inf). Kernels are even: only |r| is ever used.

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace chaoslab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Monotonicity { repulsive, attractive, mixed };

std::string to_string(Monotonicity m);

// Fritsch-Carlson monotone cubic interpolant.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;

  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  bool contains(double t) const { return t >= lo() && t <= hi(); }
  bool is_knot(double t, double rel_tol = 1e-12) const;
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  std::size_t segment(double t) const;
  std::vector<double> x_, y_, m_;
};

// Symmetric scalar weight g(x, y) with its gradient in the first argument.
struct SpinWeight {
  std::function<double(std::span<const double>, std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<const double>, std::span<double>)> grad_x;
};

// s in (0, 1]: r^-s.  s == 0: -log r.  s in (-1, 0): -r^|s|.
struct RepulsivePower {
  double s;
};
// r^(1 + alpha), alpha >= 0.
struct AttractivePower {
  double alpha;
};
// c_rep exp(-r / l_rep) - c_att exp(-r / l_att).
struct Morse {
  double c_rep, l_rep, c_att, l_att;
};
// g(x, y) times the RepulsivePower{s} radial profile.
struct SpinWeighted {
  double s;
  SpinWeight weight;
};
struct Tabulated {
  MonotoneCubic table;
};

class PotentialSpec;

// Tangent-line regularization of a base kernel, see regularize().
struct Regularized {
  std::shared_ptr<const PotentialSpec> base;
  double epsilon;
  double R;
  double lambda_split;
  // phi = w - lambda_split r^2 / 2 and its slope at epsilon and at R
  double phi_eps, dphi_eps, phi_R, dphi_R;
};

class ExternalPotential {
 public:
  static ExternalPotential zero();
  // c x^2 / 2 in every coordinate.
  static ExternalPotential quadratic(double c = 1.0);
  // sum_k coeffs[k] x^k; lambda is exact for degree <= 2, sampled on [-10, 10] otherwise.
  static ExternalPotential polynomial(std::vector<double> coeffs);
  static ExternalPotential polynomial(std::vector<double> coeffs, double lambda);
  static ExternalPotential tabulated(std::vector<double> x, std::vector<double> v);

  double value(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  double value(std::span<const double> x) const;
  void add_gradient(std::span<const double> x, std::span<double> out) const;

  double lambda() const { return lambda_; }
  bool is_zero() const;
  bool is_tabulated() const { return table_ != nullptr; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  const MonotoneCubic* table() const { return table_.get(); }

 private:
  std::vector<double> coeffs_;
  std::shared_ptr<const MonotoneCubic> table_;
  double lambda_ = 0.0;
};

struct RegularizedPotential;

class PotentialSpec {
 public:
  using Kernel = std::variant<RepulsivePower, AttractivePower, Morse, SpinWeighted, Tabulated, Regularized>;

  static PotentialSpec zero();
  static PotentialSpec logarithmic();
  static PotentialSpec repulsive_power(double s);
  static PotentialSpec attractive_power(double alpha);
  static PotentialSpec morse(double c_rep, double l_rep, double c_att, double l_att);
  static PotentialSpec spin_weighted(double s, SpinWeight weight);
  static PotentialSpec tabulated(std::vector<double> r, std::vector<double> w);
  // Two-column CSV (r, w); a header row is skipped if present.
  static PotentialSpec tabulated_csv(const std::string& path);

  PotentialSpec with_external(ExternalPotential v) const;
  PotentialSpec with_lambda(double lambda) const;

  // Radial profile w(|r|); +inf at 0 for strongly singular kinds.
  double w(double r) const;
  // dw/dr for r > 0; at r == 0 the minimal-subdifferential value 0, or a
  // SingularityError for strongly singular kinds.
  double dw(double r) const;
  double d2w(double r) const;

  double pair(std::span<const double> x, std::span<const double> y) const;
  // out += scale * grad_x W(x, y)
  void add_pair_gradient(std::span<const double> x, std::span<const double> y, double scale,
                         std::span<double> out) const;
  double pair1(double x, double y) const;
  double pair_gradient1(double x, double y) const;

  const Kernel& kernel() const { return kernel_; }
  const ExternalPotential& external() const { return external_; }
  double lambda() const { return lambda_; }
  Monotonicity monotonicity() const { return monotonicity_; }
  bool strongly_singular() const;
  bool translation_invariant() const;
  bool has_interaction() const { return !null_kernel_; }
  const std::string& name() const { return name_; }

 private:
  PotentialSpec(Kernel k, double lambda, Monotonicity m, std::string name);

  Kernel kernel_;
  ExternalPotential external_ = ExternalPotential::zero();
  double lambda_ = 0.0;
  Monotonicity monotonicity_ = Monotonicity::attractive;
  std::string name_;
  bool null_kernel_ = false;

  friend struct RegularizedPotential;
  friend RegularizedPotential regularize(const PotentialSpec&, double, double);
};

struct RegularizedPotential {
  PotentialSpec base;
  double epsilon;
  double R;
  // Set when the base derivative at epsilon or R came from a one-sided difference.
  bool one_sided_derivative = false;
  // The regularized kernel as a PotentialSpec, usable anywhere a kernel is.
  PotentialSpec spec;

  double operator()(double r) const { return spec.w(r); }
};

double eval_w(const PotentialSpec& p, double r);
std::vector<double> eval_grad_w(const PotentialSpec& p, std::span<const double> r_vec);

// Splits w = phi + lambda' r^2 / 2 with lambda' = min(lambda, 0) and replaces
// phi by its tangent lines below epsilon and above R.
RegularizedPotential regularize(const PotentialSpec& p, double epsilon, double R);

struct LambdaCertificate {
  double lambda_observed;
  bool pass;
  double worst_radius;
};

// Minimum second divided difference of w over the interior of the grid.
LambdaCertificate certify_lambda(const PotentialSpec& p, std::vector<double> grid, double rel_tol = 1e-8);

bool check_monotonicity(const PotentialSpec& p, const std::vector<double>& grid);

std::vector<double> log_grid(double lo, double hi, std::size_t n);
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

}  // namespace chaoslab
