#include "chaoslab/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "chaoslab/errors.hpp"

namespace chaoslab {

std::string to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::repulsive: return "repulsive";
    case Monotonicity::attractive: return "attractive";
    case Monotonicity::mixed: return "mixed";
  }
  return "mixed";
}

// ---------------------------------------------------------------- MonotoneCubic

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw Error("monotone cubic needs at least two (x, y) samples of equal length");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw Error("monotone cubic knots must be strictly increasing");

  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  m_.assign(n, 0.0);
  m_[0] = delta[0];
  m_[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = (delta[i - 1] * delta[i] <= 0.0) ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      m_[i] = m_[i + 1] = 0.0;
      continue;
    }
    const double a = m_[i] / delta[i];
    const double b = m_[i + 1] / delta[i];
    const double h = a * a + b * b;
    if (h > 9.0) {
      const double t = 3.0 / std::sqrt(h);
      m_[i] = t * a * delta[i];
      m_[i + 1] = t * b * delta[i];
    }
  }
}

std::size_t MonotoneCubic::segment(double t) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), t);
  std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(i, x_.size() - 2);
}

double MonotoneCubic::operator()(double t) const {
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * m_[i] + (-2 * s3 + 3 * s2) * y_[i + 1] +
         (s3 - s2) * h * m_[i + 1];
}

double MonotoneCubic::derivative(double t) const {
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  const double s2 = s * s;
  return ((6 * s2 - 6 * s) * y_[i] + (-6 * s2 + 6 * s) * y_[i + 1]) / h + (3 * s2 - 4 * s + 1) * m_[i] +
         (3 * s2 - 2 * s) * m_[i + 1];
}

double MonotoneCubic::second_derivative(double t) const {
  const std::size_t i = segment(t);
  const double h = x_[i + 1] - x_[i];
  const double s = (t - x_[i]) / h;
  return ((12 * s - 6) * y_[i] + (-12 * s + 6) * y_[i + 1]) / (h * h) + ((6 * s - 4) * m_[i] + (6 * s - 2) * m_[i + 1]) / h;
}

bool MonotoneCubic::is_knot(double t, double rel_tol) const {
  auto it = std::lower_bound(x_.begin(), x_.end(), t);
  const double scale = rel_tol * std::max(1.0, std::abs(t));
  if (it != x_.end() && std::abs(*it - t) <= scale) return true;
  if (it != x_.begin() && std::abs(*std::prev(it) - t) <= scale) return true;
  return false;
}

// ------------------------------------------------------------ ExternalPotential

ExternalPotential ExternalPotential::zero() { return polynomial({}, 0.0); }

ExternalPotential ExternalPotential::quadratic(double c) { return polynomial({0.0, 0.0, 0.5 * c}, c); }

ExternalPotential ExternalPotential::polynomial(std::vector<double> coeffs) {
  while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
  if (coeffs.size() <= 3) {
    const double lam = coeffs.size() == 3 ? 2.0 * coeffs[2] : 0.0;
    return polynomial(std::move(coeffs), lam);
  }
  ExternalPotential v;
  v.coeffs_ = std::move(coeffs);
  double lam = kInf;
  for (double x : linear_grid(-10.0, 10.0, 2001)) lam = std::min(lam, v.second_derivative(x));
  v.lambda_ = lam;
  return v;
}

ExternalPotential ExternalPotential::polynomial(std::vector<double> coeffs, double lambda) {
  while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
  ExternalPotential v;
  v.coeffs_ = std::move(coeffs);
  v.lambda_ = lambda;
  return v;
}

ExternalPotential ExternalPotential::tabulated(std::vector<double> x, std::vector<double> values) {
  ExternalPotential v;
  v.table_ = std::make_shared<MonotoneCubic>(std::move(x), std::move(values));
  const auto& k = v.table_->knots();
  const auto& y = v.table_->values();
  double lam = kInf;
  for (std::size_t i = 1; i + 1 < k.size(); ++i) {
    const double d1 = (y[i] - y[i - 1]) / (k[i] - k[i - 1]);
    const double d2 = (y[i + 1] - y[i]) / (k[i + 1] - k[i]);
    lam = std::min(lam, 2.0 * (d2 - d1) / (k[i + 1] - k[i - 1]));
  }
  v.lambda_ = std::isfinite(lam) ? lam : 0.0;
  return v;
}

bool ExternalPotential::is_zero() const {
  if (table_) return false;
  return std::all_of(coeffs_.begin() + std::min<std::size_t>(1, coeffs_.size()), coeffs_.end(),
                     [](double c) { return c == 0.0; });
}

double ExternalPotential::value(double x) const {
  if (table_) {
    if (!table_->contains(x)) throw ExtrapolationError("external potential queried outside its table", x);
    return (*table_)(x);
  }
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double ExternalPotential::derivative(double x) const {
  if (table_) {
    if (!table_->contains(x)) throw ExtrapolationError("external potential queried outside its table", x);
    return table_->derivative(x);
  }
  double acc = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * coeffs_[k];
  return acc;
}

double ExternalPotential::second_derivative(double x) const {
  if (table_) {
    if (!table_->contains(x)) throw ExtrapolationError("external potential queried outside its table", x);
    return table_->second_derivative(x);
  }
  double acc = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 2;) acc = acc * x + static_cast<double>(k * (k - 1)) * coeffs_[k];
  return acc;
}

double ExternalPotential::value(std::span<const double> x) const {
  double acc = 0.0;
  for (double xi : x) acc += value(xi);
  return acc;
}

void ExternalPotential::add_gradient(std::span<const double> x, std::span<double> out) const {
  for (std::size_t d = 0; d < x.size(); ++d) out[d] += derivative(x[d]);
}

// ---------------------------------------------------------------- kernels

namespace {

double power_w(double s, double r) {
  if (s > 0.0) return r == 0.0 ? kInf : std::pow(r, -s);
  if (s == 0.0) return r == 0.0 ? kInf : -std::log(r);
  return -std::pow(r, -s);
}

double power_dw(double s, double r) {
  if (r == 0.0) {
    if (s >= 0.0) throw SingularityError("gradient of a strongly singular kernel at r = 0", 0.0);
    return 0.0;
  }
  if (s > 0.0) return -s * std::pow(r, -s - 1.0);
  if (s == 0.0) return -1.0 / r;
  const double a = -s;
  return -a * std::pow(r, a - 1.0);
}

double power_d2w(double s, double r) {
  if (r == 0.0) return kInf;
  if (s > 0.0) return s * (s + 1.0) * std::pow(r, -s - 2.0);
  if (s == 0.0) return 1.0 / (r * r);
  const double a = -s;
  return a * (1.0 - a) * std::pow(r, a - 2.0);
}

double morse_w(const Morse& m, double r) {
  return m.c_rep * std::exp(-r / m.l_rep) - m.c_att * std::exp(-r / m.l_att);
}
double morse_dw(const Morse& m, double r) {
  return -m.c_rep / m.l_rep * std::exp(-r / m.l_rep) + m.c_att / m.l_att * std::exp(-r / m.l_att);
}
double morse_d2w(const Morse& m, double r) {
  return m.c_rep / (m.l_rep * m.l_rep) * std::exp(-r / m.l_rep) - m.c_att / (m.l_att * m.l_att) * std::exp(-r / m.l_att);
}

double morse_lambda(const Morse& m) {
  double lam = std::min(0.0, morse_d2w(m, 0.0));
  const double denom = 1.0 / m.l_att - 1.0 / m.l_rep;
  if (denom != 0.0) {
    const double num = std::log((m.c_att * m.l_rep * m.l_rep * m.l_rep) / (m.c_rep * m.l_att * m.l_att * m.l_att));
    const double r_star = num / denom;
    if (r_star > 0.0 && std::isfinite(r_star)) lam = std::min(lam, morse_d2w(m, r_star));
  }
  return lam;
}

double tab_w(const MonotoneCubic& t, double r) {
  if (!t.contains(r)) throw ExtrapolationError("tabulated kernel queried outside its grid", r);
  return t(r);
}

double tab_dw(const MonotoneCubic& t, double r) {
  if (!t.contains(r)) throw ExtrapolationError("tabulated kernel queried outside its grid", r);
  return t.derivative(r);
}

double tab_d2w(const MonotoneCubic& t, double r) {
  if (!t.contains(r)) throw ExtrapolationError("tabulated kernel queried outside its grid", r);
  return t.second_derivative(r);
}

double reg_w(const Regularized& g, double r) {
  if (r < g.epsilon) return g.phi_eps + g.dphi_eps * (r - g.epsilon) + 0.5 * g.lambda_split * r * r;
  if (r > g.R) return g.phi_R + g.dphi_R * (r - g.R) + 0.5 * g.lambda_split * r * r;
  return g.base->w(r);
}

double reg_dw(const Regularized& g, double r) {
  if (r == 0.0) return 0.0;
  if (r < g.epsilon) return g.dphi_eps + g.lambda_split * r;
  if (r > g.R) return g.dphi_R + g.lambda_split * r;
  return g.base->dw(r);
}

double reg_d2w(const Regularized& g, double r) {
  if (r < g.epsilon || r > g.R) return g.lambda_split;
  return g.base->d2w(r);
}

const SpinWeighted* spin_of(const PotentialSpec::Kernel& k) {
  if (auto* s = std::get_if<SpinWeighted>(&k)) return s;
  if (auto* g = std::get_if<Regularized>(&k)) return spin_of(g->base->kernel());
  return nullptr;
}

}  // namespace

PotentialSpec::PotentialSpec(Kernel k, double lambda, Monotonicity m, std::string name)
    : kernel_(std::move(k)), lambda_(lambda), monotonicity_(m), name_(std::move(name)) {}

PotentialSpec PotentialSpec::zero() {
  PotentialSpec p(AttractivePower{0.0}, 0.0, Monotonicity::attractive, "zero");
  p.null_kernel_ = true;
  return p;
}

PotentialSpec PotentialSpec::logarithmic() { return repulsive_power(0.0); }

PotentialSpec PotentialSpec::repulsive_power(double s) {
  if (!(s > -1.0 && s <= 1.0)) throw Error("repulsive power exponent must lie in (-1, 1]");
  std::string name = s == 0.0 ? "logarithmic" : "repulsive_power(" + std::to_string(s) + ")";
  return PotentialSpec(RepulsivePower{s}, 0.0, Monotonicity::repulsive, name);
}

PotentialSpec PotentialSpec::attractive_power(double alpha) {
  if (!(alpha >= 0.0)) throw Error("attractive power exponent alpha must be >= 0");
  const double lam = alpha == 1.0 ? 2.0 : 0.0;
  return PotentialSpec(AttractivePower{alpha}, lam, Monotonicity::attractive,
                       "attractive_power(" + std::to_string(alpha) + ")");
}

PotentialSpec PotentialSpec::morse(double c_rep, double l_rep, double c_att, double l_att) {
  if (!(c_rep > 0 && l_rep > 0 && c_att > 0 && l_att > 0)) throw Error("Morse parameters must be positive");
  Morse m{c_rep, l_rep, c_att, l_att};
  bool dec = true, inc = true;
  for (double r : log_grid(1e-4, 1e4, 801)) {
    const double d = morse_dw(m, r);
    dec = dec && d <= 0.0;
    inc = inc && d >= 0.0;
  }
  const Monotonicity mono = dec ? Monotonicity::repulsive : (inc ? Monotonicity::attractive : Monotonicity::mixed);
  return PotentialSpec(m, morse_lambda(m), mono, "morse");
}

PotentialSpec PotentialSpec::spin_weighted(double s, SpinWeight weight) {
  if (!(s > -1.0 && s <= 1.0)) throw Error("spin-weighted exponent must lie in (-1, 1]");
  if (!weight.value || !weight.grad_x) throw Error("spin weight needs both a value and an x-gradient");
  return PotentialSpec(SpinWeighted{s, std::move(weight)}, 0.0, Monotonicity::repulsive, "spin_weighted");
}

PotentialSpec PotentialSpec::tabulated(std::vector<double> r, std::vector<double> w) {
  MonotoneCubic table(std::move(r), std::move(w));
  const auto& k = table.knots();
  const auto& y = table.values();
  if (k.front() < 0.0) throw Error("tabulated kernel radii must be nonnegative");
  double lam = kInf;
  for (std::size_t i = 1; i + 1 < k.size(); ++i) {
    const double d1 = (y[i] - y[i - 1]) / (k[i] - k[i - 1]);
    const double d2 = (y[i + 1] - y[i]) / (k[i + 1] - k[i]);
    lam = std::min(lam, 2.0 * (d2 - d1) / (k[i + 1] - k[i - 1]));
  }
  if (!std::isfinite(lam)) lam = 0.0;
  bool dec = true, inc = true;
  for (std::size_t i = 1; i < y.size(); ++i) {
    dec = dec && y[i] <= y[i - 1];
    inc = inc && y[i] >= y[i - 1];
  }
  const Monotonicity mono = dec ? Monotonicity::repulsive : (inc ? Monotonicity::attractive : Monotonicity::mixed);
  return PotentialSpec(Tabulated{std::move(table)}, lam, mono, "tabulated");
}

PotentialSpec PotentialSpec::tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open tabulated kernel file " + path);
  std::vector<double> r, w;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a >> b)) {
      if (first) {
        first = false;
        continue;
      }
      throw Error("malformed row in tabulated kernel file " + path + ": " + line);
    }
    first = false;
    r.push_back(a);
    w.push_back(b);
  }
  return tabulated(std::move(r), std::move(w));
}

PotentialSpec PotentialSpec::with_external(ExternalPotential v) const {
  PotentialSpec p = *this;
  p.external_ = std::move(v);
  return p;
}

PotentialSpec PotentialSpec::with_lambda(double lambda) const {
  PotentialSpec p = *this;
  p.lambda_ = lambda;
  return p;
}

bool PotentialSpec::strongly_singular() const {
  if (null_kernel_) return false;
  if (auto* r = std::get_if<RepulsivePower>(&kernel_)) return r->s >= 0.0;
  if (auto* s = std::get_if<SpinWeighted>(&kernel_)) return s->s >= 0.0;
  return false;
}

bool PotentialSpec::translation_invariant() const { return spin_of(kernel_) == nullptr; }

double PotentialSpec::w(double r) const {
  if (null_kernel_) return 0.0;
  r = std::abs(r);
  return std::visit(
      [r](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RepulsivePower>) return power_w(k.s, r);
        else if constexpr (std::is_same_v<K, AttractivePower>) return k.alpha == 0.0 ? r : std::pow(r, 1.0 + k.alpha);
        else if constexpr (std::is_same_v<K, Morse>) return morse_w(k, r);
        else if constexpr (std::is_same_v<K, SpinWeighted>) return power_w(k.s, r);
        else if constexpr (std::is_same_v<K, Tabulated>) return tab_w(k.table, r);
        else return reg_w(k, r);
      },
      kernel_);
}

double PotentialSpec::dw(double r) const {
  if (null_kernel_) return 0.0;
  r = std::abs(r);
  return std::visit(
      [r](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RepulsivePower>) return power_dw(k.s, r);
        else if constexpr (std::is_same_v<K, AttractivePower>) {
          if (r == 0.0) return 0.0;
          return k.alpha == 0.0 ? 1.0 : (1.0 + k.alpha) * std::pow(r, k.alpha);
        } else if constexpr (std::is_same_v<K, Morse>) return r == 0.0 ? 0.0 : morse_dw(k, r);
        else if constexpr (std::is_same_v<K, SpinWeighted>) return power_dw(k.s, r);
        else if constexpr (std::is_same_v<K, Tabulated>) return r == 0.0 ? 0.0 : tab_dw(k.table, r);
        else return reg_dw(k, r);
      },
      kernel_);
}

double PotentialSpec::d2w(double r) const {
  if (null_kernel_) return 0.0;
  r = std::abs(r);
  return std::visit(
      [r](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RepulsivePower>) return power_d2w(k.s, r);
        else if constexpr (std::is_same_v<K, AttractivePower>) {
          if (k.alpha == 0.0) return 0.0;
          if (r == 0.0) return k.alpha < 1.0 ? kInf : (k.alpha == 1.0 ? 2.0 : 0.0);
          return (1.0 + k.alpha) * k.alpha * std::pow(r, k.alpha - 1.0);
        } else if constexpr (std::is_same_v<K, Morse>) return morse_d2w(k, r);
        else if constexpr (std::is_same_v<K, SpinWeighted>) return power_d2w(k.s, r);
        else if constexpr (std::is_same_v<K, Tabulated>) return tab_d2w(k.table, r);
        else return reg_d2w(k, r);
      },
      kernel_);
}

double PotentialSpec::pair(std::span<const double> x, std::span<const double> y) const {
  if (null_kernel_) return 0.0;
  double r2 = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
  const double radial = w(std::sqrt(r2));
  if (const SpinWeighted* s = spin_of(kernel_)) return s->weight.value(x, y) * radial;
  return radial;
}

void PotentialSpec::add_pair_gradient(std::span<const double> x, std::span<const double> y, double scale,
                                      std::span<double> out) const {
  if (null_kernel_) return;
  const std::size_t D = x.size();
  double r2 = 0.0;
  for (std::size_t d = 0; d < D; ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
  const double r = std::sqrt(r2);
  double g = 1.0;
  const SpinWeighted* spin = spin_of(kernel_);
  if (spin) {
    g = spin->weight.value(x, y);
    double gx[8];
    std::vector<double> big;
    std::span<double> gs;
    if (D <= 8) gs = std::span<double>(gx, D);
    else {
      big.assign(D, 0.0);
      gs = big;
    }
    std::fill(gs.begin(), gs.end(), 0.0);
    spin->weight.grad_x(x, y, gs);
    const double radial = w(r);
    for (std::size_t d = 0; d < D; ++d) out[d] += scale * gs[d] * radial;
  }
  if (r == 0.0) {
    if (strongly_singular()) throw SingularityError("coincident points under a strongly singular kernel", 0.0);
    return;
  }
  const double f = scale * g * dw(r) / r;
  for (std::size_t d = 0; d < D; ++d) out[d] += f * (x[d] - y[d]);
}

double PotentialSpec::pair1(double x, double y) const {
  if (null_kernel_) return 0.0;
  const double radial = w(x - y);
  if (const SpinWeighted* s = spin_of(kernel_)) return s->weight.value({&x, 1}, {&y, 1}) * radial;
  return radial;
}

double PotentialSpec::pair_gradient1(double x, double y) const {
  if (null_kernel_) return 0.0;
  double out = 0.0;
  add_pair_gradient({&x, 1}, {&y, 1}, 1.0, {&out, 1});
  return out;
}

// ------------------------------------------------------------ free functions

double eval_w(const PotentialSpec& p, double r) { return p.w(r); }

std::vector<double> eval_grad_w(const PotentialSpec& p, std::span<const double> r_vec) {
  std::vector<double> out(r_vec.size(), 0.0);
  double r2 = 0.0;
  for (double c : r_vec) r2 += c * c;
  const double r = std::sqrt(r2);
  if (r == 0.0) {
    if (p.strongly_singular()) throw SingularityError("gradient of a strongly singular kernel at r = 0", 0.0);
    return out;
  }
  const double f = p.dw(r) / r;
  for (std::size_t d = 0; d < r_vec.size(); ++d) out[d] = f * r_vec[d];
  return out;
}

RegularizedPotential regularize(const PotentialSpec& p, double epsilon, double R) {
  if (!(epsilon > 0.0 && epsilon < R)) throw Error("regularize requires 0 < epsilon < R");
  const double lam = std::min(p.lambda(), 0.0);
  bool one_sided = false;
  auto slope = [&](double r) {
    if (auto* t = std::get_if<Tabulated>(&p.kernel())) {
      if (t->table.is_knot(r)) {
        one_sided = true;
        const double h = 1e-6 * std::max(r, 1e-12);
        return (p.w(r) - p.w(r - h)) / h;
      }
    }
    return p.dw(r);
  };
  Regularized g;
  g.base = std::make_shared<const PotentialSpec>(p);
  g.epsilon = epsilon;
  g.R = R;
  g.lambda_split = lam;
  g.phi_eps = p.w(epsilon) - 0.5 * lam * epsilon * epsilon;
  g.dphi_eps = slope(epsilon) - lam * epsilon;
  g.phi_R = p.w(R) - 0.5 * lam * R * R;
  g.dphi_R = slope(R) - lam * R;

  PotentialSpec spec(g, lam, p.monotonicity(), p.name() + "_reg");
  spec.external_ = p.external();
  return RegularizedPotential{p, epsilon, R, one_sided, std::move(spec)};
}

LambdaCertificate certify_lambda(const PotentialSpec& p, std::vector<double> grid, double rel_tol) {
  if (grid.size() < 3) throw Error("certify_lambda needs at least three grid points");
  std::sort(grid.begin(), grid.end());
  if (p.strongly_singular() && grid.front() <= 0.0)
    throw SingularityError("certification grid touches the singularity of a strongly singular kernel", grid.front());
  LambdaCertificate c{kInf, false, grid[1]};
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double h1 = grid[i] - grid[i - 1];
    const double h2 = grid[i + 1] - grid[i];
    const double d1 = (p.w(grid[i]) - p.w(grid[i - 1])) / h1;
    const double d2 = (p.w(grid[i + 1]) - p.w(grid[i])) / h2;
    const double second = 2.0 * (d2 - d1) / (h1 + h2);
    if (second < c.lambda_observed) {
      c.lambda_observed = second;
      c.worst_radius = grid[i];
    }
  }
  const double tol = rel_tol * std::max(1.0, std::abs(p.lambda()));
  c.pass = c.lambda_observed >= p.lambda() - tol;
  return c;
}

bool check_monotonicity(const PotentialSpec& p, const std::vector<double>& grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = p.w(grid[i - 1]), b = p.w(grid[i]);
    if (p.monotonicity() == Monotonicity::attractive && b < a) return false;
    if (p.monotonicity() == Monotonicity::repulsive && b > a) return false;
  }
  return true;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

}  // namespace chaoslab
