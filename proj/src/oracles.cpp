#include "chaoslab/oracles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>

#include "chaoslab/errors.hpp"

namespace chaoslab {

namespace {

template <class F>
double integrate(F f, double a, double b, double tol = 1e-11, unsigned depth = 12) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, depth, tol);
}

// Endpoint-singular integrands (quantiles of laws with unbounded support).
template <class F>
double integrate_singular(F f, double a, double b) {
  if (!(b > a)) return 0.0;
  boost::math::quadrature::tanh_sinh<double> ts(10);
  return ts.integrate(f, a, b, 1e-10);
}

}  // namespace

// ------------------------------------------------------------ Gaussian flows

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

QuantileMeasure gaussian_quantiles(const Gaussian& g, std::size_t M) {
  QuantileMeasure q;
  q.U.resize(M);
  for (std::size_t k = 0; k < M; ++k) q.U[k] = g.mean + g.sigma * normal_quantile(QuantileMeasure::level(k, M));
  return q;
}

Gaussian heat_flow_law(const Gaussian& mu0, double beta, double t) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("heat flow oracle needs 0 < beta < inf");
  if (t < 0.0) throw Error("heat flow oracle needs t >= 0");
  return {mu0.mean, std::sqrt(mu0.sigma * mu0.sigma + 2.0 * t / beta)};
}

QuantileMeasure heat_flow(const Gaussian& mu0, double beta, double t, std::size_t M) {
  return gaussian_quantiles(heat_flow_law(mu0, beta, t), M);
}

Gaussian ou_flow_law(const Gaussian& mu0, double c, double beta, double t) {
  if (!(c > 0.0)) throw Error("OU oracle needs c > 0");
  if (!(beta > 0.0)) throw Error("OU oracle needs beta > 0");
  if (t < 0.0) throw Error("OU oracle needs t >= 0");
  const double decay = std::exp(-c * t);
  double var = mu0.sigma * mu0.sigma * decay * decay;
  if (std::isfinite(beta)) var += -std::expm1(-2.0 * c * t) / (c * beta);
  return {mu0.mean * decay, std::sqrt(var)};
}

QuantileMeasure ou_flow(const Gaussian& mu0, double c, double beta, double t, std::size_t M) {
  const Gaussian g = ou_flow_law(mu0, c, beta, t);
  if (g.sigma == 0.0) return QuantileMeasure{std::vector<double>(M, g.mean)};
  return gaussian_quantiles(g, M);
}

double gaussian_fokker_planck_residual(const Gaussian& mu0, double c, double beta, double t) {
  auto law = [&](double s) { return c > 0.0 ? ou_flow_law(mu0, c, beta, s) : heat_flow_law(mu0, beta, s); };
  auto rho = [&](double s, double x) {
    const Gaussian g = law(s);
    const double z = (x - g.mean) / g.sigma;
    return std::exp(-0.5 * z * z) / (g.sigma * std::sqrt(2.0 * std::numbers::pi));
  };
  const Gaussian g = law(t);
  // central differences with one Richardson step, O(h^4)
  const double ht = t > 0.0 ? 4e-3 * t : 1e-3, hx = 4e-3 * g.sigma;
  auto d_t = [&](double x, double h) {
    if (t - h < 0.0) return (-3.0 * rho(t, x) + 4.0 * rho(t + h, x) - rho(t + 2.0 * h, x)) / (2.0 * h);
    return (rho(t + h, x) - rho(t - h, x)) / (2.0 * h);
  };
  auto rhs_at = [&](double x, double h) {
    const double dxx = (rho(t, x + h) - 2.0 * rho(t, x) + rho(t, x - h)) / (h * h);
    const double flux = (c * (x + h) * rho(t, x + h) - c * (x - h) * rho(t, x - h)) / (2.0 * h);
    return dxx / beta + flux;
  };
  double worst = 0.0, scale = 0.0;
  for (int i = -40; i <= 40; ++i) {
    const double x = g.mean + 0.1 * i * g.sigma;
    const double dt = (4.0 * d_t(x, 0.5 * ht) - d_t(x, ht)) / 3.0;
    const double rhs = (4.0 * rhs_at(x, 0.5 * hx) - rhs_at(x, hx)) / 3.0;
    worst = std::max(worst, std::abs(dt - rhs));
    scale = std::max(scale, std::abs(dt) + std::abs(rhs));
  }
  return scale > 0.0 ? worst / scale : worst;
}

// ------------------------------------------------------------ piecewise measures

PiecewiseMeasure PiecewiseMeasure::uniform(double a, double b) {
  if (!(b > a)) throw Error("uniform piece needs a < b");
  return {{{a, b, 1.0}}, 0.0};
}

PiecewiseMeasure PiecewiseMeasure::atoms(const EmpiricalMeasure& m) {
  if (m.dim != 1) throw Error("piecewise measures are one-dimensional");
  const EmpiricalMeasure merged = m.merged();
  PiecewiseMeasure p;
  for (std::size_t i = 0; i < merged.size(); ++i)
    p.pieces.push_back({merged.positions[i], merged.positions[i], merged.weights[i]});
  return p;
}

PiecewiseMeasure PiecewiseMeasure::from_cdf(const std::function<double(double)>& cdf, double lo, double hi,
                                            std::size_t n) {
  if (!(hi > lo) || n == 0) throw Error("from_cdf needs lo < hi and n > 0");
  const double F_lo = cdf(lo), F_hi = cdf(hi);
  const double kept = F_hi - F_lo;
  if (!(kept > 0.0)) throw Error("from_cdf window holds no mass");
  PiecewiseMeasure p;
  p.truncated_mass = 1.0 - kept;
  double prev = F_lo;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    const double b = lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(n);
    const double Fb = cdf(b);
    if (Fb > prev) p.pieces.push_back({a, b, (Fb - prev) / kept});
    prev = Fb;
  }
  return p;
}

void PiecewiseMeasure::validate() const {
  if (pieces.empty()) throw Error("piecewise measure is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Piece& q = pieces[i];
    if (!(q.b >= q.a) || !(q.mass > 0.0) || !std::isfinite(q.a) || !std::isfinite(q.b))
      throw Error("invalid piece in piecewise measure");
    if (i > 0 && q.a < pieces[i - 1].b) throw Error("pieces must be sorted and disjoint");
    if (i > 0 && q.a == q.b && pieces[i - 1].a == pieces[i - 1].b && q.a == pieces[i - 1].a)
      throw Error("repeated atom in piecewise measure");
    total += q.mass;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error("piecewise measure masses must sum to 1");
}

// ------------------------------------------------------------ Burgers

BurgersSolution::BurgersSolution(PiecewiseMeasure mu0, double t, double beta)
    : mu0_(std::move(mu0)), t_(t), beta_(beta) {
  mu0_.validate();
  if (t < 0.0) throw Error("burgers oracle needs t >= 0");
  if (!(beta > 0.0)) throw Error("burgers oracle needs beta > 0");
  if (mu0_.truncated_mass > 1e-12)
    warnings_.push_back("domain truncation dropped mass " + std::to_string(mu0_.truncated_mass));
  // breakpoints with right values and left limits of F_0
  for (const auto& q : mu0_.pieces) {
    bx_.push_back(q.a);
    if (q.b > q.a) bx_.push_back(q.b);
  }
  std::sort(bx_.begin(), bx_.end());
  bx_.erase(std::unique(bx_.begin(), bx_.end()), bx_.end());
  const std::size_t n = bx_.size();
  bF_.assign(n, 0.0);
  bFm_.assign(n, 0.0);
  // mass strictly left of bx[i], and mass at bx[i]
  for (std::size_t i = 0; i < n; ++i) {
    const double x = bx_[i];
    double left = 0.0, at = 0.0;
    for (const auto& q : mu0_.pieces) {
      if (q.a == q.b) {
        if (q.a < x) left += q.mass;
        else if (q.a == x) at += q.mass;
      } else if (q.b <= x) {
        left += q.mass;
      } else if (q.a < x) {
        left += q.mass * (x - q.a) / (q.b - q.a);
      }
    }
    bFm_[i] = left;
    bF_[i] = std::min(1.0, left + at);
  }
  bF_.back() = 1.0;
  bG_.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) bG_[i + 1] = bG_[i] + 0.5 * (bF_[i] + bFm_[i + 1]) * (bx_[i + 1] - bx_[i]);
}

double BurgersSolution::F0(double x) const {
  if (x < bx_.front()) return 0.0;
  if (x >= bx_.back()) return 1.0;
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(bx_.begin(), bx_.end(), x) - bx_.begin()) - 1;
  const double s = (bFm_[i + 1] - bF_[i]) / (bx_[i + 1] - bx_[i]);
  return bF_[i] + s * (x - bx_[i]);
}

double BurgersSolution::G(double x) const {
  if (x <= bx_.front()) return 0.0;
  if (x >= bx_.back()) return bG_.back() + (x - bx_.back());
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(bx_.begin(), bx_.end(), x) - bx_.begin()) - 1;
  const double h = x - bx_[i];
  const double s = (bFm_[i + 1] - bF_[i]) / (bx_[i + 1] - bx_[i]);
  return bG_[i] + bF_[i] * h + 0.5 * s * h * h;
}

double BurgersSolution::phi(double xp, double x) const {
  return (xp - x) * (xp - x) / (2.0 * t_) + xp - 2.0 * G(xp);
}

// Largest minimizer of phi(., x) on [x - t, x + t]; piecewise quadratic, so exact.
double BurgersSolution::minimizer(double x) const {
  const double lo = x - t_, hi = x + t_;
  std::vector<double> cand{lo, hi};
  // segment boundaries inside the window
  auto first = std::lower_bound(bx_.begin(), bx_.end(), lo);
  auto last = std::upper_bound(bx_.begin(), bx_.end(), hi);
  for (auto it = first; it != last; ++it) cand.push_back(*it);
  // stationary points: (x' - x)/t + 1 - 2 F_0(x') = 0 on each linear piece of F_0
  auto stationary = [&](double c, double Fc, double s, double seg_lo, double seg_hi) {
    const double a = 1.0 / t_ - 2.0 * s;
    if (!(a > 0.0)) return;
    const double xs = (x / t_ - 1.0 + 2.0 * Fc - 2.0 * s * c) / a;
    if (xs > std::max(seg_lo, lo) && xs < std::min(seg_hi, hi)) cand.push_back(xs);
  };
  stationary(0.0, 0.0, 0.0, -kInf, bx_.front());
  stationary(0.0, 1.0, 0.0, bx_.back(), kInf);
  const std::size_t i0 = first == bx_.begin() ? 0 : static_cast<std::size_t>(first - bx_.begin()) - 1;
  for (std::size_t i = i0; i + 1 < bx_.size() && bx_[i] <= hi; ++i) {
    const double s = (bFm_[i + 1] - bF_[i]) / (bx_[i + 1] - bx_[i]);
    stationary(bx_[i], bF_[i], s, bx_[i], bx_[i + 1]);
  }
  double best = kInf, arg = lo;
  for (double c : cand) {
    const double v = phi(c, x);
    const double slack = 1e-14 * (1.0 + std::abs(v));
    if (v < best - slack || (std::abs(v - best) <= slack && c > arg)) {
      if (v < best) best = v;
      arg = c;
    }
  }
  return arg;
}

double BurgersSolution::cole_hopf_cdf(double x) const {
  const double nu = 1.0 / beta_;
  const double xs = minimizer(x);
  const double phimin = phi(xs, x);
  const double sigma = std::sqrt(2.0 * nu * t_);
  const double half = 2.0 * t_ + 12.0 * sigma;
  std::vector<double> cuts{x - half, x + half, xs};
  for (double k : {1.0, 3.0, 6.0}) {
    cuts.push_back(xs - k * sigma);
    cuts.push_back(xs + k * sigma);
  }
  for (double b : bx_) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return c < x - half || c > x + half; }),
             cuts.end());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto w = [&](double xp) { return std::exp(-(phi(xp, x) - phimin) / (2.0 * nu)); };
    den += integrate(w, cuts[i], cuts[i + 1]);
    num += integrate([&](double xp) { return (xp - x) * w(xp); }, cuts[i], cuts[i + 1]);
  }
  return std::clamp(0.5 + num / (den * 2.0 * t_), 0.0, 1.0);
}

double BurgersSolution::cdf(double x) const {
  if (t_ == 0.0) return F0(x);
  if (std::isfinite(beta_)) return cole_hopf_cdf(x);
  return std::clamp(0.5 + (minimizer(x) - x) / (2.0 * t_), 0.0, 1.0);
}

double BurgersSolution::quantile(double s) const {
  if (!(s > 0.0 && s <= 1.0)) throw Error("quantile level must lie in (0, 1]");
  double lo = bx_.front() - t_ - 1.0, hi = bx_.back() + t_ + 1.0;
  while (cdf(lo) >= s) lo -= 2.0 * (hi - lo);
  while (cdf(hi) < s) hi += 2.0 * (hi - lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (cdf(mid) >= s) hi = mid;
    else lo = mid;
  }
  return hi;
}

QuantileMeasure BurgersSolution::quantiles(std::size_t M) const {
  QuantileMeasure q;
  q.U.resize(M);
  for (std::size_t k = 0; k < M; ++k) q.U[k] = quantile(QuantileMeasure::level(k, M));
  return q;
}

std::vector<BurgersAtom> BurgersSolution::atoms() const {
  if (std::isfinite(beta_)) return {};
  const std::size_t K = 1 << 14;
  std::vector<BurgersAtom> out;
  double last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < K; ++k) {
    const double x = quantile((static_cast<double>(k) + 0.5) / static_cast<double>(K));
    if (x == last) continue;
    const double delta = 1e-11 * std::max(1.0, std::abs(x));
    const double Fr = cdf(x), Fl = cdf(x - delta);
    if (Fr - Fl > 1e-9) out.push_back({x, Fr - Fl, Fl, Fr, 1.0 - Fl - Fr});
    last = x;
  }
  return out;
}

double BurgersSolution::w2_to(const EmpiricalMeasure& m) const {
  m.validate();
  if (m.dim != 1) throw Error("w2_to needs a 1D measure");
  const EmpiricalMeasure a = m.merged();
  const bool tails = std::isfinite(beta_) && t_ > 0.0;
  double level = 0.0, total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double next = i + 1 == a.size() ? 1.0 : level + a.weights[i];
    const double x = a.positions[i];
    auto sq = [&](double s) {
      const double d = quantile(s) - x;
      return d * d;
    };
    // tolerance is relative; tiny pieces would otherwise refine into rounding noise
    total += tails && (i == 0 || i + 1 == a.size()) ? integrate_singular(sq, level, next)
                                                    : integrate(sq, level, next, 1e-11, a.size() > 64 ? 5 : 12);
    level = next;
  }
  return std::sqrt(std::max(total, 0.0));
}

double BurgersSolution::mean() const {
  if (!(std::isfinite(beta_) && t_ > 0.0)) return integrate([&](double s) { return quantile(s); }, 0.0, 1.0);
  // smooth CDF: mean = b - int_a^b F over a window holding all but e^-50 of the mass
  const double margin = t_ + 1.0 + 20.0 * std::sqrt(2.0 * t_ / beta_);
  const double a = bx_.front() - margin, b = bx_.back() + margin;
  return b - integrate([&](double x) { return cdf(x); }, a, b);
}

BurgersSolution burgers_entropy(const PiecewiseMeasure& mu0, double t, double beta) {
  return BurgersSolution(mu0, t, beta);
}

double rankine_hugoniot_residual(const PiecewiseMeasure& mu0, double t, double h) {
  if (!(t > h)) throw Error("Rankine-Hugoniot check needs t > h");
  const BurgersSolution now(mu0, t, kInf), before(mu0, t - h, kInf), after(mu0, t + h, kInf);
  double worst = 0.0;
  for (const BurgersAtom& a : now.atoms()) {
    const double s = a.F_left + 0.5 * a.mass;
    const double speed = (after.quantile(s) - before.quantile(s)) / (2.0 * h);
    worst = std::max(worst, std::abs(speed - a.speed));
  }
  return worst;
}

// ------------------------------------------------------------ Dyson

double semicircle_cdf(double x) {
  const double r = std::numbers::sqrt2;
  if (x <= -r) return 0.0;
  if (x >= r) return 1.0;
  return 0.5 + (0.5 * x * std::sqrt(2.0 - x * x) + std::asin(x / r)) / std::numbers::pi;
}

namespace {

// Scaled Dyson energy M * E(U) = sum U^2 / 2 - (1/M) sum_{k<l} log(U_l - U_k).
double dyson_energy(const std::vector<double>& U) {
  const std::size_t M = U.size();
  double quad = 0.0;
  for (double u : U) quad += 0.5 * u * u;
  double logs = 0.0;
  for (std::size_t k = 0; k + 1 < M; ++k) {
    double prod = 1.0;
    long ex = 0;
    for (std::size_t l = k + 1; l < M; ++l) {
      const double d = U[l] - U[k];
      if (!(d > 0.0)) return kInf;
      prod *= d;
      if (prod < 1e-250 || prod > 1e250) {
        int e = 0;
        prod = std::frexp(prod, &e);
        ex += e;
      }
    }
    logs += std::log(prod) + static_cast<double>(ex) * std::numbers::ln2;
  }
  return quad - logs / static_cast<double>(M);
}

// Gradient U_k - (1/M) sum_l 1/(U_k - U_l), the diagonal of the Hessian and the
// nearest-neighbour coupling.
void dyson_gradient(const std::vector<double>& U, std::vector<double>& g, std::vector<double>& diag,
                    std::vector<double>& off) {
  const std::size_t M = U.size();
  const double invM = 1.0 / static_cast<double>(M);
  g.assign(M, 0.0);
  diag.assign(M, 1.0);
  off.assign(M - 1, 0.0);
  std::vector<double> drift(M, 0.0), curv(M, 0.0);
  for (std::size_t k = 0; k + 1 < M; ++k) {
    double dk = 0.0, ck = 0.0;
    for (std::size_t l = k + 1; l < M; ++l) {
      const double inv = 1.0 / (U[k] - U[l]);  // negative
      dk += inv;
      drift[l] -= inv;
      const double i2 = inv * inv;
      ck += i2;
      curv[l] += i2;
    }
    drift[k] += dk;
    curv[k] += ck;
    const double inv = 1.0 / (U[k + 1] - U[k]);
    off[k] = -inv * inv * invM;
  }
  for (std::size_t k = 0; k < M; ++k) {
    g[k] = U[k] - drift[k] * invM;
    diag[k] += curv[k] * invM;
  }
}

// Tridiagonal solve (diag, off) x = rhs.
std::vector<double> tridiagonal_solve(const std::vector<double>& diag, const std::vector<double>& off,
                                      const std::vector<double>& rhs) {
  const std::size_t M = diag.size();
  std::vector<double> x(M), c(M, 0.0);
  double b = diag[0];
  x[0] = rhs[0] / b;
  for (std::size_t k = 1; k < M; ++k) {
    c[k - 1] = off[k - 1] / b;
    b = diag[k] - off[k - 1] * c[k - 1];
    x[k] = (rhs[k] - off[k - 1] * x[k - 1]) / b;
  }
  for (std::size_t k = M - 1; k-- > 0;) x[k] -= c[k] * x[k + 1];
  return x;
}

// Hessian product (I + L / M) v with L the weighted Laplacian of 1/(U_k - U_l)^2.
std::vector<double> dyson_hessian_apply(const std::vector<double>& U, const std::vector<double>& v) {
  const std::size_t M = U.size();
  const double invM = 1.0 / static_cast<double>(M);
  std::vector<double> out(v);
  std::vector<double> acc(M, 0.0);
  for (std::size_t k = 0; k + 1 < M; ++k) {
    double a = 0.0;
    for (std::size_t l = k + 1; l < M; ++l) {
      const double inv = 1.0 / (U[l] - U[k]);
      const double w = inv * inv * (v[k] - v[l]);
      a += w;
      acc[l] -= w;
    }
    acc[k] += a;
  }
  for (std::size_t k = 0; k < M; ++k) out[k] += acc[k] * invM;
  return out;
}

std::vector<double> newton_direction(const std::vector<double>& U, const std::vector<double>& g,
                                     const std::vector<double>& diag, const std::vector<double>& off, double rel_tol) {
  const std::size_t M = U.size();
  std::vector<double> x(M, 0.0), r(M), z, p, Ap;
  for (std::size_t k = 0; k < M; ++k) r[k] = -g[k];
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };
  const double r0 = std::sqrt(dot(r, r));
  z = tridiagonal_solve(diag, off, r);
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < 500; ++it) {
    Ap = dyson_hessian_apply(U, p);
    const double alpha = rz / dot(p, Ap);
    for (std::size_t k = 0; k < M; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * Ap[k];
    }
    if (std::sqrt(dot(r, r)) <= rel_tol * r0) break;
    z = tridiagonal_solve(diag, off, r);
    const double rz_new = dot(r, z);
    for (std::size_t k = 0; k < M; ++k) p[k] = z[k] + (rz_new / rz) * p[k];
    rz = rz_new;
  }
  return x;
}

std::string dyson_cache_path(const std::string& dir, std::size_t M) {
  return (std::filesystem::path(dir) / ("dyson_equilibrium_M" + std::to_string(M) + ".csv")).string();
}

}  // namespace

double dyson_optimality_residual(const QuantileMeasure& mu) {
  std::vector<double> g, diag, off;
  if (mu.M() < 2) return std::abs(mu.U.at(0));
  dyson_gradient(mu.U, g, diag, off);
  double r = 0.0;
  for (double v : g) r = std::max(r, std::abs(v));
  return r;
}

DysonEquilibrium dyson_equilibrium(std::size_t M, const DysonOptions& options) {
  if (M < 2) throw Error("dyson_equilibrium needs M >= 2");
  if (!options.cache_dir.empty()) {
    const std::string path = dyson_cache_path(options.cache_dir, M);
    if (std::filesystem::exists(path)) {
      try {
        QuantileMeasure q = read_quantile_csv(path);
        const double r = dyson_optimality_residual(q);
        if (q.M() == M && r <= 2.0 * options.tol) return {std::move(q), r, 0, true};
      } catch (const Error&) {
        // stale or foreign file: recompute
      }
    }
  }
  // start from semicircle quantiles
  std::vector<double> U(M);
  for (std::size_t k = 0; k < M; ++k) {
    const double s = QuantileMeasure::level(k, M);
    double lo = -std::numbers::sqrt2, hi = std::numbers::sqrt2;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (semicircle_cdf(mid) >= s ? hi : lo) = mid;
    }
    U[k] = 0.5 * (lo + hi);
  }
  std::vector<double> g, diag, off, cand(M);
  double E = dyson_energy(U);
  std::size_t it = 0;
  double residual = kInf;
  for (;; ++it) {
    dyson_gradient(U, g, diag, off);
    residual = 0.0;
    for (double v : g) residual = std::max(residual, std::abs(v));
    if (residual <= options.tol) break;
    if (it >= options.max_iterations)
      throw ConvergenceError("Dyson equilibrium minimization did not converge, residual " + std::to_string(residual),
                             U, residual);
    // inexact Newton direction: conjugate gradients on H d = -g, tridiagonal preconditioner
    double gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    const std::vector<double> d = newton_direction(U, g, diag, off, std::min(0.1, std::sqrt(gnorm)));
    double slope = 0.0;
    for (std::size_t k = 0; k < M; ++k) slope += g[k] * d[k];
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      for (std::size_t k = 0; k < M; ++k) cand[k] = U[k] + step * d[k];
      const double Ec = dyson_energy(cand);
      if (Ec <= E + 1e-4 * step * slope + 1e-13 * std::abs(E)) {
        U.swap(cand);
        E = Ec;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw ConvergenceError("Dyson equilibrium line search failed, residual " + std::to_string(residual), U,
                             residual);
  }
  QuantileMeasure mu{std::move(U)};
  if (!options.cache_dir.empty()) {
    std::filesystem::create_directories(options.cache_dir);
    write_quantile_csv(dyson_cache_path(options.cache_dir, M), mu);
  }
  return {std::move(mu), residual, it, false};
}

// ------------------------------------------------------------ Hilbert transform

double hilbert_truncated(const EmpiricalMeasure& mu, double x, double eps) {
  if (mu.dim != 1) throw Error("Hilbert transform needs a 1D measure");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = x - mu.positions[i];
    if (std::abs(d) >= eps) s += mu.weights[i] / d;
  }
  return s;
}

double hilbert_truncated(const QuantileMeasure& mu, double x, double eps) {
  const std::size_t M = mu.M();
  const double m = 1.0 / static_cast<double>(M);
  auto atom = [&](double y, double mass) {
    const double d = x - y;
    return std::abs(d) >= eps ? mass / d : 0.0;
  };
  // int_c^d dy / (x - y) = log|x - c| - log|x - d| on a piece not straddling the window
  auto piece = [&](double c, double d, double rho) {
    if (!(d > c)) return 0.0;
    const double wl = x - eps, wr = x + eps;
    double s = 0.0;
    auto part = [&](double a, double b) {
      if (b > a) s += rho * (std::log(std::abs(x - a)) - std::log(std::abs(x - b)));
    };
    part(c, std::min(d, wl));
    part(std::max(c, wr), d);
    return s;
  };
  double s = atom(mu.U.front(), 0.5 * m) + atom(mu.U.back(), 0.5 * m);
  for (std::size_t k = 0; k + 1 < M; ++k) {
    const double a = mu.U[k], b = mu.U[k + 1];
    if (b > a) s += piece(a, b, m / (b - a));
    else s += atom(a, m);
  }
  if (M == 1) s = atom(mu.U.front(), 1.0);
  return s;
}

namespace {

template <class Mu>
HilbertValue extrapolate(const Mu& mu, double x, const std::vector<double>& eps) {
  if (eps.empty()) throw Error("Hilbert transform needs at least one epsilon");
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (!(eps[i] > 0.0) || (i > 0 && !(eps[i] < eps[i - 1])))
      throw Error("epsilon sequence must be positive and strictly decreasing");
  std::vector<double> h;
  for (double e : eps) h.push_back(hilbert_truncated(mu, x, e));
  const std::size_t n = h.size();
  if (n == 1) return {h[0], kInf, false};
  // truncation error is first order in eps for a density that is smooth near x
  const double value = h[n - 1] + (h[n - 1] - h[n - 2]) * eps[n - 1] / (eps[n - 2] - eps[n - 1]);
  const double inc = std::abs(h[n - 1] - h[n - 2]);
  bool diverged = !std::isfinite(value);
  if (n >= 3) {
    const double prev = std::abs(h[n - 2] - h[n - 3]);
    diverged = diverged || (inc > prev && inc > 1e-12 * (1.0 + std::abs(h[n - 1])));
  }
  return {value, inc, diverged};
}

}  // namespace

HilbertValue hilbert_transform(const EmpiricalMeasure& mu, double x, const std::vector<double>& eps) {
  for (double y : mu.positions)
    if (y == x) throw Error("Hilbert transform evaluated at an atom");
  return extrapolate(mu, x, eps);
}

HilbertValue hilbert_transform(const QuantileMeasure& mu, double x, const std::vector<double>& eps) {
  return extrapolate(mu, x, eps);
}

}  // namespace chaoslab
