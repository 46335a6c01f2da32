#include "chaoslab/gradient_flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>

#include "chaoslab/errors.hpp"

namespace chaoslab {

namespace {

// Sum of logs as the log of a running product; one log call per underflow/overflow rescale.
class LogAccumulator {
 public:
  void add(double x) {
    if (x < 1e-100 || x > 1e100) {
      direct_ += std::log(x);
      return;
    }
    prod_ *= x;
    if (prod_ < 1e-200 || prod_ > 1e200) {
      int e = 0;
      prod_ = std::frexp(prod_, &e);
      exponent_ += e;
    }
  }
  double value() const { return std::log(prod_) + static_cast<double>(exponent_) * std::numbers::ln2 + direct_; }

 private:
  double prod_ = 1.0;
  long exponent_ = 0;
  double direct_ = 0.0;
};

bool is_log_kernel(const PotentialSpec& p) {
  const auto* r = std::get_if<RepulsivePower>(&p.kernel());
  return p.has_interaction() && r && r->s == 0.0;
}

// sum_{k < l} W(U_k, U_l) for nondecreasing U; +inf on a coincidence under a singular kernel.
double pair_sum(const std::vector<double>& U, const PotentialSpec& p) {
  if (!p.has_interaction()) return 0.0;
  const std::size_t M = U.size();
  if (is_log_kernel(p)) {
    LogAccumulator acc;
    for (std::size_t k = 0; k + 1 < M; ++k) {
      const double uk = U[k];
      for (std::size_t l = k + 1; l < M; ++l) {
        const double d = U[l] - uk;
        if (!(d > 0.0)) return kInf;
        acc.add(d);
      }
    }
    return -acc.value();
  }
  const bool singular = p.strongly_singular();
  double s = 0.0;
  if (p.translation_invariant()) {
    for (std::size_t k = 0; k + 1 < M; ++k)
      for (std::size_t l = k + 1; l < M; ++l) {
        const double d = U[l] - U[k];
        if (singular && !(d > 0.0)) return kInf;
        s += p.w(d);
      }
  } else {
    for (std::size_t k = 0; k + 1 < M; ++k)
      for (std::size_t l = k + 1; l < M; ++l) {
        if (singular && !(U[l] > U[k])) return kInf;
        s += p.pair1(U[k], U[l]);
      }
  }
  return s;
}

// -sum over interior gaps of log(M * gap); +inf on a zero gap.
double entropy_sum(const std::vector<double>& U) {
  const std::size_t M = U.size();
  if (M < 2) return kInf;
  const double m = static_cast<double>(M);
  LogAccumulator acc;
  for (std::size_t k = 0; k + 1 < M; ++k) {
    const double g = U[k + 1] - U[k];
    if (!(g > 0.0)) return kInf;
    acc.add(m * g);
  }
  return -acc.value();
}

double potential_sum(const std::vector<double>& U, const ExternalPotential& V) {
  if (V.is_zero()) return 0.0;
  double s = 0.0;
  for (double u : U) s += V.value(u);
  return s;
}

// M * J(U) with J = W2^2(U, P) / (2 tau) + F_beta(U).
class Objective {
 public:
  Objective(const std::vector<double>& P, double tau, const PotentialSpec& p, double beta)
      : P_(P), tau_(tau), p_(p), beta_(beta), M_(P.size()) {}

  double value(const std::vector<double>& U) const {
    ++evaluations;
    double prox = 0.0;
    for (std::size_t k = 0; k < M_; ++k) prox += (U[k] - P_[k]) * (U[k] - P_[k]);
    double f = prox / (2.0 * tau_) + potential_sum(U, p_.external());
    if (p_.has_interaction()) f += pair_sum(U, p_) / static_cast<double>(M_);
    if (std::isfinite(beta_)) f += entropy_sum(U) / beta_;
    return std::isnan(f) ? kInf : f;
  }

  // Gradient, and optionally a diagonally dominant tridiagonal model of the Hessian
  // (diag, off) where off[k] couples k and k + 1.
  void gradient(const std::vector<double>& U, std::vector<double>& g, std::vector<double>* diag,
                std::vector<double>* off) const {
    const double invM = 1.0 / static_cast<double>(M_);
    g.assign(M_, 0.0);
    if (diag) diag->assign(M_, 1.0 / tau_);
    if (off) off->assign(M_ > 0 ? M_ - 1 : 0, 0.0);
    const ExternalPotential& V = p_.external();
    for (std::size_t k = 0; k < M_; ++k) {
      g[k] = (U[k] - P_[k]) / tau_;
      if (!V.is_zero()) {
        g[k] += V.derivative(U[k]);
        if (diag) (*diag)[k] += std::max(V.second_derivative(U[k]), 0.0);
      }
    }
    if (p_.has_interaction()) {
      if (is_log_kernel(p_)) {
        for (std::size_t k = 0; k + 1 < M_; ++k) {
          double gk = 0.0, hk = 0.0;
          const double uk = U[k];
          for (std::size_t l = k + 1; l < M_; ++l) {
            const double inv = 1.0 / (U[l] - uk);
            gk += inv;
            g[l] -= inv * invM;
            if (diag) {
              const double h = inv * inv * invM;
              hk += h;
              (*diag)[l] += h;
            }
          }
          g[k] += gk * invM;
          if (diag) (*diag)[k] += hk;
          if (off) {
            const double inv = 1.0 / (U[k + 1] - uk);
            (*off)[k] -= inv * inv * invM;
          }
        }
      } else if (p_.translation_invariant()) {
        for (std::size_t k = 0; k + 1 < M_; ++k)
          for (std::size_t l = k + 1; l < M_; ++l) {
            const double d = U[l] - U[k];
            const double dw = p_.dw(d) * invM;
            g[k] -= dw;
            g[l] += dw;
            if (diag) {
              double h = p_.d2w(d);
              h = std::isfinite(h) ? std::max(h, 0.0) * invM : 0.0;
              (*diag)[k] += h;
              (*diag)[l] += h;
              if (off && l == k + 1) (*off)[k] -= h;
            }
          }
      } else {
        for (std::size_t k = 0; k < M_; ++k)
          for (std::size_t l = 0; l < M_; ++l)
            if (l != k) g[k] += p_.pair_gradient1(U[k], U[l]) * invM;
      }
    }
    if (std::isfinite(beta_)) {
      const double ib = 1.0 / beta_;
      for (std::size_t k = 0; k + 1 < M_; ++k) {
        const double inv = 1.0 / (U[k + 1] - U[k]);
        g[k] += ib * inv;
        g[k + 1] -= ib * inv;
        if (diag) {
          const double h = ib * inv * inv;
          (*diag)[k] += h;
          (*diag)[k + 1] += h;
          if (off) (*off)[k] -= h;
        }
      }
    }
  }

  std::size_t size() const { return M_; }
  mutable std::size_t evaluations = 0;

 private:
  const std::vector<double>& P_;
  double tau_;
  const PotentialSpec& p_;
  double beta_;
  std::size_t M_;
};

// Solves the symmetric tridiagonal system (diag, off) x = rhs.
std::vector<double> solve_tridiagonal(const std::vector<double>& diag, const std::vector<double>& off,
                                      std::vector<double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c(n, 0.0);
  double b = diag[0];
  rhs[0] /= b;
  for (std::size_t k = 1; k < n; ++k) {
    c[k - 1] = off[k - 1] / b;
    b = diag[k] - off[k - 1] * c[k - 1];
    rhs[k] = (rhs[k] - off[k - 1] * rhs[k - 1]) / b;
  }
  for (std::size_t k = n - 1; k-- > 0;) rhs[k] -= c[k] * rhs[k + 1];
  return rhs;
}

double projected_gradient_norm(const std::vector<double>& U, const std::vector<double>& g) {
  std::vector<double> y(U.size());
  for (std::size_t k = 0; k < U.size(); ++k) y[k] = U[k] - g[k];
  y = isotonic_projection(std::move(y));
  double s = 0.0;
  for (std::size_t k = 0; k < U.size(); ++k) s += (U[k] - y[k]) * (U[k] - y[k]);
  return std::sqrt(s);
}

// A feasible point near `start` when the free energy is infinite there (zero gaps).
std::vector<double> spread_if_needed(std::vector<double> start, const Objective& f) {
  if (std::isfinite(f.value(start))) return start;
  const std::size_t M = start.size();
  const double scale = std::max(1.0, std::abs(start.back() - start.front()));
  for (double eta = 1e-10 * scale; eta < 1e6 * scale; eta *= 10.0) {
    std::vector<double> trial(start);
    for (std::size_t k = 0; k < M; ++k)
      trial[k] += eta * (static_cast<double>(k) - 0.5 * static_cast<double>(M - 1)) / static_cast<double>(M);
    if (std::isfinite(f.value(trial))) return trial;
  }
  throw Error("no feasible starting point for the JKO subproblem");
}

}  // namespace

std::vector<double> isotonic_projection(std::vector<double> y) {
  const std::size_t n = y.size();
  if (n < 2) return y;
  std::vector<double> level;
  std::vector<std::size_t> count;
  level.reserve(n);
  count.reserve(n);
  for (double v : y) {
    level.push_back(v);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t c = count.back() + count[count.size() - 2];
      const double v2 = (level.back() * static_cast<double>(count.back()) +
                         level[level.size() - 2] * static_cast<double>(count[count.size() - 2])) /
                        static_cast<double>(c);
      level.pop_back();
      count.pop_back();
      level.back() = v2;
      count.back() = c;
    }
  }
  std::size_t k = 0;
  for (std::size_t b = 0; b < level.size(); ++b)
    for (std::size_t j = 0; j < count[b]; ++j) y[k++] = level[b];
  return y;
}

FreeEnergyReport free_energy(const QuantileMeasure& mu, const PotentialSpec& p, double beta) {
  mu.validate();
  const double m = static_cast<double>(mu.M());
  FreeEnergyReport r;
  r.beta = beta;
  r.interaction = pair_sum(mu.U, p) / (m * m);
  r.potential = potential_sum(mu.U, p.external()) / m;
  r.entropy = entropy_sum(mu.U) / m;
  r.total = r.interaction + r.potential;
  if (std::isfinite(beta)) r.total += r.entropy / beta;
  return r;
}

double free_energy_lambda(const PotentialSpec& p) {
  const double lw = p.has_interaction() ? std::min(p.lambda(), 0.0) : 0.0;
  return p.external().lambda() + lw;
}

JKOStepResult jko_step(const QuantileMeasure& prev, double tau, const PotentialSpec& p, double beta,
                       const JKOOptions& options, const QuantileMeasure* warm_start) {
  if (!(tau > 0.0)) throw Error("jko_step requires tau > 0");
  if (!(beta > 0.0)) throw Error("jko_step requires beta > 0");
  prev.validate();
  const double lam = free_energy_lambda(p);
  if (lam < 0.0 && !(tau < 1.0 / (2.0 * std::abs(lam))))
    throw Error("tau = " + std::to_string(tau) + " violates tau < 1/(2|lambda|) = " +
                std::to_string(1.0 / (2.0 * std::abs(lam))));
  const std::size_t M = prev.M();
  if (std::isfinite(beta) && M < 2) throw Error("entropy needs at least two quantile points");
  const double tol = options.tol_inner > 0.0 ? options.tol_inner : 1e-10 * static_cast<double>(M);

  Objective f(prev.U, tau, p, beta);
  std::vector<double> U = prev.U;
  if (warm_start && warm_start->M() == M) {
    std::vector<double> guess = isotonic_projection(warm_start->U);
    if (std::isfinite(f.value(guess))) U = std::move(guess);
  }
  U = spread_if_needed(std::move(U), f);
  double fu = f.value(U);

  std::vector<double> g, diag, off, g_old, U_old;
  const bool precond = options.method == InnerMethod::preconditioned;
  std::deque<double> history{fu};
  double bb = 0.0;
  JKOStats stats;
  for (std::size_t it = 0;; ++it) {
    f.gradient(U, g, precond ? &diag : nullptr, precond ? &off : nullptr);
    stats.gradient_norm = projected_gradient_norm(U, g);
    stats.iterations = it;
    if (stats.gradient_norm <= tol) break;
    if (it >= options.max_iterations) {
      ConvergenceError err("JKO inner solver hit the iteration cap (" + std::to_string(options.max_iterations) +
                               "), projected gradient " + std::to_string(stats.gradient_norm),
                           U, stats.gradient_norm);
      throw err;
    }

    std::vector<double> d(M);
    if (precond) {
      std::vector<double> rhs(M);
      for (std::size_t k = 0; k < M; ++k) rhs[k] = -g[k];
      d = solve_tridiagonal(diag, off, std::move(rhs));
    } else {
      if (it == 0) {
        double gmax = 0.0;
        for (double v : g) gmax = std::max(gmax, std::abs(v));
        bb = std::min(tau, 1.0 / std::max(gmax, 1e-300));
      } else {
        double ss = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
          const double s = U[k] - U_old[k], y = g[k] - g_old[k];
          ss += s * s;
          sy += s * y;
        }
        bb = sy > 0.0 ? std::clamp(ss / sy, 1e-14, 1e14) : std::min(1e3 * bb, 1e14);
      }
      for (std::size_t k = 0; k < M; ++k) d[k] = -bb * g[k];
    }

    const double f_ref = precond ? fu : *std::max_element(history.begin(), history.end());
    const double slack = 1e-14 * (1.0 + std::abs(fu));
    double t = 1.0;
    std::vector<double> cand(M);
    double fc = kInf;
    bool accepted = false;
    if (precond) {
      // near the minimizer the predicted decrease drops below the resolution of F; judge the step by the gradient
      for (std::size_t k = 0; k < M; ++k) cand[k] = U[k] + d[k];
      cand = isotonic_projection(std::move(cand));
      double slope = 0.0;
      for (std::size_t k = 0; k < M; ++k) slope += g[k] * (cand[k] - U[k]);
      if (-slope <= 100.0 * slack) {
        fc = f.value(cand);
        std::vector<double> gc;
        if (std::isfinite(fc)) {
          f.gradient(cand, gc, nullptr, nullptr);
          accepted = projected_gradient_norm(cand, gc) < stats.gradient_norm;
        }
      }
    }
    for (int ls = 0; !accepted && ls < 80; ++ls, t *= 0.5) {
      for (std::size_t k = 0; k < M; ++k) cand[k] = U[k] + t * d[k];
      cand = isotonic_projection(std::move(cand));
      fc = f.value(cand);
      if (!std::isfinite(fc)) continue;
      double slope = 0.0;
      for (std::size_t k = 0; k < M; ++k) slope += g[k] * (cand[k] - U[k]);
      if (fc <= f_ref + 1e-4 * slope + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw ConvergenceError("JKO line search failed, projected gradient " + std::to_string(stats.gradient_norm), U,
                             stats.gradient_norm);
    U_old = std::move(U);
    g_old = g;
    U = cand;
    fu = fc;
    history.push_back(fu);
    if (history.size() > 10) history.pop_front();
  }
  stats.evaluations = f.evaluations;
  return {QuantileMeasure{std::move(U)}, stats};
}

const QuantileMeasure& JKOFlow::at(double t) const {
  if (steps.empty()) throw Error("empty JKO flow");
  const double eps = 1e-9 * std::max(tau, 1e-300);
  auto it = std::upper_bound(steps.begin(), steps.end(), t + eps,
                             [](double v, const JKOFlowStep& s) { return v < s.time; });
  if (it == steps.begin()) return steps.front().mu;
  return std::prev(it)->mu;
}

JKOFlow jko_flow(const QuantileMeasure& mu0, double tau, double T, const PotentialSpec& p, double beta,
                 const JKOOptions& options, const StepObserver& observer) {
  if (!(tau > 0.0) || !(tau <= T * (1.0 + 1e-12))) throw Error("jko_flow requires 0 < tau <= T");
  JKOFlow flow;
  flow.tau = tau;
  flow.beta = beta;
  flow.potential = p;
  flow.steps.push_back({0.0, mu0, free_energy(mu0, p, beta), {}});
  if (observer) observer(flow.steps.back());
  const auto n = static_cast<std::size_t>(std::ceil(T / tau - 1e-9));
  for (std::size_t j = 1; j <= n; ++j) {
    const QuantileMeasure& cur = flow.steps.back().mu;
    std::optional<QuantileMeasure> guess;
    if (flow.steps.size() >= 2) {
      const QuantileMeasure& old = flow.steps[flow.steps.size() - 2].mu;
      guess.emplace();
      guess->U.resize(cur.M());
      for (std::size_t k = 0; k < cur.M(); ++k) guess->U[k] = 2.0 * cur.U[k] - old.U[k];
    }
    JKOStepResult r = jko_step(cur, tau, p, beta, options, guess ? &*guess : nullptr);
    FreeEnergyReport e = free_energy(r.mu, p, beta);
    flow.steps.push_back({static_cast<double>(j) * tau, std::move(r.mu), e, r.stats});
    if (observer) observer(flow.steps.back());
  }
  return flow;
}

double w2_between(const QuantileMeasure& a, const QuantileMeasure& b) {
  if (a.M() == b.M()) return w2_quantile(a, b);
  return wp_discrete_1d(empirical(a), empirical(b), 2.0);
}

std::vector<std::pair<double, double>> evi_residual(const JKOFlow& flow, const QuantileMeasure& v, double lambda) {
  const double Fv = free_energy(v, flow.potential, flow.beta).total;
  if (!std::isfinite(Fv)) throw Error("EVI comparison measure has infinite free energy");
  std::vector<double> d2(flow.steps.size());
  for (std::size_t j = 0; j < flow.steps.size(); ++j) {
    const double d = w2_between(flow.steps[j].mu, v);
    d2[j] = d * d;
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t j = 0; j + 1 < flow.steps.size(); ++j) {
    const double dt = flow.steps[j + 1].time - flow.steps[j].time;
    const double deriv = (d2[j + 1] - d2[j]) / dt;
    out.emplace_back(flow.steps[j].time, 0.5 * deriv + flow.steps[j].energy.total + 0.5 * lambda * d2[j] - Fv);
  }
  return out;
}

double calibrate_evi_constant(double tau, std::size_t M) {
  const double z = std::sqrt(2.0);
  const QuantileMeasure mu0 = quantile_from_density([z](double x) { return 0.5 * std::erfc(-x / z); }, M);
  const JKOFlow flow = jko_flow(mu0, tau, 1.0, PotentialSpec::zero(), 1.0);
  double worst = 0.0;
  for (const auto& [t, r] : evi_residual(flow, mu0, 0.0)) worst = std::max(worst, r);
  return std::max(2.0 * worst / std::sqrt(tau), 1e-3);
}

TestFunction truncated_test_function(std::function<double(double)> phi, std::function<double(double)> dphi,
                                     std::function<double(double)> d2phi, double a, double b) {
  if (!(0.0 < a && a < b)) throw Error("truncated test function needs 0 < a < b");
  // smooth step h(s) = e(s) / (e(s) + e(1 - s)), e(s) = exp(-1/s); cutoff chi(x) = h((b - |x|) / (b - a))
  struct Cut {
    double a, b;
    static double e(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
    static double de(double s) { return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0; }
    static double d2e(double s) { return s > 0.0 ? std::exp(-1.0 / s) * (1.0 - 2.0 * s) / (s * s * s * s) : 0.0; }
    // returns chi, chi', chi''
    void eval(double x, double& c0, double& c1, double& c2) const {
      const double ax = std::abs(x);
      if (ax <= a) {
        c0 = 1.0;
        c1 = c2 = 0.0;
        return;
      }
      if (ax >= b) {
        c0 = c1 = c2 = 0.0;
        return;
      }
      const double L = b - a, s = (b - ax) / L, sg = x > 0.0 ? 1.0 : -1.0;
      const double p = e(s), q = e(1.0 - s), dp = de(s), dq = -de(1.0 - s), d2p = d2e(s), d2q = d2e(1.0 - s);
      const double den = p + q, dden = dp + dq, d2den = d2p + d2q;
      const double h = p / den;
      const double dh = (dp * den - p * dden) / (den * den);
      const double d2h = (d2p * den - p * d2den) / (den * den) - 2.0 * dden * dh / den;
      const double ds = -sg / L;  // ds/dx
      c0 = h;
      c1 = dh * ds;
      c2 = d2h * ds * ds;
    }
  };
  const Cut cut{a, b};
  TestFunction t;
  t.phi = [=](double x) {
    double c0, c1, c2;
    cut.eval(x, c0, c1, c2);
    return c0 == 0.0 ? 0.0 : c0 * phi(x);
  };
  t.dphi = [=](double x) {
    double c0, c1, c2;
    cut.eval(x, c0, c1, c2);
    return c0 == 0.0 && c1 == 0.0 ? 0.0 : c0 * dphi(x) + c1 * phi(x);
  };
  t.d2phi = [=](double x) {
    double c0, c1, c2;
    cut.eval(x, c0, c1, c2);
    return c0 == 0.0 && c1 == 0.0 && c2 == 0.0 ? 0.0 : c0 * d2phi(x) + 2.0 * c1 * dphi(x) + c2 * phi(x);
  };
  return t;
}

std::vector<std::vector<double>> weak_mkv_residual(const JKOFlow& flow, const PotentialSpec& p, double beta,
                                                   const std::vector<TestFunction>& tests) {
  std::vector<std::vector<double>> out;
  const ExternalPotential& V = p.external();
  for (const TestFunction& tf : tests) {
    std::vector<double> res;
    double prev_int = 0.0;
    for (std::size_t j = 0; j < flow.steps.size(); ++j) {
      const std::vector<double>& U = flow.steps[j].mu.U;
      const std::size_t M = U.size();
      const double m = static_cast<double>(M);
      double integral = 0.0;
      for (double u : U) integral += tf.phi(u);
      integral /= m;
      if (j > 0) {
        const double dt = flow.steps[j].time - flow.steps[j - 1].time;
        std::vector<double> dphi(M);
        for (std::size_t k = 0; k < M; ++k) dphi[k] = tf.dphi(U[k]);
        double diffusion = 0.0, drift_v = 0.0, drift_w = 0.0;
        if (std::isfinite(beta)) {
          for (double u : U) diffusion += tf.d2phi(u);
          diffusion /= beta * m;
        }
        if (!V.is_zero()) {
          for (std::size_t k = 0; k < M; ++k) drift_v += V.derivative(U[k]) * dphi[k];
          drift_v /= m;
        }
        if (p.has_interaction()) {
          if (p.translation_invariant()) {
            // 1/2 sum_{k != l} w'(U_k - U_l) (phi'(U_k) - phi'(U_l)) = sum_{k < l} over sorted pairs
            for (std::size_t k = 0; k + 1 < M; ++k)
              for (std::size_t l = k + 1; l < M; ++l) {
                const double d = U[l] - U[k];
                if (d == 0.0) continue;
                drift_w += -p.dw(d) * (dphi[k] - dphi[l]);
              }
          } else {
            for (std::size_t k = 0; k < M; ++k)
              for (std::size_t l = 0; l < M; ++l)
                if (l != k && U[l] != U[k]) drift_w += p.pair_gradient1(U[k], U[l]) * dphi[k];
          }
          drift_w /= m * m;
        }
        res.push_back((integral - prev_int) / dt - (diffusion - drift_v - drift_w));
      }
      prev_int = integral;
    }
    out.push_back(std::move(res));
  }
  return out;
}

void write_flow_csv(const std::string& path, const JKOFlow& flow) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "time,quantile_index,U\n" << std::setprecision(17);
  for (const auto& s : flow.steps)
    for (std::size_t k = 0; k < s.mu.M(); ++k) out << s.time << ',' << k << ',' << s.mu.U[k] << '\n';
}

void write_flow_summary_csv(const std::string& path, const JKOFlow& flow) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "time,interaction,potential,entropy,total\n" << std::setprecision(17);
  for (const auto& s : flow.steps)
    out << s.time << ',' << s.energy.interaction << ',' << s.energy.potential << ',' << s.energy.entropy << ','
        << s.energy.total << '\n';
}

}  // namespace chaoslab
