#include "chaoslab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab {

std::string to_string(Scheme s) { return s == Scheme::euler ? "euler" : "rk4"; }
std::string to_string(NoiseScheme s) { return s == NoiseScheme::euler_maruyama ? "euler_maruyama" : "split_implicit"; }
std::string to_string(Dynamics d) {
  switch (d) {
    case Dynamics::deterministic: return "deterministic";
    case Dynamics::stochastic: return "stochastic";
    case Dynamics::sticky: return "sticky";
  }
  return "deterministic";
}

ParticleState ParticleState::from_positions(std::vector<double> x, std::size_t dim, double beta, std::uint64_t seed) {
  if (dim == 0 || x.size() % dim != 0) throw Error("position array is not a multiple of the dimension");
  ParticleState s;
  s.dim = dim;
  s.positions = std::move(x);
  s.beta = beta;
  s.seed = seed;
  return s;
}

StickyState StickyState::uniform(ParticleState s) {
  StickyState out;
  const std::size_t n = s.size();
  out.masses.assign(n, 1.0 / static_cast<double>(n));
  out.labels.resize(n);
  std::iota(out.labels.begin(), out.labels.end(), std::size_t{0});
  out.state = std::move(s);
  return out;
}

namespace {

double interaction_scale(std::size_t n) { return n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0; }

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// 1D pair force sum for translation-invariant kernels: out_i += c * sum_j w'(|d|) sign(d).
void add_pair_forces_1d(const std::vector<double>& x, const PotentialSpec& p, double c, std::vector<double>& out) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = xi - x[j];
      if (d == 0.0) {
        if (p.strongly_singular())
          throw SingularityError("coincident particles under a strongly singular kernel", 0.0, i, j);
        continue;
      }
      const double f = c * p.dw(std::abs(d)) * (d > 0.0 ? 1.0 : -1.0);
      out[i] += f;
      out[j] -= f;
    }
  }
}

}  // namespace

double energy_EN(const ParticleState& state, const PotentialSpec& p) {
  const std::size_t n = state.size();
  if (n == 0) throw Error("energy of an empty configuration");
  const double c = interaction_scale(n);
  double pair_sum = 0.0;
  if (p.has_interaction()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pair_sum += p.pair(state.at(i), state.at(j));
  }
  double ext = 0.0;
  if (!p.external().is_zero())
    for (std::size_t i = 0; i < n; ++i) ext += p.external().value(state.at(i));
  return c * pair_sum + ext;
}

std::vector<double> grad_EN(const ParticleState& state, const PotentialSpec& p) {
  const std::size_t n = state.size();
  const std::size_t D = state.dim;
  std::vector<double> g(state.positions.size(), 0.0);
  const double c = interaction_scale(n);
  if (p.has_interaction()) {
    if (D == 1 && p.translation_invariant()) {
      add_pair_forces_1d(state.positions, p, c, g);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          try {
            p.add_pair_gradient(state.at(i), state.at(j), c, {g.data() + i * D, D});
          } catch (const SingularityError& e) {
            throw SingularityError(e.what(), e.radius, i, j);
          }
        }
      }
    }
  }
  if (!p.external().is_zero())
    for (std::size_t i = 0; i < n; ++i) p.external().add_gradient(state.at(i), {g.data() + i * D, D});
  return g;
}

double sticky_energy(const StickyState& s, const PotentialSpec& p) {
  const std::size_t n = s.state.size();
  double e = 0.0;
  if (p.has_interaction())
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e += s.masses[i] * s.masses[j] * p.pair(s.state.at(i), s.state.at(j));
  for (std::size_t i = 0; i < n; ++i) e += s.masses[i] * p.external().value(s.state.at(i));
  return e;
}

double min_gap_1d(const ParticleState& state) {
  double g = kInf;
  for (std::size_t i = 1; i < state.positions.size(); ++i) g = std::min(g, state.positions[i] - state.positions[i - 1]);
  return g;
}

bool strictly_increasing(const ParticleState& state) {
  for (std::size_t i = 1; i < state.positions.size(); ++i)
    if (!(state.positions[i] > state.positions[i - 1])) return false;
  return true;
}

double default_dt(const PotentialSpec& p) {
  const double lam = std::abs(p.lambda()) + std::abs(p.external().lambda());
  return 1e-3 * std::min(1.0, lam > 0.0 ? 1.0 / lam : 1.0);
}

// ------------------------------------------------------------ deterministic

namespace {

std::vector<double> rk_stage(const ParticleState& s, const std::vector<double>& x, const PotentialSpec& p) {
  ParticleState tmp;
  tmp.dim = s.dim;
  tmp.positions = x;
  return grad_EN(tmp, p);
}

std::vector<double> single_step(const ParticleState& s, const PotentialSpec& p, double h, Scheme scheme) {
  const std::size_t m = s.positions.size();
  const auto& x = s.positions;
  std::vector<double> out(m);
  if (scheme == Scheme::euler) {
    const auto g = grad_EN(s, p);
    for (std::size_t k = 0; k < m; ++k) out[k] = x[k] - h * g[k];
    return out;
  }
  const auto k1 = grad_EN(s, p);
  std::vector<double> y(m);
  for (std::size_t k = 0; k < m; ++k) y[k] = x[k] - 0.5 * h * k1[k];
  const auto k2 = rk_stage(s, y, p);
  for (std::size_t k = 0; k < m; ++k) y[k] = x[k] - 0.5 * h * k2[k];
  const auto k3 = rk_stage(s, y, p);
  for (std::size_t k = 0; k < m; ++k) y[k] = x[k] - h * k3[k];
  const auto k4 = rk_stage(s, y, p);
  for (std::size_t k = 0; k < m; ++k) out[k] = x[k] - h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
  return out;
}

}  // namespace

ParticleState step_deterministic(const ParticleState& state, const PotentialSpec& p, double dt, Scheme scheme,
                                 StepInfo* info, std::size_t max_halvings) {
  if (std::isfinite(state.beta)) throw Error("step_deterministic requires beta = inf");
  if (!(dt > 0.0)) throw Error("time step must be positive");
  const bool ordered = state.dim == 1 && p.strongly_singular();
  if (ordered && !strictly_increasing(state))
    throw Error("1D strongly singular dynamics need strictly increasing positions");

  ParticleState cur = state;
  double remaining = dt;
  double h = dt;
  std::size_t level = 0;
  StepInfo local;
  while (remaining > 1e-14 * dt) {
    h = std::min(h, remaining);
    bool ok = true;
    std::vector<double> cand;
    try {
      cand = single_step(cur, p, h, scheme);
      ok = all_finite(cand);
      if (ok && ordered) {
        for (std::size_t i = 1; i < cand.size() && ok; ++i) ok = cand[i] > cand[i - 1];
      }
    } catch (const SingularityError&) {
      ok = false;
    }
    if (!ok) {
      if (++level > max_halvings)
        throw StepSizeError("ordering could not be preserved after the maximal number of step halvings", h);
      h *= 0.5;
      ++local.halvings;
      continue;
    }
    cur.positions = std::move(cand);
    remaining -= h;
    ++local.substeps;
  }
  cur.time = state.time + dt;
  if (info) *info = local;
  return cur;
}

// ------------------------------------------------------------ stochastic

namespace {

std::vector<double> gaussian_increments(const ParticleState& s, double scale) {
  auto rng = make_stream(s.seed, s.step);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xi(s.positions.size());
  for (double& v : xi) v = scale * normal(rng);
  return xi;
}

void check_stochastic(const ParticleState& s, double dt) {
  if (!std::isfinite(s.beta) || !(s.beta > 0.0)) throw Error("stochastic steps require a finite positive beta");
  if (!(dt > 0.0)) throw Error("time step must be positive");
}

}  // namespace

ParticleState step_stochastic(const ParticleState& state, const PotentialSpec& p, double dt) {
  check_stochastic(state, dt);
  const auto g = grad_EN(state, p);
  const auto xi = gaussian_increments(state, std::sqrt(2.0 * dt / state.beta));
  ParticleState next = state;
  double max_drift = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    next.positions[k] = state.positions[k] - g[k] * dt + xi[k];
    max_drift = std::max(max_drift, std::abs(g[k]) * dt);
  }
  if (!all_finite(next.positions)) throw DivergenceError("stochastic step produced a non-finite position", max_drift);
  if (state.dim == 1 && p.strongly_singular()) std::sort(next.positions.begin(), next.positions.end());
  next.time = state.time + dt;
  next.step = state.step + 1;
  return next;
}

ParticleState step_stochastic_split(const ParticleState& state, const PotentialSpec& p, double dt) {
  check_stochastic(state, dt);
  if (state.dim != 1 || !p.translation_invariant() || !p.strongly_singular())
    return step_stochastic(state, p, dt);

  const std::size_t n = state.size();
  const double c = interaction_scale(n);
  const auto xi = gaussian_increments(state, std::sqrt(2.0 * dt / state.beta));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = state.positions[i] + xi[i];
  std::sort(y.begin(), y.end());

  // explicit part: external potential and pairs that are not neighbours
  std::vector<double> z(n);
  double max_drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = p.external().derivative(y[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j + 1 >= i && j <= i + 1) continue;
      const double d = y[i] - y[j];
      if (d == 0.0) throw SingularityError("coincident particles under a strongly singular kernel", 0.0, i, j);
      f += c * p.dw(std::abs(d)) * (d > 0.0 ? 1.0 : -1.0);
    }
    z[i] = y[i] - dt * f;
    max_drift = std::max(max_drift, std::abs(f) * dt);
  }
  if (!all_finite(z)) throw DivergenceError("stochastic step produced a non-finite position", max_drift);

  // implicit part: argmin 1/(2 dt) |x - z|^2 + c sum_i w(x_{i+1} - x_i) over x_1 < ... < x_n
  std::vector<double> x(n);
  if (n == 1) {
    x = z;
  } else {
    const double floor_gap = std::sqrt(2.0 * c * dt);
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) cum[i] = cum[i - 1] + std::max(z[i] - z[i - 1], floor_gap);
    const double shift = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n) -
                         std::accumulate(cum.begin(), cum.end(), 0.0) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = cum[i] + shift;

    auto objective = [&](const std::vector<double>& u) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += 0.5 / dt * (u[i] - z[i]) * (u[i] - z[i]);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double gap = u[i + 1] - u[i];
        if (!(gap > 0.0)) return kInf;
        acc += c * p.w(gap);
      }
      return acc;
    };

    std::vector<double> grad(n), diag(n), off(n - 1), dir(n), cprime(n), dprime(n);
    double f = objective(x);
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        grad[i] = (x[i] - z[i]) / dt;
        diag[i] = 1.0 / dt;
      }
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double gap = x[i + 1] - x[i];
        const double d1 = c * p.dw(gap);
        const double d2 = c * p.d2w(gap);
        grad[i] -= d1;
        grad[i + 1] += d1;
        diag[i] += d2;
        diag[i + 1] += d2;
        off[i] = -d2;
      }
      // Thomas algorithm for H dir = -grad
      cprime[0] = off[0] / diag[0];
      dprime[0] = -grad[0] / diag[0];
      for (std::size_t i = 1; i < n; ++i) {
        const double denom = diag[i] - off[i - 1] * cprime[i - 1];
        if (i + 1 < n) cprime[i] = off[i] / denom;
        dprime[i] = (-grad[i] - off[i - 1] * dprime[i - 1]) / denom;
      }
      dir[n - 1] = dprime[n - 1];
      for (std::size_t i = n - 1; i-- > 0;) dir[i] = dprime[i] - cprime[i] * dir[i + 1];

      double decrement = 0.0, scale = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        decrement -= grad[i] * dir[i];
        scale = std::max(scale, std::abs(x[i]));
      }
      double step_max = 0.0;
      for (double d : dir) step_max = std::max(step_max, std::abs(d));
      // the objective cannot resolve a smaller decrease; the last Newton step is exact to second order
      if (decrement <= 1e-13 * (1.0 + std::abs(f)) || step_max <= 1e-14 * scale) {
        bool ordered = true;
        for (std::size_t i = 0; i + 1 < n; ++i) ordered = ordered && x[i + 1] + dir[i + 1] > x[i] + dir[i];
        if (ordered)
          for (std::size_t i = 0; i < n; ++i) x[i] += dir[i];
        converged = true;
        break;
      }
      // stay strictly inside the ordered cone
      double alpha = 1.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dg = dir[i + 1] - dir[i];
        if (dg < 0.0) alpha = std::min(alpha, 0.99 * (x[i + 1] - x[i]) / -dg);
      }
      std::vector<double> trial(n);
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + alpha * dir[i];
        const double ft = objective(trial);
        if (ft <= f - 1e-4 * alpha * decrement + 1e-15 * std::abs(f)) {
          x.swap(trial);
          f = ft;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        converged = decrement <= 1e-12 * (1.0 + std::abs(f));
        break;
      }
    }
    if (!converged) throw ConvergenceError("implicit neighbour solve did not converge", x, 0.0);
  }

  ParticleState next = state;
  next.positions = std::move(x);
  if (!all_finite(next.positions)) throw DivergenceError("stochastic step produced a non-finite position", max_drift);
  next.time = state.time + dt;
  next.step = state.step + 1;
  return next;
}

// ------------------------------------------------------------ sticky

namespace {

std::vector<double> sticky_velocities(const StickyState& s, const PotentialSpec& p) {
  const std::size_t n = s.state.size();
  const std::size_t D = s.state.dim;
  std::vector<double> v(n * D, 0.0);
  if (p.has_interaction()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        p.add_pair_gradient(s.state.at(i), s.state.at(j), -s.masses[j], {v.data() + i * D, D});
      }
  }
  if (!p.external().is_zero()) {
    std::vector<double> gv(D);
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(gv.begin(), gv.end(), 0.0);
      p.external().add_gradient(s.state.at(i), gv);
      for (std::size_t d = 0; d < D; ++d) v[i * D + d] -= gv[d];
    }
  }
  return v;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

void sort_sticky_1d(StickyState& s) {
  const std::size_t n = s.state.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.state.positions[a] < s.state.positions[b]; });
  StickyState out = s;
  for (std::size_t k = 0; k < n; ++k) {
    out.state.positions[k] = s.state.positions[order[k]];
    out.masses[k] = s.masses[order[k]];
    out.labels[k] = s.labels[order[k]];
  }
  s = std::move(out);
}

// Merges every cluster of particles closer than `radius` (1D: adjacent gaps).
void merge_clusters(StickyState& s, double radius, double time, std::vector<MergeEvent>& events) {
  const std::size_t n = s.state.size();
  const std::size_t D = s.state.dim;
  UnionFind uf(n);
  bool any = false;
  if (D == 1) {
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (s.state.positions[i + 1] - s.state.positions[i] <= radius) {
        uf.unite(i, i + 1);
        any = true;
      }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double r2 = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
          const double dd = s.state.positions[i * D + d] - s.state.positions[j * D + d];
          r2 += dd * dd;
        }
        if (r2 <= radius * radius) {
          uf.unite(i, j);
          any = true;
        }
      }
  }
  if (!any) return;

  StickyState out;
  out.state = s.state;
  out.state.positions.clear();
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) members[uf.find(i)].push_back(i);
  for (std::size_t root = 0; root < n; ++root) {
    const auto& group = members[root];
    if (group.empty()) continue;
    double mass = 0.0;
    std::vector<double> com(D, 0.0);
    for (std::size_t i : group) {
      mass += s.masses[i];
      for (std::size_t d = 0; d < D; ++d) com[d] += s.masses[i] * s.state.positions[i * D + d];
    }
    for (double& c : com) c /= mass;
    std::size_t survivor = s.labels[group.front()];
    for (std::size_t i : group) survivor = std::min(survivor, s.labels[i]);
    if (group.size() > 1) {
      MergeEvent ev{time, survivor, {}, mass};
      for (std::size_t i : group)
        if (s.labels[i] != survivor) ev.absorbed.push_back(s.labels[i]);
      std::sort(ev.absorbed.begin(), ev.absorbed.end());
      events.push_back(std::move(ev));
    }
    out.state.positions.insert(out.state.positions.end(), com.begin(), com.end());
    out.masses.push_back(mass);
    out.labels.push_back(survivor);
  }
  s = std::move(out);
  if (D == 1) sort_sticky_1d(s);
}

}  // namespace

StickyStep step_sticky(const StickyState& s, const PotentialSpec& p, double dt) {
  if (std::isfinite(s.state.beta)) throw Error("sticky dynamics require beta = inf");
  if (p.monotonicity() != Monotonicity::attractive) throw Error("sticky dynamics require an attractive kernel");
  if (s.masses.size() != s.state.size() || s.labels.size() != s.state.size())
    throw Error("sticky state needs one mass and one label per particle");
  const double total = std::accumulate(s.masses.begin(), s.masses.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw Error("sticky masses must sum to 1");
  if (std::any_of(s.masses.begin(), s.masses.end(), [](double m) { return !(m > 0.0); }))
    throw Error("sticky masses must be positive");
  if (!(dt > 0.0)) throw Error("time step must be positive");

  StickyStep out{s, {}};
  StickyState& cur = out.next;
  const std::size_t D = cur.state.dim;
  if (D == 1) sort_sticky_1d(cur);
  double remaining = dt;
  double time = s.state.time;
  for (int guard = 0; remaining > 1e-15 * dt && guard < 100000; ++guard) {
    const std::size_t n = cur.state.size();
    const auto v = sticky_velocities(cur, p);
    double vmax = 0.0;
    for (double c : v) vmax = std::max(vmax, std::abs(c));
    const double radius = D == 1 ? 0.0 : 1e-2 * dt * std::max(vmax, 1e-12);

    double t_hit = remaining;
    if (D == 1) {
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const double gap = cur.state.positions[i + 1] - cur.state.positions[i];
        const double rel = v[i + 1] - v[i];
        if (rel < 0.0) t_hit = std::min(t_hit, gap / -rel);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          double dd = 0.0, du = 0.0, uu = 0.0;
          for (std::size_t d = 0; d < D; ++d) {
            const double a = cur.state.positions[i * D + d] - cur.state.positions[j * D + d];
            const double b = v[i * D + d] - v[j * D + d];
            dd += a * a;
            du += a * b;
            uu += b * b;
          }
          if (uu == 0.0 || du >= 0.0) continue;
          const double t_star = std::min(-du / uu, remaining);
          const double closest2 = dd + 2.0 * t_star * du + t_star * t_star * uu;
          if (closest2 <= radius * radius) t_hit = std::min(t_hit, t_star);
        }
    }
    t_hit = std::max(t_hit, 0.0);
    for (std::size_t k = 0; k < cur.state.positions.size(); ++k) cur.state.positions[k] += t_hit * v[k];
    remaining -= t_hit;
    time += t_hit;
    if (D == 1) {
      // collisions found above end exactly at zero gap up to rounding
      const double tol = 1e-12 * (1.0 + std::abs(cur.state.positions.front()) + std::abs(cur.state.positions.back()));
      merge_clusters(cur, tol, time, out.merges);
    } else {
      merge_clusters(cur, radius, time, out.merges);
    }
  }
  cur.state.time = s.state.time + dt;
  return out;
}

// ------------------------------------------------------------ simulate

Trajectory simulate(const SimulationConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.T >= 0.0)) throw Error("simulation needs dt > 0 and T >= 0");
  std::vector<double> outputs = cfg.output_times.empty() ? std::vector<double>{0.0, cfg.T} : cfg.output_times;
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  if (outputs.front() < 0.0 || outputs.back() > cfg.T + 1e-12) throw Error("output times must lie in [0, T]");

  const PotentialSpec& p = cfg.potential;
  const bool sticky = cfg.dynamics == Dynamics::sticky;
  Trajectory tr;

  ParticleState state = cfg.initial;
  state.time = 0.0;
  if (cfg.dynamics == Dynamics::deterministic || sticky) state.beta = kInf;
  if (cfg.dynamics == Dynamics::stochastic && !std::isfinite(state.beta))
    throw Error("stochastic dynamics need a finite beta");
  if (state.size() == 0) throw Error("simulation needs at least one particle");
  if (state.dim == 1 && p.strongly_singular() && !sticky) {
    std::sort(state.positions.begin(), state.positions.end());
    if (cfg.dynamics == Dynamics::deterministic && !strictly_increasing(state))
      throw Error("initial positions must be distinct for a strongly singular kernel");
  }

  StickyState st;
  if (sticky) {
    st = StickyState::uniform(state);
    if (!cfg.masses.empty()) {
      if (cfg.masses.size() != state.size()) throw Error("one mass per particle is required");
      st.masses = cfg.masses;
    }
  }

  const std::size_t n0 = state.size();
  auto energy_now = [&]() {
    return sticky ? sticky_energy(st, p) : energy_EN(state, p) / static_cast<double>(n0);
  };
  auto snapshot = [&](double t) {
    if (sticky) {
      ParticleState snap = st.state;
      snap.time = t;
      tr.snapshots.emplace_back(t, snap);
      tr.snapshot_masses.push_back(st.masses);
    } else {
      tr.snapshots.emplace_back(t, state);
    }
  };

  std::size_t next_out = 0;
  if (outputs[0] <= 0.0) {
    snapshot(0.0);
    ++next_out;
  }
  tr.energy_trace.emplace_back(0.0, energy_now());

  double t = 0.0;
  std::uint64_t k = 0;
  while (next_out < outputs.size()) {
    const double target = outputs[next_out];
    double t_next = std::min(static_cast<double>(k + 1) * cfg.dt, target);
    if (t_next - t <= 1e-12 * cfg.dt) t_next = target;
    const double h = t_next - t;
    if (h > 0.0) {
      if (sticky) {
        auto res = step_sticky(st, p, h);
        st = std::move(res.next);
        for (auto& ev : res.merges) tr.merge_events.push_back(std::move(ev));
        st.state.time = t_next;
      } else if (cfg.dynamics == Dynamics::deterministic) {
        state = step_deterministic(state, p, h, cfg.scheme);
      } else if (cfg.noise == NoiseScheme::split_implicit) {
        state = step_stochastic_split(state, p, h);
      } else {
        state = step_stochastic(state, p, h);
      }
      state.time = t_next;
      t = t_next;
      if (t >= static_cast<double>(k + 1) * cfg.dt - 1e-12 * cfg.dt) ++k;
      if (cfg.full_energy_trace || t == target) tr.energy_trace.emplace_back(t, energy_now());
    }
    if (t >= target - 1e-12 * cfg.dt) {
      snapshot(target);
      ++next_out;
    }
  }
  return tr;
}

}  // namespace chaoslab
