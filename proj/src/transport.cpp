#include "chaoslab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab {

EmpiricalMeasure EmpiricalMeasure::uniform(std::vector<double> positions, std::size_t dim) {
  if (dim == 0 || positions.size() % dim != 0) throw Error("position array is not a multiple of the dimension");
  EmpiricalMeasure m;
  m.dim = dim;
  const std::size_t n = positions.size() / dim;
  m.positions = std::move(positions);
  m.weights.assign(n, 1.0 / static_cast<double>(n));
  return m;
}

void EmpiricalMeasure::validate() const {
  if (weights.empty()) throw Error("empirical measure has no atoms");
  if (positions.size() != weights.size() * dim) throw Error("empirical measure positions and weights disagree");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw Error("empirical measure weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error("empirical measure weights must sum to 1");
  for (double x : positions)
    if (!std::isfinite(x)) throw Error("empirical measure positions must be finite");
}

EmpiricalMeasure EmpiricalMeasure::merged() const {
  const std::size_t n = size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(positions.begin() + a * dim, positions.begin() + (a + 1) * dim,
                                        positions.begin() + b * dim, positions.begin() + (b + 1) * dim);
  });
  EmpiricalMeasure out;
  out.dim = dim;
  for (std::size_t idx : order) {
    const bool same = !out.weights.empty() &&
                      std::equal(positions.begin() + idx * dim, positions.begin() + (idx + 1) * dim,
                                 out.positions.end() - static_cast<std::ptrdiff_t>(dim));
    if (same) {
      out.weights.back() += weights[idx];
    } else {
      out.positions.insert(out.positions.end(), positions.begin() + idx * dim, positions.begin() + (idx + 1) * dim);
      out.weights.push_back(weights[idx]);
    }
  }
  return out;
}

double QuantileMeasure::mean() const { return std::accumulate(U.begin(), U.end(), 0.0) / static_cast<double>(U.size()); }

double QuantileMeasure::second_moment() const {
  double acc = 0.0;
  for (double u : U) acc += u * u;
  return acc / static_cast<double>(U.size());
}

double QuantileMeasure::variance() const {
  const double m = mean();
  double acc = 0.0;
  for (double u : U) acc += (u - m) * (u - m);
  return acc / static_cast<double>(U.size());
}

bool QuantileMeasure::nondecreasing() const { return std::is_sorted(U.begin(), U.end()); }

void QuantileMeasure::validate() const {
  if (U.empty()) throw Error("quantile measure is empty");
  if (!nondecreasing()) throw Error("quantile array must be nondecreasing");
  if (!std::isfinite(second_moment())) throw Error("quantile measure must have a finite second moment");
}

EmpiricalMeasure empirical(const ParticleState& state) {
  return EmpiricalMeasure::uniform(state.positions, state.dim);
}

EmpiricalMeasure empirical(const StickyState& s) {
  EmpiricalMeasure m;
  m.dim = s.state.dim;
  m.positions = s.state.positions;
  m.weights = s.masses;
  return m;
}

EmpiricalMeasure empirical(const QuantileMeasure& q) { return EmpiricalMeasure::uniform(q.U, 1); }

namespace {

struct SortedAtoms {
  std::vector<double> x;
  std::vector<double> cdf;  // normalised cumulative weights
};

SortedAtoms sorted_atoms(const EmpiricalMeasure& a) {
  if (a.dim != 1) throw Error("1D transport routine called on a measure of dimension " + std::to_string(a.dim));
  const std::size_t n = a.size();
  if (n == 0) throw Error("measure has no atoms");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a.positions[i] < a.positions[j]; });
  SortedAtoms s;
  s.x.resize(n);
  s.cdf.resize(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    s.x[k] = a.positions[order[k]];
    acc += a.weights[order[k]];
    s.cdf[k] = acc;
  }
  for (double& c : s.cdf) c /= acc;
  s.cdf.back() = 1.0;
  return s;
}

}  // namespace

double wp_discrete_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
  if (!(p >= 1.0)) throw Error("W_p requires p >= 1");
  const SortedAtoms sa = sorted_atoms(a);
  const SortedAtoms sb = sorted_atoms(b);
  std::size_t i = 0, j = 0;
  double level = 0.0, cost = 0.0;
  while (i < sa.x.size() && j < sb.x.size()) {
    const double next = std::min(sa.cdf[i], sb.cdf[j]);
    const double d = std::abs(sa.x[i] - sb.x[j]);
    if (next > level) cost += (next - level) * (p == 2.0 ? d * d : (p == 1.0 ? d : std::pow(d, p)));
    level = next;
    if (sa.cdf[i] <= next) ++i;
    if (sb.cdf[j] <= next) ++j;
  }
  return p == 2.0 ? std::sqrt(cost) : (p == 1.0 ? cost : std::pow(cost, 1.0 / p));
}

double w2_quantile(const QuantileMeasure& a, const QuantileMeasure& b) {
  if (a.M() != b.M()) throw Error("w2_quantile needs equal grid sizes (" + std::to_string(a.M()) + " vs " +
                                  std::to_string(b.M()) + ")");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.M(); ++k) acc += (a.U[k] - b.U[k]) * (a.U[k] - b.U[k]);
  return std::sqrt(acc / static_cast<double>(a.M()));
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  // Shortest augmenting path (Hungarian) with potentials, 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double w2_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim != b.dim) throw Error("w2_assignment needs measures of equal dimension");
  const std::size_t n = a.size();
  if (b.size() != n) throw Error("w2_assignment needs equal atom counts");
  if (n > kAssignmentCap)
    throw Error("w2_assignment size cap exceeded (" + std::to_string(n) + " > " + std::to_string(kAssignmentCap) + ")");
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(a.weights[i] - w) > 1e-12 || std::abs(b.weights[i] - w) > 1e-12)
      throw Error("w2_assignment needs uniform weights");
  const std::size_t D = a.dim;
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = a.positions[i * D + d] - b.positions[j * D + d];
        c += diff * diff;
      }
      cost[i * n + j] = c;
    }
  const auto match = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
  return std::sqrt(total / static_cast<double>(n));
}

ApproximateDistance w2_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t directions,
                              std::uint64_t seed) {
  if (a.dim != b.dim) throw Error("sliced W2 needs measures of equal dimension");
  const std::size_t D = a.dim;
  auto rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  double acc = 0.0;
  std::vector<double> dir(D);
  auto project = [&](const EmpiricalMeasure& m) {
    EmpiricalMeasure out;
    out.weights = m.weights;
    out.positions.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d) s += dir[d] * m.positions[i * D + d];
      out.positions[i] = s;
    }
    return out;
  };
  for (std::size_t k = 0; k < directions; ++k) {
    double norm = 0.0;
    for (double& c : dir) {
      c = normal(rng);
      norm += c * c;
    }
    norm = std::sqrt(norm);
    for (double& c : dir) c /= norm;
    const double d = wp_discrete_1d(project(a), project(b), 2.0);
    acc += d * d;
  }
  // E over directions of the squared projected distance scales by 1/D for rigid shifts
  return {std::sqrt(static_cast<double>(D) * acc / static_cast<double>(directions)), true};
}

ApproximateDistance w2_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim == 1) return {wp_discrete_1d(a, b, 2.0), false};
  if (a.size() == b.size() && a.size() <= kAssignmentCap) return {w2_assignment(a, b), false};
  return w2_sliced(a, b, 256, 0x5EED);
}

QuantileMeasure quantile_from_empirical(const EmpiricalMeasure& a, std::size_t M) {
  if (M == 0) throw Error("quantile grid size must be positive");
  const SortedAtoms s = sorted_atoms(a);
  QuantileMeasure q;
  q.U.resize(M);
  std::size_t i = 0;
  for (std::size_t k = 0; k < M; ++k) {
    const double level = QuantileMeasure::level(k, M);
    while (i + 1 < s.x.size() && s.cdf[i] < level) ++i;
    q.U[k] = s.x[i];
  }
  return q;
}

QuantileMeasure quantile_from_density(const std::function<double(double)>& cdf, std::size_t M) {
  if (M == 0) throw Error("quantile grid size must be positive");
  QuantileMeasure q;
  q.U.resize(M);
  for (std::size_t k = 0; k < M; ++k) {
    const double level = QuantileMeasure::level(k, M);
    double lo = -1.0, hi = 1.0;
    for (int it = 0; cdf(lo) >= level; ++it) {
      lo *= 2.0;
      if (it > 1100) throw Error("CDF never drops below the requested level");
    }
    for (int it = 0; cdf(hi) < level; ++it) {
      hi *= 2.0;
      if (it > 1100) throw Error("CDF never reaches the requested level");
    }
    // generalized inverse: smallest x with cdf(x) >= level
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (cdf(mid) >= level) hi = mid;
      else lo = mid;
    }
    q.U[k] = hi;
  }
  return q;
}

QuantileMeasure quantile_from_function(const std::function<double(double)>& quantile, std::size_t M) {
  QuantileMeasure q;
  q.U.resize(M);
  for (std::size_t k = 0; k < M; ++k) q.U[k] = quantile(QuantileMeasure::level(k, M));
  return q;
}

QuantileMeasure generalized_geodesic(const QuantileMeasure& mu0, const QuantileMeasure& mu1, double s) {
  if (mu0.M() != mu1.M()) throw Error("generalized geodesic needs equal grid sizes");
  if (s == 0.0) return mu0;
  if (s == 1.0) return mu1;
  QuantileMeasure q;
  q.U.resize(mu0.M());
  for (std::size_t k = 0; k < mu0.M(); ++k) q.U[k] = (1.0 - s) * mu0.U[k] + s * mu1.U[k];
  return q;
}

// ------------------------------------------------------------ csv

void write_quantile_csv(const std::string& path, const QuantileMeasure& q) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17) << q.M() << '\n';
  for (double u : q.U) out << u << '\n';
}

QuantileMeasure read_quantile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open quantile file " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("quantile file " + path + " is empty");
  std::size_t M = 0;
  try {
    M = static_cast<std::size_t>(std::stoull(line));
  } catch (const std::exception&) {
    throw Error("quantile file " + path + " must start with the grid size M");
  }
  QuantileMeasure q;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    q.U.push_back(std::stod(line));
  }
  if (q.U.size() != M)
    throw Error("quantile file " + path + " declares M = " + std::to_string(M) + " but holds " +
                std::to_string(q.U.size()) + " values");
  q.validate();
  return q;
}

void write_empirical_csv(const std::string& path, const EmpiricalMeasure& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t d = 0; d < m.dim; ++d) out << "x_" << d + 1 << ',';
  out << "weight\n" << std::setprecision(17);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t d = 0; d < m.dim; ++d) out << m.positions[i * m.dim + d] << ',';
    out << m.weights[i] << '\n';
  }
}

EmpiricalMeasure read_empirical_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open empirical measure file " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("empirical measure file " + path + " is empty");
  const std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (cols < 2) throw Error("empirical measure file needs at least one coordinate and a weight column");
  EmpiricalMeasure m;
  m.dim = cols - 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!std::getline(ss, cell, ',')) throw Error("short row in " + path);
      (c + 1 < cols ? m.positions : m.weights).push_back(std::stod(cell));
    }
  }
  m.validate();
  return m;
}

}  // namespace chaoslab
