#include "chaoslab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include "chaoslab/errors.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Piecewise-linear quantile function through the midpoint levels, flat beyond them.
double grid_quantile(const QuantileMeasure& q, double s) {
  const std::size_t M = q.M();
  const double pos = s * static_cast<double>(M) - 0.5;
  if (pos <= 0.0) return q.U.front();
  if (pos >= static_cast<double>(M - 1)) return q.U.back();
  const auto k = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(k);
  return (1.0 - f) * q.U[k] + f * q.U[k + 1];
}

EmpiricalMeasure snapshot_measure(const Trajectory& tr, std::size_t i) {
  const ParticleState& s = tr.snapshots[i].second;
  if (tr.snapshot_masses.empty()) return empirical(s);
  EmpiricalMeasure m;
  m.dim = s.dim;
  m.positions = s.positions;
  m.weights = tr.snapshot_masses[i];
  return m;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Executor sequential_executor() {
  return [](std::size_t n, const std::function<void(std::size_t)>& job) {
    for (std::size_t i = 0; i < n; ++i) job(i);
  };
}

InitialMeasure InitialMeasure::gaussian(double mean, double sigma, Placement p) {
  if (!(sigma > 0.0)) throw Error("gaussian initial law needs sigma > 0");
  InitialMeasure m;
  m.kind = Kind::gaussian;
  m.placement = p;
  m.a = mean;
  m.b = sigma;
  return m;
}

InitialMeasure InitialMeasure::uniform(double lo, double hi, Placement p) {
  if (!(hi > lo)) throw Error("uniform initial law needs lo < hi");
  InitialMeasure m;
  m.kind = Kind::uniform;
  m.placement = p;
  m.a = lo;
  m.b = hi;
  return m;
}

InitialMeasure InitialMeasure::quantile_file(const std::string& path, Placement p) {
  InitialMeasure m;
  m.kind = Kind::quantile_file;
  m.placement = p;
  m.path = path;
  m.grid = read_quantile_csv(path);
  m.grid->validate();
  return m;
}

std::vector<double> InitialMeasure::sample(std::size_t N, std::size_t dim, std::uint64_t seed) const {
  if (N == 0 || dim == 0) throw Error("sample needs N >= 1 and dim >= 1");
  std::vector<double> x(N * dim);
  if (placement == Placement::quantile) {
    if (dim != 1) throw Error("quantile placement is one-dimensional");
    const QuantileMeasure q = quantiles(N);
    return q.U;
  }
  auto rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : x) {
    switch (kind) {
      case Kind::gaussian: v = a + b * normal(rng); break;
      case Kind::uniform: v = a + (b - a) * unif(rng); break;
      case Kind::quantile_file: v = grid_quantile(*grid, unif(rng)); break;
    }
  }
  if (dim == 1) std::sort(x.begin(), x.end());
  return x;
}

QuantileMeasure InitialMeasure::quantiles(std::size_t M) const {
  switch (kind) {
    case Kind::gaussian: return gaussian_quantiles({a, b}, M);
    case Kind::uniform:
      return quantile_from_function([&](double s) { return a + (b - a) * s; }, M);
    case Kind::quantile_file:
      if (grid->M() == M) return *grid;
      return quantile_from_function([&](double s) { return grid_quantile(*grid, s); }, M);
  }
  throw Error("unknown initial law");
}

PiecewiseMeasure InitialMeasure::piecewise() const {
  switch (kind) {
    case Kind::uniform: return PiecewiseMeasure::uniform(a, b);
    case Kind::gaussian:
      return PiecewiseMeasure::from_cdf([&](double x) { return 0.5 * std::erfc(-(x - a) / (b * std::sqrt(2.0))); },
                                        a - 8.0 * b, a + 8.0 * b, 4096);
    case Kind::quantile_file: return PiecewiseMeasure::atoms(empirical(*grid));
  }
  throw Error("unknown initial law");
}

std::string InitialMeasure::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::gaussian: os << "gaussian(mean=" << a << ", sigma=" << b << ")"; break;
    case Kind::uniform: os << "uniform[" << a << ", " << b << "]"; break;
    case Kind::quantile_file: os << "quantiles(" << path << ")"; break;
  }
  os << (placement == Placement::iid ? " iid" : " quantile");
  return os.str();
}

Reference reference_from_flow(JKOFlow flow) {
  auto f = std::make_shared<const JKOFlow>(std::move(flow));
  Reference r;
  r.valid_until = f->final_time();
  r.name = "jko(tau=" + fmt_double(f->tau) + ", M=" + std::to_string(f->steps.front().mu.M()) + ")";
  r.distance = [f](const EmpiricalMeasure& m, double t) {
    if (m.dim != 1) throw Error("flow references are one-dimensional");
    return wp_discrete_1d(m, empirical(f->at(t)), 2.0);
  };
  return r;
}

Reference reference_from_burgers(const PiecewiseMeasure& mu0) {
  mu0.validate();
  Reference r;
  r.name = "burgers";
  r.distance = [mu0](const EmpiricalMeasure& m, double t) {
    if (m.dim != 1) throw Error("the Burgers reference is one-dimensional");
    return BurgersSolution(mu0, t, kInf).w2_to(m);
  };
  return r;
}

Reference reference_from_quantiles(std::function<QuantileMeasure(double)> law, std::string name) {
  Reference r;
  r.name = std::move(name);
  r.distance = [law = std::move(law)](const EmpiricalMeasure& m, double t) {
    if (m.dim != 1) throw Error("quantile references are one-dimensional");
    return wp_discrete_1d(m, empirical(law(t)), 2.0);
  };
  return r;
}

Reference jko_reference(const InitialMeasure& mu0, const PotentialSpec& p, double beta, double T,
                        const std::vector<double>& times, const JKOReferenceOptions& options) {
  JKOFlow coarse = jko_flow(mu0.quantiles(options.M), options.tau, T, p, beta);
  std::vector<double> refinement;
  if (options.refine) {
    JKOFlow fine = jko_flow(mu0.quantiles(2 * options.M), 0.5 * options.tau, T, p, beta);
    for (double t : times) refinement.push_back(w2_between(coarse.at(t), fine.at(t)));
  }
  Reference r = reference_from_flow(std::move(coarse));
  r.refinement_error = std::move(refinement);
  return r;
}

const ChaosSummary& ChaosReport::at(std::size_t N, double time) const {
  for (const auto& s : summary)
    if (s.N == N && std::abs(s.time - time) <= 1e-12 * std::max(1.0, std::abs(time))) return s;
  throw Error("no summary for N=" + std::to_string(N) + " at t=" + fmt_double(time));
}

double fit_slope(const std::vector<std::size_t>& N, const std::vector<double>& mean) {
  if (N.size() != mean.size()) throw Error("fit_slope needs one mean per N");
  const std::size_t n = N.size();
  const std::size_t first = n / 2;
  std::vector<double> lx, ly;
  for (std::size_t i = first; i < n; ++i) {
    if (!(mean[i] > 0.0) || !std::isfinite(mean[i])) continue;
    lx.push_back(std::log(static_cast<double>(N[i])));
    ly.push_back(std::log(mean[i]));
  }
  if (lx.size() < 2) return kNaN;
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

ChaosReport chaos_sweep(const ChaosConfig& config, const Reference& reference, const Executor& executor) {
  if (config.N_grid.empty()) throw Error("chaos sweep needs a non-empty N grid");
  if (config.times.empty()) throw Error("chaos sweep needs at least one time");
  if (config.seeds == 0) throw Error("chaos sweep needs at least one seed");
  if (!reference.distance) throw Error("chaos sweep needs a reference");

  ChaosReport rep;
  rep.N_grid = config.N_grid;
  std::sort(rep.N_grid.begin(), rep.N_grid.end());
  rep.N_grid.erase(std::unique(rep.N_grid.begin(), rep.N_grid.end()), rep.N_grid.end());
  rep.times = config.times;
  std::sort(rep.times.begin(), rep.times.end());
  rep.times.erase(std::unique(rep.times.begin(), rep.times.end()), rep.times.end());
  if (rep.times.front() < 0.0) throw Error("sweep times must be nonnegative");
  if (rep.times.back() > reference.valid_until + 1e-12)
    throw Error("sweep time " + fmt_double(rep.times.back()) + " is beyond the reference horizon " +
                fmt_double(reference.valid_until));

  Dynamics dyn = config.dynamics;
  if (!std::isfinite(config.beta) && dyn == Dynamics::stochastic) dyn = Dynamics::deterministic;
  if (std::isfinite(config.beta) && dyn != Dynamics::stochastic)
    throw Error(to_string(dyn) + " dynamics need beta = inf");
  rep.deterministic = dyn != Dynamics::stochastic && config.initial.placement == InitialMeasure::Placement::quantile;
  const std::size_t runs_per_N = rep.deterministic ? 1 : config.seeds;

  const std::size_t nt = rep.times.size();
  const std::size_t nN = rep.N_grid.size();
  std::vector<double> dist(nN * config.seeds * nt, kNaN);
  std::vector<std::string> errors(nN * runs_per_N);

  std::vector<double> outputs = rep.times;
  if (outputs.front() > 0.0) outputs.insert(outputs.begin(), 0.0);

  executor(nN * runs_per_N, [&](std::size_t job) {
    const std::size_t iN = job / runs_per_N;
    const std::size_t seed = job % runs_per_N;
    const std::size_t N = rep.N_grid[iN];
    const std::uint64_t cell_seed = derive_seed(derive_seed(config.master_seed, N), seed);
    try {
      SimulationConfig sc;
      sc.potential = config.potential;
      sc.initial = ParticleState::from_positions(config.initial.sample(N, config.dim, cell_seed), config.dim,
                                                 config.beta, derive_seed(cell_seed, 1));
      sc.dynamics = dyn;
      sc.noise = config.noise;
      sc.dt = config.dt;
      sc.T = outputs.back();
      sc.output_times = outputs;
      sc.full_energy_trace = false;
      const Trajectory tr = simulate(sc);
      for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
        const double t = tr.snapshots[i].first;
        const auto it = std::lower_bound(rep.times.begin(), rep.times.end(), t - 1e-12);
        if (it == rep.times.end() || std::abs(*it - t) > 1e-9) continue;
        const auto k = static_cast<std::size_t>(it - rep.times.begin());
        dist[(iN * config.seeds + seed) * nt + k] = reference.distance(snapshot_measure(tr, i), t);
      }
    } catch (const std::exception& e) {
      errors[job] = e.what();
    }
  });

  for (std::size_t iN = 0; iN < nN; ++iN) {
    for (std::size_t r = 0; r < runs_per_N; ++r)
      if (!errors[iN * runs_per_N + r].empty())
        rep.failures.push_back("N=" + std::to_string(rep.N_grid[iN]) + ", seed=" + std::to_string(r) + ": " +
                               errors[iN * runs_per_N + r]);
    if (rep.deterministic)
      for (std::size_t s = 1; s < config.seeds; ++s)
        std::copy_n(dist.begin() + iN * config.seeds * nt, nt, dist.begin() + (iN * config.seeds + s) * nt);
  }

  for (std::size_t iN = 0; iN < nN; ++iN)
    for (std::size_t s = 0; s < config.seeds; ++s)
      for (std::size_t k = 0; k < nt; ++k)
        rep.cells.push_back({rep.N_grid[iN], s, rep.times[k], dist[(iN * config.seeds + s) * nt + k]});

  for (std::size_t iN = 0; iN < nN; ++iN) {
    for (std::size_t k = 0; k < nt; ++k) {
      std::vector<double> v;
      for (std::size_t s = 0; s < runs_per_N; ++s) {
        const double d = dist[(iN * config.seeds + s) * nt + k];
        if (std::isfinite(d)) v.push_back(d);
      }
      ChaosSummary cs{rep.N_grid[iN], rep.times[k], kNaN, kNaN, v.size()};
      if (!v.empty()) {
        cs.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        if (v.size() > 1) {
          double ss = 0.0;
          for (double d : v) ss += (d - cs.mean) * (d - cs.mean);
          cs.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
        } else {
          cs.stderr_ = 0.0;
        }
      }
      rep.summary.push_back(cs);
    }
  }

  for (std::size_t k = 0; k < nt; ++k) {
    std::vector<double> means;
    double smallest = kInf;
    for (std::size_t iN = 0; iN < nN; ++iN) {
      const double m = rep.summary[iN * nt + k].mean;
      means.push_back(m);
      if (std::isfinite(m)) smallest = std::min(smallest, m);
    }
    rep.slopes.push_back(fit_slope(rep.N_grid, means));
    if (k < reference.refinement_error.size() && std::isfinite(smallest) &&
        reference.refinement_error[k] >= 0.2 * smallest)
      rep.reference_limited = true;
  }
  return rep;
}

void write_chaos_csv(const std::string& path, const ChaosReport& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "N,seed,time,w2_distance\n" << std::setprecision(17);
  for (const auto& c : r.cells) out << c.N << ',' << c.seed << ',' << c.time << ',' << c.distance << '\n';
}

void write_chaos_summary_csv(const std::string& path, const ChaosReport& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "N,time,mean,stderr\n" << std::setprecision(17);
  for (const auto& s : r.summary) out << s.N << ',' << s.time << ',' << s.mean << ',' << s.stderr_ << '\n';
}

void write_chaos_svg(const std::string& path, const ChaosReport& r) {
  const double W = 640, H = 420, L = 70, R = 20, T = 20, B = 50;
  double ymin = kInf, ymax = 0.0;
  for (const auto& s : r.summary)
    if (s.mean > 0.0 && std::isfinite(s.mean)) {
      ymin = std::min(ymin, s.mean);
      ymax = std::max(ymax, s.mean);
    }
  if (!(ymax > 0.0) || r.N_grid.empty()) throw Error("nothing to plot");
  if (ymax <= ymin) {
    ymin *= 0.5;
    ymax *= 2.0;
  }
  const double lx0 = std::log10(static_cast<double>(r.N_grid.front()));
  double lx1 = std::log10(static_cast<double>(r.N_grid.back()));
  if (lx1 <= lx0) lx1 = lx0 + 1.0;
  const double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
  auto px = [&](double N) { return L + (std::log10(N) - lx0) / (lx1 - lx0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (std::log10(y) - ly0) / std::max(ly1 - ly0, 1.0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (std::size_t N : r.N_grid)
    out << "<text x=\"" << px(static_cast<double>(N)) << "\" y=\"" << H - B + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << N << "</text>\n";
  for (double e = ly0; e <= ly1; e += 1.0)
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(std::pow(10.0, e)) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">1e" << e << "</text>\n";
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"12\" text-anchor=\"middle\">N</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\" text-anchor=\"middle\">mean W2</text>\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    const char* c = colors[k % 6];
    std::ostringstream pts;
    for (const auto& s : r.summary)
      if (s.time == r.times[k] && s.mean > 0.0 && std::isfinite(s.mean))
        pts << px(static_cast<double>(s.N)) << ',' << py(s.mean) << ' ';
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n"
        << "<text x=\"" << W - R - 90 << "\" y=\"" << T + 14 * (k + 1) << "\" font-size=\"11\" fill=\"" << c
        << "\">t = " << r.times[k] << "</text>\n";
  }
  out << "</svg>\n";
}

std::vector<ContractivityRow> contractivity_test(const QuantileMeasure& mu0, const QuantileMeasure& nu0,
                                                 const PotentialSpec& p, double beta, double tau,
                                                 const std::vector<double>& times, const JKOOptions& options) {
  if (times.empty()) return {};
  const double d0 = w2_between(mu0, nu0);
  if (!(d0 > 0.0)) throw Error("contractivity needs distinct initial measures");
  const double T = *std::max_element(times.begin(), times.end());
  const JKOFlow a = jko_flow(mu0, tau, T, p, beta, options);
  const JKOFlow b = jko_flow(nu0, tau, T, p, beta, options);
  const double lambda = free_energy_lambda(p);
  std::vector<ContractivityRow> rows;
  for (double t : times) rows.push_back({t, w2_between(a.at(t), b.at(t)) / d0, std::exp(-lambda * t)});
  return rows;
}

namespace {

DissipationResult scan(const std::vector<std::pair<double, double>>& trace, double rel_tol) {
  DissipationResult r{true, -kInf, 0, 0.0};
  for (std::size_t j = 0; j + 1 < trace.size(); ++j) {
    const double e0 = trace[j].second, e1 = trace[j + 1].second;
    const double v = e1 - e0 - rel_tol * (1.0 + std::abs(e0));
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.worst_step = j + 1;
      r.worst_time = trace[j + 1].first;
    }
  }
  if (trace.size() < 2) r.worst_violation = 0.0;
  r.pass = r.worst_violation <= 0.0;
  return r;
}

}  // namespace

DissipationResult dissipation_certificate(const Trajectory& traj, double rel_tol) {
  return scan(traj.energy_trace, rel_tol);
}

DissipationResult dissipation_certificate(const JKOFlow& flow, double rel_tol) {
  std::vector<std::pair<double, double>> trace;
  for (const auto& s : flow.steps) trace.emplace_back(s.time, s.energy.total);
  return scan(trace, rel_tol);
}

CommutationReport regularization_commutation(const ChaosConfig& config, const Reference& reference,
                                             const std::function<double(std::size_t)>& epsilon_N,
                                             const Executor& executor) {
  CommutationReport rep;
  rep.exact = chaos_sweep(config, reference, executor);

  // One sweep per N since the regularized kernel depends on N; seeds only depend on (master, N, seed).
  ChaosReport& reg = rep.regularized;
  reg.N_grid = rep.exact.N_grid;
  reg.times = rep.exact.times;
  reg.deterministic = rep.exact.deterministic;
  std::vector<std::vector<double>> means(reg.times.size());
  for (std::size_t N : rep.exact.N_grid) {
    ChaosConfig c = config;
    c.N_grid = {N};
    const RegularizedPotential wr = regularize(config.potential, epsilon_N(N), 1e3);
    c.potential = wr.spec;
    if (config.noise == NoiseScheme::split_implicit) c.noise = NoiseScheme::euler_maruyama;
    ChaosReport one = chaos_sweep(c, reference, executor);
    reg.cells.insert(reg.cells.end(), one.cells.begin(), one.cells.end());
    reg.summary.insert(reg.summary.end(), one.summary.begin(), one.summary.end());
    reg.failures.insert(reg.failures.end(), one.failures.begin(), one.failures.end());
    reg.reference_limited = reg.reference_limited || one.reference_limited;
  }
  const std::size_t nt = reg.times.size();
  for (std::size_t k = 0; k < nt; ++k) {
    std::vector<double> m;
    for (std::size_t iN = 0; iN < reg.N_grid.size(); ++iN) m.push_back(reg.summary[iN * nt + k].mean);
    reg.slopes.push_back(fit_slope(reg.N_grid, m));
  }

  rep.decaying = true;
  double prev = kInf;
  for (std::size_t iN = 0; iN < reg.N_grid.size(); ++iN) {
    CommutationRow row{reg.N_grid[iN], 0.0, 0.0, true};
    for (std::size_t k = 0; k < nt; ++k) {
      const auto& a = rep.exact.summary[iN * nt + k];
      const auto& b = reg.summary[iN * nt + k];
      const double d = std::abs(a.mean - b.mean);
      if (!(d <= row.sup_difference)) {
        row.sup_difference = d;
        row.pooled_stderr = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
      }
    }
    row.within_two_stderr = row.sup_difference <= 2.0 * row.pooled_stderr;
    if (!(row.sup_difference < prev)) rep.decaying = false;
    prev = row.sup_difference;
    rep.rows.push_back(row);
  }
  return rep;
}

ConvexityResult geodesic_convexity_check(const PotentialSpec& p, double beta, std::size_t pairs, std::size_t M,
                                         const std::vector<double>& s_grid, std::uint64_t seed) {
  const double lambda = free_energy_lambda(p);
  ConvexityResult res{-kInf, 0};
  std::uniform_real_distribution<double> shift(-1.0, 1.0), scale(0.5, 2.0);
  for (std::size_t i = 0; i < pairs; ++i) {
    auto rng = make_stream(seed, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&]() {
      const double m = shift(rng), s = scale(rng);
      QuantileMeasure q;
      q.U.resize(M);
      for (auto& u : q.U) u = m + s * normal(rng);
      std::sort(q.U.begin(), q.U.end());
      // distinct atoms keep the entropy and singular kernels finite
      for (std::size_t k = 1; k < M; ++k) q.U[k] = std::max(q.U[k], q.U[k - 1] + 1e-9);
      return q;
    };
    const QuantileMeasure a = draw(), b = draw();
    const double fa = free_energy(a, p, beta).total, fb = free_energy(b, p, beta).total;
    const double w2 = w2_quantile(a, b);
    for (double s : s_grid) {
      QuantileMeasure mid;
      mid.U.resize(M);
      for (std::size_t k = 0; k < M; ++k) mid.U[k] = (1.0 - s) * a.U[k] + s * b.U[k];
      const double lhs = free_energy(mid, p, beta).total;
      const double rhs = (1.0 - s) * fa + s * fb - 0.5 * lambda * s * (1.0 - s) * w2 * w2;
      res.worst_violation = std::max(res.worst_violation, lhs - rhs);
      ++res.checks;
    }
  }
  return res;
}

MeanEnergyGap mean_energy_consistency(const RegularizedPotential& wr, const ParticleState& x) {
  const std::size_t N = x.size();
  if (N < 2) throw Error("mean-energy consistency needs N >= 2");
  const PotentialSpec& p = wr.spec;
  const double Nd = static_cast<double>(N);
  double pairs = 0.0, sup = std::abs(p.w(0.0)), ext = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    ext += p.external().value(x.at(i));
    for (std::size_t j = 0; j < N; ++j) {
      const double v = p.pair(x.at(i), x.at(j));
      pairs += v;
      if (i != j) sup = std::max(sup, std::abs(v));
    }
  }
  const double mean_field = 0.5 * pairs / (Nd * Nd) + ext / Nd;
  MeanEnergyGap g;
  g.gap = std::abs(energy_EN(x, p) / Nd - mean_field);
  g.C_R = sup * Nd / (Nd - 1.0);
  g.bound = g.C_R / Nd;
  return g;
}

std::vector<double> beta_stability(const QuantileMeasure& mu0, const PotentialSpec& p, const std::vector<double>& betas,
                                   double tau, double T, const JKOOptions& options) {
  const JKOFlow limit = jko_flow(mu0, tau, T, p, kInf, options);
  std::vector<double> out;
  for (double beta : betas) {
    const JKOFlow f = jko_flow(mu0, tau, T, p, beta, options);
    out.push_back(w2_between(f.steps.back().mu, limit.steps.back().mu));
  }
  return out;
}

}  // namespace chaoslab
