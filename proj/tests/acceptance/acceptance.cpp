// Acceptance run: one PASS/FAIL line per criterion, then a summary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chaoslab/diagnostics.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/gradient_flow.hpp"
#include "chaoslab/oracles.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/potentials.hpp"
#include "chaoslab/rng.hpp"
#include "chaoslab/transport.hpp"

using namespace chaoslab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o{false, ""};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("C%d %s %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

PotentialSpec quadratic_only() { return PotentialSpec::zero().with_external(ExternalPotential::quadratic(1.0)); }
PotentialSpec dyson() { return PotentialSpec::logarithmic().with_external(ExternalPotential::quadratic(1.0)); }

double diameter(const ParticleState& s) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < s.dim; ++k) r2 += std::pow(s.at(i)[k] - s.at(j)[k], 2);
      d2 = std::max(d2, r2);
    }
  return std::sqrt(d2);
}

// ---------------------------------------------------------------------------

Outcome linear_flows() {
  const auto mu0 = gaussian_quantiles({0.0, 1.0}, 512);
  auto t0 = Clock::now();
  const auto heat = jko_flow(mu0, 1e-3, 1.0, PotentialSpec::zero(), 1.0);
  const double heat_s = seconds_since(t0);
  const double d_heat = w2_between(heat.at(1.0), heat_flow({0.0, 1.0}, 1.0, 1.0, 512));
  t0 = Clock::now();
  const auto ou = jko_flow(mu0, 1e-3, 1.0, quadratic_only(), 1.0);
  const double ou_s = seconds_since(t0);
  const double d_ou = w2_between(ou.at(1.0), ou_flow({0.0, 1.0}, 1.0, 1.0, 1.0, 512));
  const bool pass = d_heat <= 0.02 && d_ou <= 0.02 && heat_s <= 60.0 && ou_s <= 60.0;
  return {pass, "heat W2=" + num(d_heat) + " (" + num(heat_s) + "s), OU W2=" + num(d_ou) + " (" + num(ou_s) +
                    "s); need W2 <= 0.02 and <= 60s each"};
}

Outcome jko_rate() {
  const auto mu0 = gaussian_quantiles({0.0, 1.0}, 512);
  const std::vector<double> taus = {1e-2, 5e-3, 2.5e-3, 1.25e-3};
  std::vector<QuantileMeasure> finals;
  for (double tau : taus) finals.push_back(jko_flow(mu0, tau, 1.0, dyson(), kInf).at(1.0));
  std::vector<double> lx, ly;
  std::string diffs;
  for (std::size_t k = 0; k + 1 < taus.size(); ++k) {
    const double d = w2_between(finals[k], finals[k + 1]);
    diffs += (k ? ", " : "") + num(d);
    lx.push_back(std::log(taus[k]));
    ly.push_back(std::log(d));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double p = sxy / sxx;
  return {p >= 0.4 && p <= 1.1, "successive W2 differences " + diffs + ", fitted exponent " + num(p) + " in [0.4, 1.1]"};
}

Outcome contractivity() {
  const auto mu = gaussian_quantiles({0.0, 1.0}, 512), nu = gaussian_quantiles({1.0, 1.0}, 512);
  const auto rows = contractivity_test(mu, nu, dyson(), kInf, 1e-3, {0.5, 1.0, 2.0});
  bool pass = rows.size() == 3;
  std::string d;
  for (const auto& r : rows) {
    pass = pass && r.ratio <= std::exp(-r.time) * 1.05;
    d += (d.empty() ? "" : ", ") + ("t=" + num(r.time) + ": ratio " + num(r.ratio) + " vs 1.05e^-t=" +
                                    num(1.05 * std::exp(-r.time)));
  }
  return {pass, d};
}

ChaosConfig singular_chaos() {
  ChaosConfig c;
  c.potential = dyson();
  c.beta = 1.0;
  c.initial = InitialMeasure::gaussian(0.0, 1.0);
  c.N_grid = {32, 128, 512};
  c.seeds = 16;
  c.times = {0.25, 0.5, 1.0};
  c.dt = 1e-3;
  c.noise = NoiseScheme::split_implicit;
  c.master_seed = 2024;
  return c;
}

const Reference& singular_reference() {
  static const Reference r = [] {
    const auto c = singular_chaos();
    JKOReferenceOptions o;
    o.tau = 1e-3;
    o.M = 512;
    return jko_reference(c.initial, c.potential, c.beta, 1.0, c.times, o);
  }();
  return r;
}

Outcome propagation_of_chaos() {
  const auto t0 = Clock::now();
  const auto rep = chaos_sweep(singular_chaos(), singular_reference());
  const double elapsed = seconds_since(t0);
  bool pass = rep.failures.empty() && elapsed <= 900.0;
  std::string d;
  for (double t : rep.times) {
    std::vector<double> m;
    for (auto N : rep.N_grid) m.push_back(rep.at(N, t).mean);
    bool dec = true;
    for (std::size_t i = 1; i < m.size(); ++i) dec = dec && m[i] < m[i - 1];
    const double ratio = m.back() / m.front();
    pass = pass && dec && ratio <= 0.5;
    d += "t=" + num(t) + ": means";
    for (double v : m) d += " " + num(v);
    d += " ratio " + num(ratio) + (dec ? "" : " (not decreasing)") + "; ";
  }
  if (rep.reference_limited) d += "reference-limited; ";
  if (!rep.failures.empty()) d += std::to_string(rep.failures.size()) + " failed runs; ";
  d += "sweep " + num(elapsed) + "s <= 900s";
  return {pass, d};
}

Outcome dyson_equilibrium_check() {
  const auto flow = jko_flow(gaussian_quantiles({0.0, 1.0}, 512), 1e-2, 10.0, dyson(), kInf);
  const auto eq = dyson_equilibrium(4096);
  const double d = w2_between(flow.at(10.0), eq.mu);
  const double m2 = eq.mu.second_moment();
  const double lo = eq.mu.U.front(), hi = eq.mu.U.back();
  const bool pass = d <= 0.02 && std::abs(m2 - 0.5) <= 0.01 && std::abs(hi - std::sqrt(2.0)) <= 0.02 &&
                    std::abs(lo + std::sqrt(2.0)) <= 0.02;
  return {pass, "W2(flow at T=10, equilibrium)=" + num(d) + " <= 0.02, second moment " + num(m2) +
                    " (0.5 +- 0.01), support [" + num(lo) + ", " + num(hi) + "] vs +-1.414 +- 0.02"};
}

Outcome burgers_correspondence() {
  const auto w = PotentialSpec::attractive_power(0.0);  // |x|
  const auto mu0 = PiecewiseMeasure::uniform(0.0, 1.0);
  const auto init = InitialMeasure::uniform(0.0, 1.0, InitialMeasure::Placement::quantile);
  const double dt = 1e-3;
  bool pass = true;
  std::string d;
  double collapse = kInf;
  for (std::size_t N : {8, 64, 512}) {
    SimulationConfig sc;
    sc.potential = w;
    sc.initial = ParticleState::from_positions(init.sample(N, 1, 0));
    sc.dynamics = Dynamics::sticky;
    sc.dt = dt;
    sc.T = 0.99;
    sc.output_times = {0.25, 0.5, 0.99};
    sc.full_energy_trace = false;
    const auto tr = simulate(sc);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
      const auto& [t, s] = tr.snapshots[i];
      EmpiricalMeasure m;
      m.positions = s.positions;
      m.weights = tr.snapshot_masses[i];
      worst = std::max(worst, BurgersSolution(mu0, t, kInf).w2_to(m));
    }
    pass = pass && worst <= 3.0 / N;
    d += "N=" + std::to_string(N) + " max W2 " + num(worst) + " <= " + num(3.0 / N) + "; ";

    if (N == 64) {
      StickyState st = StickyState::uniform(ParticleState::from_positions(init.sample(N, 1, 0)));
      double t = 0.0;
      while (st.state.size() > 1 && t < 2.0) {
        st = step_sticky(st, w, dt).next;
        t += dt;
      }
      collapse = st.state.size() == 1 ? t : kInf;
      const bool at_half = st.state.size() == 1 && std::abs(st.state.positions[0] - 0.5) < 1e-9;
      pass = pass && at_half;
    }
  }
  const bool collapse_ok = std::abs(collapse - 1.0) <= 2 * dt;
  pass = pass && collapse_ok;
  d += "total collapse to delta_1/2 at t=" + num(collapse) + " (required 1 +- " + num(2 * dt) + ")";

  // two particles under the N-particle energy: relative speed 2
  ParticleState two = ParticleState::from_positions({0.0, 1.0});
  double t = 0.0;
  while (two.positions[1] - two.positions[0] > 0.0 && t < 5.0) {
    two = step_deterministic(two, w, dt, Scheme::euler);
    t += dt;
  }
  const bool pair_ok = std::abs(t - 0.5) <= 2 * dt;
  pass = pass && pair_ok;
  d += "; two-particle collision at " + num(t) + " vs gap/2 = 0.5";
  return {pass, d};
}

std::vector<EmpiricalMeasure> planar_runs(std::size_t first_seed, std::size_t count) {
  std::vector<EmpiricalMeasure> out;
  const auto init = InitialMeasure::gaussian(0.0, 1.0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t seed = derive_seed(77, first_seed + k);
    SimulationConfig sc;
    sc.potential = PotentialSpec::attractive_power(0.0);
    sc.initial = ParticleState::from_positions(init.sample(64, 2, seed), 2, 10.0, derive_seed(seed, 1));
    sc.dynamics = Dynamics::stochastic;
    sc.noise = NoiseScheme::euler_maruyama;
    sc.dt = 1e-3;
    sc.T = 1.0;
    sc.full_energy_trace = false;
    out.push_back(empirical(simulate(sc).snapshots.back().second));
  }
  return out;
}

EmpiricalMeasure pooled(const std::vector<EmpiricalMeasure>& runs) {
  std::vector<double> x;
  for (const auto& r : runs) x.insert(x.end(), r.positions.begin(), r.positions.end());
  return EmpiricalMeasure::uniform(std::move(x), 2);
}

Outcome planar_attraction() {
  const auto a = planar_runs(0, 8), b = planar_runs(8, 8);
  const double between = w2_assignment(pooled(a), pooled(b));
  double spread = 0.0;
  std::size_t pairs = 0;
  for (const auto* e : {&a, &b})
    for (std::size_t i = 0; i < e->size(); ++i)
      for (std::size_t j = i + 1; j < e->size(); ++j, ++pairs) spread += w2_assignment((*e)[i], (*e)[j]);
  spread /= pairs;
  const bool law_ok = between <= 2.0 * spread;

  StickyState st = StickyState::uniform(
      ParticleState::from_positions(InitialMeasure::gaussian(0.0, 1.0).sample(64, 2, 5), 2));
  double diam = diameter(st.state), t = 0.0;
  bool monotone = true;
  const double dt = 1e-3;
  while (diam >= 1e-3 && t < 20.0) {
    st = step_sticky(st, PotentialSpec::attractive_power(0.0), dt).next;
    t += dt;
    const double next = diameter(st.state);
    monotone = monotone && next <= diam * (1 + 1e-12);
    diam = next;
  }
  const bool agg_ok = monotone && diam < 1e-3;
  return {law_ok && agg_ok, "ensemble W2 " + num(between) + " <= 2 x spread " + num(spread) + "; beta=inf diameter " +
                                num(diam) + " at t=" + num(t) + (monotone ? ", monotone" : ", NOT monotone")};
}

Outcome convexity() {
  const std::vector<std::pair<std::string, PotentialSpec>> setups = {
      {"logarithmic", PotentialSpec::logarithmic()},
      {"repulsive s=0.5", PotentialSpec::repulsive_power(0.5)},
      {"attractive alpha=0", PotentialSpec::attractive_power(0.0)},
      {"attractive alpha=1", PotentialSpec::attractive_power(1.0)},
      {"morse", PotentialSpec::morse(1.0, 1.0, 0.5, 2.0)},
  };
  bool pass = true;
  std::string d;
  std::uint64_t seed = 1;
  for (const auto& [name, p] : setups) {
    double worst = -kInf;
    for (double beta : {kInf, 1.0}) {
      const auto r = geodesic_convexity_check(p, beta, 1000, 128, {0.25, 0.5, 0.75}, seed++);
      worst = std::max(worst, r.worst_violation);
    }
    pass = pass && worst <= 1e-9;
    d += (d.empty() ? "" : ", ") + name + " " + num(worst);
  }
  return {pass, "worst violation per setup: " + d + " (<= 1e-9)"};
}

Outcome commutation() {
  const auto rep = regularization_commutation(singular_chaos(), singular_reference(),
                                              [](std::size_t N) { return 1.0 / static_cast<double>(N); });
  const auto& last = rep.rows.back();
  std::string d;
  for (const auto& r : rep.rows)
    d += "N=" + std::to_string(r.N) + ": |diff| " + num(r.sup_difference) + " vs 2 x " + num(r.pooled_stderr) + "; ";
  const bool ok = last.N == 512 && last.within_two_stderr && rep.exact.failures.empty() && rep.regularized.failures.empty();
  return {ok, d + "required at N=512"};
}

// Independent checks of the module invariants.
Outcome invariants() {
  const auto t0 = Clock::now();
  std::vector<std::string> bad;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;

  // gradient against central differences
  {
    std::vector<double> x;
    for (int i = 0; i < 8; ++i) x.push_back(0.5 * i + 0.1 * normal(rng));
    const auto p = dyson();
    const auto s = ParticleState::from_positions(x);
    const auto g = grad_EN(s, p);
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto up = x, dn = x;
      up[i] += 1e-6;
      dn[i] -= 1e-6;
      const double fd = (energy_EN(ParticleState::from_positions(up), p) - energy_EN(ParticleState::from_positions(dn), p)) / 2e-6;
      if (std::abs(fd - g[i]) > 1e-5 * (1 + std::abs(g[i]))) bad.push_back("gradient");
    }
  }
  // metric axioms and isometry against every permutation
  for (std::size_t n = 1; n <= 7; ++n) {
    std::vector<double> x(n), y(n), z(n);
    for (auto* v : {&x, &y, &z})
      for (double& e : *v) e = normal(rng);
    const auto X = EmpiricalMeasure::uniform(x), Y = EmpiricalMeasure::uniform(y), Z = EmpiricalMeasure::uniform(z);
    const double xy = wp_discrete_1d(X, Y, 2), yx = wp_discrete_1d(Y, X, 2);
    if (wp_discrete_1d(X, X, 2) != 0.0 || std::abs(xy - yx) > 1e-14 ||
        xy > wp_discrete_1d(X, Z, 2) + wp_discrete_1d(Z, Y, 2) + 1e-12)
      bad.push_back("metric axioms");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = kInf;
    do {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += (x[i] - y[perm[i]]) * (x[i] - y[perm[i]]);
      best = std::min(best, c / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (std::abs(std::sqrt(best) - xy) > 1e-12) bad.push_back("isometry n=" + std::to_string(n));
  }
  // dissipation along particle and JKO flows
  {
    SimulationConfig sc;
    sc.potential = dyson();
    std::vector<double> x;
    for (int i = 0; i < 32; ++i) x.push_back(-2.0 + 0.13 * i);
    sc.initial = ParticleState::from_positions(x);
    sc.dt = 1e-3;
    if (!dissipation_certificate(simulate(sc)).pass) bad.push_back("particle dissipation");
    if (!dissipation_certificate(jko_flow(gaussian_quantiles({0.0, 1.0}, 256), 1e-2, 1.0, dyson(), 2.0)).pass)
      bad.push_back("jko dissipation");
  }
  // sticky mass and centre of mass
  {
    std::vector<double> x;
    for (int i = 0; i < 40; ++i) x.push_back(normal(rng));
    StickyState st = StickyState::uniform(ParticleState::from_positions(x));
    const double c0 = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    for (int k = 0; k < 2000; ++k) st = step_sticky(st, PotentialSpec::attractive_power(0.0), 1e-3).next;
    double mass = 0.0, c = 0.0;
    for (std::size_t i = 0; i < st.masses.size(); ++i) {
      mass += st.masses[i];
      c += st.masses[i] * st.state.positions[i];
    }
    if (std::abs(mass - 1.0) > 1e-12 || std::abs(c - c0) > 1e-12) bad.push_back("sticky conservation");
  }
  // bit reproducibility
  {
    ChaosConfig c;
    c.potential = dyson();
    c.beta = 2.0;
    c.N_grid = {16, 32};
    c.seeds = 3;
    c.times = {0.0, 0.1};
    const Reference r = reference_from_quantiles([](double) { return gaussian_quantiles({0.0, 1.0}, 1024); }, "n01");
    const auto a = chaos_sweep(c, r), b = chaos_sweep(c, r);
    for (std::size_t i = 0; i < a.cells.size(); ++i)
      if (a.cells[i].distance != b.cells[i].distance) {
        bad.push_back("reproducibility");
        break;
      }
  }
  const double elapsed = seconds_since(t0);
  if (elapsed > 600.0) bad.push_back("runtime");
  std::string d = bad.empty() ? "gradient, metric, isometry (N<=7), dissipation, sticky conservation, reproducibility"
                              : "failed:";
  for (const auto& b : bad) d += " " + b;
  return {bad.empty(), d + "; " + num(elapsed) + "s <= 600s"};
}

}  // namespace

int main() {
  criterion(1, "linear flows match heat and OU oracles", linear_flows);
  criterion(2, "JKO time-step rate", jko_rate);
  criterion(3, "contractivity", contractivity);
  criterion(4, "propagation of chaos, stochastic logarithmic", propagation_of_chaos);
  criterion(5, "Dyson equilibrium", dyson_equilibrium_check);
  criterion(6, "sticky particles and Burgers entropy solution", burgers_correspondence);
  criterion(7, "planar attraction with noise and aggregation", planar_attraction);
  criterion(8, "generalized-geodesic convexity", convexity);
  criterion(9, "regularization commutes with N", commutation);
  criterion(10, "invariant suite", invariants);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
