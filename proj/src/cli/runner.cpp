#include "chaoslab/cli/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "chaoslab/cli/thread_pool.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/gradient_flow.hpp"
#include "chaoslab/oracles.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/rng.hpp"

namespace chaoslab::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class Artifacts {
 public:
  explicit Artifacts(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  std::string path(const std::string& name) {
    files_.push_back(name);
    return (fs::path(dir_) / name).string();
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const std::size_t D = tr.snapshots.empty() ? 1 : tr.snapshots.front().second.dim;
  out << "time,particle_index";
  for (std::size_t d = 1; d <= D; ++d) out << ",x_" << d;
  out << ",mass\n" << std::setprecision(17);
  for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
    const auto& [t, st] = tr.snapshots[s];
    const std::size_t n = st.size();
    for (std::size_t i = 0; i < n; ++i) {
      out << t << ',' << i;
      for (double x : st.at(i)) out << ',' << x;
      out << ',' << (tr.snapshot_masses.empty() ? 1.0 / static_cast<double>(n) : tr.snapshot_masses[s][i]) << '\n';
    }
  }
}

void write_merges_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "time,survivor,absorbed,mass\n" << std::setprecision(17);
  for (const auto& e : tr.merge_events) {
    out << e.time << ',' << e.survivor << ',';
    for (std::size_t k = 0; k < e.absorbed.size(); ++k) out << (k ? ";" : "") << e.absorbed[k];
    out << ',' << e.mass << '\n';
  }
}

void write_energy_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "time,energy_per_particle\n" << std::setprecision(17);
  for (const auto& [t, e] : tr.energy_trace) out << t << ',' << e << '\n';
}

void write_law_csv(const std::string& path, const std::vector<double>& times,
                   const std::function<QuantileMeasure(double)>& law) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "time,quantile_index,U\n" << std::setprecision(17);
  for (double t : times) {
    const QuantileMeasure q = law(t);
    for (std::size_t k = 0; k < q.M(); ++k) out << t << ',' << k << ',' << q.U[k] << '\n';
  }
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

// beta = inf turns the stochastic system into the deterministic one, as in chaos_sweep
Dynamics effective_dynamics(const ExperimentConfig& c, std::size_t N) {
  if (c.dynamics == Dynamics::stochastic && !std::isfinite(c.beta_for(N))) return Dynamics::deterministic;
  return c.dynamics;
}

Trajectory simulate_one(const ExperimentConfig& c, std::size_t N, std::size_t seed, bool full_trace) {
  const std::uint64_t cell_seed = derive_seed(derive_seed(c.seed, N), seed);
  const InitialMeasure mu0 = c.initial();
  SimulationConfig sc;
  sc.potential = c.potential();
  sc.initial = ParticleState::from_positions(mu0.sample(N, c.dim, cell_seed), c.dim, c.beta_for(N),
                                             derive_seed(cell_seed, 1));
  sc.dynamics = effective_dynamics(c, N);
  sc.scheme = c.scheme;
  sc.noise = c.noise;
  sc.dt = c.dt;
  sc.T = c.T;
  sc.output_times = c.effective_output_times();
  sc.full_energy_trace = full_trace;
  return simulate(sc);
}

bool is_gaussian_setup(const ExperimentConfig& c) { return c.family == "gaussian" && c.kernel == "zero"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace

ReferenceKind resolve_reference(const ExperimentConfig& c) {
  if (c.reference != ReferenceKind::automatic) return c.reference;
  const bool finite_beta = c.beta_schedule == BetaSchedule::constant && std::isfinite(c.beta);
  if (is_gaussian_setup(c) && c.external == "zero" && finite_beta) return ReferenceKind::heat;
  if (is_gaussian_setup(c) && c.external == "quadratic") return ReferenceKind::ou;
  if (c.kernel == "attractive_power" && c.alpha == 0.0 && c.external == "zero" && !finite_beta)
    return ReferenceKind::burgers;
  return ReferenceKind::jko;
}

ReferenceBundle make_reference(const ExperimentConfig& c, const std::vector<double>& times, bool refine) {
  ReferenceBundle b;
  b.kind = resolve_reference(c);
  const double beta = c.beta_schedule == BetaSchedule::sqrtN ? kInf : c.beta;
  const std::size_t M = c.M;
  const Gaussian g{c.mean, c.sigma};
  switch (b.kind) {
    case ReferenceKind::heat: {
      if (!is_gaussian_setup(c) || c.external != "zero") throw Error("heat reference needs w = 0, V = 0, gaussian data");
      if (!std::isfinite(beta)) throw Error("heat reference needs a finite beta");
      const std::size_t MR = c.reference_M;
      b.reference = reference_from_quantiles([=](double t) { return heat_flow(g, beta, t, MR); }, "heat");
      b.law = [=](double t) { return heat_flow(g, beta, t, M); };
      break;
    }
    case ReferenceKind::ou: {
      if (!is_gaussian_setup(c) || c.external != "quadratic")
        throw Error("ou reference needs w = 0, quadratic V, gaussian data");
      const double k = c.c;
      const std::size_t MR = c.reference_M;
      b.reference = reference_from_quantiles([=](double t) { return ou_flow(g, k, beta, t, MR); }, "ou");
      b.law = [=](double t) { return ou_flow(g, k, beta, t, M); };
      break;
    }
    case ReferenceKind::burgers: {
      if (std::isfinite(beta) && c.command != Command::oracle)
        throw Error("the Burgers reference for particle runs needs beta = inf");
      const PiecewiseMeasure mu0 = c.initial().piecewise();
      b.reference = reference_from_burgers(mu0);
      b.law = [=](double t) { return BurgersSolution(mu0, t, beta).quantiles(M); };
      break;
    }
    case ReferenceKind::dyson: {
      DysonOptions opts;
      auto eq = std::make_shared<const QuantileMeasure>(dyson_equilibrium(c.reference_M, opts).mu);
      b.reference = reference_from_quantiles([eq](double) { return *eq; }, "dyson");
      b.law = [eq, M](double) {
        return quantile_from_empirical(empirical(*eq), M);
      };
      break;
    }
    case ReferenceKind::jko:
    case ReferenceKind::automatic: {
      if (c.dim != 1) throw Error("JKO references are one-dimensional");
      const InitialMeasure mu0 = c.initial();
      JKOFlow flow = jko_flow(mu0.quantiles(c.reference_M), c.reference_tau, c.T, c.potential(), beta);
      std::vector<double> refinement;
      if (refine) {
        const JKOFlow fine = jko_flow(mu0.quantiles(2 * c.reference_M), 0.5 * c.reference_tau, c.T, c.potential(), beta);
        for (double t : times) refinement.push_back(w2_between(flow.at(t), fine.at(t)));
      }
      b.reference = reference_from_flow(flow);
      b.reference.refinement_error = std::move(refinement);
      auto shared = std::make_shared<const JKOFlow>(std::move(flow));
      b.law = [shared](double t) { return shared->at(t); };
      break;
    }
  }
  return b;
}

RunResult run(const ExperimentConfig& c, std::ostream& log) {
  RunResult r;
  auto contract = [&](const std::string& name, bool pass, const std::string& detail) {
    r.contracts.push_back({name, pass, detail});
    log << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
  };

  Artifacts art(c.output);
  write_text(art.path("config.ini"), emit_config(c));
  const std::vector<double> times = c.effective_output_times();
  const Executor exec = thread_pool_executor(c.workers);

  try {
    switch (c.command) {
      case Command::validate: break;

      case Command::simulate: {
        const Trajectory tr = simulate_one(c, c.N, 0, true);
        write_trajectory_csv(art.path("trajectory.csv"), tr);
        write_energy_csv(art.path("energy.csv"), tr);
        if (c.dynamics == Dynamics::sticky) write_merges_csv(art.path("merges.csv"), tr);
        if (effective_dynamics(c, c.N) != Dynamics::stochastic) {
          const DissipationResult d = dissipation_certificate(tr);
          contract("energy dissipation", d.pass,
                   "worst increase " + num(d.worst_violation) + " at t = " + num(d.worst_time));
        }
        break;
      }

      case Command::jko: {
        const JKOFlow flow = jko_flow(c.initial().quantiles(c.M), c.tau, c.T, c.potential(), c.beta);
        write_flow_csv(art.path("flow.csv"), flow);
        write_flow_summary_csv(art.path("flow_summary.csv"), flow);
        const DissipationResult d = dissipation_certificate(flow);
        contract("free-energy dissipation", d.pass,
                 "worst increase " + num(d.worst_violation) + " at t = " + num(d.worst_time));
        break;
      }

      case Command::oracle: {
        const ReferenceBundle b = make_reference(c, times, false);
        write_law_csv(art.path("oracle.csv"), times, b.law);
        if (b.kind == ReferenceKind::heat || b.kind == ReferenceKind::ou) {
          double worst = 0.0;
          for (double t : times)
            worst = std::max(worst, gaussian_fokker_planck_residual({c.mean, c.sigma},
                                                                    b.kind == ReferenceKind::ou ? c.c : 0.0, c.beta, t));
          contract("Fokker-Planck residual", worst <= 1e-8, num(worst));
        } else if (b.kind == ReferenceKind::burgers && !std::isfinite(c.beta)) {
          double worst = 0.0;
          const PiecewiseMeasure mu0 = c.initial().piecewise();
          for (double t : times)
            if (t > 1e-3) worst = std::max(worst, rankine_hugoniot_residual(mu0, t));
          contract("Rankine-Hugoniot residual", worst <= 1e-6, num(worst));
        } else if (b.kind == ReferenceKind::dyson) {
          const DysonEquilibrium eq = dyson_equilibrium(c.reference_M);
          contract("Dyson optimality residual", eq.residual <= 1e-6, num(eq.residual));
        }
        break;
      }

      case Command::compare: {
        const Trajectory tr = simulate_one(c, c.N, 0, false);
        write_trajectory_csv(art.path("trajectory.csv"), tr);
        const ReferenceBundle b = make_reference(c, times, false);
        write_law_csv(art.path("oracle.csv"), times, b.law);
        std::ofstream out(art.path("distance.csv"));
        out << "time,w2_distance\n" << std::setprecision(17);
        double worst = 0.0;
        for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
          const double t = tr.snapshots[i].first;
          const double d = b.reference.distance(snapshot_measure(tr, i), t);
          out << t << ',' << d << '\n';
          worst = std::max(worst, d);
        }
        contract("distance to " + b.reference.name, worst <= c.tolerance,
                 "max W2 " + num(worst) + ", tolerance " + num(c.tolerance));
        break;
      }

      case Command::sweep: {
        ChaosConfig cc;
        cc.potential = c.potential();
        cc.beta = c.beta;
        cc.initial = c.initial();
        cc.seeds = c.seeds;
        cc.times = times;
        cc.dt = c.dt;
        cc.dynamics = c.dynamics;
        cc.noise = c.noise;
        cc.master_seed = c.seed;
        cc.dim = c.dim;
        const ReferenceBundle b = make_reference(c, times, true);

        ChaosReport rep;
        if (c.beta_schedule == BetaSchedule::constant) {
          cc.N_grid = c.N_grid;
          rep = chaos_sweep(cc, b.reference, exec);
        } else {
          std::vector<std::size_t> grid = c.N_grid;
          std::sort(grid.begin(), grid.end());
          grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
          for (std::size_t N : grid) {
            cc.N_grid = {N};
            cc.beta = c.beta_for(N);
            ChaosReport one = chaos_sweep(cc, b.reference, exec);
            if (rep.N_grid.empty()) {
              rep = one;
              continue;
            }
            rep.N_grid.push_back(N);
            rep.cells.insert(rep.cells.end(), one.cells.begin(), one.cells.end());
            rep.summary.insert(rep.summary.end(), one.summary.begin(), one.summary.end());
            rep.failures.insert(rep.failures.end(), one.failures.begin(), one.failures.end());
            rep.reference_limited = rep.reference_limited || one.reference_limited;
          }
          rep.slopes.clear();
          for (double t : rep.times) {
            std::vector<double> m;
            for (std::size_t N : rep.N_grid) m.push_back(rep.at(N, t).mean);
            rep.slopes.push_back(fit_slope(rep.N_grid, m));
          }
        }
        write_chaos_csv(art.path("chaos.csv"), rep);
        write_chaos_summary_csv(art.path("chaos_summary.csv"), rep);
        try {
          const std::string svg = (fs::path(c.output) / "chaos.svg").string();
          write_chaos_svg(svg, rep);
          art.path("chaos.svg");
        } catch (const std::exception& e) {
          r.warnings.push_back(std::string("plot skipped: ") + e.what());
        }
        for (const auto& f : rep.failures) r.failures.push_back(f);
        if (rep.reference_limited)
          r.warnings.push_back("reference-limited: self-refinement error of the reference is at least 20% of the "
                               "smallest mean distance");
        std::ostringstream slopes;
        for (std::size_t k = 0; k < rep.times.size(); ++k)
          slopes << (k ? ", " : "") << "t=" << rep.times[k] << ": " << rep.slopes[k];
        log << "slopes " << slopes.str() << '\n';
        if (c.placement == "iid" && rep.times.front() == 0.0 && rep.N_grid.size() > 1) {
          bool mono = true;
          for (std::size_t i = 1; i < rep.N_grid.size(); ++i)
            mono = mono && rep.at(rep.N_grid[i], 0.0).mean < rep.at(rep.N_grid[i - 1], 0.0).mean;
          contract("initial distance decreases in N", mono, "iid placement at t = 0");
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    r.failures.push_back(e.what());
  }

  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
  for (const auto& f : r.failures) log << "failure: " << f << '\n';

  std::ostringstream report;
  report << "command " << to_string(c.command) << '\n';
  for (const auto& k : r.contracts) report << (k.pass ? "PASS " : "FAIL ") << k.name << ": " << k.detail << '\n';
  for (const auto& w : r.warnings) report << "warning: " << w << '\n';
  for (const auto& f : r.failures) report << "failure: " << f << '\n';
  write_text(art.path("report.txt"), report.str());

  r.manifest = build_manifest(art.dir(), art.files());
  write_manifest((fs::path(art.dir()) / "manifest.tsv").string(), r.manifest);

  const bool all_pass = std::all_of(r.contracts.begin(), r.contracts.end(), [](const Contract& k) { return k.pass; });
  r.exit_code = all_pass && r.failures.empty() ? 0 : 1;
  return r;
}

}  // namespace chaoslab::cli
