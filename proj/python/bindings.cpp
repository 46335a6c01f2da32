#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "chaoslab/cli/config.hpp"
#include "chaoslab/cli/runner.hpp"
#include "chaoslab/diagnostics.hpp"
#include "chaoslab/errors.hpp"
#include "chaoslab/gradient_flow.hpp"
#include "chaoslab/oracles.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/potentials.hpp"
#include "chaoslab/transport.hpp"

namespace py = pybind11;
using namespace chaoslab;

namespace {

Dynamics dynamics_from(const std::string& s) {
  if (s == "deterministic") return Dynamics::deterministic;
  if (s == "stochastic") return Dynamics::stochastic;
  if (s == "sticky") return Dynamics::sticky;
  throw Error("dynamics must be deterministic, stochastic or sticky, got '" + s + "'");
}

NoiseScheme noise_from(const std::string& s) {
  if (s == "split_implicit") return NoiseScheme::split_implicit;
  if (s == "euler_maruyama") return NoiseScheme::euler_maruyama;
  throw Error("noise must be split_implicit or euler_maruyama, got '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_chaoslab, m) {
  m.doc() = "Mean-field particle systems, minimizing-movement flows and their reference solutions.";

  py::register_exception<Error>(m, "ChaoslabError", PyExc_RuntimeError);
  m.attr("inf") = kInf;

  py::class_<ExternalPotential>(m, "ExternalPotential")
      .def_static("zero", &ExternalPotential::zero)
      .def_static("quadratic", &ExternalPotential::quadratic, py::arg("c") = 1.0)
      .def_static("polynomial", py::overload_cast<std::vector<double>>(&ExternalPotential::polynomial))
      .def("value", py::overload_cast<double>(&ExternalPotential::value, py::const_))
      .def("derivative", py::overload_cast<double>(&ExternalPotential::derivative, py::const_))
      .def_property_readonly("lam", &ExternalPotential::lambda);

  py::class_<PotentialSpec>(m, "Potential")
      .def_static("zero", &PotentialSpec::zero)
      .def_static("logarithmic", &PotentialSpec::logarithmic)
      .def_static("repulsive_power", &PotentialSpec::repulsive_power, py::arg("s"))
      .def_static("attractive_power", &PotentialSpec::attractive_power, py::arg("alpha"))
      .def_static("morse", &PotentialSpec::morse, py::arg("c_rep"), py::arg("l_rep"), py::arg("c_att"),
                  py::arg("l_att"))
      .def_static("tabulated", &PotentialSpec::tabulated, py::arg("r"), py::arg("w"))
      .def("with_external", &PotentialSpec::with_external)
      .def("w", &PotentialSpec::w)
      .def("dw", &PotentialSpec::dw)
      .def_property_readonly("lam", &PotentialSpec::lambda)
      .def_property_readonly("name", &PotentialSpec::name)
      .def_property_readonly("strongly_singular", &PotentialSpec::strongly_singular)
      .def("__repr__", [](const PotentialSpec& p) { return "<Potential " + p.name() + ">"; });

  m.def("free_energy_lambda", &free_energy_lambda);

  py::class_<QuantileMeasure>(m, "QuantileMeasure")
      .def(py::init([](std::vector<double> U) {
             QuantileMeasure q{std::move(U)};
             q.validate();
             return q;
           }),
           py::arg("U"))
      .def_readonly("U", &QuantileMeasure::U)
      .def_property_readonly("M", &QuantileMeasure::M)
      .def("mean", &QuantileMeasure::mean)
      .def("second_moment", &QuantileMeasure::second_moment)
      .def("variance", &QuantileMeasure::variance)
      .def("__len__", &QuantileMeasure::M);

  // transport
  m.def(
      "wp_1d",
      [](std::vector<double> x, std::vector<double> wx, std::vector<double> y, std::vector<double> wy, double p) {
        EmpiricalMeasure a{1, std::move(x), std::move(wx)}, b{1, std::move(y), std::move(wy)};
        return wp_discrete_1d(a, b, p);
      },
      py::arg("x"), py::arg("wx"), py::arg("y"), py::arg("wy"), py::arg("p") = 2.0,
      "Exact W_p between weighted 1D atom sets.");
  m.def(
      "w2_assignment",
      [](std::vector<double> x, std::vector<double> y, std::size_t dim) {
        return w2_assignment(EmpiricalMeasure::uniform(std::move(x), dim), EmpiricalMeasure::uniform(std::move(y), dim));
      },
      py::arg("x"), py::arg("y"), py::arg("dim"), "Exact W2 between equal-size uniform clouds (row-major positions).");
  m.def("w2_quantile", &w2_quantile);
  m.def("w2_between", &w2_between);

  // oracles
  m.def("normal_quantile", &normal_quantile);
  m.def(
      "gaussian_quantiles", [](double mean, double sigma, std::size_t M) { return gaussian_quantiles({mean, sigma}, M); },
      py::arg("mean"), py::arg("sigma"), py::arg("M"));
  m.def(
      "heat_flow",
      [](double mean, double sigma, double beta, double t, std::size_t M) {
        return heat_flow({mean, sigma}, beta, t, M);
      },
      py::arg("mean"), py::arg("sigma"), py::arg("beta"), py::arg("t"), py::arg("M"));
  m.def(
      "ou_flow",
      [](double mean, double sigma, double c, double beta, double t, std::size_t M) {
        return ou_flow({mean, sigma}, c, beta, t, M);
      },
      py::arg("mean"), py::arg("sigma"), py::arg("c"), py::arg("beta"), py::arg("t"), py::arg("M"));
  m.def(
      "dyson_equilibrium",
      [](std::size_t M, const std::string& cache_dir) {
        DysonOptions o;
        o.cache_dir = cache_dir;
        const auto eq = dyson_equilibrium(M, o);
        return py::make_tuple(eq.mu, eq.residual);
      },
      py::arg("M") = 4096, py::arg("cache_dir") = "", "Equilibrium quantiles and the optimality residual.");
  m.def(
      "burgers_uniform",
      [](double a, double b, double t, double beta, std::size_t M) {
        return BurgersSolution(PiecewiseMeasure::uniform(a, b), t, beta).quantiles(M);
      },
      py::arg("a"), py::arg("b"), py::arg("t"), py::arg("beta"), py::arg("M"),
      "Quantiles of the Burgers solution started from uniform[a, b].");
  m.def(
      "burgers_atoms",
      [](std::vector<double> x, std::vector<double> w, double t) {
        EmpiricalMeasure e{1, std::move(x), std::move(w)};
        std::vector<std::pair<double, double>> out;
        for (const auto& a : BurgersSolution(PiecewiseMeasure::atoms(e), t, kInf).atoms())
          out.emplace_back(a.position, a.mass);
        return out;
      },
      py::arg("x"), py::arg("w"), py::arg("t"), "Entropy solution from atoms: (position, mass) pairs at time t.");
  m.def(
      "hilbert_transform",
      [](const QuantileMeasure& q, double x, std::vector<double> eps) {
        const auto h = hilbert_transform(q, x, eps);
        return py::make_tuple(h.value, h.error_estimate, h.diverged);
      },
      py::arg("mu"), py::arg("x"), py::arg("eps"));

  // flows
  m.def(
      "jko_flow",
      [](const QuantileMeasure& mu0, double tau, double T, const PotentialSpec& p, double beta) {
        const auto f = jko_flow(mu0, tau, T, p, beta);
        py::list times, laws, energy;
        for (const auto& s : f.steps) {
          times.append(s.time);
          laws.append(s.mu);
          energy.append(s.energy.total);
        }
        return py::make_tuple(times, laws, energy);
      },
      py::arg("mu0"), py::arg("tau"), py::arg("T"), py::arg("potential"), py::arg("beta") = kInf,
      "Returns (times, quantile measures, free energies).");
  m.def(
      "free_energy", [](const QuantileMeasure& mu, const PotentialSpec& p, double beta) { return free_energy(mu, p, beta).total; },
      py::arg("mu"), py::arg("potential"), py::arg("beta") = kInf);

  m.def(
      "simulate",
      [](const PotentialSpec& p, std::vector<double> positions, std::size_t dim, const std::string& dynamics,
         double beta, std::uint64_t seed, double dt, double T, std::vector<double> output_times,
         const std::string& noise) {
        SimulationConfig c;
        c.potential = p;
        c.initial = ParticleState::from_positions(std::move(positions), dim, beta, seed);
        c.dynamics = dynamics_from(dynamics);
        c.noise = noise_from(noise);
        c.dt = dt;
        c.T = T;
        c.output_times = std::move(output_times);
        const Trajectory tr = simulate(c);
        py::list snaps;
        for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
          const auto& [t, s] = tr.snapshots[i];
          snaps.append(py::make_tuple(t, s.positions,
                                      tr.snapshot_masses.empty() ? std::vector<double>{} : tr.snapshot_masses[i]));
        }
        return py::make_tuple(snaps, tr.energy_trace);
      },
      py::arg("potential"), py::arg("positions"), py::arg("dim") = 1, py::arg("dynamics") = "deterministic",
      py::arg("beta") = kInf, py::arg("seed") = 0, py::arg("dt") = 1e-3, py::arg("T") = 1.0,
      py::arg("output_times") = std::vector<double>{}, py::arg("noise") = "split_implicit",
      "Returns ([(t, positions, masses)], [(t, E/N)]); masses are empty unless sticky.");

  // configuration and runs
  m.def(
      "parse_config",
      [](const std::string& text, const std::string& base_dir) {
        const auto r = cli::parse_config_text(text, base_dir);
        return py::make_tuple(cli::emit_config(r.config), r.errors);
      },
      py::arg("text"), py::arg("base_dir") = ".", "Returns (effective configuration text, errors).");
  m.def(
      "run_config",
      [](const std::string& text, const std::string& base_dir) {
        const auto r = cli::parse_config_text(text, base_dir);
        if (!r.ok()) throw ConfigError(r.errors);
        std::ostringstream log;
        const auto res = cli::run(r.config, log);
        py::list manifest;
        for (const auto& e : res.manifest) manifest.append(py::make_tuple(e.path, e.sha256, e.bytes));
        return py::make_tuple(res.exit_code, log.str(), manifest);
      },
      py::arg("text"), py::arg("base_dir") = ".", "Runs a configuration; returns (exit code, log, manifest).");
}
