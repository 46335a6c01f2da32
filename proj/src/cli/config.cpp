#include "chaoslab/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "chaoslab/errors.hpp"
#include "chaoslab/gradient_flow.hpp"

namespace chaoslab::cli {

namespace fs = std::filesystem;

std::string to_string(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::jko: return "jko";
    case Command::oracle: return "oracle";
    case Command::compare: return "compare";
    case Command::sweep: return "sweep";
    case Command::validate: return "validate";
  }
  return "?";
}

std::string to_string(BetaSchedule s) { return s == BetaSchedule::constant ? "constant" : "sqrtN"; }

std::string to_string(ReferenceKind r) {
  switch (r) {
    case ReferenceKind::automatic: return "auto";
    case ReferenceKind::heat: return "heat";
    case ReferenceKind::ou: return "ou";
    case ReferenceKind::burgers: return "burgers";
    case ReferenceKind::jko: return "jko";
    case ReferenceKind::dyson: return "dyson";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double to_double(const std::string& s) {
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || std::isnan(v)) throw Error("expected a number, got '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw Error("expected a nonnegative integer, got '" + s + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class E>
E to_enum(const std::string& s, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, e] : names)
    if (n == s) return e;
  std::string allowed;
  for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : " | ") + n;
  throw Error("expected one of " + allowed + ", got '" + s + "'");
}

std::string to_word(const std::string& s, const std::vector<std::string>& allowed) {
  if (std::find(allowed.begin(), allowed.end(), s) != allowed.end()) return s;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : " | ") + a;
  throw Error("expected one of " + list + ", got '" + s + "'");
}

struct Key {
  std::string name;  // section.key
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Key number(const std::string& name, T ExperimentConfig::*field) {
  return {name,
          [field](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, double>)
              c.*field = to_double(v);
            else
              c.*field = static_cast<T>(to_uint(v));
          },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_same_v<T, double>)
              return fmt(c.*field);
            else
              return std::to_string(c.*field);
          }};
}

Key word(const std::string& name, std::string ExperimentConfig::*field, std::vector<std::string> allowed) {
  return {name, [field, allowed](ExperimentConfig& c, const std::string& v) { c.*field = to_word(v, allowed); },
          [field](const ExperimentConfig& c) { return c.*field; }};
}

Key text(const std::string& name, std::string ExperimentConfig::*field) {
  return {name, [field](ExperimentConfig& c, const std::string& v) { c.*field = v; },
          [field](const ExperimentConfig& c) { return c.*field; }};
}

template <class E>
Key choice(const std::string& name, E ExperimentConfig::*field, std::vector<std::pair<std::string, E>> names) {
  return {name, [field, names](ExperimentConfig& c, const std::string& v) { c.*field = to_enum(v, names); },
          [field, names](const ExperimentConfig& c) {
            for (const auto& [n, e] : names)
              if (e == c.*field) return n;
            return std::string("?");
          }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      choice<Command>("run.command", &ExperimentConfig::command,
                      {{"simulate", Command::simulate},
                       {"jko", Command::jko},
                       {"oracle", Command::oracle},
                       {"compare", Command::compare},
                       {"sweep", Command::sweep},
                       {"validate", Command::validate}}),
      text("run.output", &ExperimentConfig::output),
      number("run.seed", &ExperimentConfig::seed),
      number("run.workers", &ExperimentConfig::workers),

      word("model.kernel", &ExperimentConfig::kernel,
           {"zero", "logarithmic", "repulsive_power", "attractive_power", "morse", "tabulated"}),
      number("model.s", &ExperimentConfig::s),
      number("model.alpha", &ExperimentConfig::alpha),
      number("model.morse_c_rep", &ExperimentConfig::morse_c_rep),
      number("model.morse_l_rep", &ExperimentConfig::morse_l_rep),
      number("model.morse_c_att", &ExperimentConfig::morse_c_att),
      number("model.morse_l_att", &ExperimentConfig::morse_l_att),
      text("model.table", &ExperimentConfig::table),
      word("model.external", &ExperimentConfig::external, {"zero", "quadratic", "polynomial"}),
      number("model.c", &ExperimentConfig::c),
      {"model.coefficients",
       [](ExperimentConfig& c, const std::string& v) {
         c.coefficients.clear();
         for (const auto& x : split_list(v)) c.coefficients.push_back(to_double(x));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (double x : c.coefficients) s += (s.empty() ? "" : ", ") + fmt(x);
         return s;
       }},
      number("model.beta", &ExperimentConfig::beta),
      choice<BetaSchedule>("model.beta_schedule", &ExperimentConfig::beta_schedule,
                           {{"constant", BetaSchedule::constant}, {"sqrtN", BetaSchedule::sqrtN}}),

      word("initial.family", &ExperimentConfig::family, {"gaussian", "uniform", "quantile_file"}),
      word("initial.placement", &ExperimentConfig::placement, {"iid", "quantile"}),
      number("initial.mean", &ExperimentConfig::mean),
      number("initial.sigma", &ExperimentConfig::sigma),
      number("initial.lo", &ExperimentConfig::lo),
      number("initial.hi", &ExperimentConfig::hi),
      text("initial.path", &ExperimentConfig::path),

      number("particles.N", &ExperimentConfig::N),
      {"particles.N_grid",
       [](ExperimentConfig& c, const std::string& v) {
         c.N_grid.clear();
         for (const auto& x : split_list(v)) c.N_grid.push_back(static_cast<std::size_t>(to_uint(x)));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (auto n : c.N_grid) s += (s.empty() ? "" : ", ") + std::to_string(n);
         return s;
       }},
      number("particles.seeds", &ExperimentConfig::seeds),
      number("particles.dim", &ExperimentConfig::dim),
      choice<Dynamics>("particles.dynamics", &ExperimentConfig::dynamics,
                       {{"stochastic", Dynamics::stochastic},
                        {"deterministic", Dynamics::deterministic},
                        {"sticky", Dynamics::sticky}}),
      choice<Scheme>("particles.scheme", &ExperimentConfig::scheme, {{"rk4", Scheme::rk4}, {"euler", Scheme::euler}}),
      choice<NoiseScheme>("particles.noise", &ExperimentConfig::noise,
                          {{"split_implicit", NoiseScheme::split_implicit},
                           {"euler_maruyama", NoiseScheme::euler_maruyama}}),
      number("particles.dt", &ExperimentConfig::dt),

      number("jko.tau", &ExperimentConfig::tau),
      number("jko.M", &ExperimentConfig::M),

      number("time.T", &ExperimentConfig::T),
      {"time.output_times",
       [](ExperimentConfig& c, const std::string& v) {
         c.output_times.clear();
         for (const auto& x : split_list(v)) c.output_times.push_back(to_double(x));
       },
       [](const ExperimentConfig& c) {
         std::string s;
         for (double x : c.output_times) s += (s.empty() ? "" : ", ") + fmt(x);
         return s;
       }},

      choice<ReferenceKind>("reference.kind", &ExperimentConfig::reference,
                            {{"auto", ReferenceKind::automatic},
                             {"heat", ReferenceKind::heat},
                             {"ou", ReferenceKind::ou},
                             {"burgers", ReferenceKind::burgers},
                             {"jko", ReferenceKind::jko},
                             {"dyson", ReferenceKind::dyson}}),
      number("reference.tau", &ExperimentConfig::reference_tau),
      number("reference.M", &ExperimentConfig::reference_M),
      number("reference.tolerance", &ExperimentConfig::tolerance),
  };
  return k;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

std::string nearest_key(const std::string& name) {
  const auto dot = name.find('.');
  const std::string bare = dot == std::string::npos ? name : name.substr(dot + 1);
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  for (const auto& k : keys()) {
    // compare both the qualified name and the bare key so a typo in either is caught
    const std::string kb = k.name.substr(k.name.find('.') + 1);
    const std::size_t d = std::min(edit_distance(name, k.name), edit_distance(bare, kb));
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  return best;
}

std::string resolve(const std::string& p, const std::string& base_dir) {
  if (p.empty() || base_dir.empty() || base_dir == "." || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

std::vector<double> ExperimentConfig::effective_output_times() const {
  std::vector<double> t = output_times.empty() ? std::vector<double>{0.0, T} : output_times;
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

double ExperimentConfig::beta_for(std::size_t n) const {
  if (beta_schedule == BetaSchedule::sqrtN) return std::sqrt(static_cast<double>(n));
  return beta;
}

PotentialSpec ExperimentConfig::potential() const {
  PotentialSpec p = PotentialSpec::zero();
  if (kernel == "logarithmic")
    p = PotentialSpec::logarithmic();
  else if (kernel == "repulsive_power")
    p = PotentialSpec::repulsive_power(s);
  else if (kernel == "attractive_power")
    p = PotentialSpec::attractive_power(alpha);
  else if (kernel == "morse")
    p = PotentialSpec::morse(morse_c_rep, morse_l_rep, morse_c_att, morse_l_att);
  else if (kernel == "tabulated")
    p = PotentialSpec::tabulated_csv(table);
  if (external == "quadratic") return p.with_external(ExternalPotential::quadratic(c));
  if (external == "polynomial") return p.with_external(ExternalPotential::polynomial(coefficients));
  return p;
}

InitialMeasure ExperimentConfig::initial() const {
  const auto pl = placement == "quantile" ? InitialMeasure::Placement::quantile : InitialMeasure::Placement::iid;
  if (family == "uniform") return InitialMeasure::uniform(lo, hi, pl);
  if (family == "quantile_file") return InitialMeasure::quantile_file(path, pl);
  return InitialMeasure::gaussian(mean, sigma, pl);
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> err;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) err.push_back(msg);
  };
  need(c.workers >= 1, "run.workers must be at least 1");
  need(!c.output.empty(), "run.output must not be empty");
  need(c.beta > 0.0, "model.beta must be positive (inf allowed)");
  need(c.dt > 0.0 && std::isfinite(c.dt), "particles.dt must be positive");
  need(c.tau > 0.0 && std::isfinite(c.tau), "jko.tau must be positive");
  need(c.reference_tau > 0.0 && std::isfinite(c.reference_tau), "reference.tau must be positive");
  need(c.T >= 0.0 && std::isfinite(c.T), "time.T must be finite and nonnegative");
  need(c.N >= 1, "particles.N must be at least 1");
  need(c.dim >= 1, "particles.dim must be at least 1");
  need(c.M >= 2, "jko.M must be at least 2");
  need(c.reference_M >= 2, "reference.M must be at least 2");
  for (auto n : c.N_grid) need(n >= 1, "particles.N_grid entries must be at least 1");
  for (double t : c.output_times)
    need(t >= 0.0 && t <= c.T, "time.output_times entry " + fmt(t) + " lies outside [0, T]");
  if (c.command == Command::sweep) {
    need(!c.N_grid.empty(), "particles.N_grid is required by the sweep command");
    need(c.seeds >= 8, "particles.seeds must be at least 8 for a sweep (standard errors)");
  }
  if (c.family == "gaussian") need(c.sigma > 0.0, "initial.sigma must be positive");
  if (c.family == "uniform") need(c.hi > c.lo, "initial.hi must exceed initial.lo");
  if (c.family == "quantile_file") {
    need(!c.path.empty(), "initial.path is required for family = quantile_file");
    if (!c.path.empty()) need(fs::exists(c.path), "initial.path: file not found: " + c.path);
  }
  if (c.placement == "quantile") need(c.dim == 1, "initial.placement = quantile is one-dimensional");
  if (c.kernel == "tabulated") {
    need(!c.table.empty(), "model.table is required for kernel = tabulated");
    if (!c.table.empty()) need(fs::exists(c.table), "model.table: file not found: " + c.table);
  }
  if (c.kernel == "repulsive_power") need(c.s > -1.0 && c.s <= 1.0, "model.s must lie in (-1, 1]");
  if (c.kernel == "attractive_power") need(c.alpha >= 0.0, "model.alpha must be nonnegative");
  if (c.external == "polynomial") need(!c.coefficients.empty(), "model.coefficients is required for external = polynomial");
  if (c.dynamics != Dynamics::stochastic)
    need(!std::isfinite(c.beta) && c.beta_schedule == BetaSchedule::constant,
         "particles.dynamics = " + to_string(c.dynamics) + " needs model.beta = inf");

  if (err.empty() || std::none_of(err.begin(), err.end(), [](const std::string& e) {
        return e.rfind("model.", 0) == 0;
      })) {
    try {
      const PotentialSpec p = c.potential();
      const double lam = free_energy_lambda(p);
      if (lam < 0.0) {
        const double cap = 1.0 / (2.0 * std::abs(lam));
        if (c.command == Command::jko || c.command == Command::oracle || c.command == Command::compare ||
            c.command == Command::sweep) {
          need(c.tau < cap, "jko.tau = " + fmt(c.tau) + " violates tau < 1/(2|lambda|) = " + fmt(cap) +
                                " (lambda = " + fmt(lam) + ")");
          need(c.reference_tau < cap, "reference.tau = " + fmt(c.reference_tau) +
                                          " violates tau < 1/(2|lambda|) = " + fmt(cap) + " (lambda = " + fmt(lam) +
                                          ")");
        }
      }
    } catch (const std::exception& e) {
      err.push_back(std::string("model: ") + e.what());
    }
  }
  return err;
}

ParseResult parse_config_text(const std::string& text, const std::string& base_dir) {
  ParseResult r;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        r.errors.push_back(where + "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      r.errors.push_back(where + "expected key = value, got '" + line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const Key* k = find_key(full);
    if (!k) {
      r.errors.push_back(where + "unknown key '" + full + "' (did you mean '" + nearest_key(full) + "'?)");
      continue;
    }
    if (seen.count(full)) {
      r.errors.push_back(where + "duplicate key '" + full + "' (first set on line " + std::to_string(seen[full]) + ")");
      continue;
    }
    seen[full] = lineno;
    try {
      std::string v = value;
      if (full == "initial.path" || full == "model.table") v = resolve(v, base_dir);
      k->set(r.config, v);
    } catch (const std::exception& e) {
      r.errors.push_back(where + full + ": " + e.what());
    }
  }
  r.syntax_errors = r.errors.size();
  for (auto& e : validate(r.config)) r.errors.push_back(std::move(e));
  return r;
}

ParseResult parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ParseResult r;
    r.errors.push_back("cannot read config file " + path);
    r.syntax_errors = 1;
    return r;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), fs::path(path).parent_path().string());
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    os << k.name.substr(dot + 1) << " = " << k.get(c) << '\n';
  }
  return os.str();
}

}  // namespace chaoslab::cli
