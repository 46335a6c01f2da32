#pragma once

// N-particle gradient dynamics driven by the mean-field energy
//
//   E(x) = 1/(N-1) * 1/2 * sum_{i != j} W(x_i, x_j) + sum_i V(x_i)
//
// deterministic (beta = inf), stochastic (Euler-Maruyama with sqrt(2 dt / beta)
// noise), and sticky mass-weighted aggregation with merging.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chaoslab/potentials.hpp"

namespace chaoslab {

struct ParticleState {
  std::size_t dim = 1;
  std::vector<double> positions;  // N x dim, row-major
  double time = 0.0;
  double beta = kInf;
  std::uint64_t seed = 0;
  // Number of stochastic steps consumed; the noise stream of step k is derived from (seed, k).
  std::uint64_t step = 0;

  std::size_t size() const { return dim == 0 ? 0 : positions.size() / dim; }
  std::span<const double> at(std::size_t i) const { return {positions.data() + i * dim, dim}; }
  std::span<double> at(std::size_t i) { return {positions.data() + i * dim, dim}; }

  static ParticleState from_positions(std::vector<double> x, std::size_t dim = 1, double beta = kInf,
                                      std::uint64_t seed = 0);
};

enum class Scheme { euler, rk4 };
enum class NoiseScheme {
  // explicit drift, sort after a crossing step
  euler_maruyama,
  // explicit drift for V and non-adjacent pairs, implicit solve for adjacent pairs
  split_implicit,
};

std::string to_string(Scheme s);
std::string to_string(NoiseScheme s);

struct MergeEvent {
  double time;
  std::size_t survivor;               // original label of the surviving particle
  std::vector<std::size_t> absorbed;  // original labels merged into it
  double mass;                        // mass of the merged particle
};

struct StickyState {
  ParticleState state;
  std::vector<double> masses;
  std::vector<std::size_t> labels;  // original index of every surviving particle

  static StickyState uniform(ParticleState s);
};

struct Trajectory {
  std::vector<std::pair<double, ParticleState>> snapshots;
  std::vector<std::vector<double>> snapshot_masses;  // empty unless sticky
  std::vector<std::pair<double, double>> energy_trace;  // (time, E / N), mass weighted for sticky runs
  std::vector<MergeEvent> merge_events;
};

double energy_EN(const ParticleState& state, const PotentialSpec& p);
std::vector<double> grad_EN(const ParticleState& state, const PotentialSpec& p);

// Mass-weighted mean energy 1/2 sum_{i != j} m_i m_j W + sum_i m_i V.
double sticky_energy(const StickyState& s, const PotentialSpec& p);

struct StepInfo {
  std::size_t halvings = 0;
  std::size_t substeps = 0;
};

// Advances dx/dt = -grad E by exactly dt. In 1D with a strongly singular
// kernel a substep that breaks strict ordering is rejected and halved.
ParticleState step_deterministic(const ParticleState& state, const PotentialSpec& p, double dt,
                                 Scheme scheme = Scheme::rk4, StepInfo* info = nullptr,
                                 std::size_t max_halvings = 40);

// One Euler-Maruyama step; 1D crossings under strongly singular kernels are resolved by sorting.
ParticleState step_stochastic(const ParticleState& state, const PotentialSpec& p, double dt);

// Noise, then sorting, explicit drift for V and non-adjacent pairs, and an
// implicit (Newton) solve for the adjacent-pair interaction. 1D strongly singular kernels only.
ParticleState step_stochastic_split(const ParticleState& state, const PotentialSpec& p, double dt);

struct StickyStep {
  StickyState next;
  std::vector<MergeEvent> merges;
};

// Mass-weighted dynamics dx_i/dt = -sum_j m_j grad w(x_i - x_j) - grad V(x_i)
// with grad w(0) := 0. Collisions inside the step are located by linear
// interpolation of the motion and merged at the center of mass.
StickyStep step_sticky(const StickyState& s, const PotentialSpec& p, double dt);

enum class Dynamics { deterministic, stochastic, sticky };
std::string to_string(Dynamics d);

struct SimulationConfig {
  PotentialSpec potential = PotentialSpec::zero();
  ParticleState initial;
  std::vector<double> masses;  // sticky only; uniform when empty
  Dynamics dynamics = Dynamics::deterministic;
  Scheme scheme = Scheme::rk4;
  NoiseScheme noise = NoiseScheme::split_implicit;
  double dt = 1e-3;
  double T = 1.0;
  std::vector<double> output_times;  // defaults to {0, T}
  // record E/N after every accepted step (otherwise only at output times)
  bool full_energy_trace = true;
};

// Default time step 1e-3 * min(1, 1/|lambda|).
double default_dt(const PotentialSpec& p);

Trajectory simulate(const SimulationConfig& config);

double min_gap_1d(const ParticleState& state);
bool strictly_increasing(const ParticleState& state);

}  // namespace chaoslab
