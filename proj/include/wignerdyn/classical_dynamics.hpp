#pragma once

#include "wignerdyn/model.hpp"
#include "wignerdyn/phase_sampler.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace wignerdyn {

/// B^a_i = sum_{j != i} J^a_ij S^a_j.
Eigen::Vector3d effective_field(std::span<const Eigen::Vector3d> config, const HamiltonianSpec& spec,
                                int i);

/// Classical energy -sum h.S_i - sum_{i<j} J^a_ij S^a_i S^a_j (conserved by the EOM).
double classical_energy(std::span<const Eigen::Vector3d> config, const HamiltonianSpec& spec);

enum class Integrator { automatic, rk4, ising_rotation };

struct IntegratorOptions {
  Integrator method = Integrator::automatic;
  double dt = 1e-3;  ///< largest RK4 step in units of 1/J
};

/// Throws unless times start at 0 and increase strictly.
void check_time_grid(std::span<const double> times);

/**
 * Evolves single configurations under dS_i/dt = S_i x (h + B_i).
 *
 * The coupling matrices are compressed into per-site neighbour lists once;
 * an instance holds RK4 scratch space and is not shareable between threads
 * (copy it per worker instead).
 */
class SpinPropagator {
 public:
  SpinPropagator(const HamiltonianSpec& spec, IntegratorOptions options);

  using Observer = std::function<void(std::size_t time_index, std::span<const Eigen::Vector3d>)>;

  /// Advances `spins` in place through `times`, calling `observe` at every grid point
  /// (including t = 0).
  void propagate(std::span<Eigen::Vector3d> spins, std::span<const double> times,
                 const Observer& observe);

  [[nodiscard]] Integrator resolved_method() const { return method_; }

  /// dS_i/dt for every site.
  void derivative(std::span<const Eigen::Vector3d> spins, std::span<Eigen::Vector3d> out) const;

 private:
  struct Bond {
    int site;
    double coupling;
  };

  void rk4_step(std::span<Eigen::Vector3d> spins, double h);
  void rotate_ising(std::span<const Eigen::Vector3d> initial, std::span<Eigen::Vector3d> spins,
                    double t) const;

  Integrator method_;
  double dt_;
  int n_;
  Eigen::Vector3d field_;
  std::array<std::vector<std::vector<Bond>>, 3> bonds_;
  std::vector<Eigen::Vector3d> k1_, k2_, k3_, k4_, tmp_, initial_;
  std::vector<double> ising_field_;
};

/// Full time-major storage: states[t][sample * N + spin].
struct TrajectorySet {
  Scheme scheme = Scheme::twa;
  std::vector<double> times;
  int n_spins = 0;
  std::size_t n_samples = 0;
  double weight_scale = 1.0;
  std::vector<std::vector<Eigen::Vector3d>> states;
  std::vector<std::int8_t> signs;

  [[nodiscard]] std::span<const Eigen::Vector3d> sample(std::size_t time_index,
                                                       std::size_t k) const {
    return std::span<const Eigen::Vector3d>(states[time_index]).subspan(k * n_spins, n_spins);
  }
};

TrajectorySet evolve_generic(const PhaseEnsemble& ensemble, const HamiltonianSpec& spec,
                             std::span<const double> times, double dt = 1e-3);

/// Exact solution for field-free Ising models: spin i precesses about z at
/// the constant rate B^z_i of the initial configuration.
TrajectorySet evolve_ising_rotation(const PhaseEnsemble& ensemble, const HamiltonianSpec& spec,
                                    std::span<const double> times);

}  // namespace wignerdyn
