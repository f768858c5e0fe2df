#include "wignerdyn/classical_dynamics.hpp"

#include "wignerdyn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wignerdyn {

Eigen::Vector3d effective_field(std::span<const Eigen::Vector3d> config, const HamiltonianSpec& spec,
                                int i) {
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  const int n = spec.site_count();
  for (int a = 0; a < 3; ++a) {
    const auto& J = spec.couplings[a];
    for (int j = 0; j < n; ++j) {
      if (j != i) b[a] += J(i, j) * config[j][a];
    }
  }
  return b;
}

double classical_energy(std::span<const Eigen::Vector3d> config, const HamiltonianSpec& spec) {
  const int n = spec.site_count();
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    e -= spec.field.dot(config[i]);
    for (int j = i + 1; j < n; ++j) {
      for (int a = 0; a < 3; ++a) e -= spec.couplings[a](i, j) * config[i][a] * config[j][a];
    }
  }
  return e;
}

void check_time_grid(std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("time grid is empty");
  if (times.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("time grid must be strictly increasing (index " +
                                  std::to_string(k) + ")");
    }
  }
}

SpinPropagator::SpinPropagator(const HamiltonianSpec& spec, IntegratorOptions options)
    : method_(options.method), dt_(options.dt), n_(spec.site_count()), field_(spec.field) {
  spec.check();
  if (!(dt_ > 0.0)) throw std::invalid_argument("integrator step must be positive");
  if (method_ == Integrator::automatic) {
    method_ = spec.is_field_free_ising() ? Integrator::ising_rotation : Integrator::rk4;
  }
  if (method_ == Integrator::ising_rotation && !spec.is_field_free_ising()) {
    throw std::invalid_argument(
        "the rotation integrator needs a field-free Ising model (J^z couplings only)");
  }
  for (int a = 0; a < 3; ++a) {
    bonds_[a].resize(n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        const double J = spec.couplings[a](i, j);
        if (j != i && J != 0.0) bonds_[a][i].push_back({j, J});
      }
    }
  }
  for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_, &initial_}) v->resize(n_);
  ising_field_.resize(n_);
}

void SpinPropagator::derivative(std::span<const Eigen::Vector3d> spins,
                                std::span<Eigen::Vector3d> out) const {
  for (int i = 0; i < n_; ++i) {
    Eigen::Vector3d f = field_;
    for (int a = 0; a < 3; ++a) {
      double acc = 0.0;
      for (const Bond& b : bonds_[a][i]) acc += b.coupling * spins[b.site][a];
      f[a] += acc;
    }
    out[i] = spins[i].cross(f);
  }
}

void SpinPropagator::rk4_step(std::span<Eigen::Vector3d> s, double h) {
  derivative(s, k1_);
  for (int i = 0; i < n_; ++i) tmp_[i] = s[i] + 0.5 * h * k1_[i];
  derivative(tmp_, k2_);
  for (int i = 0; i < n_; ++i) tmp_[i] = s[i] + 0.5 * h * k2_[i];
  derivative(tmp_, k3_);
  for (int i = 0; i < n_; ++i) tmp_[i] = s[i] + h * k3_[i];
  derivative(tmp_, k4_);
  for (int i = 0; i < n_; ++i) s[i] += (h / 6.0) * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
}

void SpinPropagator::rotate_ising(std::span<const Eigen::Vector3d> initial,
                                  std::span<Eigen::Vector3d> spins, double t) const {
  for (int i = 0; i < n_; ++i) {
    const double angle = ising_field_[i] * t;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const auto& v = initial[i];
    spins[i] = {v.x() * c + v.y() * s, -v.x() * s + v.y() * c, v.z()};
  }
}

void SpinPropagator::propagate(std::span<Eigen::Vector3d> spins, std::span<const double> times,
                               const Observer& observe) {
  check_time_grid(times);
  if (static_cast<int>(spins.size()) != n_) {
    throw std::invalid_argument("configuration size does not match the Hamiltonian");
  }
  observe(0, spins);

  if (method_ == Integrator::ising_rotation) {
    std::copy(spins.begin(), spins.end(), initial_.begin());
    for (int i = 0; i < n_; ++i) {
      double b = 0.0;
      for (const Bond& bond : bonds_[Z][i]) b += bond.coupling * initial_[bond.site].z();
      ising_field_[i] = b;
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
      rotate_ising(initial_, spins, times[k]);
      observe(k, spins);
    }
    return;
  }

  for (std::size_t k = 1; k < times.size(); ++k) {
    const double span = times[k] - times[k - 1];
    const auto steps = static_cast<long>(std::ceil(span / dt_ - 1e-9));
    const double h = span / static_cast<double>(std::max(1L, steps));
    for (long s = 0; s < std::max(1L, steps); ++s) rk4_step(spins, h);
    observe(k, spins);
  }
}

namespace {

TrajectorySet evolve_with(const PhaseEnsemble& ensemble, const HamiltonianSpec& spec,
                          std::span<const double> times, IntegratorOptions options) {
  if (spec.site_count() != ensemble.n_spins) {
    throw std::invalid_argument("ensemble and Hamiltonian disagree on the number of spins");
  }
  check_time_grid(times);
  TrajectorySet out;
  out.scheme = ensemble.scheme;
  out.times.assign(times.begin(), times.end());
  out.n_spins = ensemble.n_spins;
  out.n_samples = ensemble.n_samples;
  out.weight_scale = ensemble.weight_scale;
  out.signs = ensemble.signs;
  out.states.assign(times.size(), std::vector<Eigen::Vector3d>(ensemble.spins.size()));

  const SpinPropagator prototype(spec, options);
  constexpr std::size_t kChunk = 1024;
  const std::size_t n_chunks = (ensemble.n_samples + kChunk - 1) / kChunk;
  const int n = ensemble.n_spins;
  parallel_for(n_chunks, [&](std::size_t c) {
    SpinPropagator prop = prototype;
    std::vector<Eigen::Vector3d> work(n);
    const std::size_t end = std::min(ensemble.n_samples, (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) {
      const auto initial = ensemble.sample(k).spins;
      std::copy(initial.begin(), initial.end(), work.begin());
      prop.propagate(work, times, [&](std::size_t t, std::span<const Eigen::Vector3d> s) {
        std::copy(s.begin(), s.end(), out.states[t].begin() + static_cast<std::ptrdiff_t>(k * n));
      });
    }
  });
  return out;
}

}  // namespace

TrajectorySet evolve_generic(const PhaseEnsemble& ensemble, const HamiltonianSpec& spec,
                             std::span<const double> times, double dt) {
  return evolve_with(ensemble, spec, times, {Integrator::rk4, dt});
}

TrajectorySet evolve_ising_rotation(const PhaseEnsemble& ensemble, const HamiltonianSpec& spec,
                                    std::span<const double> times) {
  return evolve_with(ensemble, spec, times, {Integrator::ising_rotation, 1e-3});
}

}  // namespace wignerdyn
