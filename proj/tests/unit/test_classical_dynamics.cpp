#include "wignerdyn/classical_dynamics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace wignerdyn;

namespace {

const double kPi = std::numbers::pi;

LatticeSpec chain(int n) {
  LatticeSpec l;
  l.extent = n;
  return l;
}

std::vector<double> grid(double stop, int count) {
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) t[k] = stop * k / (count - 1);
  return t;
}

// Spins of length 1/2 in random directions.
std::vector<Eigen::Vector3d> random_config(int n, std::mt19937& rng) {
  std::normal_distribution<double> g;
  std::vector<Eigen::Vector3d> s(n);
  for (auto& v : s) v = 0.5 * Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
  return s;
}

}  // namespace

TEST_SUITE("classical_dynamics") {
  TEST_CASE("effective field examples") {
    const auto ising = model_preset({ModelKind::ising}, chain(5));
    std::vector<Eigen::Vector3d> along_x(5, Eigen::Vector3d(0.5, 0, 0));
    CHECK(effective_field(along_x, ising, 2).isZero());
    std::vector<Eigen::Vector3d> along_z(5, Eigen::Vector3d(0, 0, 0.5));
    CHECK(effective_field(along_z, ising, 2).isApprox(Eigen::Vector3d(0, 0, 1)));
    const auto xx = model_preset({ModelKind::xx}, chain(5));
    CHECK(effective_field(along_x, xx, 0).isApprox(Eigen::Vector3d(1, 0, 0)));
  }

  TEST_CASE("Ising keeps S^z fixed") {
    const auto spec = model_preset({ModelKind::ising}, chain(6));
    const auto e = sample_twa(0.8, 6, 20, 3);
    const auto traj = evolve_generic(e, spec, grid(2.0, 5));
    for (std::size_t t = 0; t < traj.times.size(); ++t) {
      for (std::size_t k = 0; k < 20; ++k) {
        for (int i = 0; i < 6; ++i) {
          CHECK(traj.sample(t, k)[i].z() == doctest::Approx(e.sample(k).spins[i].z()).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("Larmor precession in a transverse field") {
    HamiltonianSpec spec(1);
    const double h = 0.7;
    spec.field = {h, 0, 0};
    SpinPropagator prop(spec, {Integrator::rk4, 1e-3});
    std::vector<Eigen::Vector3d> s{{0, 0, 0.5}};
    const auto times = grid(3.0, 7);
    prop.propagate(s, times, [&](std::size_t k, std::span<const Eigen::Vector3d> v) {
      const double t = times[k];
      CHECK(v[0].z() == doctest::Approx(0.5 * std::cos(h * t)).epsilon(1e-10));
      CHECK(v[0].y() == doctest::Approx(0.5 * std::sin(h * t)).epsilon(1e-10));
      CHECK(std::abs(v[0].x()) < 1e-12);
    });
  }

  TEST_CASE("cross-product sign matches the componentwise equations") {
    // Transverse Ising: dS^x = S^y B^z, dS^y = h S^z - S^x B^z, dS^z = -h S^y.
    std::mt19937 rng(5);
    const auto ti = model_preset({ModelKind::transverse_ising, 0.4}, chain(5));
    const auto s = random_config(5, rng);
    std::vector<Eigen::Vector3d> d(5);
    SpinPropagator(ti, {}).derivative(s, d);
    for (int i = 0; i < 5; ++i) {
      const double b = effective_field(s, ti, i).z();
      CHECK(d[i].x() == doctest::Approx(s[i].y() * b));
      CHECK(d[i].y() == doctest::Approx(0.4 * s[i].z() - s[i].x() * b));
      CHECK(d[i].z() == doctest::Approx(-0.4 * s[i].y()));
    }
    // XX: dS^x = -S^z B^y, dS^y = S^z B^x, dS^z = S^x B^y - S^y B^x.
    const auto xx = model_preset({ModelKind::xx}, chain(5));
    SpinPropagator(xx, {}).derivative(s, d);
    for (int i = 0; i < 5; ++i) {
      const Eigen::Vector3d b = effective_field(s, xx, i);
      CHECK(d[i].x() == doctest::Approx(-s[i].z() * b.y()));
      CHECK(d[i].y() == doctest::Approx(s[i].z() * b.x()));
      CHECK(d[i].z() == doctest::Approx(s[i].x() * b.y() - s[i].y() * b.x()));
    }
  }

  TEST_CASE("collinear XX configuration is stationary") {
    const auto xx = model_preset({ModelKind::xx}, chain(6));
    std::vector<Eigen::Vector3d> s(6, Eigen::Vector3d(0.5, 0, 0));
    SpinPropagator prop(xx, {});
    const std::vector<double> times{0.0, 1.0, 2.0};
    prop.propagate(s, times, [](std::size_t, std::span<const Eigen::Vector3d> v) {
      for (const auto& x : v) CHECK((x - Eigen::Vector3d(0.5, 0, 0)).norm() < 1e-14);
    });
  }

  TEST_CASE("rotation path: polarized chain rotates by -Jt") {
    const auto spec = model_preset({ModelKind::ising}, chain(4));
    SpinPropagator prop(spec, {Integrator::ising_rotation});
    std::vector<Eigen::Vector3d> s(4, Eigen::Vector3d(0.3, 0.0, 0.5));
    const std::vector<double> times{0.0, 0.9};
    prop.propagate(s, times, [&](std::size_t k, std::span<const Eigen::Vector3d> v) {
      const double a = times[k];  // B^z = J
      CHECK(v[1].x() == doctest::Approx(0.3 * std::cos(a)));
      CHECK(v[1].y() == doctest::Approx(-0.3 * std::sin(a)));
    });
  }

  TEST_CASE("rotation path agrees with RK4") {
    std::mt19937 rng(1);
    for (int n : {3, 5, 8}) {
      LatticeSpec l = chain(n);
      l.rule = CouplingRule::power_law;
      const auto spec = model_preset({ModelKind::ising}, l);
      const auto e = sample_twa(0.9, n, 100, 17);
      const auto times = grid(5.0, 6);
      const auto a = evolve_ising_rotation(e, spec, times);
      const auto b = evolve_generic(e, spec, times);
      double worst = 0.0;
      for (std::size_t t = 0; t < times.size(); ++t) {
        for (std::size_t k = 0; k < a.states[t].size(); ++k) {
          worst = std::max(worst, (a.states[t][k] - b.states[t][k]).cwiseAbs().maxCoeff());
        }
      }
      CHECK(worst < 1e-6);
      // tJ = 1 cross-check at the default step.
      const std::vector<double> one{0.0, 1.0};
      const auto c = evolve_ising_rotation(e, spec, one);
      const auto d = evolve_generic(e, spec, one, 1e-3);
      for (std::size_t k = 0; k < c.states[1].size(); ++k) {
        CHECK((c.states[1][k] - d.states[1][k]).cwiseAbs().maxCoeff() < 1e-8);
      }
    }
    CHECK_THROWS_AS(evolve_ising_rotation(sample_twa(0.2, 4, 2, 1),
                                          model_preset({ModelKind::xx}, chain(4)), grid(1, 2)),
                    std::invalid_argument);
  }

  TEST_CASE("norm and energy conservation") {
    std::mt19937 rng(3);
    for (ModelKind kind : {ModelKind::ising, ModelKind::transverse_ising, ModelKind::xx}) {
      const auto spec = model_preset({kind}, chain(6));
      SpinPropagator prop(spec, {Integrator::rk4, 1e-3});
      for (int trial = 0; trial < 3; ++trial) {
        auto s = random_config(6, rng);
        const auto s0 = s;
        const double e0 = classical_energy(s, spec);
        prop.propagate(s, grid(5.0, 6), [&](std::size_t, std::span<const Eigen::Vector3d> v) {
          for (int i = 0; i < 6; ++i) CHECK(std::abs(v[i].norm() - s0[i].norm()) < 1e-9);
          CHECK(std::abs(classical_energy(v, spec) - e0) <= 1e-8 * std::abs(e0));
        });
      }
    }
  }

  TEST_CASE("time grid validation") {
    const auto spec = model_preset({ModelKind::ising}, chain(3));
    const auto e = sample_twa(0.2, 3, 2, 1);
    const std::vector<double> bad{0.0, 1.0, 0.5};
    CHECK_THROWS_AS(evolve_generic(e, spec, bad), std::invalid_argument);
    const std::vector<double> late{0.5, 1.0};
    CHECK_THROWS_AS(evolve_generic(e, spec, late), std::invalid_argument);
    CHECK_THROWS_AS(SpinPropagator(spec, {Integrator::rk4, 0.0}), std::invalid_argument);
  }

  TEST_CASE("trajectory set starts at the ensemble and keeps signs") {
    const auto spec = model_preset({ModelKind::xx}, chain(4));
    const auto e = sample_dtwa(kPi / 4, 4, 50, 8);
    const auto traj = evolve_generic(e, spec, grid(1.0, 3));
    CHECK(traj.states[0] == e.spins);
    CHECK(traj.signs == e.signs);
    CHECK(traj.weight_scale == e.weight_scale);
  }
}
