#include "wignerdyn/correlations.hpp"
#include "wignerdyn/parallel.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

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

// Spin i rotated about z by -B^z_i t.
Eigen::Vector3d precess(const Eigen::Vector3d& s, double b, double t) {
  const double c = std::cos(b * t), sn = std::sin(b * t);
  return {s.x() * c + s.y() * sn, -s.x() * sn + s.y() * c, s.z()};
}

// Weighted phase-space average of a pair correlation over explicit configurations.
struct Accumulator {
  double total = 0.0;
  Eigen::Vector3d a = Eigen::Vector3d::Zero(), b = Eigen::Vector3d::Zero();
  Eigen::Matrix3d ab = Eigen::Matrix3d::Zero();
  void add(double w, const Eigen::Vector3d& si, const Eigen::Vector3d& sj) {
    total += w;
    a += w * si;
    b += w * sj;
    ab += w * si * sj.transpose();
  }
  [[nodiscard]] Eigen::Matrix3d connected() const { return symmetrize(ab - a * b.transpose()); }
};

std::vector<Eigen::Vector3d> evolve_all(const std::vector<Eigen::Vector3d>& s, const Eigen::MatrixXd& J, double t) {
  std::vector<Eigen::Vector3d> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double b = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) b += J(i, j) * s[j].z();
    out[i] = precess(s[i], b, t);
  }
  return out;
}

// Exact signed enumeration over all 8^N discrete configurations.
Eigen::Matrix3d discrete_enumeration(const HamiltonianSpec& spec, double theta, double t, int i, int j) {
  const int n = spec.site_count();
  const auto pts = dtwa_single_spin_weights(theta);
  Accumulator acc;
  std::vector<Eigen::Vector3d> s(n);
  const long total = 1L << (3 * n);
  for (long code = 0; code < total; ++code) {
    double w = 1.0;
    for (int k = 0; k < n; ++k) {
      const auto& p = pts[(code >> (3 * k)) & 7];
      s[k] = p.spin;
      w *= p.raw_weight / 2.0;
    }
    if (w == 0.0) continue;
    const auto e = evolve_all(s, spec.couplings[Z], t);
    acc.add(w, e[i], e[j]);
  }
  CHECK(acc.total == doctest::Approx(1.0));
  return acc.connected();
}

// Gauss-Hermite rule for the standard normal (Golub-Welsch).
std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) T(k, k - 1) = T(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  std::vector<double> x(n), w(n);
  for (int k = 0; k < n; ++k) {
    x[k] = es.eigenvalues()[k];
    w[k] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  }
  return {x, w};
}

// Gaussian phase-space average by tensor quadrature (Y enters at most quadratically).
Eigen::Matrix3d gaussian_quadrature(const HamiltonianSpec& spec, double theta, double t, int i, int j) {
  const int n = spec.site_count();
  const auto [xn, xw] = gauss_hermite(28);
  const auto [yn, yw] = gauss_hermite(3);
  const int nx = static_cast<int>(xn.size()), ny = static_cast<int>(yn.size());
  const double c = std::cos(theta), sn = std::sin(theta);
  Accumulator acc;
  std::vector<Eigen::Vector3d> s(n);
  std::vector<int> idx(2 * n, 0);
  for (;;) {
    double w = 1.0;
    for (int k = 0; k < n; ++k) {
      const double x = xn[idx[2 * k]], y = yn[idx[2 * k + 1]];
      w *= xw[idx[2 * k]] * yw[idx[2 * k + 1]];
      s[k] = 0.5 * Eigen::Vector3d(sn + x * c, y, c - x * sn);
    }
    const auto e = evolve_all(s, spec.couplings[Z], t);
    acc.add(w, e[i], e[j]);
    int d = 0;
    while (d < 2 * n) {
      if (++idx[d] < (d % 2 == 0 ? nx : ny)) break;
      idx[d++] = 0;
    }
    if (d == 2 * n) break;
  }
  return acc.connected();
}

}  // namespace

TEST_SUITE("correlations") {
  TEST_CASE("connected pair and symmetrization") {
    PairExpectations p;
    p.first_i = {0.1, 0.2, 0.3};
    p.first_j = {0.4, -0.1, 0.2};
    p.second = p.first_i * p.first_j.transpose();
    CHECK(connected_pair(p).isZero(1e-16));
    Eigen::Matrix3d c;
    c << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    const Eigen::Matrix3d s = symmetrize(c);
    CHECK(s == s.transpose());
    CHECK(s(0, 1) == 3.0);
  }

  TEST_CASE("raising/lowering to Cartesian") {
    PMCorrelationSet zero;
    CHECK(pm_to_cartesian(zero).isZero(0.0));

    PMCorrelationSet a;
    a.plus_plus = 1.0 / 16;
    a.plus_minus = 1.0 / 16;
    const Eigen::Matrix3d c = pm_to_cartesian(a);
    CHECK(c(X, X) == doctest::Approx(0.25));
    CHECK(c(Y, Y) == doctest::Approx(0.0));
    CHECK(c(X, Y) == doctest::Approx(0.0));

    PMCorrelationSet b;
    b.plus_z = cplx(0, 1.0 / 8);
    const Eigen::Matrix3d d = pm_to_cartesian(b);
    CHECK(d(X, Z) == doctest::Approx(0.0));
    CHECK(d(Y, Z) == doctest::Approx(0.25));
  }

  TEST_CASE("discrete closed form equals exact signed enumeration") {
    HamiltonianSpec spec(4);
    const double J[4][4] = {{0, 1, 0.3, 0.7}, {1, 0, 0.5, 0}, {0.3, 0.5, 0, 1.2}, {0.7, 0, 1.2, 0}};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) spec.couplings[Z](a, b) = J[a][b];
    }
    for (double th : {kPi / 2, kPi / 4, 1.0}) {
      for (double t : {0.6, 2.1}) {
        for (auto [i, j] : {std::pair{0, 1}, std::pair{1, 3}}) {
          const Eigen::Matrix3d e = discrete_enumeration(spec, th, t, i, j);
          const Eigen::Matrix3d cf = closed_form_correlation(ClosedForm::dtwa, spec, th, t, i, j);
          CHECK((e - cf).cwiseAbs().maxCoeff() < 1e-13);
        }
      }
    }
  }

  TEST_CASE("Gaussian closed form equals quadrature of the continuous ensemble") {
    HamiltonianSpec spec(3);
    const double J[3][3] = {{0, 1, 0.4}, {1, 0, 0.8}, {0.4, 0.8, 0}};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) spec.couplings[Z](a, b) = J[a][b];
    }
    for (double th : {kPi / 2, kPi / 4, 0.5}) {
      for (double t : {0.5, 1.5}) {
        const Eigen::Matrix3d q = gaussian_quadrature(spec, th, t, 0, 1);
        const Eigen::Matrix3d cf = closed_form_correlation(ClosedForm::twa, spec, th, t, 0, 1);
        CHECK((q - cf).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }

  TEST_CASE("sampled correlations match closed forms within 4 standard errors") {
    const auto spec = model_preset({ModelKind::ising}, chain(6));
    const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
    const std::vector<SitePair> pairs{{0, 1}, {0, 2}};
    for (Scheme scheme : {Scheme::dtwa, Scheme::twa}) {
      const PhaseSampler sampler(scheme, kPi / 2, 6, 21);
      const auto got = sampled_correlations(sampler, spec, times, pairs, 20000);
      const ClosedForm form = scheme == Scheme::dtwa ? ClosedForm::dtwa : ClosedForm::twa;
      for (std::size_t t = 0; t < times.size(); ++t) {
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          const auto& m = got[t][p];
          const Eigen::Matrix3d cf = closed_form_correlation(form, spec, kPi / 2, times[t], m.i, m.j);
          REQUIRE(m.standard_error);
          for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
              CHECK(std::abs(m.C(a, b) - cf(a, b)) <= 4.0 * (*m.standard_error)(a, b) + 1e-12);
            }
          }
        }
      }
    }
  }

  TEST_CASE("sampled results are independent of thread count and match stored trajectories") {
    const auto spec = model_preset({ModelKind::xx}, chain(5));
    const std::vector<double> times{0.0, 0.3, 0.6};
    const std::vector<SitePair> pairs{{0, 1}};
    const PhaseSampler sampler(Scheme::dtwa, kPi / 4, 5, 3);
    set_thread_count(1);
    const auto a = sampled_correlations(sampler, spec, times, pairs, 3000, {Integrator::rk4, 0.01});
    set_thread_count(3);
    const auto b = sampled_correlations(sampler, spec, times, pairs, 3000, {Integrator::rk4, 0.01});
    set_thread_count(0);
    for (std::size_t t = 0; t < times.size(); ++t) {
      CHECK(a[t][0].C == b[t][0].C);
      CHECK(*a[t][0].standard_error == *b[t][0].standard_error);
    }
    const auto traj = evolve_generic(materialize(sampler, 3000), spec, times, 0.01);
    const auto c = ensemble_correlation(traj, 0, 1, 2);
    CHECK((c.C - a[2][0].C).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(c.method == Method::dtwa_sampled);
    CHECK_THROWS(sampled_correlations(sampler, spec, times, pairs, 0));
  }

  TEST_CASE("jackknife error of a covariance matches the textbook value") {
    std::mt19937 rng(2);
    std::normal_distribution<double> g;
    const std::size_t n = 40000;
    std::vector<PairMoments> blocks(jackknife_blocks(n));
    for (std::size_t k = 0; k < n; ++k) {
      const double x = g(rng), y = g(rng);
      blocks[k * blocks.size() / n].add(1.0, Eigen::Vector3d(x, 0, 0), Eigen::Vector3d(y, 0, 0));
    }
    // Independent unit normals: covariance 0 with standard error 1/sqrt(n).
    const auto e = jackknife_estimate(blocks);
    CHECK(std::abs(e.C(0, 0)) < 4.0 / std::sqrt(n));
    CHECK(e.standard_error(0, 0) * std::sqrt(n) == doctest::Approx(1.0).epsilon(0.15));
    CHECK(jackknife_blocks(10) == 10);
    CHECK(jackknife_blocks(100000) == 256);
  }

  TEST_CASE("correlation along a direction") {
    const Eigen::Matrix3d d = Eigen::Vector3d(0.2, -0.3, 0.5).asDiagonal();
    CHECK(correlation_along(d, Eigen::Vector3d::UnitX()) == doctest::Approx(0.2));
    Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
    q(0, 1) = q(1, 0) = 0.7;
    CHECK(correlation_along(q, Eigen::Vector3d(1, 1, 0).normalized()) == doctest::Approx(0.7));
    Eigen::Matrix3d g;
    g << 0.1, 0.02, 0.3, 0.02, -0.2, 0.05, 0.3, 0.05, 0.4;
    const double th = 0.8;
    const Eigen::Vector3d n(std::sin(th), 0, std::cos(th));
    CHECK(correlation_along(g, n) ==
          doctest::Approx(std::pow(std::sin(th), 2) * 0.1 + 2 * std::sin(th) * std::cos(th) * 0.3 +
                          std::pow(std::cos(th), 2) * 0.4));
    CHECK_THROWS_AS(correlation_along(g, Eigen::Vector3d(1, 1, 0)), std::invalid_argument);
  }

  TEST_CASE("eigen summary") {
    CHECK(eigensummary(Eigen::Matrix3d::Zero()).dimensionality == 0);
    Eigen::Matrix3d c;
    c << 0.1, 0.02, -0.3, 0.02, -0.2, 0.05, -0.3, 0.05, 0.4;
    const auto s = eigensummary(c);
    CHECK((s.vectors.transpose() * s.vectors - Eigen::Matrix3d::Identity()).norm() < 1e-10);
    for (int k = 0; k < 3; ++k) CHECK((c * s.vectors.col(k) - s.values[k] * s.vectors.col(k)).norm() < 1e-10);
    CHECK(std::abs(s.values[0]) >= std::abs(s.values[1]));
    CHECK(std::abs(s.values[1]) >= std::abs(s.values[2]));
    CHECK(s.dimensionality == 3);
    CHECK(eigensummary(Eigen::Vector3d(1, 0.04, 0).asDiagonal().toDenseMatrix()).dimensionality == 1);
  }

  TEST_CASE("two-spin discrete and Gaussian zero modes") {
    HamiltonianSpec spec(2);
    spec.couplings[Z](0, 1) = spec.couplings[Z](1, 0) = 1.0;
    for (ClosedForm f : {ClosedForm::dtwa, ClosedForm::twa}) {
      for (double th : {kPi / 2, kPi / 4, 0.6}) {
        for (double t : {0.3, 1.0, 2.5}) {
          const auto s = eigensummary(closed_form_correlation(f, spec, th, t, 0, 1));
          CHECK(std::abs(s.values[2]) < 1e-12);
          CHECK(line_angle(s.vectors.col(2), two_spin_zero_mode(f, th, t)) < 1e-6);
        }
      }
    }
  }

  TEST_CASE("square-lattice zero modes") {
    LatticeSpec l;
    l.geometry = Geometry::square;
    l.extent = 4;
    const auto spec = model_preset({ModelKind::ising}, l);
    for (ClosedForm f : {ClosedForm::dtwa, ClosedForm::twa}) {
      for (double th : {kPi / 2, kPi / 4, 1.0}) {
        for (double t : {0.3, 1.0, 2.5}) {
          const auto s = eigensummary(closed_form_correlation(f, spec, th, t, 0, 1));
          CHECK(std::abs(s.values[2]) < 1e-10);
          CHECK(line_angle(s.vectors.col(2), nn_square_zero_mode(f, th, t)) < 1e-6);
        }
      }
      // Next-nearest neighbours have a zero mode along z.
      const auto nnn = eigensummary(closed_form_correlation(ClosedForm::dtwa, spec, 1.0, 0.7, 0, 5));
      CHECK(std::abs(nnn.values[2]) < 1e-12);
      CHECK(line_angle(nnn.vectors.col(2), Eigen::Vector3d::UnitZ()) < 1e-6);
    }
  }

  TEST_CASE("delta norm") {
    const Eigen::Matrix3d a = Eigen::Vector3d(0.3, 0, 0).asDiagonal();
    CHECK(delta_norm(a, a) == 0.0);
    CHECK(delta_norm(a, Eigen::Matrix3d::Zero()) == doctest::Approx(0.3));
    CHECK(delta_norm(a, Eigen::Matrix3d::Zero(), NormKind::spectral) == doctest::Approx(0.3));
    Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
    b(0, 1) = b(1, 0) = 0.5;
    CHECK(delta_norm(b, Eigen::Matrix3d::Zero()) == doctest::Approx(std::sqrt(0.5)));
    CHECK(delta_norm(b, Eigen::Matrix3d::Zero(), NormKind::spectral) == doctest::Approx(0.5));
  }

  TEST_CASE("short-time deficit along the Bloch vector") {
    for (ClosedForm f : {ClosedForm::dtwa, ClosedForm::twa}) {
      CHECK(short_time_delta_nn({0, 0, 1}, 0.7, 0.0, f) == 0.0);
      CHECK(short_time_delta_nn({0, 0, 1}, kPi / 2, 0.3, f) == doctest::Approx(0.09 / 16));
      CHECK(short_time_delta_nn({1, 1, 0}, kPi / 2, 0.3, f) == doctest::Approx(0.09 / 16));
      CHECK(short_time_delta_nn({0, 0, 1}, 0.0, 0.3, f) == doctest::Approx(0.0));
    }
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 200; ++k) {
      const Eigen::Vector3d j(u(rng), u(rng), u(rng));
      const double th = std::abs(u(rng)) * kPi / 4;
      const double t = std::abs(u(rng));
      CHECK(short_time_delta_nn(j, th, t, ClosedForm::dtwa) >= 0.0);
      CHECK(short_time_delta_nn(j, th, t, ClosedForm::twa) >= 0.0);
      // Componentwise deficits contract to the directional one.
      const Eigen::Vector3d n(std::sin(th), 0, std::cos(th));
      const Eigen::Matrix3d d = short_time_delta_components(j, 0.5 * n, t);
      CHECK(n.dot(d * n) == doctest::Approx(short_time_delta_nn(j, th, t, ClosedForm::dtwa)).epsilon(1e-12));
    }
  }

  TEST_CASE("short-time components") {
    const double t = 0.2;
    const Eigen::Matrix3d d = short_time_delta_components({0, 0, 1}, {0.5, 0, 0}, t);
    CHECK(d(X, X) == doctest::Approx(t * t / 16));
    CHECK(d(X, Y) == 0.0);
    CHECK(short_time_delta_components({0, 0, 0}, {0.3, 0.2, 0.1}, t).isZero(0.0));
    CHECK(short_time_delta_components({0.4, 0.9, 1.0}, {0.3, 0.0, 0.4}, t)(X, Y) == 0.0);
  }

  TEST_CASE("discrete componentwise deficit matches closed forms for Ising") {
    const auto spec = model_preset({ModelKind::ising}, chain(11));
    const double th = 0.9;
    const Eigen::Vector3d s = 0.5 * Eigen::Vector3d(std::sin(th), 0, std::cos(th));
    std::array<Eigen::Matrix3d, 3> deltas;
    const std::array<double, 3> ts{0.01, 0.02, 0.04};
    for (int k = 0; k < 3; ++k) {
      deltas[k] = closed_form_correlation(ClosedForm::exact, spec, th, ts[k], 0, 1) -
                  closed_form_correlation(ClosedForm::dtwa, spec, th, ts[k], 0, 1);
    }
    const Eigen::Matrix3d want = short_time_delta_components({0, 0, 1}, s, 1.0);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double got = richardson_quadratic(ts, {deltas[0](a, b), deltas[1](a, b), deltas[2](a, b)});
        CHECK(got == doctest::Approx(want(a, b)).epsilon(1e-4).scale(1e-3));
      }
    }
  }

  TEST_CASE("Richardson extrapolation removes cubic and quartic terms") {
    const std::array<double, 3> ts{0.02, 0.04, 0.08};
    std::array<double, 3> d{};
    for (int k = 0; k < 3; ++k) d[k] = 0.7 * ts[k] * ts[k] - 3.0 * std::pow(ts[k], 3) + 11.0 * std::pow(ts[k], 4);
    CHECK(richardson_quadratic(ts, d) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK_THROWS(richardson_quadratic({0.02, 0.03, 0.08}, d));
  }

  TEST_CASE("all methods agree through first order in t") {
    const auto spec = model_preset({ModelKind::ising}, chain(7));
    for (double th : {kPi / 2, kPi / 4}) {
      double prev = 1.0;
      for (double t : {1e-2, 1e-3, 1e-4}) {
        const Eigen::Matrix3d e = closed_form_correlation(ClosedForm::exact, spec, th, t, 0, 1);
        double worst = 0.0;
        for (ClosedForm f : {ClosedForm::dtwa, ClosedForm::twa}) {
          worst = std::max(worst, (e - closed_form_correlation(f, spec, th, t, 0, 1)).cwiseAbs().maxCoeff() / t);
        }
        CHECK(worst < 0.2 * prev);
        prev = worst;
      }
    }
  }

  TEST_CASE("first half-maximum time") {
    std::vector<double> t, v;
    for (int k = 0; k <= 4000; ++k) {
      t.push_back(k * 1e-3);
      v.push_back(std::sin(t.back()));
    }
    const auto h = first_half_max_time(t, v);
    REQUIRE(h);
    CHECK(*h == doctest::Approx(kPi / 6).epsilon(1e-5));
    const std::vector<double> flat{0, 0.1, 0.2};
    CHECK_FALSE(first_half_max_time(std::vector<double>{0, 1, 2}, flat));
  }

  TEST_CASE("method names round trip") {
    for (Method m : {Method::exact_closed_form, Method::exact_statevector, Method::dtwa_closed_form,
                     Method::dtwa_sampled, Method::twa_closed_form, Method::twa_sampled}) {
      CHECK(parse_method(to_string(m)) == m);
    }
    CHECK_THROWS(parse_method("bbgky"));
  }
}
