#include "wignerdyn/correlations.hpp"

#include "wignerdyn/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wignerdyn {

namespace {

constexpr cplx kI{0.0, 1.0};

constexpr std::array<std::pair<Method, std::string_view>, 6> kMethodNames{{
    {Method::exact_closed_form, "exact_closed_form"},
    {Method::exact_statevector, "exact_statevector"},
    {Method::dtwa_closed_form, "dtwa_closed_form"},
    {Method::dtwa_sampled, "dtwa_sampled"},
    {Method::twa_closed_form, "twa_closed_form"},
    {Method::twa_sampled, "twa_sampled"},
}};

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [k, name] : kMethodNames) {
    if (k == m) return name;
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (const auto& [k, n] : kMethodNames) {
    if (n == name) return k;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

bool is_sampled(Method m) { return m == Method::dtwa_sampled || m == Method::twa_sampled; }

bool is_closed_form(Method m) {
  return m == Method::exact_closed_form || m == Method::dtwa_closed_form ||
         m == Method::twa_closed_form;
}

bool is_exact(Method m) { return m == Method::exact_closed_form || m == Method::exact_statevector; }

Eigen::Matrix3d connected_pair(const PairExpectations& e) {
  return e.second - e.first_i * e.first_j.transpose();
}

Eigen::Matrix3d symmetrize(const Eigen::Matrix3d& c) { return 0.5 * (c + c.transpose()); }

Eigen::Matrix3d pm_to_cartesian(const PMCorrelationSet& pm) {
  // Connected raising/lowering correlations.
  const cplx pp = pm.plus_plus - pm.plus_j * pm.plus_k;
  const cplx pmc = pm.plus_minus - pm.plus_j * pm.minus_k();
  const cplx mp = pm.minus_plus() - pm.minus_j() * pm.plus_k;
  const cplx mm = pm.minus_minus() - pm.minus_j() * pm.minus_k();
  const cplx pz = pm.plus_z - pm.plus_j * pm.z_k;
  const cplx mz = pm.minus_z() - pm.minus_j() * pm.z_k;
  const cplx zp = pm.z_plus - pm.z_j * pm.plus_k;
  const cplx zm = pm.z_minus() - pm.z_j * pm.minus_k();
  const double zz = pm.z_z - pm.z_j * pm.z_k;

  // S^x = S^+ + S^-, S^y = -i (S^+ - S^-).
  Eigen::Matrix3cd c;
  c(X, X) = pp + pmc + mp + mm;
  c(X, Y) = -kI * (pp - pmc + mp - mm);
  c(Y, X) = -kI * (pp + pmc - mp - mm);
  c(Y, Y) = -(pp - pmc - mp + mm);
  c(X, Z) = pz + mz;
  c(Y, Z) = -kI * (pz - mz);
  c(Z, X) = zp + zm;
  c(Z, Y) = -kI * (zp - zm);
  c(Z, Z) = zz;
  const double residue = c.imag().cwiseAbs().maxCoeff();
  if (residue > 1e-8) {
    throw std::domain_error("raising/lowering correlations are not conjugation-consistent (imaginary residue " +
                            std::to_string(residue) + ")");
  }
  return c.real();
}

Eigen::Matrix3d closed_form_correlation(ClosedForm method, const HamiltonianSpec& spec, double theta,
                                        double t, int i, int j) {
  return symmetrize(pm_to_cartesian(closed_form_ising(method, spec, theta, t, i, j)));
}

std::vector<std::vector<CorrelationMatrix>> statevector_correlations(
    const HamiltonianSpec& spec, double theta, std::span<const double> times,
    std::span<const SitePair> pairs) {
  const SparseOperator h = build_hamiltonian(spec);
  const auto states = evolve_state(product_state(theta, spec.site_count()), h, times);
  std::vector<std::vector<CorrelationMatrix>> out(times.size());
  for (std::size_t t = 0; t < times.size(); ++t) {
    for (const auto& [i, j] : pairs) {
      CorrelationMatrix m;
      m.C = symmetrize(connected_pair(quantum_pair_expectations(states[t], i, j)));
      m.i = i;
      m.j = j;
      m.t = times[t];
      m.method = Method::exact_statevector;
      out[t].push_back(m);
    }
  }
  return out;
}

void PairMoments::add(double w, const Eigen::Vector3d& si, const Eigen::Vector3d& sj) {
  weight += w;
  count += 1.0;
  first_i += w * si;
  first_j += w * sj;
  second.noalias() += (w * si) * sj.transpose();
}

PairMoments& PairMoments::operator+=(const PairMoments& o) {
  weight += o.weight;
  count += o.count;
  first_i += o.first_i;
  first_j += o.first_j;
  second += o.second;
  return *this;
}

namespace {

Eigen::Matrix3d estimate_from(const PairMoments& m) {
  const Eigen::Vector3d a = m.first_i / m.count;
  const Eigen::Vector3d b = m.first_j / m.count;
  return symmetrize(m.second / m.count - a * b.transpose());
}

}  // namespace

SampledEstimate jackknife_estimate(std::span<const PairMoments> blocks) {
  PairMoments total;
  for (const auto& b : blocks) total += b;
  if (total.count <= 0.0) throw std::invalid_argument("no samples to estimate from");
  SampledEstimate out;
  out.C = estimate_from(total);

  std::vector<Eigen::Matrix3d> leave_out;
  for (const auto& b : blocks) {
    if (b.count <= 0.0) continue;
    PairMoments rest = total;
    rest.weight -= b.weight;
    rest.count -= b.count;
    rest.first_i -= b.first_i;
    rest.first_j -= b.first_j;
    rest.second -= b.second;
    if (rest.count > 0.0) leave_out.push_back(estimate_from(rest));
  }
  const auto nb = static_cast<double>(leave_out.size());
  if (leave_out.size() < 2) {
    out.standard_error = Eigen::Matrix3d::Constant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
  for (const auto& m : leave_out) mean += m;
  mean /= nb;
  Eigen::Matrix3d var = Eigen::Matrix3d::Zero();
  for (const auto& m : leave_out) var += (m - mean).cwiseAbs2();
  out.standard_error = ((nb - 1.0) / nb * var).cwiseSqrt();
  return out;
}

std::size_t jackknife_blocks(std::size_t n_samples) { return std::min<std::size_t>(n_samples, 256); }

std::vector<std::vector<CorrelationMatrix>> sampled_correlations(
    const PhaseSampler& sampler, const HamiltonianSpec& spec, std::span<const double> times,
    std::span<const SitePair> pairs, std::size_t n_samples, IntegratorOptions integrator) {
  if (n_samples == 0) throw std::invalid_argument("sampled correlations need at least one sample");
  if (sampler.spin_count() != spec.site_count()) {
    throw std::invalid_argument("sampler and Hamiltonian disagree on the number of spins");
  }
  check_time_grid(times);
  const int n = spec.site_count();
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
      throw std::invalid_argument("invalid site pair (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ")");
    }
  }

  const std::size_t n_blocks = jackknife_blocks(n_samples);
  const std::size_t n_times = times.size();
  const std::size_t n_pairs = pairs.size();
  // moments[block][time * n_pairs + pair]
  std::vector<std::vector<PairMoments>> moments(n_blocks,
                                                std::vector<PairMoments>(n_times * n_pairs));
  const SpinPropagator prototype(spec, integrator);
  const double scale = sampler.weight_scale();

  parallel_for(n_blocks, [&](std::size_t b) {
    SpinPropagator prop = prototype;
    std::vector<Eigen::Vector3d> spins(n);
    auto& acc = moments[b];
    const std::size_t begin = b * n_samples / n_blocks;
    const std::size_t end = (b + 1) * n_samples / n_blocks;
    for (std::size_t k = begin; k < end; ++k) {
      const double w = scale * sampler.draw(k, spins);
      prop.propagate(spins, times, [&](std::size_t t, std::span<const Eigen::Vector3d> s) {
        for (std::size_t p = 0; p < n_pairs; ++p) {
          acc[t * n_pairs + p].add(w, s[pairs[p].first], s[pairs[p].second]);
        }
      });
    }
  });

  const Method tag = sampler.scheme() == Scheme::dtwa ? Method::dtwa_sampled : Method::twa_sampled;
  std::vector<std::vector<CorrelationMatrix>> out(n_times);
  std::vector<PairMoments> column(n_blocks);
  for (std::size_t t = 0; t < n_times; ++t) {
    for (std::size_t p = 0; p < n_pairs; ++p) {
      for (std::size_t b = 0; b < n_blocks; ++b) column[b] = moments[b][t * n_pairs + p];
      const SampledEstimate e = jackknife_estimate(column);
      CorrelationMatrix m;
      m.C = e.C;
      m.standard_error = e.standard_error;
      m.i = pairs[p].first;
      m.j = pairs[p].second;
      m.t = times[t];
      m.method = tag;
      out[t].push_back(m);
    }
  }
  return out;
}

CorrelationMatrix ensemble_correlation(const TrajectorySet& trajectories, int i, int j,
                                       std::size_t time_index) {
  const std::size_t n = trajectories.n_samples;
  if (n == 0) throw std::invalid_argument("ensemble is empty");
  if (i == j || i < 0 || j < 0 || i >= trajectories.n_spins || j >= trajectories.n_spins) {
    throw std::invalid_argument("invalid site pair");
  }
  if (time_index >= trajectories.times.size()) throw std::out_of_range("time index outside the grid");
  const std::size_t n_blocks = jackknife_blocks(n);
  std::vector<PairMoments> blocks(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    for (std::size_t k = b * n / n_blocks; k < (b + 1) * n / n_blocks; ++k) {
      const auto s = trajectories.sample(time_index, k);
      blocks[b].add(trajectories.weight_scale * trajectories.signs[k], s[i], s[j]);
    }
  }
  const SampledEstimate e = jackknife_estimate(blocks);
  CorrelationMatrix m;
  m.C = e.C;
  m.standard_error = e.standard_error;
  m.i = i;
  m.j = j;
  m.t = trajectories.times[time_index];
  m.method = trajectories.scheme == Scheme::dtwa ? Method::dtwa_sampled : Method::twa_sampled;
  return m;
}

double correlation_along(const Eigen::Matrix3d& C, const Eigen::Vector3d& n) {
  if (std::abs(n.norm() - 1.0) > 1e-9) throw std::invalid_argument("direction must be a unit vector");
  return n.dot(C * n);
}

EigenSummary eigensummary(const Eigen::Matrix3d& C, double rel_threshold) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(symmetrize(C));
  std::array<int, 3> order{0, 1, 2};
  const auto& lam = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(lam[a]) > std::abs(lam[b]); });
  EigenSummary s;
  for (int k = 0; k < 3; ++k) {
    s.values[k] = lam[order[k]];
    s.vectors.col(k) = solver.eigenvectors().col(order[k]);
  }
  const double top = std::abs(s.values[0]);
  if (top > 0.0) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(s.values[k]) >= rel_threshold * top) ++s.dimensionality;
    }
  }
  return s;
}

std::string_view to_string(NormKind k) { return k == NormKind::frobenius ? "frobenius" : "spectral"; }

NormKind parse_norm_kind(std::string_view name) {
  if (name == "frobenius") return NormKind::frobenius;
  if (name == "spectral") return NormKind::spectral;
  throw std::invalid_argument("unknown matrix norm '" + std::string(name) + "'");
}

double delta_norm(const Eigen::Matrix3d& exact, const Eigen::Matrix3d& approx, NormKind kind) {
  const Eigen::Matrix3d d = exact - approx;
  if (kind == NormKind::frobenius) return d.norm();
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(symmetrize(d), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

double short_time_delta_nn(const Eigen::Vector3d& couplings, double theta, double t,
                           ClosedForm method) {
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  const double c2 = std::pow(std::cos(theta), 2);
  const double s2 = std::pow(std::sin(theta), 2);
  double mixed = 0.0;
  switch (method) {
    case ClosedForm::dtwa: mixed = couplings.x() * c2 - couplings.z() * s2; break;
    case ClosedForm::twa: mixed = couplings.x() * c2 + couplings.z() * s2; break;
    case ClosedForm::exact: return 0.0;
  }
  return t * t / 16.0 * (couplings.y() * couplings.y() + mixed * mixed);
}

Eigen::Matrix3d short_time_delta_components(const Eigen::Vector3d& couplings,
                                            const Eigen::Vector3d& s, double t) {
  const double pre = t * t / 4.0;
  Eigen::Matrix3d d;
  // Diagonal and off-diagonal entries follow from (x, y, z) by cyclic relabelling.
  for (int a = 0; a < 3; ++a) {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    const double ja = couplings[a], jb = couplings[b], jc = couplings[c];
    d(a, a) = pre * (s[a] * s[a] * (jb * jb + jc * jc) - s[b] * s[b] * ja * jb - s[c] * s[c] * ja * jc);
    d(a, b) = d(b, a) = pre * s[a] * s[b] * jc * (jc - 2.0 * s[c] * s[c] * (ja + jb));
  }
  return d;
}

double richardson_quadratic(const std::array<double, 3>& times, const std::array<double, 3>& deltas) {
  for (int k = 0; k < 2; ++k) {
    if (std::abs(times[k + 1] - 2.0 * times[k]) > 1e-12 * times[k + 1]) {
      throw std::invalid_argument("Richardson extrapolation needs times t, 2t, 4t");
    }
  }
  if (!(times[0] > 0.0)) throw std::invalid_argument("Richardson extrapolation needs positive times");
  std::array<double, 3> f{};
  for (int k = 0; k < 3; ++k) f[k] = deltas[k] / (times[k] * times[k]);
  const double r1a = 2.0 * f[0] - f[1];
  const double r1b = 2.0 * f[1] - f[2];
  return (4.0 * r1a - r1b) / 3.0;
}

std::optional<double> first_half_max_time(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw std::invalid_argument("times and values differ in length");
  std::size_t peak = values.size();
  for (std::size_t k = 1; k + 1 < values.size(); ++k) {
    const double v = std::abs(values[k]);
    if (v >= std::abs(values[k - 1]) && v > std::abs(values[k + 1])) {
      peak = k;
      break;
    }
  }
  if (peak == values.size()) return std::nullopt;
  const double half = 0.5 * std::abs(values[peak]);
  for (std::size_t k = 1; k <= peak; ++k) {
    const double a = std::abs(values[k - 1]);
    const double b = std::abs(values[k]);
    if (a < half && b >= half) return times[k - 1] + (half - a) / (b - a) * (times[k] - times[k - 1]);
  }
  return std::nullopt;
}

namespace {

void require_wigner(ClosedForm method) {
  if (method == ClosedForm::exact) {
    throw std::invalid_argument("zero modes are a property of the Wigner closed forms only");
  }
}

}  // namespace

Eigen::Vector3d two_spin_zero_mode(ClosedForm method, double theta, double jt) {
  require_wigner(method);
  const double c = std::cos(theta), s = std::sin(theta);
  if (method == ClosedForm::dtwa) return {s, 0.0, c * std::cos(jt / 2.0)};
  const double phase = jt / 2.0 * c;
  return {s * std::cos(phase), -s * std::sin(phase), c * std::exp(-jt * jt * s * s / 8.0)};
}

Eigen::Vector3d nn_chain_zero_mode(ClosedForm method, double theta, double jt) {
  require_wigner(method);
  const double c = std::cos(theta), s = std::sin(theta);
  if (method == ClosedForm::dtwa) {
    const double sh = std::sin(jt / 2.0), ch = std::cos(jt / 2.0);
    // Scaled by sin(theta) cos(jt/2) to stay finite at theta = 0.
    return {s * ch, -c * s * sh, c * ch * (1.0 - s * s * sh * sh)};
  }
  const double phase = jt * c;
  return {s * std::cos(phase), -s * std::sin(phase), c * std::exp(-jt * jt * s * s / 4.0)};
}

Eigen::Vector3d nn_square_zero_mode(ClosedForm method, double theta, double jt) {
  require_wigner(method);
  const double c = std::cos(theta), s = std::sin(theta);
  if (method == ClosedForm::dtwa) {
    const double sh = std::sin(jt / 2.0), ch = std::cos(jt / 2.0);
    const double damp = 1.0 - s * s * sh * sh;
    // Scaled by cos(theta) cos(jt/2).
    return {s * ch * (ch * ch - 3.0 * c * c * sh * sh),
            -s * c * sh * (1.0 + 2.0 * std::cos(jt) + sh * sh * s * s),
            c * ch * damp * damp * damp};
  }
  const double phase = 2.0 * jt * c;
  return {s * std::cos(phase), -s * std::sin(phase), c * std::exp(-jt * jt * s * s / 2.0)};
}

double line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

}  // namespace wignerdyn
