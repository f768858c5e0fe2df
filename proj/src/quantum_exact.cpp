#include "wignerdyn/quantum_exact.hpp"

#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wignerdyn {

namespace {

constexpr cplx kI{0.0, 1.0};

void check_pair(int n, int j, int k) {
  if (j < 0 || k < 0 || j >= n || k >= n) throw std::out_of_range("site index outside the lattice");
  if (j == k) throw std::invalid_argument("pair correlations need two distinct sites");
}

// Bit mask of a site; site 0 is the most significant bit.
std::size_t site_mask(int n, int site) { return std::size_t{1} << (n - 1 - site); }

// +1/2 for up (bit 0), -1/2 for down.
double sz_of(std::size_t state, std::size_t mask) { return (state & mask) ? -0.5 : 0.5; }

}  // namespace

std::string_view to_string(ClosedForm f) {
  switch (f) {
    case ClosedForm::exact: return "exact";
    case ClosedForm::dtwa: return "dtwa";
    case ClosedForm::twa: return "twa";
  }
  return "?";
}

StateVector product_state(double theta, int n_sites) {
  if (n_sites < 1 || n_sites > kMaxStateVectorSites) {
    throw std::invalid_argument("state vectors support 1.." + std::to_string(kMaxStateVectorSites) +
                                " sites, got " + std::to_string(n_sites));
  }
  const double up = std::cos(theta / 2.0);
  const double down = std::sin(theta / 2.0);
  const std::size_t dim = std::size_t{1} << n_sites;
  StateVector psi(static_cast<Eigen::Index>(dim));
  for (std::size_t b = 0; b < dim; ++b) {
    const int n_down = std::popcount(b);
    psi[static_cast<Eigen::Index>(b)] = std::pow(up, n_sites - n_down) * std::pow(down, n_down);
  }
  return psi;
}

int sites_from_dimension(Eigen::Index dim) {
  if (dim < 2 || (dim & (dim - 1)) != 0) throw std::invalid_argument("state dimension is not 2^N");
  return std::countr_zero(static_cast<std::size_t>(dim));
}

PMCorrelationSet closed_form_ising(ClosedForm method, const HamiltonianSpec& spec, double theta,
                                   double t, int j, int k) {
  if (!spec.is_field_free_ising()) {
    throw std::invalid_argument("closed forms exist only for field-free Ising couplings");
  }
  const int n = spec.site_count();
  check_pair(n, j, k);
  const auto& J = spec.couplings[Z];
  const double c = std::cos(theta);
  const double s = std::sin(theta);

  // Per-neighbour factor of the precession average.
  auto factor = [&](double coupling) -> cplx {
    if (method == ClosedForm::twa) {
      const double u = coupling * t;
      return std::exp(cplx(-u * u * s * s / 8.0, -u * c / 2.0));
    }
    const double half = coupling * t / 2.0;
    return {std::cos(half), -c * std::sin(half)};
  };
  auto product_except = [&](int a, int b, auto&& coupling_of) {
    cplx p = 1.0;
    for (int l = 0; l < n; ++l) {
      if (l != a && l != b) p *= factor(coupling_of(l));
    }
    return p;
  };
  auto magnetization = [&](int a) {
    return 0.25 * s * product_except(a, a, [&](int l) { return J(a, l); });
  };

  PMCorrelationSet out;
  out.plus_j = magnetization(j);
  out.plus_k = magnetization(k);
  out.z_j = out.z_k = c / 2.0;
  out.z_z = c * c / 4.0;

  const double jk = J(j, k);
  const cplx same = product_except(j, k, [&](int l) { return J(j, l) + J(k, l); });
  const cplx opposite = product_except(j, k, [&](int l) { return J(j, l) - J(k, l); });

  if (method == ClosedForm::twa) {
    const double u = jk * t;
    const cplx phi = factor(jk);
    const cplx lead = 1.0 + kI * u * c / 2.0;
    out.plus_plus = s * s / 16.0 * lead * lead * phi * phi * same;
    out.plus_minus = s * s / 16.0 * (1.0 + u * u * c * c / 4.0) * std::exp(-u * u * s * s / 4.0) * opposite;
    auto pz = [&](int a, int b) {
      const cplx all = product_except(a, a, [&](int l) { return J(a, l); });
      return s / 8.0 * (c - kI * s * s * J(a, b) * t / 2.0) * all;
    };
    out.plus_z = pz(j, k);
    out.z_plus = pz(k, j);
    return out;
  }

  out.plus_plus = s * s / 16.0 * same;
  out.plus_minus = s * s / 16.0 * opposite;
  auto pz = [&](int a, int b) {
    const double half = J(a, b) * t / 2.0;
    const cplx rest = product_except(a, b, [&](int l) { return J(a, l); });
    return s / 8.0 * (c * std::cos(half) - kI * std::sin(half)) * rest;
  };
  out.plus_z = pz(j, k);
  out.z_plus = pz(k, j);
  if (method == ClosedForm::dtwa) {
    const double damp = std::pow(std::cos(jk * t / 2.0), 2);
    out.plus_plus *= damp;
    out.plus_minus *= damp;
  }
  return out;
}

SparseOperator build_hamiltonian(const HamiltonianSpec& spec) {
  spec.check();
  const int n = spec.site_count();
  if (n < 1 || n > kMaxStateVectorSites) {
    throw std::invalid_argument("state-vector Hamiltonians support at most " +
                                std::to_string(kMaxStateVectorSites) + " sites, got " +
                                std::to_string(n));
  }
  const std::size_t dim = std::size_t{1} << n;
  const Eigen::Vector3d& h = spec.field;
  std::vector<Eigen::Triplet<cplx>> entries;
  for (std::size_t b = 0; b < dim; ++b) {
    double diag = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t mi = site_mask(n, i);
      const double si = sz_of(b, mi);
      diag -= h.z() * si;
      if (h.x() != 0.0 || h.y() != 0.0) {
        // S^x|s> = 1/2|-s>, S^y|s> = i s|-s> with s = +-1/2.
        const cplx amp = 0.5 * h.x() + kI * si * h.y();
        entries.emplace_back(static_cast<int>(b ^ mi), static_cast<int>(b), -amp);
      }
      for (int j = i + 1; j < n; ++j) {
        const std::size_t mj = site_mask(n, j);
        const double sj = sz_of(b, mj);
        diag -= spec.couplings[Z](i, j) * si * sj;
        const double jx = spec.couplings[X](i, j);
        const double jy = spec.couplings[Y](i, j);
        if (jx != 0.0 || jy != 0.0) {
          const double amp = 0.25 * jx - jy * si * sj;
          if (amp != 0.0) {
            entries.emplace_back(static_cast<int>(b ^ mi ^ mj), static_cast<int>(b), -amp);
          }
        }
      }
    }
    if (diag != 0.0) entries.emplace_back(static_cast<int>(b), static_cast<int>(b), diag);
  }
  SparseOperator op(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  op.setFromTriplets(entries.begin(), entries.end());
  op.makeCompressed();
  return op;
}

namespace {

// Lanczos basis of one propagation step, reused while the step length shrinks.
class LanczosStep {
 public:
  LanczosStep(const SparseOperator& h, int max_dim) : h_(h), max_dim_(max_dim) {}

  void build(const StateVector& v) {
    beta0_ = v.norm();
    basis_.clear();
    alpha_.clear();
    beta_.clear();
    basis_.push_back(v / beta0_);
    breakdown_ = false;
    residual_ = 0.0;
    for (int j = 0; j < max_dim_; ++j) {
      StateVector w = h_ * basis_[j];
      alpha_.push_back(basis_[j].dot(w).real());
      w -= alpha_[j] * basis_[j];
      if (j > 0) w -= beta_[j - 1] * basis_[j - 1];
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis_) w -= q.dot(w) * q;
      }
      const double b = w.norm();
      if (b < 1e-13 * (1.0 + std::abs(alpha_[j]))) {
        breakdown_ = true;
        break;
      }
      if (j + 1 == max_dim_) {
        residual_ = b;
        break;
      }
      beta_.push_back(b);
      basis_.push_back(w / b);
    }
    const int m = static_cast<int>(alpha_.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) tri(i, i) = alpha_[i];
    for (int i = 0; i + 1 < m; ++i) tri(i, i + 1) = tri(i + 1, i) = beta_[i];
    eig_.compute(tri);
  }

  // Coefficients of exp(-i T tau) e_1 and the a posteriori error estimate.
  double coefficients(double tau, Eigen::VectorXcd& out) const {
    const auto& q = eig_.eigenvectors();
    const auto& lam = eig_.eigenvalues();
    const Eigen::Index m = lam.size();
    Eigen::VectorXcd phase(m);
    for (Eigen::Index i = 0; i < m; ++i) phase[i] = std::exp(-kI * lam[i] * tau) * q(0, i);
    out = q.cast<cplx>() * phase;
    if (breakdown_) return 0.0;
    return beta0_ * residual_ * std::abs(out[m - 1]);
  }

  StateVector combine(const Eigen::VectorXcd& coef) const {
    StateVector r = StateVector::Zero(basis_[0].size());
    for (Eigen::Index i = 0; i < coef.size(); ++i) r += coef[i] * basis_[static_cast<std::size_t>(i)];
    return beta0_ * r;
  }

 private:
  const SparseOperator& h_;
  int max_dim_;
  double beta0_ = 1.0;
  double residual_ = 0.0;
  bool breakdown_ = false;
  std::vector<StateVector> basis_;
  std::vector<double> alpha_, beta_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
};

}  // namespace

std::vector<StateVector> evolve_state(const StateVector& psi0, const SparseOperator& h,
                                      std::span<const double> times, KrylovOptions options) {
  if (h.rows() != psi0.size() || h.cols() != psi0.size()) {
    throw std::invalid_argument("state and Hamiltonian dimensions differ");
  }
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("initial state is not normalized");
  if (times.empty()) return {};
  if (times.front() < 0.0) throw std::invalid_argument("times must be nonnegative");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw std::invalid_argument("times must increase strictly");
  }

  std::vector<StateVector> out;
  out.reserve(times.size());
  StateVector psi = psi0;
  double now = 0.0;
  double tau_guess = 0.5;
  LanczosStep step(h, std::max(2, options.max_dimension));
  Eigen::VectorXcd coef;
  for (double target : times) {
    while (target - now > 0.0) {
      step.build(psi);
      const double remaining = target - now;
      double tau = std::min(tau_guess, remaining);
      bool reduced = false;
      for (;;) {
        const double err = step.coefficients(tau, coef);
        if (err <= options.tolerance) break;
        tau *= 0.5;
        reduced = true;
        if (tau < 1e-10) {
          throw std::runtime_error("Krylov propagation could not reach tolerance " +
                                   std::to_string(options.tolerance) + " at t = " +
                                   std::to_string(now));
        }
      }
      psi = step.combine(coef);
      if (reduced) tau_guess = tau;
      else if (tau == tau_guess) tau_guess *= 1.25;
      now = tau == remaining ? target : now + tau;
    }
    out.push_back(psi);
  }
  return out;
}

StateVector apply_spin(const StateVector& psi, int site, Axis axis) {
  const int n = sites_from_dimension(psi.size());
  if (site < 0 || site >= n) throw std::out_of_range("site index outside the state");
  const std::size_t mask = site_mask(n, site);
  StateVector out(psi.size());
  for (Eigen::Index b = 0; b < psi.size(); ++b) {
    const auto ub = static_cast<std::size_t>(b);
    const double s = sz_of(ub, mask);
    switch (axis) {
      case X: out[static_cast<Eigen::Index>(ub ^ mask)] = 0.5 * psi[b]; break;
      case Y: out[static_cast<Eigen::Index>(ub ^ mask)] = kI * s * psi[b]; break;
      case Z: out[b] = s * psi[b]; break;
    }
  }
  return out;
}

PairExpectations quantum_pair_expectations(const StateVector& psi, int i, int j) {
  const int n = sites_from_dimension(psi.size());
  check_pair(n, i, j);
  PairExpectations e;
  for (int nu = 0; nu < 3; ++nu) {
    const StateVector on_j = apply_spin(psi, j, static_cast<Axis>(nu));
    e.first_j[nu] = psi.dot(on_j).real();
    for (int mu = 0; mu < 3; ++mu) {
      e.second(mu, nu) = psi.dot(apply_spin(on_j, i, static_cast<Axis>(mu))).real();
    }
  }
  for (int mu = 0; mu < 3; ++mu) {
    e.first_i[mu] = psi.dot(apply_spin(psi, i, static_cast<Axis>(mu))).real();
  }
  return e;
}

}  // namespace wignerdyn
