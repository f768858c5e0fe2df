#pragma once

#include "wignerdyn/model.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <span>
#include <string_view>
#include <vector>

namespace wignerdyn {

using cplx = std::complex<double>;

/// 2^N amplitudes; site 0 is the most significant bit and bit value 0 is spin up.
using StateVector = Eigen::VectorXcd;
using SparseOperator = Eigen::SparseMatrix<cplx>;

inline constexpr int kMaxStateVectorSites = 14;

/// |theta>^N with |theta> = cos(theta/2)|up> + sin(theta/2)|down>.
StateVector product_state(double theta, int n_sites);

/// Number of sites encoded by a state of the given dimension; throws unless a power of two.
int sites_from_dimension(Eigen::Index dim);

/**
 * Raising/lowering expectations of one ordered pair (j, k), with
 * S^+ = (S^x + i S^y) / 2. Lowering-operator entries follow by conjugation.
 */
struct PMCorrelationSet {
  cplx plus_j{};      ///< <S^+_j>
  cplx plus_k{};      ///< <S^+_k>
  double z_j = 0.0;   ///< <S^z_j>
  double z_k = 0.0;   ///< <S^z_k>
  cplx plus_plus{};   ///< <S^+_j S^+_k>
  cplx plus_minus{};  ///< <S^+_j S^-_k>
  cplx plus_z{};      ///< <S^+_j S^z_k>
  cplx z_plus{};      ///< <S^z_j S^+_k>
  double z_z = 0.0;   ///< <S^z_j S^z_k>

  [[nodiscard]] cplx minus_j() const { return std::conj(plus_j); }
  [[nodiscard]] cplx minus_k() const { return std::conj(plus_k); }
  [[nodiscard]] cplx minus_minus() const { return std::conj(plus_plus); }
  [[nodiscard]] cplx minus_plus() const { return std::conj(plus_minus); }
  [[nodiscard]] cplx minus_z() const { return std::conj(plus_z); }
  [[nodiscard]] cplx z_minus() const { return std::conj(z_plus); }
};

enum class ClosedForm { exact, dtwa, twa };

std::string_view to_string(ClosedForm f);

/**
 * Closed-form Ising dynamics from the product state |theta...>. The exact
 * branch is the quantum result; dtwa and twa are the infinite-sample limits
 * of the discrete and Gaussian Wigner ensembles.
 */
PMCorrelationSet closed_form_ising(ClosedForm method, const HamiltonianSpec& spec, double theta,
                                   double t, int j, int k);

/// Sparse H = -sum h.S_i - sum_{i<j} J^mu_ij S^mu_i S^mu_j. Throws above kMaxStateVectorSites.
SparseOperator build_hamiltonian(const HamiltonianSpec& spec);

struct KrylovOptions {
  int max_dimension = 30;
  double tolerance = 1e-13;  ///< per-step error bound on the propagated vector
};

/// exp(-iHt)|psi0> at every grid time. Throws on non-unit psi0 or if a step cannot meet tolerance.
std::vector<StateVector> evolve_state(const StateVector& psi0, const SparseOperator& h,
                                      std::span<const double> times, KrylovOptions options = {});

/// Applies S^axis on `site`.
StateVector apply_spin(const StateVector& psi, int site, Axis axis);

/// One-point and two-point Cartesian expectations of a site pair.
struct PairExpectations {
  Eigen::Vector3d first_i = Eigen::Vector3d::Zero();
  Eigen::Vector3d first_j = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();  ///< <S^mu_i S^nu_j>
};

PairExpectations quantum_pair_expectations(const StateVector& psi, int i, int j);

}  // namespace wignerdyn
