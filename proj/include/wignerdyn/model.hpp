#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>

namespace wignerdyn {

enum class Geometry { chain, square };
enum class Boundary { periodic, open };
enum class CouplingRule { nearest_neighbor, power_law, infinite_range };

std::string_view to_string(Geometry g);
std::string_view to_string(CouplingRule r);
Geometry parse_geometry(std::string_view name);
CouplingRule parse_coupling_rule(std::string_view name);

/// Periodic lattice plus the rule that turns site distances into couplings.
/// Energies are in units of `coupling`; times are reported as tJ.
struct LatticeSpec {
  Geometry geometry = Geometry::chain;
  int extent = 2;  ///< N for a chain, L for an L x L square
  Boundary boundary = Boundary::periodic;
  CouplingRule rule = CouplingRule::nearest_neighbor;
  double exponent = 3.0;  ///< only used by power_law
  double coupling = 1.0;

  [[nodiscard]] int site_count() const {
    return geometry == Geometry::chain ? extent : extent * extent;
  }
};

/// Minimum-image Manhattan (graph) distance between two sites.
int manhattan_distance(const LatticeSpec& lattice, int i, int j);

/// Minimum-image Euclidean distance between two sites.
double euclidean_distance(const LatticeSpec& lattice, int i, int j);

enum Axis : int { X = 0, Y = 1, Z = 2 };

/**
 * Two-body spin Hamiltonian
 *
 *   H = -sum_i h . S_i - sum_{i<j} sum_mu J^mu_ij S^mu_i S^mu_j
 *
 * Every unordered pair enters once, which is the convention whose
 * Heisenberg equations are dS_i/dt = S_i x (h + B_i) with
 * B^mu_i = sum_j J^mu_ij S^mu_j.
 */
struct HamiltonianSpec {
  std::array<Eigen::MatrixXd, 3> couplings;  ///< symmetric, zero diagonal
  Eigen::Vector3d field = Eigen::Vector3d::Zero();

  HamiltonianSpec() = default;
  explicit HamiltonianSpec(int n_sites);

  [[nodiscard]] int site_count() const { return static_cast<int>(couplings[Z].rows()); }

  /// True when only J^z is nonzero and the field vanishes.
  [[nodiscard]] bool is_field_free_ising() const;

  /// Per-axis couplings (J^x_ij, J^y_ij, J^z_ij) of one pair.
  [[nodiscard]] Eigen::Vector3d pair_couplings(int i, int j) const;

  /// Throws std::invalid_argument unless every axis is symmetric with zero diagonal.
  void check() const;
};

/// J^z coupling matrix of a lattice; the x and y axes are left at zero.
HamiltonianSpec build_couplings(const LatticeSpec& lattice);

enum class ModelKind { ising, transverse_ising, xx };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

struct ModelPreset {
  ModelKind kind = ModelKind::ising;
  double transverse_field = 1.0 / 3.0;  ///< h in units of J, transverse_ising only
};

/// Ising: J^z only. Transverse Ising: J^z and h^x. XX: J^x = J^y, J^z = 0.
HamiltonianSpec model_preset(const ModelPreset& preset, const LatticeSpec& lattice);

/// Product state |theta theta ...> with Bloch vector (sin theta, 0, cos theta).
struct InitialProductState {
  double theta = 0.0;

  [[nodiscard]] Eigen::Vector3d bloch_vector() const;
  /// Per-spin expectation <S> = n / 2.
  [[nodiscard]] Eigen::Vector3d spin_expectation() const { return 0.5 * bloch_vector(); }
};

}  // namespace wignerdyn
