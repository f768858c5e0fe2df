#include "wignerdyn/model.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace wignerdyn {

std::string_view to_string(Geometry g) {
  return g == Geometry::chain ? "chain" : "square";
}

std::string_view to_string(CouplingRule r) {
  switch (r) {
    case CouplingRule::nearest_neighbor: return "nearest_neighbor";
    case CouplingRule::power_law: return "power_law";
    case CouplingRule::infinite_range: return "infinite_range";
  }
  return "unknown";
}

Geometry parse_geometry(std::string_view name) {
  if (name == "chain") return Geometry::chain;
  if (name == "square") return Geometry::square;
  throw std::invalid_argument("unknown lattice geometry '" + std::string(name) + "'");
}

CouplingRule parse_coupling_rule(std::string_view name) {
  if (name == "nearest_neighbor" || name == "nn") return CouplingRule::nearest_neighbor;
  if (name == "power_law") return CouplingRule::power_law;
  if (name == "infinite_range") return CouplingRule::infinite_range;
  throw std::invalid_argument("unknown coupling rule '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ising: return "ising";
    case ModelKind::transverse_ising: return "transverse_ising";
    case ModelKind::xx: return "xx";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "ising") return ModelKind::ising;
  if (name == "transverse_ising") return ModelKind::transverse_ising;
  if (name == "xx") return ModelKind::xx;
  throw std::invalid_argument("unknown model preset '" + std::string(name) + "'");
}

namespace {

int ring_delta(int a, int b, int extent) {
  const int d = std::abs(a - b) % extent;
  return std::min(d, extent - d);
}

void check_lattice(const LatticeSpec& lattice) {
  if (lattice.extent < 2) {
    throw std::invalid_argument("lattice extent must be at least 2, got " +
                                std::to_string(lattice.extent));
  }
  if (lattice.boundary != Boundary::periodic) {
    throw std::invalid_argument("only periodic boundaries are supported");
  }
  if (lattice.rule == CouplingRule::power_law && !(lattice.exponent > 0.0)) {
    throw std::invalid_argument("power-law exponent must be positive");
  }
}

}  // namespace

int manhattan_distance(const LatticeSpec& lattice, int i, int j) {
  const int L = lattice.extent;
  if (lattice.geometry == Geometry::chain) return ring_delta(i, j, L);
  return ring_delta(i % L, j % L, L) + ring_delta(i / L, j / L, L);
}

double euclidean_distance(const LatticeSpec& lattice, int i, int j) {
  const int L = lattice.extent;
  if (lattice.geometry == Geometry::chain) return ring_delta(i, j, L);
  const double dx = ring_delta(i % L, j % L, L);
  const double dy = ring_delta(i / L, j / L, L);
  return std::hypot(dx, dy);
}

HamiltonianSpec::HamiltonianSpec(int n_sites) {
  for (auto& m : couplings) m = Eigen::MatrixXd::Zero(n_sites, n_sites);
}

bool HamiltonianSpec::is_field_free_ising() const {
  return couplings[X].isZero(0.0) && couplings[Y].isZero(0.0) && field.isZero(0.0);
}

Eigen::Vector3d HamiltonianSpec::pair_couplings(int i, int j) const {
  return {couplings[X](i, j), couplings[Y](i, j), couplings[Z](i, j)};
}

void HamiltonianSpec::check() const {
  const auto n = couplings[Z].rows();
  for (const auto& m : couplings) {
    if (m.rows() != n || m.cols() != n) {
      throw std::invalid_argument("coupling matrices must all be square and the same size");
    }
    if (!(m - m.transpose()).isZero(0.0)) {
      throw std::invalid_argument("coupling matrix is not symmetric");
    }
    if (!m.diagonal().isZero(0.0)) {
      throw std::invalid_argument("coupling matrix has a nonzero diagonal");
    }
  }
}

HamiltonianSpec build_couplings(const LatticeSpec& lattice) {
  check_lattice(lattice);
  const int n = lattice.site_count();
  HamiltonianSpec spec(n);
  auto& jz = spec.couplings[Z];
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double value = 0.0;
      switch (lattice.rule) {
        case CouplingRule::nearest_neighbor:
          value = manhattan_distance(lattice, i, j) == 1 ? lattice.coupling : 0.0;
          break;
        case CouplingRule::power_law:
          value = lattice.coupling / std::pow(euclidean_distance(lattice, i, j), lattice.exponent);
          break;
        case CouplingRule::infinite_range:
          value = lattice.coupling;
          break;
      }
      jz(i, j) = value;
      jz(j, i) = value;
    }
  }
  return spec;
}

HamiltonianSpec model_preset(const ModelPreset& preset, const LatticeSpec& lattice) {
  HamiltonianSpec spec = build_couplings(lattice);
  switch (preset.kind) {
    case ModelKind::ising:
      break;
    case ModelKind::transverse_ising:
      spec.field = {preset.transverse_field, 0.0, 0.0};
      break;
    case ModelKind::xx:
      spec.couplings[X] = spec.couplings[Z];
      spec.couplings[Y] = spec.couplings[Z];
      spec.couplings[Z].setZero();
      break;
  }
  return spec;
}

Eigen::Vector3d InitialProductState::bloch_vector() const {
  return {std::sin(theta), 0.0, std::cos(theta)};
}

}  // namespace wignerdyn
