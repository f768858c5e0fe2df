#pragma once

#include "wignerdyn/classical_dynamics.hpp"
#include "wignerdyn/model.hpp"
#include "wignerdyn/phase_sampler.hpp"
#include "wignerdyn/quantum_exact.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace wignerdyn {

enum class Method {
  exact_closed_form,
  exact_statevector,
  dtwa_closed_form,
  dtwa_sampled,
  twa_closed_form,
  twa_sampled,
};

std::string_view to_string(Method m);
Method parse_method(std::string_view name);
bool is_sampled(Method m);
bool is_closed_form(Method m);
bool is_exact(Method m);

using SitePair = std::pair<int, int>;

/// Symmetric connected correlation matrix of one pair at one time.
struct CorrelationMatrix {
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  int i = 0;
  int j = 1;
  double t = 0.0;
  Method method = Method::exact_closed_form;
  std::optional<Eigen::Matrix3d> standard_error;  ///< sampled methods only
};

/// c^{mu nu} = <S^mu_i S^nu_j> - <S^mu_i><S^nu_j>.
Eigen::Matrix3d connected_pair(const PairExpectations& e);

/// (c + c^T) / 2.
Eigen::Matrix3d symmetrize(const Eigen::Matrix3d& c);

/// Connected Cartesian c_jk from raising/lowering expectations (not symmetrized).
/// Throws if any component keeps an imaginary part above 1e-8.
Eigen::Matrix3d pm_to_cartesian(const PMCorrelationSet& pm);

/// Closed-form Ising correlation matrix of a pair.
Eigen::Matrix3d closed_form_correlation(ClosedForm method, const HamiltonianSpec& spec, double theta,
                                        double t, int i, int j);

/// Correlation matrices from exact state-vector evolution, indexed [time][pair].
std::vector<std::vector<CorrelationMatrix>> statevector_correlations(
    const HamiltonianSpec& spec, double theta, std::span<const double> times,
    std::span<const SitePair> pairs);

/**
 * Per-block signed sums for one pair, the raw material of the jackknife.
 * Each sample enters with weight sign * weight_scale.
 */
struct PairMoments {
  double weight = 0.0;  ///< sum of weights (diagnostic only)
  double count = 0.0;
  Eigen::Vector3d first_i = Eigen::Vector3d::Zero();
  Eigen::Vector3d first_j = Eigen::Vector3d::Zero();
  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();

  void add(double w, const Eigen::Vector3d& si, const Eigen::Vector3d& sj);
  PairMoments& operator+=(const PairMoments& o);
};

/// Symmetrized connected estimate and blocked-jackknife standard errors.
struct SampledEstimate {
  Eigen::Matrix3d C;
  Eigen::Matrix3d standard_error;
};

SampledEstimate jackknife_estimate(std::span<const PairMoments> blocks);

/// Number of jackknife blocks used for n samples.
std::size_t jackknife_blocks(std::size_t n_samples);

/**
 * Samples and propagates an ensemble block by block, accumulating pair
 * moments on the fly (no trajectory storage). Results are [time][pair] and
 * independent of the thread count.
 */
std::vector<std::vector<CorrelationMatrix>> sampled_correlations(
    const PhaseSampler& sampler, const HamiltonianSpec& spec, std::span<const double> times,
    std::span<const SitePair> pairs, std::size_t n_samples, IntegratorOptions integrator = {});

/// Signed estimate from stored trajectories at one grid index.
CorrelationMatrix ensemble_correlation(const TrajectorySet& trajectories, int i, int j,
                                       std::size_t time_index);

/// n^T C n for unit n.
double correlation_along(const Eigen::Matrix3d& C, const Eigen::Vector3d& n);

struct EigenSummary {
  Eigen::Vector3d values;   ///< sorted by |lambda|, largest first
  Eigen::Matrix3d vectors;  ///< column k belongs to values[k]
  int dimensionality = 0;
};

EigenSummary eigensummary(const Eigen::Matrix3d& C, double rel_threshold = 0.05);

enum class NormKind { frobenius, spectral };

std::string_view to_string(NormKind k);
NormKind parse_norm_kind(std::string_view name);

double delta_norm(const Eigen::Matrix3d& exact, const Eigen::Matrix3d& approx,
                  NormKind kind = NormKind::frobenius);

/**
 * Leading short-time deficit C^nn_exact - C^nn_approx along the initial Bloch
 * direction for couplings (J^x, J^y, J^z) of the pair. `method` is dtwa or twa.
 */
double short_time_delta_nn(const Eigen::Vector3d& couplings, double theta, double t,
                           ClosedForm method);

/// Leading-order discrete-scheme deficit of every component, for mean spin `s`.
Eigen::Matrix3d short_time_delta_components(const Eigen::Vector3d& couplings,
                                            const Eigen::Vector3d& s, double t);

/// Extrapolates delta(t)/t^2 to t -> 0 from samples at t, 2t, 4t.
double richardson_quadratic(const std::array<double, 3>& times, const std::array<double, 3>& deltas);

/// Time at which |v| first reaches half of its first local maximum (linear interpolation).
std::optional<double> first_half_max_time(std::span<const double> times, std::span<const double> values);

/// Zero-eigenvalue direction for two spins under Ising coupling J (dtwa or twa).
Eigen::Vector3d two_spin_zero_mode(ClosedForm method, double theta, double jt);

/// Zero-eigenvalue direction for nearest neighbours of the NN Ising chain (dtwa or twa).
Eigen::Vector3d nn_chain_zero_mode(ClosedForm method, double theta, double jt);

/// Same for the NN Ising square lattice.
Eigen::Vector3d nn_square_zero_mode(ClosedForm method, double theta, double jt);

/// Angle between two lines through the origin (sign of the vectors ignored).
double line_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace wignerdyn
