#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace wignerdyn {

enum class Scheme : std::uint8_t { twa = 0, dtwa = 1 };

std::string_view to_string(Scheme s);

/// One of the eight corners (+-1/2, +-1/2, +-1/2) of the discrete phase space.
struct DiscretePoint {
  Eigen::Vector3d spin;
  double raw_weight;   ///< 1/4 + (alpha . n) / 2
  double probability;  ///< |w| / sum |w|
  int sign;            ///< sign of w (+1 for a vanishing weight)
};

/// Per-spin discrete Wigner weights of |theta>, in the order S_1 .. S_8.
std::array<DiscretePoint, 8> dtwa_single_spin_weights(double theta);

/// Sum of |W| over the eight points divided by sum of W (the per-spin sign-problem factor).
double sign_problem_factor(double theta);

/// Non-owning view of one sample.
struct PhasePoint {
  std::span<const Eigen::Vector3d> spins;
  int sign = 1;
};

/**
 * Lazily addressable ensemble: sample k is a pure function of
 * (scheme, theta, seed, k), so samples can be regenerated on demand by any
 * worker without materialising the whole ensemble.
 */
class PhaseSampler {
 public:
  PhaseSampler(Scheme scheme, double theta, int n_spins, std::uint64_t seed);

  [[nodiscard]] Scheme scheme() const { return scheme_; }
  [[nodiscard]] double theta() const { return theta_; }
  [[nodiscard]] int spin_count() const { return n_spins_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Weight magnitude attached to every sample: alpha^N for the discrete
  /// scheme, 1 for the Gaussian one.  Signed averages are
  /// sum_k weight_scale * sign_k * f_k / n_samples.
  [[nodiscard]] double weight_scale() const { return weight_scale_; }

  /// Writes sample k into `out` (size spin_count()) and returns its sign.
  int draw(std::uint64_t k, std::span<Eigen::Vector3d> out) const;

 private:
  Scheme scheme_;
  double theta_;
  int n_spins_;
  std::uint64_t seed_;
  double weight_scale_ = 1.0;
  std::array<DiscretePoint, 8> points_{};
  std::array<double, 8> cumulative_{};
};

/// Materialised ensemble; spins are stored sample-major.
struct PhaseEnsemble {
  Scheme scheme = Scheme::twa;
  double theta = 0.0;
  int n_spins = 0;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  double weight_scale = 1.0;
  std::vector<Eigen::Vector3d> spins;
  std::vector<std::int8_t> signs;

  [[nodiscard]] PhasePoint sample(std::size_t k) const {
    return {std::span<const Eigen::Vector3d>(spins).subspan(k * n_spins, n_spins), signs[k]};
  }
};

PhaseEnsemble materialize(const PhaseSampler& sampler, std::size_t n_samples);

PhaseEnsemble sample_dtwa(double theta, int n_spins, std::size_t n_samples, std::uint64_t seed);
PhaseEnsemble sample_twa(double theta, int n_spins, std::size_t n_samples, std::uint64_t seed);

/// Little-endian binary dump: magic "WDENS001", u8 scheme, f64 theta, u32 N,
/// u64 seed, u64 n_samples, f64 weight_scale, then per sample 3N f64
/// components followed by an i8 sign.
void write_ensemble(const PhaseEnsemble& ensemble, const std::filesystem::path& path);
PhaseEnsemble read_ensemble(const std::filesystem::path& path);

}  // namespace wignerdyn
