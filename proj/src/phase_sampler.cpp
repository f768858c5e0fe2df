#include "wignerdyn/phase_sampler.hpp"

#include "wignerdyn/parallel.hpp"
#include "wignerdyn/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wignerdyn {

std::string_view to_string(Scheme s) { return s == Scheme::dtwa ? "dtwa" : "twa"; }

namespace {

constexpr double kThetaSlack = 1e-12;

void check_theta(double theta) {
  if (!(theta >= -kThetaSlack && theta <= std::numbers::pi / 2 + kThetaSlack)) {
    throw std::invalid_argument("theta must lie in [0, pi/2], got " + std::to_string(theta));
  }
}

// S_1..S_4 and S_{4+r} = -S_r.
constexpr std::array<std::array<double, 3>, 4> kBasePoints{{
    {0.5, 0.5, 0.5},
    {-0.5, -0.5, 0.5},
    {0.5, -0.5, -0.5},
    {-0.5, 0.5, -0.5},
}};

}  // namespace

std::array<DiscretePoint, 8> dtwa_single_spin_weights(double theta) {
  check_theta(theta);
  const Eigen::Vector3d n(std::sin(theta), 0.0, std::cos(theta));
  std::array<DiscretePoint, 8> points{};
  double total = 0.0;
  for (int r = 0; r < 8; ++r) {
    const auto& b = kBasePoints[r % 4];
    const double s = r < 4 ? 1.0 : -1.0;
    points[r].spin = s * Eigen::Vector3d(b[0], b[1], b[2]);
    points[r].raw_weight = 0.25 + 0.5 * points[r].spin.dot(n);
    total += std::abs(points[r].raw_weight);
  }
  for (auto& p : points) {
    p.probability = std::abs(p.raw_weight) / total;
    p.sign = p.raw_weight < 0.0 ? -1 : 1;
  }
  return points;
}

double sign_problem_factor(double theta) {
  double abs_sum = 0.0;
  double sum = 0.0;
  for (const auto& p : dtwa_single_spin_weights(theta)) {
    abs_sum += std::abs(p.raw_weight);
    sum += p.raw_weight;
  }
  return abs_sum / sum;
}

PhaseSampler::PhaseSampler(Scheme scheme, double theta, int n_spins, std::uint64_t seed)
    : scheme_(scheme), theta_(theta), n_spins_(n_spins), seed_(seed) {
  check_theta(theta);
  if (n_spins < 1) throw std::invalid_argument("ensemble needs at least one spin");
  if (scheme == Scheme::dtwa) {
    points_ = dtwa_single_spin_weights(theta);
    double acc = 0.0;
    for (int r = 0; r < 8; ++r) {
      acc += points_[r].probability;
      cumulative_[r] = acc;
    }
    cumulative_[7] = 1.0;
    weight_scale_ = std::pow(sign_problem_factor(theta), n_spins);
  }
}

int PhaseSampler::draw(std::uint64_t k, std::span<Eigen::Vector3d> out) const {
  SampleStream stream(seed_, static_cast<std::uint32_t>(scheme_), k);
  if (scheme_ == Scheme::dtwa) {
    int sign = 1;
    for (int i = 0; i < n_spins_; ++i) {
      const double u = stream.uniform();
      int r = 0;
      // Zero-probability points are never selected: u < cumulative is strict.
      while (r < 7 && !(u < cumulative_[r])) ++r;
      while (points_[r].probability == 0.0) --r;
      out[i] = points_[r].spin;
      sign *= points_[r].sign;
    }
    return sign;
  }

  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  for (int i = 0; i < n_spins_; ++i) {
    const double x = stream.normal();
    const double y = stream.normal();
    out[i] = 0.5 * Eigen::Vector3d(s + x * c, y, c - x * s);
  }
  return 1;
}

PhaseEnsemble materialize(const PhaseSampler& sampler, std::size_t n_samples) {
  PhaseEnsemble e;
  e.scheme = sampler.scheme();
  e.theta = sampler.theta();
  e.n_spins = sampler.spin_count();
  e.seed = sampler.seed();
  e.n_samples = n_samples;
  e.weight_scale = sampler.weight_scale();
  e.spins.resize(n_samples * e.n_spins);
  e.signs.resize(n_samples);
  constexpr std::size_t kChunk = 4096;
  const std::size_t n_chunks = (n_samples + kChunk - 1) / kChunk;
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n_samples, (c + 1) * kChunk);
    for (std::size_t k = c * kChunk; k < end; ++k) {
      auto out = std::span<Eigen::Vector3d>(e.spins).subspan(k * e.n_spins, e.n_spins);
      e.signs[k] = static_cast<std::int8_t>(sampler.draw(k, out));
    }
  });
  return e;
}

PhaseEnsemble sample_dtwa(double theta, int n_spins, std::size_t n_samples, std::uint64_t seed) {
  return materialize(PhaseSampler(Scheme::dtwa, theta, n_spins, seed), n_samples);
}

PhaseEnsemble sample_twa(double theta, int n_spins, std::size_t n_samples, std::uint64_t seed) {
  return materialize(PhaseSampler(Scheme::twa, theta, n_spins, seed), n_samples);
}

namespace {

constexpr char kMagic[8] = {'W', 'D', 'E', 'N', 'S', '0', '0', '1'};

template <typename T>
void put(std::ostream& os, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw std::runtime_error("truncated ensemble file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_ensemble(const PhaseEnsemble& e, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof kMagic);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(e.scheme));
  put<double>(os, e.theta);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(e.n_spins));
  put<std::uint64_t>(os, e.seed);
  put<std::uint64_t>(os, e.n_samples);
  put<double>(os, e.weight_scale);
  for (std::size_t k = 0; k < e.n_samples; ++k) {
    for (int i = 0; i < e.n_spins; ++i) {
      const auto& s = e.spins[k * e.n_spins + i];
      put<double>(os, s.x());
      put<double>(os, s.y());
      put<double>(os, s.z());
    }
    put<std::int8_t>(os, e.signs[k]);
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

PhaseEnsemble read_ensemble(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error(path.string() + " is not an ensemble dump");
  }
  PhaseEnsemble e;
  const auto scheme = get<std::uint8_t>(is);
  if (scheme > 1) throw std::runtime_error("unknown scheme tag in " + path.string());
  e.scheme = static_cast<Scheme>(scheme);
  e.theta = get<double>(is);
  e.n_spins = static_cast<int>(get<std::uint32_t>(is));
  e.seed = get<std::uint64_t>(is);
  e.n_samples = get<std::uint64_t>(is);
  e.weight_scale = get<double>(is);
  e.spins.resize(e.n_samples * e.n_spins);
  e.signs.resize(e.n_samples);
  for (std::size_t k = 0; k < e.n_samples; ++k) {
    for (int i = 0; i < e.n_spins; ++i) {
      const double x = get<double>(is);
      const double y = get<double>(is);
      const double z = get<double>(is);
      e.spins[k * e.n_spins + i] = {x, y, z};
    }
    e.signs[k] = get<std::int8_t>(is);
  }
  return e;
}

}  // namespace wignerdyn
