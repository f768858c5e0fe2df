#pragma once

#include "wignerdyn/classical_dynamics.hpp"
#include "wignerdyn/cmv_geometry.hpp"
#include "wignerdyn/correlations.hpp"
#include "wignerdyn/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wignerdyn {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct CmvOptions {
  bool enabled = false;
  double kappa = 0.5;
  std::optional<double> fixed_level;  ///< overrides kappa when set
  int subdivisions = 4;
  ShapeThresholds thresholds;
};

struct RunConfig {
  std::string name;
  ModelPreset model;
  LatticeSpec lattice;
  std::vector<int> extents;  ///< one entry per run; more than one writes N<extent>/ subdirectories
  double theta = 0.0;
  std::string theta_text;  ///< as written in the file, e.g. "pi/2"
  std::vector<Method> methods;
  std::vector<SitePair> pairs;
  std::vector<double> times;
  std::size_t n_samples = 0;
  std::uint64_t seed = 1;
  double dt = 1e-3;
  Integrator integrator = Integrator::automatic;
  std::optional<Method> reference;  ///< delta_norm baseline; default picks an exact branch
  NormKind norm = NormKind::frobenius;
  double rel_threshold = 0.05;
  CmvOptions cmv;
  std::filesystem::path output = "out";
};

/// "pi/2", "3*pi/8", "0.25" or a plain number.
double parse_angle(std::string_view text);

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

struct Issue {
  enum class Severity { error, warning };
  Severity severity = Severity::error;
  std::string field;
  std::string message;
  std::string remedy;
};

std::vector<Issue> validate(const RunConfig& config);
std::string format_issue(const Issue& issue);

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<Issue> issues);
  [[nodiscard]] const std::vector<Issue>& issues() const { return issues_; }

 private:
  std::vector<Issue> issues_;
};

/// Estimated standard error of a C^{mu mu} entry from a signed ensemble at t = 0.
double sign_problem_error_estimate(double theta, int n_spins, std::size_t n_samples);

/// Exact branch used for delta_norm, or nullopt when none is available.
std::optional<Method> reference_method(const RunConfig& config, int extent);

struct RunResult {
  std::filesystem::path output;
  std::vector<std::filesystem::path> files;  ///< every file written, manifest last
};

/// Validates, computes and writes the bundle. Nothing is left behind on failure.
RunResult run(const RunConfig& config);

struct CompareReport {
  std::size_t rows = 0;
  std::array<double, 6> max_component{};  ///< xx, xy, xz, yy, yz, zz
  std::array<double, 3> max_eigenvalue{};
  double max_abs = 0.0;
};

/// Diffs two bundles (directories) or two correlations.csv files. Throws on grid mismatch.
CompareReport compare(const std::filesystem::path& a, const std::filesystem::path& b);
std::string format_report(const CompareReport& report);

/// Meshes and radii tables for every row of a correlations.csv.
std::vector<std::filesystem::path> cmv_from_csv(const std::filesystem::path& csv,
                                                const std::filesystem::path& out_dir,
                                                const CmvOptions& options);

/// One parsed row of correlations.csv.
struct CorrelationRow {
  double t = 0.0;
  std::string method;
  int i = 0;
  int j = 0;
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d se = Eigen::Matrix3d::Zero();
  Eigen::Vector3d lambda = Eigen::Vector3d::Zero();
  double delta_norm = 0.0;
};

std::vector<CorrelationRow> read_correlations_csv(const std::filesystem::path& path);

}  // namespace wignerdyn
