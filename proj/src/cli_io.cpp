#include "wignerdyn/cli_io.hpp"

#include "wignerdyn/phase_sampler.hpp"
#include "wignerdyn/quantum_exact.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace wignerdyn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view integrator_name(Integrator m) {
  switch (m) {
    case Integrator::automatic: return "automatic";
    case Integrator::rk4: return "rk4";
    case Integrator::ising_rotation: return "ising_rotation";
  }
  return "?";
}

Integrator parse_integrator(std::string_view name) {
  if (name == "automatic") return Integrator::automatic;
  if (name == "rk4") return Integrator::rk4;
  if (name == "ising_rotation") return Integrator::ising_rotation;
  throw std::invalid_argument("unknown integrator '" + std::string(name) + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_plain(std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

double number_or_angle(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return parse_angle(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(field + ": " + e.what());
    }
  }
  throw std::invalid_argument(field + ": expected a number or an expression like \"pi/2\"");
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> keys,
                    const std::string& where) {
  for (const auto& [k, _] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw std::invalid_argument(where + ": unknown key '" + k + "'");
    }
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return obj.at(key).get<T>();
}

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.17g}", x + 0.0);
}

}  // namespace

double parse_angle(std::string_view text) {
  std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty angle");
  const auto pi_pos = s.find("pi");
  if (pi_pos == std::string::npos) return parse_plain(s);
  double factor = 1.0;
  std::string head = trim(s.substr(0, pi_pos));
  if (!head.empty()) {
    if (head.back() != '*') throw std::invalid_argument("cannot parse angle '" + s + "'");
    head.pop_back();
    factor = parse_plain(head);
  }
  double value = factor * std::numbers::pi;
  std::string tail = trim(s.substr(pi_pos + 2));
  if (!tail.empty()) {
    if (tail.front() != '/') throw std::invalid_argument("cannot parse angle '" + s + "'");
    const double div = parse_plain(tail.substr(1));
    if (div == 0.0) throw std::invalid_argument("division by zero in angle '" + s + "'");
    value /= div;
  }
  return value;
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("configuration must be a JSON object");
  reject_unknown(doc,
                 {"name", "model", "lattice", "theta", "methods", "pairs", "times", "n_samples", "seed",
                  "dt", "integrator", "delta_norm", "eigen", "cmv", "output"},
                 "config");
  RunConfig c;
  c.name = get_or<std::string>(doc, "name", "");

  const json model = doc.value("model", json::object());
  reject_unknown(model, {"preset", "transverse_field"}, "model");
  c.model.kind = parse_model_kind(get_or<std::string>(model, "preset", "ising"));
  c.model.transverse_field = get_or<double>(model, "transverse_field", 1.0 / 3.0);

  if (!doc.contains("lattice")) throw std::invalid_argument("lattice: missing");
  const json& lat = doc.at("lattice");
  reject_unknown(lat, {"geometry", "extent", "boundary", "coupling", "exponent", "J"}, "lattice");
  c.lattice.geometry = parse_geometry(get_or<std::string>(lat, "geometry", "chain"));
  const std::string boundary = get_or<std::string>(lat, "boundary", "periodic");
  if (boundary == "periodic") c.lattice.boundary = Boundary::periodic;
  else if (boundary == "open") c.lattice.boundary = Boundary::open;
  else throw std::invalid_argument("lattice.boundary: unknown value '" + boundary + "'");
  c.lattice.rule = parse_coupling_rule(get_or<std::string>(lat, "coupling", "nearest_neighbor"));
  c.lattice.exponent = get_or<double>(lat, "exponent", 3.0);
  c.lattice.coupling = get_or<double>(lat, "J", 1.0);
  if (!lat.contains("extent")) throw std::invalid_argument("lattice.extent: missing");
  if (lat.at("extent").is_array()) {
    c.extents = lat.at("extent").get<std::vector<int>>();
  } else {
    c.extents = {lat.at("extent").get<int>()};
  }
  if (!c.extents.empty()) c.lattice.extent = c.extents.front();

  if (!doc.contains("theta")) throw std::invalid_argument("theta: missing");
  c.theta = number_or_angle(doc.at("theta"), "theta");
  c.theta_text = doc.at("theta").is_string() ? doc.at("theta").get<std::string>() : num(c.theta);

  for (const auto& m : doc.value("methods", json::array())) c.methods.push_back(parse_method(m.get<std::string>()));
  for (const auto& p : doc.value("pairs", json::array())) {
    if (!p.is_array() || p.size() != 2) throw std::invalid_argument("pairs: each entry must be [i, j]");
    c.pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }

  if (!doc.contains("times")) throw std::invalid_argument("times: missing");
  const json& times = doc.at("times");
  if (times.is_array()) {
    for (const auto& t : times) c.times.push_back(number_or_angle(t, "times"));
  } else if (times.is_object()) {
    reject_unknown(times, {"start", "stop", "count"}, "times");
    const double start = times.contains("start") ? number_or_angle(times.at("start"), "times.start") : 0.0;
    const double stop = number_or_angle(times.at("stop"), "times.stop");
    const int count = times.at("count").get<int>();
    if (count < 1) throw std::invalid_argument("times.count: must be at least 1");
    for (int k = 0; k < count; ++k) {
      c.times.push_back(count == 1 ? start : start + (stop - start) * k / (count - 1));
    }
  } else {
    throw std::invalid_argument("times: expected an array or {start, stop, count}");
  }

  c.n_samples = get_or<std::size_t>(doc, "n_samples", 0);
  c.seed = get_or<std::uint64_t>(doc, "seed", 1);
  c.dt = get_or<double>(doc, "dt", 1e-3);
  c.integrator = parse_integrator(get_or<std::string>(doc, "integrator", "automatic"));

  const json dn = doc.value("delta_norm", json::object());
  reject_unknown(dn, {"reference", "metric"}, "delta_norm");
  if (dn.contains("reference") && !dn.at("reference").is_null()) {
    c.reference = parse_method(dn.at("reference").get<std::string>());
  }
  c.norm = parse_norm_kind(get_or<std::string>(dn, "metric", "frobenius"));

  const json eig = doc.value("eigen", json::object());
  reject_unknown(eig, {"rel_threshold"}, "eigen");
  c.rel_threshold = get_or<double>(eig, "rel_threshold", 0.05);

  const json cmv = doc.value("cmv", json::object());
  reject_unknown(cmv, {"enabled", "kappa", "level", "subdivisions", "ratio_low", "ratio_high"}, "cmv");
  c.cmv.enabled = get_or<bool>(cmv, "enabled", false);
  c.cmv.kappa = get_or<double>(cmv, "kappa", 0.5);
  if (cmv.contains("level") && !cmv.at("level").is_null()) c.cmv.fixed_level = cmv.at("level").get<double>();
  c.cmv.subdivisions = get_or<int>(cmv, "subdivisions", 4);
  c.cmv.thresholds.ratio_low = get_or<double>(cmv, "ratio_low", 0.2);
  c.cmv.thresholds.ratio_high = get_or<double>(cmv, "ratio_high", 0.5);

  c.output = get_or<std::string>(doc, "output", "out");
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  try {
    return parse_config(doc);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config '" + path.string() + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config '" + path.string() + "': " + e.what());
  }
}

json to_json(const RunConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["model"] = {{"preset", std::string(to_string(c.model.kind))}};
  if (c.model.kind == ModelKind::transverse_ising) doc["model"]["transverse_field"] = c.model.transverse_field;
  doc["lattice"] = {{"geometry", std::string(to_string(c.lattice.geometry))},
                    {"boundary", c.lattice.boundary == Boundary::periodic ? "periodic" : "open"},
                    {"coupling", std::string(to_string(c.lattice.rule))},
                    {"J", c.lattice.coupling}};
  if (c.lattice.rule == CouplingRule::power_law) doc["lattice"]["exponent"] = c.lattice.exponent;
  if (c.extents.size() == 1) doc["lattice"]["extent"] = c.extents.front();
  else doc["lattice"]["extent"] = c.extents;
  doc["theta"] = c.theta;
  doc["methods"] = json::array();
  for (Method m : c.methods) doc["methods"].push_back(std::string(to_string(m)));
  doc["pairs"] = json::array();
  for (const auto& [i, j] : c.pairs) doc["pairs"].push_back({i, j});
  doc["times"] = c.times;
  doc["n_samples"] = c.n_samples;
  doc["seed"] = c.seed;
  doc["dt"] = c.dt;
  doc["integrator"] = std::string(integrator_name(c.integrator));
  doc["delta_norm"] = {{"metric", std::string(to_string(c.norm))}};
  doc["delta_norm"]["reference"] = c.reference ? json(std::string(to_string(*c.reference))) : json(nullptr);
  doc["eigen"] = {{"rel_threshold", c.rel_threshold}};
  doc["cmv"] = {{"enabled", c.cmv.enabled},
                {"kappa", c.cmv.kappa},
                {"level", c.cmv.fixed_level ? json(*c.cmv.fixed_level) : json(nullptr)},
                {"subdivisions", c.cmv.subdivisions},
                {"ratio_low", c.cmv.thresholds.ratio_low},
                {"ratio_high", c.cmv.thresholds.ratio_high}};
  doc["output"] = c.output.string();
  return doc;
}

double sign_problem_error_estimate(double theta, int n_spins, std::size_t n_samples) {
  if (n_samples == 0) return std::numeric_limits<double>::infinity();
  return std::pow(sign_problem_factor(theta), n_spins) / (4.0 * std::sqrt(static_cast<double>(n_samples)));
}

namespace {

int sites_for(const RunConfig& c, int extent) {
  return c.lattice.geometry == Geometry::chain ? extent : extent * extent;
}

bool closed_forms_available(const RunConfig& c) { return c.model.kind == ModelKind::ising; }

}  // namespace

std::optional<Method> reference_method(const RunConfig& c, int extent) {
  if (c.reference) return c.reference;
  if (closed_forms_available(c)) return Method::exact_closed_form;
  if (sites_for(c, extent) <= kMaxStateVectorSites) return Method::exact_statevector;
  return std::nullopt;
}

std::vector<Issue> validate(const RunConfig& c) {
  std::vector<Issue> out;
  auto error = [&](std::string field, std::string msg, std::string fix) {
    out.push_back({Issue::Severity::error, std::move(field), std::move(msg), std::move(fix)});
  };
  auto warn = [&](std::string field, std::string msg, std::string fix) {
    out.push_back({Issue::Severity::warning, std::move(field), std::move(msg), std::move(fix)});
  };

  if (c.extents.empty()) error("lattice.extent", "no lattice extent given", "set lattice.extent to an integer >= 2 or a list of them");
  for (int e : c.extents) {
    if (e < 2) error("lattice.extent", fmt::format("extent {} is below 2", e), "use an extent of at least 2");
  }
  if (c.lattice.boundary != Boundary::periodic) {
    error("lattice.boundary", "only periodic boundaries are supported", "set lattice.boundary to \"periodic\"");
  }
  if (c.lattice.rule == CouplingRule::power_law && !(c.lattice.exponent > 0.0)) {
    error("lattice.exponent", "power-law exponent must be positive", "set lattice.exponent > 0, e.g. 3");
  }
  if (!(c.lattice.coupling != 0.0) || !std::isfinite(c.lattice.coupling)) {
    error("lattice.J", "coupling must be finite and nonzero", "set lattice.J to 1 for dimensionless tJ");
  }
  if (!(c.theta >= 0.0 && c.theta <= std::numbers::pi / 2 + 1e-12)) {
    error("theta", fmt::format("theta = {} lies outside [0, pi/2]", c.theta), "use an angle between 0 and pi/2");
  }
  if (c.model.kind == ModelKind::transverse_ising && !std::isfinite(c.model.transverse_field)) {
    error("model.transverse_field", "field is not finite", "use a finite field, e.g. 0.3333333333333333");
  }

  if (c.methods.empty()) error("methods", "no methods requested", "list at least one method, e.g. [\"exact_closed_form\"]");
  std::set<Method> seen;
  bool any_sampled = false;
  for (Method m : c.methods) {
    if (!seen.insert(m).second) error("methods", fmt::format("{} listed twice", to_string(m)), "remove the duplicate entry");
    any_sampled = any_sampled || is_sampled(m);
    if (is_closed_form(m) && !closed_forms_available(c)) {
      error("methods", fmt::format("{} needs the field-free Ising model", to_string(m)),
            "use exact_statevector or a sampled method for this model");
    }
    if (m == Method::exact_statevector) {
      for (int e : c.extents) {
        if (sites_for(c, e) > kMaxStateVectorSites) {
          error("methods", fmt::format("exact_statevector needs at most {} sites, extent {} has {}",
                                       kMaxStateVectorSites, e, sites_for(c, e)),
                "reduce the lattice or use exact_closed_form for Ising models");
        }
      }
    }
  }
  if (any_sampled && c.n_samples == 0) {
    error("n_samples", "sampled methods need n_samples > 0", "set n_samples, e.g. 100000");
  }
  if (!any_sampled && c.n_samples > 0) {
    warn("n_samples", "n_samples is ignored without a sampled method", "drop n_samples or add dtwa_sampled/twa_sampled");
  }
  if (seen.count(Method::dtwa_sampled) && c.n_samples > 0) {
    const double alpha = sign_problem_factor(std::clamp(c.theta, 0.0, std::numbers::pi / 2));
    if (alpha > 1.0 + 1e-12) {
      for (int e : c.extents) {
        const int n = sites_for(c, e);
        warn("theta",
             fmt::format("discrete sampling has a sign problem at theta = {}: alpha^N = {:.4g} for N = {}, "
                         "expected standard error of a correlation entry ~ {:.3g}",
                         c.theta_text.empty() ? num(c.theta) : c.theta_text, std::pow(alpha, n), n,
                         sign_problem_error_estimate(c.theta, n, c.n_samples)),
             "raise n_samples (error falls as 1/sqrt(n_samples)) or use theta in {0, pi/2}");
      }
    }
  }

  if (c.pairs.empty()) error("pairs", "no site pairs requested", "add pairs such as [[0, 1]]");
  for (const auto& [i, j] : c.pairs) {
    if (i == j) error("pairs", fmt::format("pair ({}, {}) repeats a site", i, j), "use two distinct sites");
    for (int e : c.extents) {
      const int n = sites_for(c, e);
      if (i < 0 || j < 0 || i >= n || j >= n) {
        error("pairs", fmt::format("pair ({}, {}) is outside a lattice of {} sites", i, j, n),
              fmt::format("use site indices in 0..{}", n - 1));
      }
    }
  }

  if (c.times.empty()) error("times", "empty time grid", "give times as a list starting at 0");
  if (!c.times.empty() && c.times.front() != 0.0) {
    error("times", "time grid must start at 0", "prepend 0 to the time list");
  }
  for (std::size_t k = 1; k < c.times.size(); ++k) {
    if (!(c.times[k] > c.times[k - 1])) {
      error("times", fmt::format("time grid is not strictly increasing at index {}", k), "sort the times and remove repeats");
      break;
    }
  }

  if (!(c.dt > 0.0)) error("dt", "integrator step must be positive", "use the default dt = 0.001");
  if (c.integrator == Integrator::ising_rotation && c.model.kind != ModelKind::ising) {
    error("integrator", "ising_rotation only solves the field-free Ising model", "use automatic or rk4");
  }

  if (c.reference) {
    if (!is_exact(*c.reference)) {
      error("delta_norm.reference", fmt::format("{} is not an exact method", to_string(*c.reference)),
            "use exact_closed_form or exact_statevector");
    } else if (*c.reference == Method::exact_closed_form && !closed_forms_available(c)) {
      error("delta_norm.reference", "exact_closed_form needs the field-free Ising model", "use exact_statevector");
    } else if (*c.reference == Method::exact_statevector) {
      for (int e : c.extents) {
        if (sites_for(c, e) > kMaxStateVectorSites) {
          error("delta_norm.reference", "exact_statevector reference exceeds the state-vector size cap",
                "use exact_closed_form or a smaller lattice");
        }
      }
    }
  }

  if (!(c.rel_threshold > 0.0 && c.rel_threshold < 1.0)) {
    error("eigen.rel_threshold", "threshold must lie in (0, 1)", "use the default 0.05");
  }
  if (!(c.cmv.kappa > 0.0)) error("cmv.kappa", "kappa must be positive", "use the default 0.5");
  if (c.cmv.enabled && c.cmv.kappa >= 1.0 && !c.cmv.fixed_level) {
    warn("cmv.kappa", "kappa >= 1 puts the level above every lobe, all surfaces will be empty", "use kappa < 1");
  }
  if (c.cmv.fixed_level && !(*c.cmv.fixed_level > 0.0)) {
    error("cmv.level", "fixed CMV level must be positive", "remove cmv.level or set it > 0");
  }
  if (c.cmv.subdivisions < 0 || c.cmv.subdivisions > 8) {
    error("cmv.subdivisions", "subdivisions must be in 0..8", "use the default 4 (2562 directions)");
  }
  const auto& th = c.cmv.thresholds;
  if (!(th.ratio_low > 0.0 && th.ratio_low <= th.ratio_high && th.ratio_high <= 1.0)) {
    error("cmv.ratio_low", "need 0 < ratio_low <= ratio_high <= 1", "use the defaults 0.2 and 0.5");
  }
  if (c.output.empty()) error("output", "no output directory", "set output to a directory path");
  return out;
}

std::string format_issue(const Issue& issue) {
  return fmt::format("{}: {}: {} (fix: {})", issue.severity == Issue::Severity::error ? "error" : "warning",
                     issue.field, issue.message, issue.remedy);
}

namespace {

std::string join_issues(const std::vector<Issue>& issues) {
  std::string s = "invalid configuration";
  for (const auto& i : issues) {
    if (i.severity == Issue::Severity::error) s += "\n  " + format_issue(i);
  }
  return s;
}

}  // namespace

ValidationError::ValidationError(std::vector<Issue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

namespace {

using Clock = std::chrono::steady_clock;

// Tracks everything a run creates so a failure can undo it.
class OutputLedger {
 public:
  explicit OutputLedger(fs::path root) : root_(std::move(root)) {}

  void make_dir(const fs::path& dir) {
    std::vector<fs::path> fresh;
    for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) fresh.push_back(p);
    fs::create_directories(dir);
    dirs_.insert(dirs_.end(), fresh.rbegin(), fresh.rend());
  }
  void note(const fs::path& file) { files_.push_back(file); }
  [[nodiscard]] const std::vector<fs::path>& files() const { return files_; }

  void rollback() noexcept {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
  }

 private:
  fs::path root_;
  std::vector<fs::path> dirs_;
  std::vector<fs::path> files_;
};

struct MethodTiming {
  int extent;
  Method method;
  double seconds;
};

HamiltonianSpec spec_for(const RunConfig& c, int extent) {
  LatticeSpec lattice = c.lattice;
  lattice.extent = extent;
  return model_preset(c.model, lattice);
}

using Grid = std::vector<std::vector<CorrelationMatrix>>;  // [time][pair]

Grid compute_method(const RunConfig& c, const HamiltonianSpec& spec, Method m) {
  const int n = spec.site_count();
  if (m == Method::exact_statevector) return statevector_correlations(spec, c.theta, c.times, c.pairs);
  if (is_sampled(m)) {
    const PhaseSampler sampler(m == Method::dtwa_sampled ? Scheme::dtwa : Scheme::twa, c.theta, n, c.seed);
    return sampled_correlations(sampler, spec, c.times, c.pairs, c.n_samples, {c.integrator, c.dt});
  }
  const ClosedForm form = m == Method::exact_closed_form ? ClosedForm::exact
                          : m == Method::dtwa_closed_form ? ClosedForm::dtwa
                                                          : ClosedForm::twa;
  Grid g(c.times.size());
  for (std::size_t t = 0; t < c.times.size(); ++t) {
    for (const auto& [i, j] : c.pairs) {
      CorrelationMatrix cm;
      cm.C = closed_form_correlation(form, spec, c.theta, c.times[t], i, j);
      cm.i = i;
      cm.j = j;
      cm.t = c.times[t];
      cm.method = m;
      g[t].push_back(cm);
    }
  }
  return g;
}

constexpr std::array<std::pair<int, int>, 6> kUpper{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

std::string mesh_stem(const CorrelationMatrix& m, std::size_t t_index) {
  return fmt::format("{}_{}_{}_t{:04d}", to_string(m.method), m.i, m.j, t_index);
}

// Writes correlations.csv, eigen.csv and optional meshes for one extent.
void write_extent(const RunConfig& c, const fs::path& dir, const std::vector<std::pair<Method, Grid>>& results,
                  const Grid* reference, OutputLedger& ledger) {
  ledger.make_dir(dir);
  const fs::path corr_path = dir / "correlations.csv";
  const fs::path eigen_path = dir / "eigen.csv";
  auto corr = fmt::output_file(corr_path.string());
  ledger.note(corr_path);
  auto eig = fmt::output_file(eigen_path.string());
  ledger.note(eigen_path);
  corr.print(
      "tJ,method,i,j,C_xx,C_xy,C_xz,C_yy,C_yz,C_zz,se_xx,se_xy,se_xz,se_yy,se_yz,se_zz,"
      "lambda_1,lambda_2,lambda_3,delta_norm\n");
  eig.print(
      "tJ,method,i,j,lambda_1,lambda_2,lambda_3,v1_x,v1_y,v1_z,v2_x,v2_y,v2_z,v3_x,v3_y,v3_z,"
      "dimensionality,shape\n");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const fs::path mesh_dir = dir / "meshes";
  if (c.cmv.enabled) ledger.make_dir(mesh_dir);

  for (const auto& [method, grid] : results) {
    for (std::size_t t = 0; t < grid.size(); ++t) {
      for (std::size_t p = 0; p < grid[t].size(); ++p) {
        const CorrelationMatrix& m = grid[t][p];
        const EigenSummary es = eigensummary(m.C, c.rel_threshold);
        const double dn = reference ? delta_norm((*reference)[t][p].C, m.C, c.norm) : nan;
        std::string line = fmt::format("{},{},{},{}", num(m.t), to_string(method), m.i, m.j);
        for (const auto& [a, b] : kUpper) line += "," + num(m.C(a, b));
        for (const auto& [a, b] : kUpper) line += "," + num(m.standard_error ? (*m.standard_error)(a, b) : nan);
        for (int k = 0; k < 3; ++k) line += "," + num(es.values[k]);
        line += "," + num(dn);
        corr.print("{}\n", line);

        // Fix the eigenvector sign so the largest component is positive.
        std::string eline = fmt::format("{},{},{},{}", num(m.t), to_string(method), m.i, m.j);
        for (int k = 0; k < 3; ++k) eline += "," + num(es.values[k]);
        for (int k = 0; k < 3; ++k) {
          Eigen::Vector3d v = es.vectors.col(k);
          Eigen::Index big = 0;
          v.cwiseAbs().maxCoeff(&big);
          if (v[big] < 0.0) v = -v;
          for (int a = 0; a < 3; ++a) eline += "," + num(v[a] + 0.0);
        }
        eline += fmt::format(",{},{}", es.dimensionality, to_string(classify_shape(es, c.cmv.thresholds)));
        eig.print("{}\n", eline);

        if (c.cmv.enabled && es.values.cwiseAbs().maxCoeff() > 0.0) {
          const double level = c.cmv.fixed_level ? *c.cmv.fixed_level : choose_level(m.C, c.cmv.kappa);
          const CMVSurface s = build_surface(m.C, level, c.cmv.subdivisions);
          const std::string stem = mesh_stem(m, t);
          const fs::path radii = mesh_dir / (stem + "_radii.csv");
          export_radii_csv(s, radii);
          ledger.note(radii);
          if (!s.mesh.faces.empty()) {
            const fs::path ply = mesh_dir / (stem + ".ply");
            export_ply(s, ply);
            ledger.note(ply);
          }
        }
      }
    }
  }
  corr.close();
  eig.close();
}

}  // namespace

RunResult run(const RunConfig& config) {
  std::vector<Issue> issues = validate(config);
  if (std::any_of(issues.begin(), issues.end(), [](const Issue& i) { return i.severity == Issue::Severity::error; })) {
    throw ValidationError(std::move(issues));
  }

  OutputLedger ledger(config.output);
  std::vector<MethodTiming> timings;
  const auto started = Clock::now();
  try {
    ledger.make_dir(config.output);
    json extents_json = json::array();
    for (int extent : config.extents) {
      const HamiltonianSpec spec = spec_for(config, extent);
      std::vector<std::pair<Method, Grid>> results;
      for (Method m : config.methods) {
        const auto t0 = Clock::now();
        results.emplace_back(m, compute_method(config, spec, m));
        timings.push_back({extent, m, std::chrono::duration<double>(Clock::now() - t0).count()});
      }
      const std::optional<Method> ref = reference_method(config, extent);
      Grid extra;
      const Grid* reference = nullptr;
      if (ref) {
        for (const auto& [m, g] : results) {
          if (m == *ref) reference = &g;
        }
        if (!reference) {
          const auto t0 = Clock::now();
          extra = compute_method(config, spec, *ref);
          timings.push_back({extent, *ref, std::chrono::duration<double>(Clock::now() - t0).count()});
          reference = &extra;
        }
      }
      const fs::path dir = config.extents.size() == 1 ? config.output : config.output / fmt::format("N{}", extent);
      write_extent(config, dir, results, reference, ledger);
      extents_json.push_back({{"extent", extent},
                              {"sites", spec.site_count()},
                              {"directory", fs::relative(dir, config.output).generic_string()},
                              {"delta_norm_reference", ref ? json(std::string(to_string(*ref))) : json(nullptr)}});
    }

    json manifest;
    manifest["tool"] = "wdyn";
    manifest["version"] = std::string(kToolVersion);
    manifest["config"] = to_json(config);
    manifest["extents"] = extents_json;
    json methods = json::array();
    for (Method m : config.methods) {
      json e = {{"method", std::string(to_string(m))}};
      if (is_sampled(m)) {
        e["n_samples"] = config.n_samples;
        e["seed"] = config.seed;
        e["jackknife_blocks"] = jackknife_blocks(config.n_samples);
      }
      methods.push_back(e);
    }
    manifest["methods"] = methods;
    json timing = json::array();
    for (const auto& t : timings) {
      timing.push_back({{"extent", t.extent}, {"method", std::string(to_string(t.method))}, {"seconds", t.seconds}});
    }
    manifest["timings"] = timing;
    manifest["wall_seconds"] = std::chrono::duration<double>(Clock::now() - started).count();
    json warnings = json::array();
    for (const auto& i : issues) warnings.push_back(format_issue(i));
    manifest["warnings"] = warnings;
    json files = json::array();
    for (const auto& f : ledger.files()) files.push_back(fs::relative(f, config.output).generic_string());
    manifest["files"] = files;

    const fs::path manifest_path = config.output / "manifest.json";
    {
      std::ofstream out(manifest_path);
      ledger.note(manifest_path);
      out << manifest.dump(2) << '\n';
      if (!out) throw std::runtime_error("cannot write '" + manifest_path.string() + "'");
    }
    return {config.output, ledger.files()};
  } catch (...) {
    ledger.rollback();
    throw;
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double cell_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return parse_plain(s);
}

}  // namespace

std::vector<CorrelationRow> read_correlations_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  const auto header = split_csv(line);
  if (header.size() != 20 || header[0] != "tJ" || header[19] != "delta_norm") {
    throw std::runtime_error("'" + path.string() + "' is not a correlations table");
  }
  std::vector<CorrelationRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 20) {
      throw std::runtime_error(fmt::format("{}:{}: expected 20 columns, found {}", path.string(), line_no, cells.size()));
    }
    try {
      CorrelationRow r;
      r.t = cell_number(cells[0]);
      r.method = cells[1];
      r.i = std::stoi(cells[2]);
      r.j = std::stoi(cells[3]);
      for (std::size_t k = 0; k < 6; ++k) {
        const auto [a, b] = kUpper[k];
        r.C(a, b) = r.C(b, a) = cell_number(cells[4 + k]);
        r.se(a, b) = r.se(b, a) = cell_number(cells[10 + k]);
      }
      for (int k = 0; k < 3; ++k) r.lambda[k] = cell_number(cells[16 + k]);
      r.delta_norm = cell_number(cells[19]);
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return rows;
}

namespace {

std::vector<fs::path> correlation_tables(const fs::path& root) {
  if (fs::is_regular_file(root)) return {root};
  if (!fs::is_directory(root)) throw std::runtime_error("'" + root.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "correlations.csv") out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::runtime_error("no correlations.csv under '" + root.string() + "'");
  return out;
}

}  // namespace

CompareReport compare(const fs::path& a, const fs::path& b) {
  std::vector<std::pair<fs::path, fs::path>> tables;
  if (fs::is_regular_file(a) || fs::is_regular_file(b)) {
    tables.emplace_back(fs::is_directory(a) ? a / "correlations.csv" : a,
                        fs::is_directory(b) ? b / "correlations.csv" : b);
  } else {
    const auto ta = correlation_tables(a);
    const auto tb = correlation_tables(b);
    if (ta != tb) throw std::runtime_error("bundles contain different sets of correlation tables");
    for (const auto& rel : ta) tables.emplace_back(a / rel, b / rel);
  }

  CompareReport report;
  for (const auto& [pa, pb] : tables) {
    const auto ra = read_correlations_csv(pa);
    const auto rb = read_correlations_csv(pb);
    if (ra.size() != rb.size()) {
      throw std::runtime_error(fmt::format("grid mismatch: {} has {} rows, {} has {}", pa.string(), ra.size(),
                                           pb.string(), rb.size()));
    }
    for (std::size_t k = 0; k < ra.size(); ++k) {
      const auto& x = ra[k];
      const auto& y = rb[k];
      if (x.method != y.method || x.i != y.i || x.j != y.j ||
          std::abs(x.t - y.t) > 1e-12 * std::max(1.0, std::abs(x.t))) {
        throw std::runtime_error(fmt::format("grid mismatch at row {} of {}: ({}, {}, {}, {}) vs ({}, {}, {}, {})",
                                             k + 1, pa.string(), num(x.t), x.method, x.i, x.j, num(y.t),
                                             y.method, y.i, y.j));
      }
      for (std::size_t c = 0; c < 6; ++c) {
        const auto [u, v] = kUpper[c];
        report.max_component[c] = std::max(report.max_component[c], std::abs(x.C(u, v) - y.C(u, v)));
      }
      for (int e = 0; e < 3; ++e) {
        report.max_eigenvalue[e] = std::max(report.max_eigenvalue[e], std::abs(x.lambda[e] - y.lambda[e]));
      }
      ++report.rows;
    }
  }
  for (double v : report.max_component) report.max_abs = std::max(report.max_abs, v);
  for (double v : report.max_eigenvalue) report.max_abs = std::max(report.max_abs, v);
  return report;
}

std::string format_report(const CompareReport& r) {
  static constexpr std::array<std::string_view, 6> names{"C_xx", "C_xy", "C_xz", "C_yy", "C_yz", "C_zz"};
  std::string s = fmt::format("rows compared: {}\n", r.rows);
  for (std::size_t k = 0; k < 6; ++k) s += fmt::format("max |d{}|: {:.6e}\n", names[k], r.max_component[k]);
  for (int k = 0; k < 3; ++k) s += fmt::format("max |dlambda_{}|: {:.6e}\n", k + 1, r.max_eigenvalue[k]);
  s += fmt::format("max |d|: {:.6e}\n", r.max_abs);
  return s;
}

std::vector<fs::path> cmv_from_csv(const fs::path& csv, const fs::path& out_dir, const CmvOptions& options) {
  const auto rows = read_correlations_csv(csv);
  OutputLedger ledger(out_dir);
  try {
    ledger.make_dir(out_dir);
    const fs::path summary_path = out_dir / "cmv_summary.csv";
    auto summary = fmt::output_file(summary_path.string());
    ledger.note(summary_path);
    summary.print("tJ,method,i,j,level,shape,dimensionality,directions_with_roots,mesh\n");
    std::map<std::tuple<std::string, int, int>, int> counters;
    for (const auto& r : rows) {
      const int idx = counters[{r.method, r.i, r.j}]++;
      const EigenSummary es = eigensummary(r.C);
      const std::string shape(to_string(classify_shape(es, options.thresholds)));
      if (es.values.cwiseAbs().maxCoeff() == 0.0) {
        summary.print("{},{},{},{},nan,{},0,0,\n", num(r.t), r.method, r.i, r.j, shape);
        continue;
      }
      const double level = options.fixed_level ? *options.fixed_level : choose_level(r.C, options.kappa);
      const CMVSurface s = build_surface(r.C, level, options.subdivisions);
      const std::string stem = fmt::format("{}_{}_{}_t{:04d}", r.method, r.i, r.j, idx);
      const fs::path radii = out_dir / (stem + "_radii.csv");
      export_radii_csv(s, radii);
      ledger.note(radii);
      std::string mesh_name;
      if (!s.mesh.faces.empty()) {
        mesh_name = stem + ".ply";
        export_ply(s, out_dir / mesh_name);
        ledger.note(out_dir / mesh_name);
      }
      const auto with_roots = std::count_if(s.directions.begin(), s.directions.end(),
                                            [](const DirectionRadii& d) { return d.root_count > 0; });
      summary.print("{},{},{},{},{},{},{},{},{}\n", num(r.t), r.method, r.i, r.j, num(level), shape,
                    es.dimensionality, with_roots, mesh_name);
    }
    summary.close();
    return ledger.files();
  } catch (...) {
    ledger.rollback();
    throw;
  }
}

}  // namespace wignerdyn
