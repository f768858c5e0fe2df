#include "wignerdyn/cli_io.hpp"
#include "wignerdyn/cmv_geometry.hpp"
#include "wignerdyn/correlations.hpp"
#include "wignerdyn/model.hpp"
#include "wignerdyn/parallel.hpp"
#include "wignerdyn/phase_sampler.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

namespace py = pybind11;
using namespace wignerdyn;

namespace {

HamiltonianSpec make_model(const std::string& preset, const std::string& geometry, int extent,
                           const std::string& coupling, bool periodic, double exponent, double field) {
  LatticeSpec lattice;
  lattice.geometry = parse_geometry(geometry);
  lattice.extent = extent;
  lattice.rule = parse_coupling_rule(coupling);
  lattice.boundary = periodic ? Boundary::periodic : Boundary::open;
  lattice.exponent = exponent;
  ModelPreset p;
  p.kind = parse_model_kind(preset);
  p.transverse_field = field;
  return model_preset(p, lattice);
}

ClosedForm closed_form(const std::string& name) {
  if (name == "exact") return ClosedForm::exact;
  if (name == "dtwa") return ClosedForm::dtwa;
  if (name == "twa") return ClosedForm::twa;
  throw std::invalid_argument("unknown closed form '" + name + "' (exact, dtwa, twa)");
}

Scheme scheme(const std::string& name) {
  if (name == "dtwa") return Scheme::dtwa;
  if (name == "twa") return Scheme::twa;
  throw std::invalid_argument("unknown scheme '" + name + "' (dtwa, twa)");
}

// Returns (C, standard error) arrays shaped [time][pair].
py::tuple sampled(const HamiltonianSpec& spec, const std::string& name, double theta, std::vector<double> times,
                  std::vector<SitePair> pairs, std::size_t n_samples, std::uint64_t seed, double dt) {
  const PhaseSampler sampler(scheme(name), theta, spec.site_count(), seed);
  std::vector<std::vector<CorrelationMatrix>> grid;
  {
    py::gil_scoped_release release;
    grid = sampled_correlations(sampler, spec, times, pairs, n_samples, {Integrator::automatic, dt});
  }
  std::vector<std::vector<Eigen::Matrix3d>> c(grid.size()), se(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) {
    for (const auto& m : grid[t]) {
      c[t].push_back(m.C);
      se[t].push_back(*m.standard_error);
    }
  }
  return py::make_tuple(c, se);
}

std::vector<std::vector<Eigen::Matrix3d>> statevector(const HamiltonianSpec& spec, double theta,
                                                      std::vector<double> times, std::vector<SitePair> pairs) {
  std::vector<std::vector<CorrelationMatrix>> grid;
  {
    py::gil_scoped_release release;
    grid = statevector_correlations(spec, theta, times, pairs);
  }
  std::vector<std::vector<Eigen::Matrix3d>> out(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) {
    for (const auto& m : grid[t]) out[t].push_back(m.C);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spin correlation dynamics: exact, discrete and Gaussian phase-space solvers";
  m.attr("__version__") = std::string(kToolVersion);

  py::class_<HamiltonianSpec>(m, "Hamiltonian")
      .def_property_readonly("sites", &HamiltonianSpec::site_count)
      .def_property_readonly("field", [](const HamiltonianSpec& h) { return h.field; })
      .def("couplings", [](const HamiltonianSpec& h, int axis) { return h.couplings.at(axis); }, py::arg("axis"))
      .def("pair_couplings", &HamiltonianSpec::pair_couplings, py::arg("i"), py::arg("j"));

  m.def("model", &make_model, py::arg("preset") = "ising", py::arg("geometry") = "chain", py::arg("extent") = 11,
        py::arg("coupling") = "nearest_neighbor", py::arg("periodic") = true, py::arg("exponent") = 3.0,
        py::arg("field") = 1.0 / 3.0, "Build a preset Hamiltonian on a lattice.");

  m.def(
      "closed_form",
      [](const HamiltonianSpec& spec, const std::string& method, double theta, double t, int i, int j) {
        return closed_form_correlation(closed_form(method), spec, theta, t, i, j);
      },
      py::arg("spec"), py::arg("method"), py::arg("theta"), py::arg("t"), py::arg("i"), py::arg("j"),
      "Symmetrized connected 3x3 correlation of an Ising pair (exact, dtwa or twa).");

  m.def("statevector", &statevector, py::arg("spec"), py::arg("theta"), py::arg("times"), py::arg("pairs"));
  m.def("sampled", &sampled, py::arg("spec"), py::arg("scheme"), py::arg("theta"), py::arg("times"),
        py::arg("pairs"), py::arg("n_samples"), py::arg("seed") = 1, py::arg("dt") = 1e-3);

  m.def("sign_problem_factor", &sign_problem_factor, py::arg("theta"));
  m.def(
      "short_time_delta",
      [](const Eigen::Vector3d& j, double theta, double t, const std::string& method) {
        return short_time_delta_nn(j, theta, t, closed_form(method));
      },
      py::arg("couplings"), py::arg("theta"), py::arg("t"), py::arg("method"));

  m.def(
      "eigen",
      [](const Eigen::Matrix3d& c, double rel) {
        const EigenSummary es = eigensummary(c, rel);
        return py::make_tuple(es.values, es.vectors, es.dimensionality,
                              std::string(to_string(classify_shape(es))));
      },
      py::arg("C"), py::arg("rel_threshold") = 0.05, "Eigenvalues, eigenvectors, dimensionality and shape.");

  m.def("q_value", &q_value, py::arg("C"), py::arg("r"));
  m.def("choose_level", &choose_level, py::arg("C"), py::arg("kappa") = 0.5);
  m.def("radii_along", &radii_along, py::arg("C"), py::arg("level"), py::arg("direction"));
  m.def(
      "export_cmv",
      [](const Eigen::Matrix3d& c, double level, int subdivisions, const std::string& path) {
        const CMVSurface s = build_surface(c, level, subdivisions);
        export_ply(s, path);
        return s.mesh.faces.size();
      },
      py::arg("C"), py::arg("level"), py::arg("subdivisions"), py::arg("path"), "Write a PLY mesh, return face count.");

  m.def(
      "run_config",
      [](const std::string& path) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(load_config(path));
        }
        std::vector<std::string> files;
        for (const auto& f : r.files) files.push_back(f.string());
        return files;
      },
      py::arg("path"), "Run a JSON configuration and return the written files.");

  m.def("set_threads", &set_thread_count, py::arg("n"));
}
