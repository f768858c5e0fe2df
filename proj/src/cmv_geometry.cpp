#include "wignerdyn/cmv_geometry.hpp"

#include "wignerdyn/parallel.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace wignerdyn {

namespace {

constexpr double kTangencyTolerance = 1e-9;

double radial_profile(double r) { return r * r / std::pow(1.0 + r * r, 1.5); }

// Root of a * profile(r) - P on [lo, hi] where the sign changes.
double bisect(double amplitude, double level, double lo, double hi) {
  double flo = amplitude * radial_profile(lo) - level;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fmid = amplitude * radial_profile(mid) - level;
    if (fmid == 0.0) return mid;
    if ((fmid < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double q_value(const Eigen::Matrix3d& C, const Eigen::Vector3d& r) {
  return r.dot(C * r) / std::pow(1.0 + r.squaredNorm(), 1.5);
}

std::vector<double> radii_along(const Eigen::Matrix3d& C, double level, const Eigen::Vector3d& n) {
  if (!(level > 0.0)) throw std::invalid_argument("CMV level must be positive");
  if (std::abs(n.norm() - 1.0) > 1e-9) throw std::invalid_argument("direction must be a unit vector");
  const double amplitude = std::abs(n.dot(C * n));
  const double peak = amplitude * kRadialPeak;
  if (amplitude == 0.0 || peak < level * (1.0 - kTangencyTolerance)) return {};
  const double apex = std::sqrt(2.0);
  if (peak <= level * (1.0 + kTangencyTolerance)) return {apex};
  const double inner = bisect(amplitude, level, 0.0, apex);
  // Beyond |C^nn| / P the profile is below the level.
  const double outer = bisect(amplitude, level, apex, std::max(2.0 * apex, amplitude / level));
  return {inner, outer};
}

double choose_level(const Eigen::Matrix3d& C, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  const double top = std::abs(eigensummary(C).values[0]);
  if (top == 0.0) throw std::invalid_argument("cannot choose a CMV level for a zero matrix");
  return kappa * top * kRadialPeak;
}

Icosphere icosphere(int subdivisions) {
  if (subdivisions < 0 || subdivisions > 8) throw std::invalid_argument("icosphere subdivision must be in 0..8");
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere s;
  s.vertices = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g}, {0, 1, g},
                {0, -1, -g}, {0, 1, -g}, {g, 0, -1}, {g, 0, 1}, {-g, 0, -1}, {-g, 0, 1}};
  for (auto& v : s.vertices) v.normalize();
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
      s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
      const int id = static_cast<int>(s.vertices.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(s.faces.size() * 4);
    for (const auto& [a, b, c] : s.faces) {
      const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.faces = std::move(next);
  }
  return s;
}

bool CMVSurface::empty() const {
  for (const auto& d : directions) {
    if (d.root_count > 0) return false;
  }
  return true;
}

CMVSurface build_surface(const Eigen::Matrix3d& C, double level, int subdivisions, bool with_mesh) {
  if (!(level > 0.0)) throw std::invalid_argument("CMV level must be positive");
  const Icosphere grid = icosphere(subdivisions);
  const Eigen::Matrix3d sym = symmetrize(C);
  CMVSurface surface;
  surface.level = level;
  surface.directions.resize(grid.vertices.size());
  constexpr std::size_t kChunk = 256;
  const std::size_t n_dirs = grid.vertices.size();
  parallel_for((n_dirs + kChunk - 1) / kChunk, [&](std::size_t chunk) {
    for (std::size_t k = chunk * kChunk; k < std::min(n_dirs, (chunk + 1) * kChunk); ++k) {
      const Eigen::Vector3d& n = grid.vertices[k];
      DirectionRadii& d = surface.directions[k];
      d.direction = n;
      const double cnn = n.dot(sym * n);
      d.sign = (cnn > 0.0) - (cnn < 0.0);
      const auto roots = radii_along(sym, level, n);
      d.root_count = static_cast<int>(roots.size());
      if (!roots.empty()) {
        d.r_inner = roots.front();
        d.r_outer = roots.back();
      }
    }
  });
  if (!with_mesh) return surface;

  // Vertices are created on demand: outer sheet, then inner sheet with reversed winding.
  TriangleMesh& mesh = surface.mesh;
  std::vector<int> outer_id(n_dirs, -1), inner_id(n_dirs, -1);
  auto vertex = [&](std::vector<int>& ids, std::size_t k, double r) {
    if (ids[k] < 0) {
      ids[k] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(r * surface.directions[k].direction);
      mesh.vertex_sign.push_back(surface.directions[k].sign);
    }
    return ids[k];
  };
  for (const auto& [a, b, c] : grid.faces) {
    const auto& da = surface.directions[a];
    const auto& db = surface.directions[b];
    const auto& dc = surface.directions[c];
    if (da.root_count == 0 || db.root_count == 0 || dc.root_count == 0) continue;
    if (da.sign != db.sign || db.sign != dc.sign) continue;
    mesh.faces.push_back({vertex(outer_id, a, da.r_outer), vertex(outer_id, b, db.r_outer),
                          vertex(outer_id, c, dc.r_outer)});
  }
  for (const auto& [a, b, c] : grid.faces) {
    const auto& da = surface.directions[a];
    const auto& db = surface.directions[b];
    const auto& dc = surface.directions[c];
    if (da.root_count == 0 || db.root_count == 0 || dc.root_count == 0) continue;
    if (da.sign != db.sign || db.sign != dc.sign) continue;
    mesh.faces.push_back({vertex(inner_id, a, da.r_inner), vertex(inner_id, c, dc.r_inner),
                          vertex(inner_id, b, db.r_inner)});
  }
  return surface;
}

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::dumbbell: return "dumbbell";
    case Shape::clover: return "clover";
    case Shape::ellipsoid: return "ellipsoid";
    case Shape::wheel_and_axle: return "wheel_and_axle";
    case Shape::degenerate: return "degenerate";
  }
  return "?";
}

Shape classify_shape(const EigenSummary& summary, ShapeThresholds thresholds) {
  const auto& v = summary.values;
  const double top = std::abs(v[0]);
  if (top == 0.0) return Shape::degenerate;
  const double r2 = std::abs(v[1]) / top;
  const double r3 = std::abs(v[2]) / top;
  const bool flip2 = std::signbit(v[1]) != std::signbit(v[0]);
  const bool flip3 = std::signbit(v[2]) != std::signbit(v[0]);
  if (r2 < thresholds.ratio_low) return Shape::dumbbell;
  if (r2 >= thresholds.ratio_high && flip2 && r3 < thresholds.ratio_low) return Shape::clover;
  if (r2 >= thresholds.ratio_high && r3 >= thresholds.ratio_high) {
    return (flip2 || flip3) ? Shape::wheel_and_axle : Shape::ellipsoid;
  }
  return Shape::degenerate;
}

namespace {

std::string number(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.17g}", x + 0.0);
}

template <class Fn>
void write_text(const std::filesystem::path& path, Fn&& body) {
  try {
    auto out = fmt::output_file(path.string());
    body(out);
    out.close();
  } catch (const std::system_error& e) {
    throw std::runtime_error("cannot write '" + path.string() + "': " + e.what());
  }
}

}  // namespace

void export_ply(const CMVSurface& surface, const std::filesystem::path& path) {
  const TriangleMesh& mesh = surface.mesh;
  if (mesh.faces.empty()) {
    throw std::invalid_argument("refusing to write an empty CMV mesh to '" + path.string() + "'");
  }
  write_text(path, [&](fmt::ostream& out) {
    out.print("ply\nformat ascii 1.0\ncomment cmv level {}\n", number(surface.level));
    out.print("element vertex {}\n", mesh.vertices.size());
    out.print("property double x\nproperty double y\nproperty double z\n");
    out.print("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    out.print("element face {}\nproperty list uchar int vertex_indices\nend_header\n",
              mesh.faces.size());
    for (std::size_t k = 0; k < mesh.vertices.size(); ++k) {
      const auto& v = mesh.vertices[k];
      const bool red = mesh.vertex_sign[k] >= 0;
      out.print("{} {} {} {} 0 {}\n", number(v.x()), number(v.y()), number(v.z()), red ? 255 : 0,
                red ? 0 : 255);
    }
    for (const auto& f : mesh.faces) out.print("3 {} {} {}\n", f[0], f[1], f[2]);
  });
}

void export_radii_csv(const CMVSurface& surface, const std::filesystem::path& path) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  write_text(path, [&](fmt::ostream& out) {
    out.print("dir_x,dir_y,dir_z,r_inner,r_outer,sign\n");
    for (const auto& d : surface.directions) {
      const bool any = d.root_count > 0;
      out.print("{},{},{},{},{},{}\n", number(d.direction.x()), number(d.direction.y()),
                number(d.direction.z()), number(any ? d.r_inner : nan),
                number(any ? d.r_outer : nan), d.sign);
    }
  });
}

}  // namespace wignerdyn
