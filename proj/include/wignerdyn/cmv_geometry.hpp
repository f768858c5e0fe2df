#pragma once

#include "wignerdyn/correlations.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <filesystem>
#include <string_view>
#include <vector>

namespace wignerdyn {

/// Q(r) = r^T C r / (1 + r^2)^{3/2}.
double q_value(const Eigen::Matrix3d& C, const Eigen::Vector3d& r);

/// Largest value of r^2 / (1 + r^2)^{3/2}, reached at r = sqrt(2).
inline const double kRadialPeak = 2.0 / std::pow(3.0, 1.5);

/// Positive radii where |Q(r n)| = P, ascending (0, 1 or 2 entries).
std::vector<double> radii_along(const Eigen::Matrix3d& C, double level, const Eigen::Vector3d& n);

/// P = kappa * max|lambda| * kRadialPeak. Throws for a zero matrix.
double choose_level(const Eigen::Matrix3d& C, double kappa = 0.5);

struct Icosphere {
  std::vector<Eigen::Vector3d> vertices;  ///< unit vectors
  std::vector<std::array<int, 3>> faces;  ///< outward counter-clockwise
};

/// Subdivided icosahedron with 10 * 4^s + 2 vertices.
Icosphere icosphere(int subdivisions);

struct DirectionRadii {
  Eigen::Vector3d direction;
  int root_count = 0;
  double r_inner = 0.0;  ///< meaningful when root_count > 0
  double r_outer = 0.0;
  int sign = 0;  ///< sign of n^T C n
};

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<int> vertex_sign;  ///< +1 red, -1 blue
  std::vector<std::array<int, 3>> faces;
};

struct CMVSurface {
  double level = 0.0;
  std::vector<DirectionRadii> directions;
  TriangleMesh mesh;

  [[nodiscard]] bool empty() const;
};

/// Radii on an icosphere grid plus a mesh with an outer and an inner sheet.
CMVSurface build_surface(const Eigen::Matrix3d& C, double level, int subdivisions = 4,
                         bool with_mesh = true);

enum class Shape { dumbbell, clover, ellipsoid, wheel_and_axle, degenerate };

std::string_view to_string(Shape s);

struct ShapeThresholds {
  double ratio_low = 0.2;
  double ratio_high = 0.5;
};

Shape classify_shape(const EigenSummary& summary, ShapeThresholds thresholds = {});

/// ASCII PLY with per-vertex colour. Throws for an empty mesh.
void export_ply(const CMVSurface& surface, const std::filesystem::path& path);

/// dir_x,dir_y,dir_z,r_inner,r_outer,sign (nan radii where no root exists).
void export_radii_csv(const CMVSurface& surface, const std::filesystem::path& path);

}  // namespace wignerdyn
