#include <algorithm>
#include <cmath>
#include <random>

#include "dpn/error.hpp"
#include "dpn/synthdata.hpp"

namespace dpn {

const std::vector<std::string>& known_categories() {
  static const std::vector<std::string> names{"box", "cylinder", "ellipsoid", "mug"};
  return names;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Colour encodes the canonical position (NOCS-style), so appearance carries
// orientation for the asymmetric categories.
Vec3 position_color(const Vec3& q, const Vec3& half) {
  Vec3 c;
  for (int i = 0; i < 3; ++i) c[i] = std::clamp(0.5 + 0.5 * q[i] / half[i], 0.0, 1.0);
  return c;
}

// Height-only colouring keeps the cylinder's appearance axially symmetric.
Vec3 height_color(double z, double half_height) {
  const double u = std::clamp(0.5 + 0.5 * z / half_height, 0.0, 1.0);
  return {u, 0.5 + 0.4 * std::sin(3.0 * kPi * u), 1.0 - u};
}

void sample_box(const Vec3& dims, int n, Rng& rng, PointSet& out) {
  const Vec3 half = 0.5 * dims;
  const double areas[3] = {dims.y() * dims.z(), dims.x() * dims.z(), dims.x() * dims.y()};
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  for (int i = 0; i < n; ++i) {
    double pick = uniform(rng, 0.0, total);
    int axis = 0;
    while (axis < 2 && pick >= 2.0 * areas[axis]) pick -= 2.0 * areas[axis++];
    Vec3 q(uniform(rng, -half.x(), half.x()), uniform(rng, -half.y(), half.y()), uniform(rng, -half.z(), half.z()));
    q[axis] = pick < areas[axis] ? -half[axis] : half[axis];
    out.push_back(q);
  }
}

void sample_cylinder(double r, double h, int n, Rng& rng, PointSet& out) {
  const double side = 2.0 * kPi * r * h, cap = kPi * r * r;
  for (int i = 0; i < n; ++i) {
    const double pick = uniform(rng, 0.0, side + 2.0 * cap);
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    if (pick < side) {
      out.emplace_back(r * std::cos(phi), r * std::sin(phi), uniform(rng, -0.5 * h, 0.5 * h));
    } else {
      const double rr = r * std::sqrt(uniform(rng, 0.0, 1.0));
      out.emplace_back(rr * std::cos(phi), rr * std::sin(phi), pick < side + cap ? -0.5 * h : 0.5 * h);
    }
  }
}

void sample_ellipsoid(const Vec3& radii, int n, Rng& rng, PointSet& out) {
  std::normal_distribution<double> gauss;
  for (int i = 0; i < n; ++i) {
    Vec3 d(gauss(rng), gauss(rng), gauss(rng));
    d.normalize();
    out.push_back(radii.cwiseProduct(d));
  }
}

// Half-torus handle on the +x side of a cylinder body.
void sample_handle(double body_r, double h, int n, Rng& rng, PointSet& out) {
  const double R = 0.3 * h, tube = 0.06 * h;
  for (int i = 0; i < n; ++i) {
    const double a = uniform(rng, -0.5 * kPi, 0.5 * kPi);
    const double b = uniform(rng, 0.0, 2.0 * kPi);
    const double ring = R + tube * std::cos(b);
    out.emplace_back(body_r + ring * std::cos(a) - 0.2 * R, tube * std::sin(b), ring * std::sin(a));
  }
}

}  // namespace

CanonicalModel gen_shape(const std::string& category, std::uint64_t seed, const ShapeParams& params) {
  if (params.surface_points < 2000) {
    throw Error(ErrorCode::kInvalidConfig, "shapes need at least 2000 surface points");
  }
  Rng rng(seed);
  CanonicalModel m;
  m.category = category;
  const int n = params.surface_points;
  if (category == "box") {
    const Vec3 dims = params.dims.value_or(Vec3(uniform(rng, 0.3, 1.0), uniform(rng, 0.3, 1.0), uniform(rng, 0.3, 1.0)));
    sample_box(dims, n, rng, m.points);
  } else if (category == "cylinder") {
    const Vec3 dims = params.dims.value_or(Vec3(uniform(rng, 0.2, 0.5), 0.0, uniform(rng, 0.6, 1.2)));
    sample_cylinder(dims.x(), dims.z(), n, rng, m.points);
    m.symmetry = SymmetrySpec::axial(Vec3::UnitZ());
  } else if (category == "ellipsoid") {
    const Vec3 radii = params.dims.value_or(Vec3(uniform(rng, 0.2, 0.6), uniform(rng, 0.2, 0.6), uniform(rng, 0.2, 0.6)));
    sample_ellipsoid(radii, n, rng, m.points);
  } else if (category == "mug") {
    const Vec3 dims = params.dims.value_or(Vec3(uniform(rng, 0.3, 0.45), 0.0, uniform(rng, 0.8, 1.1)));
    const int handle = n / 5;
    sample_cylinder(dims.x(), dims.z(), n - handle, rng, m.points);
    sample_handle(dims.x(), dims.z(), handle, rng, m.points);
  } else {
    throw Error(ErrorCode::kInvalidCategory, "unknown category '" + category + "'");
  }

  Vec3 lo = m.points.front(), hi = m.points.front();
  for (const auto& p : m.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 mid = 0.5 * (lo + hi);
  const double diag = (hi - lo).norm();
  for (auto& p : m.points) p = (p - mid) / diag;
  m.extents = (hi - lo) / diag;

  const Vec3 half = 0.5 * m.extents;
  m.colors.reserve(m.points.size());
  for (const auto& q : m.points) {
    m.colors.push_back(m.symmetry.is_axial() ? height_color(q.z(), half.z()) : position_color(q, half));
  }
  return m;
}

}  // namespace dpn
