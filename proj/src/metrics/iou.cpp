#include <algorithm>
#include <cmath>

#include "dpn/metrics.hpp"

namespace dpn {

std::vector<Vec3> OrientedBox::corners() const {
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 sign((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5);
    out.push_back(center + R * sign.cwiseProduct(extents));
  }
  return out;
}

bool OrientedBox::contains(const Vec3& p, double tol) const {
  const Vec3 local = R.transpose() * (p - center);
  return (local.cwiseAbs() - 0.5 * extents).maxCoeff() <= tol;
}

namespace {

using Polygon = std::vector<Vec3>;
using Polytope = std::vector<Polygon>;

Polytope box_polytope(const OrientedBox& b) {
  const auto c = b.corners();
  // Corner bit k set ⇔ +half along local axis k.
  return {{c[0], c[2], c[6], c[4]}, {c[1], c[5], c[7], c[3]}, {c[0], c[4], c[5], c[1]},
          {c[2], c[3], c[7], c[6]}, {c[0], c[1], c[3], c[2]}, {c[4], c[6], c[7], c[5]}};
}

// Keeps the part of `poly` with n·x ≤ d and closes the cut with a cap face.
Polytope clip(const Polytope& poly, const Vec3& n, double d, double eps) {
  bool any_outside = false;
  for (const auto& f : poly) {
    for (const auto& v : f) any_outside = any_outside || n.dot(v) - d > eps;
  }
  if (!any_outside) return poly;

  Polytope out;
  std::vector<Vec3> cap;
  for (const auto& face : poly) {
    Polygon kept;
    for (std::size_t i = 0; i < face.size(); ++i) {
      const Vec3& a = face[i];
      const Vec3& b = face[(i + 1) % face.size()];
      const double da = n.dot(a) - d, db = n.dot(b) - d;
      const bool ain = da <= eps, bin = db <= eps;
      if (ain) {
        kept.push_back(a);
        if (std::abs(da) <= eps) cap.push_back(a);
      }
      if (ain != bin && std::abs(da) > eps && std::abs(db) > eps) {
        const Vec3 x = a + (da / (da - db)) * (b - a);
        kept.push_back(x);
        cap.push_back(x);
      }
    }
    if (kept.size() >= 3) out.push_back(std::move(kept));
  }
  if (out.empty()) return out;

  // Deduplicate cap points and order them by angle in the clipping plane.
  std::vector<Vec3> unique;
  for (const auto& p : cap) {
    if (std::none_of(unique.begin(), unique.end(), [&](const Vec3& q) { return (p - q).norm() <= 10 * eps; })) {
      unique.push_back(p);
    }
  }
  if (unique.size() >= 3) {
    Vec3 mid = Vec3::Zero();
    for (const auto& p : unique) mid += p;
    mid /= static_cast<double>(unique.size());
    const Vec3 u = (std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(n).normalized();
    const Vec3 v = n.cross(u);
    std::sort(unique.begin(), unique.end(), [&](const Vec3& a, const Vec3& b) {
      return std::atan2((a - mid).dot(v), (a - mid).dot(u)) < std::atan2((b - mid).dot(v), (b - mid).dot(u));
    });
    out.push_back(std::move(unique));
  }
  return out;
}

// Pyramids from the vertex centroid over fan-triangulated faces.
double polytope_volume(const Polytope& poly) {
  Vec3 ref = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& f : poly) {
    for (const auto& v : f) {
      ref += v;
      ++count;
    }
  }
  if (count == 0) return 0.0;
  ref /= static_cast<double>(count);
  double vol = 0.0;
  for (const auto& f : poly) {
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      vol += std::abs((f[0] - ref).dot((f[i] - ref).cross(f[i + 1] - ref))) / 6.0;
    }
  }
  return vol;
}

}  // namespace

double intersection_volume(const OrientedBox& a, const OrientedBox& b) {
  const double scale = std::max({a.extents.maxCoeff(), b.extents.maxCoeff(), a.center.norm(), b.center.norm(), 1e-12});
  const double eps = 1e-12 * scale;
  Polytope poly = box_polytope(b);
  for (int axis = 0; axis < 3 && !poly.empty(); ++axis) {
    const Vec3 n = a.R.col(axis);
    const double c = n.dot(a.center), h = 0.5 * a.extents[axis];
    poly = clip(poly, n, c + h, eps);
    if (!poly.empty()) poly = clip(poly, -n, -(c - h), eps);
  }
  return polytope_volume(poly);
}

double iou3d(const OrientedBox& a, const OrientedBox& b) {
  const double inter = intersection_volume(a, b);
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace dpn
