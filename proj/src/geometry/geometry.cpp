#include "dpn/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dpn/crop.hpp"
#include "dpn/error.hpp"

namespace dpn {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion normalize(const Quaternion& q) {
  const double n = q.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerateInput, "zero-norm quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

double hemisphere_sign(const Quaternion& q) {
  if (q.w != 0.0) return q.w > 0.0 ? 1.0 : -1.0;
  for (double c : {q.x, q.y, q.z}) {
    if (c != 0.0) return c > 0.0 ? 1.0 : -1.0;
  }
  return 1.0;
}

Quaternion canonicalize(const Quaternion& q) {
  return hemisphere_sign(q) > 0.0 ? q : -q;
}

Mat3 quat_to_rot(const Quaternion& q_in) {
  const Quaternion q = normalize(q_in);
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

Quaternion rot_to_quat(const Mat3& R) {
  if (!is_rotation(R, 1e-6)) throw Error(ErrorCode::kInvalidRotation, "matrix is not in SO(3)");
  // Shepperd's method: branch on the largest of (w², x², y², z²).
  const double tr = R.trace();
  Quaternion q;
  if (tr >= R(0, 0) && tr >= R(1, 1) && tr >= R(2, 2)) {
    const double r = std::sqrt(1.0 + tr);
    q = {0.5 * r, (R(2, 1) - R(1, 2)) / (2 * r), (R(0, 2) - R(2, 0)) / (2 * r),
         (R(1, 0) - R(0, 1)) / (2 * r)};
  } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
    const double r = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2));
    q = {(R(2, 1) - R(1, 2)) / (2 * r), 0.5 * r, (R(0, 1) + R(1, 0)) / (2 * r),
         (R(0, 2) + R(2, 0)) / (2 * r)};
  } else if (R(1, 1) >= R(2, 2)) {
    const double r = std::sqrt(1.0 - R(0, 0) + R(1, 1) - R(2, 2));
    q = {(R(0, 2) - R(2, 0)) / (2 * r), (R(0, 1) + R(1, 0)) / (2 * r), 0.5 * r,
         (R(1, 2) + R(2, 1)) / (2 * r)};
  } else {
    const double r = std::sqrt(1.0 - R(0, 0) - R(1, 1) + R(2, 2));
    q = {(R(1, 0) - R(0, 1)) / (2 * r), (R(0, 2) + R(2, 0)) / (2 * r),
         (R(1, 2) + R(2, 1)) / (2 * r), 0.5 * r};
  }
  return canonicalize(normalize(q));
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double h = 0.5 * angle;
  return quat_to_rot({std::cos(h), a.x() * std::sin(h), a.y() * std::sin(h), a.z() * std::sin(h)});
}

Mat3 rot_x(double angle) { return axis_angle(Vec3::UnitX(), angle); }
Mat3 rot_y(double angle) { return axis_angle(Vec3::UnitY(), angle); }
Mat3 rot_z(double angle) { return axis_angle(Vec3::UnitZ(), angle); }

namespace {

double checked_size_norm(const Pose& pose) {
  const double n = pose.s.norm();
  if (!(n > 1e-9)) throw Error(ErrorCode::kDegenerateScale, "size norm is (near) zero");
  return n;
}

}  // namespace

Vec3 to_canonical(const Vec3& p, const Pose& pose) {
  return pose.R.transpose() * (p - pose.t) / checked_size_norm(pose);
}

Vec3 from_canonical(const Vec3& q, const Pose& pose) {
  return checked_size_norm(pose) * (pose.R * q) + pose.t;
}

Similarity umeyama(const PointSet& src, const PointSet& dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kShapeMismatch, "umeyama: point sets differ in length");
  }
  const auto n = src.size();
  if (n < 3) throw Error(ErrorCode::kAlignmentUnderdetermined, "umeyama needs at least 3 points");

  Vec3 mu_src = Vec3::Zero(), mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  double var_src = 0.0;
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = src[i] - mu_src;
    const Vec3 b = dst[i] - mu_dst;
    var_src += a.squaredNorm();
    cov += b * a.transpose();
  }
  var_src /= static_cast<double>(n);
  cov /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Rank < 2 leaves the rotation about the degenerate direction free.
  if (!(var_src > 0.0) || sv[1] <= 1e-12 * std::max(1.0, sv[0])) {
    throw Error(ErrorCode::kAlignmentUnderdetermined, "umeyama: degenerate covariance");
  }
  Vec3 sign = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign[2] = -1.0;

  Similarity out;
  out.R = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.scale = sv.dot(sign) / var_src;
  if (!(out.scale > 0.0)) throw Error(ErrorCode::kDegenerateScale, "umeyama: non-positive scale");
  out.t = mu_dst - out.scale * out.R * mu_src;
  return out;
}

Vec3 size_from_canonical(const PointSet& canonical, double scale) {
  if (canonical.empty()) throw Error(ErrorCode::kDegenerateInput, "size_from_canonical: empty set");
  if (!(scale > 0.0)) throw Error(ErrorCode::kDegenerateScale, "size_from_canonical: scale <= 0");
  Vec3 lo = canonical.front(), hi = canonical.front();
  for (const auto& q : canonical) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  return scale * (hi - lo);
}

SymmetrySpec SymmetrySpec::axial(const Vec3& axis) {
  const double n = axis.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerateInput, "symmetry axis has zero length");
  return {Kind::kAxial, axis / n};
}

double rotation_error_deg(const Mat3& R1, const Mat3& R2, const SymmetrySpec& sym) {
  if (sym.is_axial()) {
    const Vec3 a = R1 * sym.axis, b = R2 * sym.axis;
    return rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
  }
  // atan2 form keeps precision near 0° and 180°, where acos of the trace loses it.
  const Mat3 D = R1.transpose() * R2;
  const Vec3 v(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
  return rad2deg(std::atan2(0.5 * v.norm(), 0.5 * (D.trace() - 1.0)));
}

Mat3 canonical_symmetric_rotation(const Mat3& R, const SymmetrySpec& sym) {
  if (!sym.is_axial()) return R;
  const Vec3& a = sym.axis;
  const Vec3 b = R * a;
  const Vec3 cross = a.cross(b);
  const double c = a.dot(b);
  const double s = cross.norm();
  if (s < 1e-12) {
    if (c > 0.0) return Mat3::Identity();
    // Antipodal: half turn about a fixed perpendicular of the axis.
    Vec3 perp = a.cross(Vec3::UnitX());
    if (perp.norm() < 1e-6) perp = a.cross(Vec3::UnitY());
    return axis_angle(perp, kPi);
  }
  return axis_angle(cross / s, std::atan2(s, c));
}

Vec3 centroid(const PointSet& points) {
  if (points.empty()) throw Error(ErrorCode::kDegenerateInput, "centroid of empty point set");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return c / static_cast<double>(points.size());
}

}  // namespace dpn
