#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dpn {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PointSet = std::vector<Vec3>;

/// Rotation quaternion, scalar part first.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
  Quaternion operator-() const { return {-w, -x, -y, -z}; }
  Eigen::Vector4d as_vector() const { return {w, x, y, z}; }
  static Quaternion from_vector(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

/// Unit-normalizes q. Throws kDegenerateInput when ‖q‖ ≤ 1e-12.
Quaternion normalize(const Quaternion& q);

/// Flips q onto the w ≥ 0 hemisphere. When w == 0 the first nonzero of
/// (x, y, z) is made positive, so q and -q always map to the same value.
Quaternion canonicalize(const Quaternion& q);

/// Sign (+1 or -1) that `canonicalize` multiplies q by.
double hemisphere_sign(const Quaternion& q);

Mat3 quat_to_rot(const Quaternion& q);

/// Throws kInvalidRotation when R is farther than 1e-6 from SO(3).
Quaternion rot_to_quat(const Mat3& R);

bool is_rotation(const Mat3& R, double tol);

/// Rotation by `angle` radians about the unit `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 s = Vec3::Ones();
};

/// q = R^T (p - t) / ‖s‖. Throws kDegenerateScale when ‖s‖ ≤ 1e-9.
Vec3 to_canonical(const Vec3& p, const Pose& pose);
/// p = ‖s‖ R q + t, the inverse of `to_canonical`.
Vec3 from_canonical(const Vec3& q, const Pose& pose);

struct Similarity {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  double scale = 1.0;
};

/// Least-squares similarity with dst ≈ scale * R * src + t.
///
/// Throws kAlignmentUnderdetermined for fewer than three correspondences or a
/// source covariance of rank < 2, kDegenerateScale when the recovered scale is
/// not positive, and kShapeMismatch when the sets differ in length.
Similarity umeyama(const PointSet& src, const PointSet& dst);

/// Size estimate from canonical points: scale times the per-axis extent.
Vec3 size_from_canonical(const PointSet& canonical, double scale);

struct SymmetrySpec {
  enum class Kind { kNone, kAxial };
  Kind kind = Kind::kNone;
  Vec3 axis = Vec3::UnitZ();

  static SymmetrySpec none() { return {}; }
  static SymmetrySpec axial(const Vec3& axis);
  bool is_axial() const { return kind == Kind::kAxial; }
};

/// Rotation error in degrees. For axial symmetry only the rotated axis is
/// compared, so rotations about the axis cost nothing.
double rotation_error_deg(const Mat3& R1, const Mat3& R2, const SymmetrySpec& sym);

/// Representative of R's axial-symmetry class: the shortest-arc rotation that
/// carries `axis` onto R·axis. Identity map for SymmetrySpec::none().
Mat3 canonical_symmetric_rotation(const Mat3& R, const SymmetrySpec& sym);

constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace dpn
