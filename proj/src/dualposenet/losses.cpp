#include "dpn/losses.hpp"

#include "dpn/error.hpp"

namespace dpn {

using nn::Graph;
using nn::Tensor;
using nn::Var;

Pose training_target(const Pose& gt, const SymmetrySpec& sym) {
  Pose out = gt;
  out.R = canonical_symmetric_rotation(gt.R, sym);
  return out;
}

double loss_explicit(const Pose& pred, const Pose& gt) {
  const Eigen::Vector4d qp = rot_to_quat(pred.R).as_vector();
  const Eigen::Vector4d qg = rot_to_quat(gt.R).as_vector();
  return (qp - qg).norm() + (pred.t - gt.t).norm() + (pred.s - gt.s).norm();
}

namespace {

double mean_canonical_residual(const PointSet& canonical, const PointSet& observed, const Pose& pose) {
  if (canonical.size() != observed.size()) {
    throw Error(ErrorCode::kShapeMismatch, "canonical and observed point sets differ in length");
  }
  if (canonical.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    acc += (canonical[i] - to_canonical(observed[i], pose)).norm();
  }
  return acc / static_cast<double>(canonical.size());
}

Tensor vec_tensor(const Vec3& v) { return Tensor::vector({v[0], v[1], v[2]}); }

}  // namespace

double loss_implicit(const PointSet& canonical, const PointSet& observed, const Pose& gt) {
  return mean_canonical_residual(canonical, observed, gt);
}

double loss_refine(const PointSet& canonical, const PointSet& observed, const Pose& pred) {
  return mean_canonical_residual(canonical, observed, pred);
}

Var loss_explicit(Graph& g, const ExplicitOutput& pred, const Vec3& center, const Pose& gt) {
  const Quaternion q = rot_to_quat(gt.R);
  const Var rot_term = nn::l2_norm(nn::sub(pred.quat, g.constant(Tensor::vector({q.w, q.x, q.y, q.z}))));
  const Var trans_term = nn::l2_norm(nn::sub(pred.delta_t, g.constant(vec_tensor(gt.t - center))));
  const Var size_term = nn::l2_norm(nn::sub(pred.size, g.constant(vec_tensor(gt.s))));
  return nn::add(nn::add(rot_term, trans_term), size_term);
}

Var loss_implicit(Graph& g, Var canonical, const PreparedCrop& crop, const Pose& gt) {
  if (canonical.value().rows() != crop.points.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "loss_implicit: Q and P differ in length");
  }
  PointSet target(crop.raw_points.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = to_canonical(crop.raw_points[i], gt);
  return nn::mean(nn::row_norms(nn::sub(canonical, g.constant(tensor_from_points(target)))));
}

Var loss_refine(Graph& g, Var canonical, const ExplicitOutput& pred, const PreparedCrop& crop) {
  const Var t = nn::add(pred.delta_t, g.constant(vec_tensor(crop.center)));
  const Var target = nn::canonical_transform(g.constant(crop.points), pred.rot, t, pred.size);
  return nn::mean(nn::row_norms(nn::sub(canonical, target)));
}

}  // namespace dpn
