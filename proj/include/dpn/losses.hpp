#pragma once

#include "dpn/geometry.hpp"
#include "dpn/graph.hpp"
#include "dpn/model.hpp"

namespace dpn {

struct LossBreakdown {
  double explicit_loss = 0.0;
  double implicit_loss = 0.0;
  double lambda = 10.0;
  double total = 0.0;
};

/// Ground-truth pose with the rotation replaced by its symmetry-class
/// representative, the regression target for symmetric categories.
Pose training_target(const Pose& gt, const SymmetrySpec& sym);

/// ‖ρ(R) − ρ(R*)‖ + ‖t − t*‖ + ‖s − s*‖ with both quaternions on the w ≥ 0
/// hemisphere. `gt` should already be a training target.
double loss_explicit(const Pose& pred, const Pose& gt);
/// Mean over points of ‖q_i − R*ᵀ(p_i − t*)/‖s*‖‖. Throws kShapeMismatch
/// when Q and P differ in length.
double loss_implicit(const PointSet& canonical, const PointSet& observed, const Pose& gt);
/// Mean over points of ‖q_i − Rᵀ(p_i − t)/‖s‖‖ for a predicted pose.
double loss_refine(const PointSet& canonical, const PointSet& observed, const Pose& pred);

nn::Var loss_explicit(nn::Graph& g, const ExplicitOutput& pred, const Vec3& center, const Pose& gt);
nn::Var loss_implicit(nn::Graph& g, nn::Var canonical, const PreparedCrop& crop, const Pose& gt);
nn::Var loss_refine(nn::Graph& g, nn::Var canonical, const ExplicitOutput& pred, const PreparedCrop& crop);

}  // namespace dpn
