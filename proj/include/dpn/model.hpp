#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dpn/crop.hpp"
#include "dpn/graph.hpp"
#include "dpn/sphere.hpp"

namespace dpn {

struct EncoderConfig {
  int W = 16;
  int H = 16;
  std::vector<int> channels{8, 16, 16, 32, 32};  // d_l per layer, l = 1..L
  std::vector<int> fusion_layers{1, 3, 5};       // exactly three, 1-based
  std::vector<int> pool_after{2, 4};
  int feature_dim = 128;

  int layers() const { return static_cast<int>(channels.size()); }
  /// Throws kInvalidConfig on inconsistent settings.
  void validate() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  int head_hidden = 64;
  std::vector<int> implicit_hidden{64, 64};

  void validate() const;
};

/// Parameters of the three sub-networks. Refinement swaps in a private copy of
/// `encoder` and reads the two decoders without touching them.
struct Network {
  ModelConfig config;
  nn::ParameterSet encoder;
  nn::ParameterSet explicit_head;
  nn::ParameterSet implicit_head;
};

Network init_network(const ModelConfig& config, std::uint64_t seed);

/// Per-crop inputs computed once: spherical signals, the centroid, raw points
/// and centroid-relative points.
struct PreparedCrop {
  nn::Tensor color;     // [W·H, 3]
  nn::Tensor radius;    // [W·H, 1]
  nn::Tensor points;    // [N, 3] camera frame
  nn::Tensor centered;  // [N, 3] points minus centroid
  Vec3 center;
  PointSet raw_points;
};

PreparedCrop prepare_crop(const Crop& crop, const SphericalGrid& grid);

enum class Bind { kTrainable, kFrozen };

/// Intermediate spherical maps of the two-stream encoder, kept for inspection.
struct EncoderTrace {
  std::vector<nn::Var> fused;        // S̃^{X,P}_l at each fusion layer
  std::vector<SphericalGrid> fused_grids;
  nn::Var stream_x;                  // last X-stream output
  nn::Var stream_p;                  // last P-stream output
  nn::Var feature;                   // f, shape [1, D]
};

EncoderTrace encode(nn::Graph& g, nn::ParameterSet& encoder, const EncoderConfig& config,
                    nn::Var color, nn::Var radius, Bind bind);

/// Spherical Fusion: returns (S̃^X, S̃^P, S̃^{X,P}), where the shared map is
/// relu(SCONV([S^X, S^P]) + bias) and each stream gets [own, shared].
struct FusionOutput {
  nn::Var x;
  nn::Var p;
  nn::Var shared;
};
FusionOutput spherical_fusion(nn::Var sx, nn::Var sp, nn::Var taps, nn::Var bias,
                              std::shared_ptr<const SphericalBasis> basis);

struct ExplicitOutput {
  nn::Var quat;     // canonical unit quaternion [4]
  nn::Var rot;      // [3,3]
  nn::Var delta_t;  // centroid-relative translation [3]
  nn::Var size;     // [3]
};

ExplicitOutput decode_explicit(nn::Graph& g, nn::ParameterSet& head, nn::Var feature, Bind bind);
/// Point-wise map of [p - c; f] to canonical coordinates, [N,3].
nn::Var decode_implicit(nn::Graph& g, nn::ParameterSet& head, const ModelConfig& config,
                        nn::Var centered_points, nn::Var feature, Bind bind);

struct ForwardOutput {
  EncoderTrace encoder;
  ExplicitOutput pose;
  nn::Var canonical;  // Q, [N,3]
};

struct Binding {
  Bind encoder = Bind::kFrozen;
  Bind explicit_head = Bind::kFrozen;
  Bind implicit_head = Bind::kFrozen;
};

ForwardOutput forward(nn::Graph& g, Network& net, const PreparedCrop& crop, Binding binding);
/// Same as above but with an externally owned encoder parameter set.
ForwardOutput forward(nn::Graph& g, Network& net, nn::ParameterSet& encoder, const PreparedCrop& crop,
                      Binding binding);

Pose pose_from_output(const ExplicitOutput& out, const Vec3& center);
PointSet points_from_tensor(const nn::Tensor& t);
nn::Tensor tensor_from_points(const PointSet& points);

}  // namespace dpn
