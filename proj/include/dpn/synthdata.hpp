#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpn/crop.hpp"
#include "dpn/geometry.hpp"

namespace dpn {

/// The procedural categories: "box", "cylinder" (axial about z), "ellipsoid"
/// and "mug" (cylinder with a handle, asymmetric).
const std::vector<std::string>& known_categories();

/// Canonical-pose object: centred on its bounding box, bounding-box diagonal 1.
struct CanonicalModel {
  std::string category;
  PointSet points;
  std::vector<Vec3> colors;
  SymmetrySpec symmetry;
  Vec3 extents = Vec3::Zero();  // bounding-box extents, ‖extents‖ = 1
};

struct ShapeParams {
  /// Box side lengths or (rx, ry, rz) radii; drawn from the seed when unset.
  std::optional<Vec3> dims;
  int surface_points = 6000;
};

/// Throws kInvalidCategory for names outside `known_categories()`.
CanonicalModel gen_shape(const std::string& category, std::uint64_t seed, const ShapeParams& params = {});

struct Annotation {
  Pose pose;
  SymmetrySpec symmetry;
  Vec3 viewpoint = Vec3::Zero();
};

struct RenderConfig {
  double noise_sigma = 0.002;  // meters
  int bins_across = 20;        // visibility bins spanning the object's angular diameter
  int max_points = 256;        // 0 keeps every visible point
  std::uint64_t seed = 0;
};

/// Pose whose size is `size_norm` times the model's canonical extents.
Pose make_pose(const CanonicalModel& model, const Mat3& R, const Vec3& t, double size_norm);

struct RenderedCrop {
  Crop crop;
  Annotation annotation;
};

/// Poses the model with p = ‖s‖·R·q + t and keeps, per viewing direction bin
/// from `camera`, only the nearest point. Throws kDegenerateView when the
/// camera is inside the bounding sphere or nothing is visible.
RenderedCrop render_crop(const CanonicalModel& model, const Pose& pose, const Vec3& camera,
                         const RenderConfig& config);

struct DatasetConfig {
  std::uint64_t seed = 1;
  int train_count = 50;
  int test_count = 50;
  std::vector<std::string> categories{"box", "cylinder", "ellipsoid", "mug"};
  double size_min = 0.1;
  double size_max = 0.5;
  RenderConfig render;
};

/// Deterministic dataset; `split` selects an independent seed stream. Instance
/// ids are `split_offset + index` so train and test ids never collide.
std::vector<RenderedCrop> generate_dataset(const DatasetConfig& config, const std::string& split);

// JSON-lines dataset files.
std::string format_double(double v);
std::string dataset_line(const RenderedCrop& record);
void write_dataset(const std::filesystem::path& path, const std::vector<RenderedCrop>& records);
/// Throws kParseError with the offending line number; never returns a partial set.
std::vector<RenderedCrop> read_dataset(const std::filesystem::path& path);
std::vector<RenderedCrop> parse_dataset(const std::string& text);

}  // namespace dpn
