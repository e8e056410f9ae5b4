#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <map>

#include "dpn/error.hpp"
#include "dpn/synthdata.hpp"

namespace dpn {

Pose make_pose(const CanonicalModel& model, const Mat3& R, const Vec3& t, double size_norm) {
  return {R, t, size_norm * model.extents};
}

RenderedCrop render_crop(const CanonicalModel& model, const Pose& pose, const Vec3& camera,
                         const RenderConfig& config) {
  const double scale = pose.s.norm();
  if (!(scale > 1e-9)) throw Error(ErrorCode::kDegenerateScale, "render_crop: zero size");
  double radius = 0.0;
  for (const auto& q : model.points) radius = std::max(radius, q.norm());
  radius *= scale;
  const double dist = (pose.t - camera).norm();
  if (!(dist > radius)) throw Error(ErrorCode::kDegenerateView, "camera inside the object's bounding sphere");

  // Square angular bins on a frame looking at the object, sized so the object
  // spans roughly `bins_across` bins; the nearest point of each bin is visible.
  const Vec3 ahead = (pose.t - camera) / dist;
  const Vec3 side = (std::abs(ahead.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(ahead).normalized();
  const Vec3 up = ahead.cross(side);
  const double angular_diameter = 2.0 * std::asin(radius / dist);
  const double bin = angular_diameter / std::max(1, config.bins_across);
  std::map<std::pair<long, long>, std::pair<double, std::size_t>> nearest;
  PointSet posed(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    posed[i] = scale * (pose.R * model.points[i]) + pose.t;
    const Vec3 d = posed[i] - camera;
    const double forward = d.dot(ahead);
    const std::pair<long, long> key{static_cast<long>(std::floor(std::atan2(d.dot(side), forward) / bin)),
                                    static_cast<long>(std::floor(std::atan2(d.dot(up), forward) / bin))};
    const double r = d.norm();
    auto it = nearest.find(key);
    if (it == nearest.end() || r < it->second.first) nearest[key] = {r, i};
  }
  std::vector<std::size_t> visible;
  visible.reserve(nearest.size());
  for (const auto& [key, hit] : nearest) visible.push_back(hit.second);
  if (visible.empty()) throw Error(ErrorCode::kDegenerateView, "no visible points");
  std::sort(visible.begin(), visible.end());

  std::mt19937_64 rng(config.seed);
  if (config.max_points > 0 && visible.size() > static_cast<std::size_t>(config.max_points)) {
    std::shuffle(visible.begin(), visible.end(), rng);
    visible.resize(config.max_points);
    std::sort(visible.begin(), visible.end());
  }

  RenderedCrop out;
  out.crop.category = model.category;
  out.annotation = {pose, model.symmetry, camera};
  std::normal_distribution<double> noise(0.0, config.noise_sigma);
  for (std::size_t i : visible) {
    Vec3 p = posed[i];
    if (config.noise_sigma > 0.0) p += Vec3(noise(rng), noise(rng), noise(rng));
    out.crop.points.push_back(p);
    out.crop.colors.push_back(model.colors[i]);
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Quaternion q{g(rng), g(rng), g(rng), g(rng)};
  return quat_to_rot(q);
}

}  // namespace

std::vector<RenderedCrop> generate_dataset(const DatasetConfig& config, const std::string& split) {
  if (config.categories.empty()) throw Error(ErrorCode::kInvalidConfig, "dataset needs at least one category");
  if (!(config.size_min > 0.0) || config.size_max < config.size_min) {
    throw Error(ErrorCode::kInvalidConfig, "bad size range");
  }
  int count = 0, offset = 0;
  std::uint64_t stream = 0;
  if (split == "train") {
    count = config.train_count;
    stream = 1;
  } else if (split == "test") {
    count = config.test_count;
    offset = 100000;
    stream = 2;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "unknown split '" + split + "'");
  }
  std::vector<RenderedCrop> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t base = splitmix64(splitmix64(config.seed ^ (stream << 56)) + static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(base);
    const auto& category = config.categories[i % config.categories.size()];
    const auto model = gen_shape(category, splitmix64(base + 1));
    const Mat3 R = random_rotation(rng);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const Vec3 t(u(rng), u(rng), 1.5 + u(rng));
    const double size_norm = std::uniform_real_distribution<double>(config.size_min, config.size_max)(rng);
    RenderConfig render = config.render;
    render.seed = splitmix64(base + 2);
    auto rc = render_crop(model, make_pose(model, R, t, size_norm), Vec3::Zero(), render);
    rc.crop.instance = offset + i;
    out.push_back(std::move(rc));
  }
  return out;
}

}  // namespace dpn
