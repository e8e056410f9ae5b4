#include "dpn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dpn/error.hpp"

namespace dpn {

using nn::Graph;
using nn::ParameterSet;
using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, "encoder: " + m); };
  if (W < 4 || H < 4 || W % 2 || H % 2) fail("grid must be even and >= 4");
  if (channels.empty()) fail("no layers");
  for (int c : channels) {
    if (c <= 0) fail("channels must be positive");
  }
  if (fusion_layers.size() != 3) fail("exactly three fusion layers are aggregated");
  for (std::size_t i = 0; i < fusion_layers.size(); ++i) {
    if (fusion_layers[i] < 1 || fusion_layers[i] > layers()) fail("fusion layer out of range");
    if (i > 0 && fusion_layers[i] <= fusion_layers[i - 1]) fail("fusion layers must be increasing");
  }
  int w = W, h = H;
  for (int l = 1; l <= layers(); ++l) {
    if (std::find(pool_after.begin(), pool_after.end(), l) == pool_after.end()) continue;
    if (l == layers()) fail("pooling after the last layer has no effect");
    if (w % 2 || h % 2 || w / 2 < 2 || h / 2 < 2) fail("grid too small for pooling schedule");
    w /= 2;
    h /= 2;
  }
  if (feature_dim <= 0) fail("feature_dim must be positive");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (head_hidden <= 0) throw Error(ErrorCode::kInvalidConfig, "head_hidden must be positive");
  if (implicit_hidden.empty()) throw Error(ErrorCode::kInvalidConfig, "implicit decoder needs a hidden layer");
  for (int h : implicit_hidden) {
    if (h <= 0) throw Error(ErrorCode::kInvalidConfig, "implicit hidden widths must be positive");
  }
}

namespace {

struct LayerShape {
  int W, H, B, in_x, in_p, out;
  bool fused;
  bool pooled;
};

std::vector<LayerShape> layer_shapes(const EncoderConfig& c) {
  std::vector<LayerShape> out;
  int w = c.W, h = c.H, in_x = 3, in_p = 1;
  for (int l = 1; l <= c.layers(); ++l) {
    const bool fused = std::find(c.fusion_layers.begin(), c.fusion_layers.end(), l) != c.fusion_layers.end();
    const bool pooled = std::find(c.pool_after.begin(), c.pool_after.end(), l) != c.pool_after.end();
    const int d = c.channels[l - 1];
    out.push_back({w, h, std::min(w, h) / 2, in_x, in_p, d, fused, pooled});
    in_x = in_p = fused ? 2 * d : d;
    if (pooled) {
      w /= 2;
      h /= 2;
    }
  }
  return out;
}

std::string layer_name(int l, const char* part) { return "enc.l" + std::to_string(l) + "." + part; }

Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t({fan_in, fan_out});
  for (double& v : t.data) v = u(rng);
  return t;
}

Tensor zonal_taps(int cin, int cout, int B, std::mt19937_64& rng) {
  // He-uniform per degree: each degree acts as an independent cin → cout map
  // followed by relu, so this keeps activation scale roughly constant.
  const double a = std::sqrt(6.0 / cin);
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t({static_cast<std::size_t>(cin), static_cast<std::size_t>(cout), static_cast<std::size_t>(B)});
  for (double& v : t.data) v = u(rng);
  return t;
}

void add_dense(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
  ps.add(prefix + ".w", glorot(in, out, rng));
  ps.add(prefix + ".b", Tensor({out}));
}

Var bind_param(Graph& g, ParameterSet& ps, const std::string& name, Bind b) {
  auto& p = ps.get(name);
  return b == Bind::kTrainable ? g.param(p) : g.frozen(p);
}

Var dense(Graph& g, ParameterSet& ps, const std::string& prefix, Var x, Bind b) {
  return nn::add_bias(nn::matmul(x, bind_param(g, ps, prefix + ".w", b)), bind_param(g, ps, prefix + ".b", b));
}

Var sconv(Var x, Var taps, Var bias, std::shared_ptr<const SphericalBasis> basis) {
  return nn::relu(nn::add_bias(nn::zonal_conv(x, taps, std::move(basis)), bias));
}

}  // namespace

Network init_network(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Network net;
  net.config = config;
  std::mt19937_64 rng(seed);
  const auto& ec = config.encoder;
  const auto shapes = layer_shapes(ec);
  for (int l = 1; l <= ec.layers(); ++l) {
    const auto& s = shapes[l - 1];
    net.encoder.add(layer_name(l, "x.taps"), zonal_taps(s.in_x, s.out, s.B, rng));
    net.encoder.add(layer_name(l, "x.bias"), Tensor({static_cast<std::size_t>(s.out)}));
    net.encoder.add(layer_name(l, "p.taps"), zonal_taps(s.in_p, s.out, s.B, rng));
    net.encoder.add(layer_name(l, "p.bias"), Tensor({static_cast<std::size_t>(s.out)}));
    if (s.fused) {
      net.encoder.add(layer_name(l, "fuse.taps"), zonal_taps(2 * s.out, s.out, s.B, rng));
      net.encoder.add(layer_name(l, "fuse.bias"), Tensor({static_cast<std::size_t>(s.out)}));
      add_dense(net.encoder, layer_name(l, "scale"), static_cast<std::size_t>(s.W) * s.H * s.out,
                ec.feature_dim, rng);
    }
  }
  add_dense(net.encoder, "enc.final", ec.feature_dim, ec.feature_dim, rng);

  const auto D = static_cast<std::size_t>(ec.feature_dim);
  const auto hid = static_cast<std::size_t>(config.head_hidden);
  for (const auto& [name, width] : {std::pair<const char*, std::size_t>{"exp.rot", 4}, {"exp.trans", 3}, {"exp.size", 3}}) {
    add_dense(net.explicit_head, std::string(name) + ".l1", D, hid, rng);
    add_dense(net.explicit_head, std::string(name) + ".out", hid, width, rng);
  }
  // Start the rotation head near the identity quaternion so the raw output is
  // never close to zero norm.
  net.explicit_head.get("exp.rot.out.b").value[0] = 1.0;

  const auto& ih = config.implicit_hidden;
  const auto h1 = static_cast<std::size_t>(ih[0]);
  // The first layer acts on [p - c; f]; it is stored as its point and feature
  // blocks so the feature block is applied once per crop.
  const Tensor w1 = glorot(3 + D, h1, rng);
  net.implicit_head.add("imp.l1.wp", Tensor({3, h1}, std::vector<double>(w1.data.begin(), w1.data.begin() + 3 * h1)));
  net.implicit_head.add("imp.l1.wf", Tensor({D, h1}, std::vector<double>(w1.data.begin() + 3 * h1, w1.data.end())));
  net.implicit_head.add("imp.l1.b", Tensor({h1}));
  for (std::size_t i = 1; i < ih.size(); ++i) {
    add_dense(net.implicit_head, "imp.l" + std::to_string(i + 1), ih[i - 1], ih[i], rng);
  }
  add_dense(net.implicit_head, "imp.out", ih.back(), 3, rng);
  return net;
}

Tensor tensor_from_points(const PointSet& points) {
  Tensor t({points.size(), 3});
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int j = 0; j < 3; ++j) t[i * 3 + j] = points[i][j];
  }
  return t;
}

PointSet points_from_tensor(const Tensor& t) {
  PointSet out(t.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(t[i * 3], t[i * 3 + 1], t[i * 3 + 2]);
  return out;
}

PreparedCrop prepare_crop(const Crop& crop, const SphericalGrid& grid) {
  const auto sig = convert_to_spherical(crop, grid);
  const auto cells = static_cast<std::size_t>(grid.cells());
  PreparedCrop out;
  out.color = Tensor({cells, 3}, sig.color.values);
  out.radius = Tensor({cells, 1}, sig.radius.values);
  out.center = sig.center;
  out.raw_points = crop.points;
  out.points = tensor_from_points(crop.points);
  PointSet centered = crop.points;
  for (auto& p : centered) p -= sig.center;
  out.centered = tensor_from_points(centered);
  return out;
}

FusionOutput spherical_fusion(Var sx, Var sp, Var taps, Var bias, std::shared_ptr<const SphericalBasis> basis) {
  if (sx.shape() != sp.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "spherical_fusion: streams " + nn::shape_string(sx.shape()) +
                                               " vs " + nn::shape_string(sp.shape()));
  }
  const Var shared = sconv(nn::concat(sx, sp), taps, bias, std::move(basis));
  return {nn::concat(sx, shared), nn::concat(sp, shared), shared};
}

EncoderTrace encode(Graph& g, ParameterSet& enc, const EncoderConfig& config, Var color, Var radius, Bind b) {
  const auto shapes = layer_shapes(config);
  EncoderTrace trace;
  Var x = color, p = radius;
  std::vector<Var> scale_features;
  for (int l = 1; l <= config.layers(); ++l) {
    const auto& s = shapes[l - 1];
    const auto basis = cached_basis(s.W, s.H, s.B);
    const Var sx = sconv(x, bind_param(g, enc, layer_name(l, "x.taps"), b), bind_param(g, enc, layer_name(l, "x.bias"), b), basis);
    const Var sp = sconv(p, bind_param(g, enc, layer_name(l, "p.taps"), b), bind_param(g, enc, layer_name(l, "p.bias"), b), basis);
    if (s.fused) {
      auto fusion = spherical_fusion(sx, sp, bind_param(g, enc, layer_name(l, "fuse.taps"), b),
                                     bind_param(g, enc, layer_name(l, "fuse.bias"), b), basis);
      x = fusion.x;
      p = fusion.p;
      trace.fused.push_back(fusion.shared);
      trace.fused_grids.push_back(basis->grid());
      const std::size_t width = fusion.shared.value().size();
      const Var flat = nn::reshape(fusion.shared, {1, width});
      scale_features.push_back(nn::relu(dense(g, enc, layer_name(l, "scale"), flat, b)));
    } else {
      x = sx;
      p = sp;
    }
    if (s.pooled) {
      x = nn::avg_pool(x, basis->grid());
      p = nn::avg_pool(p, basis->grid());
    }
  }
  trace.stream_x = x;
  trace.stream_p = p;
  const Var pooled = nn::elementwise_max3(scale_features[0], scale_features[1], scale_features[2]);
  trace.feature = dense(g, enc, "enc.final", pooled, b);
  return trace;
}

ExplicitOutput decode_explicit(Graph& g, ParameterSet& head, Var feature, Bind b) {
  auto mlp = [&](const std::string& name) {
    const Var h = nn::relu(dense(g, head, name + ".l1", feature, b));
    return nn::flatten(dense(g, head, name + ".out", h, b));
  };
  ExplicitOutput out;
  out.quat = nn::quat_canonical(mlp("exp.rot"));
  out.rot = nn::quat_to_rot(out.quat);
  out.delta_t = mlp("exp.trans");
  out.size = mlp("exp.size");
  return out;
}

Var decode_implicit(Graph& g, ParameterSet& head, const ModelConfig& config, Var centered, Var feature, Bind b) {
  const Var per_crop = nn::flatten(nn::add_bias(nn::matmul(feature, bind_param(g, head, "imp.l1.wf", b)),
                                                bind_param(g, head, "imp.l1.b", b)));
  Var h = nn::relu(nn::add_bias(nn::matmul(centered, bind_param(g, head, "imp.l1.wp", b)), per_crop));
  for (std::size_t i = 1; i < config.implicit_hidden.size(); ++i) {
    h = nn::relu(dense(g, head, "imp.l" + std::to_string(i + 1), h, b));
  }
  return dense(g, head, "imp.out", h, b);
}

ForwardOutput forward(Graph& g, Network& net, ParameterSet& encoder, const PreparedCrop& crop, Binding binding) {
  ForwardOutput out;
  const Var color = g.constant(crop.color);
  const Var radius = g.constant(crop.radius);
  out.encoder = encode(g, encoder, net.config.encoder, color, radius, binding.encoder);
  out.pose = decode_explicit(g, net.explicit_head, out.encoder.feature, binding.explicit_head);
  out.canonical = decode_implicit(g, net.implicit_head, net.config, g.constant(crop.centered),
                                  out.encoder.feature, binding.implicit_head);
  return out;
}

ForwardOutput forward(Graph& g, Network& net, const PreparedCrop& crop, Binding binding) {
  return forward(g, net, net.encoder, crop, binding);
}

Pose pose_from_output(const ExplicitOutput& out, const Vec3& center) {
  Pose pose;
  const auto& R = out.rot.value();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) pose.R(i, j) = R[i * 3 + j];
  }
  for (int j = 0; j < 3; ++j) {
    pose.t[j] = center[j] + out.delta_t.value()[j];
    pose.s[j] = out.size.value()[j];
  }
  return pose;
}

}  // namespace dpn
