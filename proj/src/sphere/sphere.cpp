#include "dpn/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "dpn/error.hpp"

namespace dpn {

namespace {

// Fejér's first rule on the midpoint nodes cos θ_h: exact for polynomials in
// cos θ of degree < H, which makes the grid transforms exact below B = H/2.
std::vector<double> fejer_weights(int H) {
  std::vector<double> w(H);
  for (int h = 0; h < H; ++h) {
    const double theta = kPi * (h + 0.5) / H;
    double acc = 0.0;
    for (int k = 1; k <= H / 2; ++k) acc += std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
    w[h] = 2.0 / H * (1.0 - 2.0 * acc);
  }
  return w;
}

SphericalGrid build_grid(int W, int H) {
  SphericalGrid g;
  g.W = W;
  g.H = H;
  g.directions.resize(static_cast<std::size_t>(W) * H);
  for (int h = 0; h < H; ++h) {
    const double th = g.theta(h);
    for (int w = 0; w < W; ++w) {
      const double ph = g.phi(w);
      g.directions[g.index(w, h)] =
          Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    }
  }
  g.quad_weights = fejer_weights(H);
  for (double& q : g.quad_weights) q *= 2.0 * kPi / W;
  return g;
}

// Fully normalised associated Legendre values P̄_ℓ^m(cos θ) for m ≥ 0, with the
// Condon–Shortley phase, packed as ℓ(ℓ+1)/2 + m.
std::vector<double> legendre_table(int B, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  std::vector<double> p(static_cast<std::size_t>(B) * (B + 1) / 2, 0.0);
  auto at = [&](int l, int m) -> double& { return p[l * (l + 1) / 2 + m]; };
  double pmm = std::sqrt(1.0 / (4.0 * kPi));
  for (int m = 0; m < B; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * st;
    at(m, m) = pmm;
    if (m + 1 < B) at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * ct * pmm;
    for (int l = m + 2; l < B; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      at(l, m) = a * (ct * at(l - 1, m) - b * at(l - 2, m));
    }
  }
  return p;
}

void check_bandwidth(const SphericalGrid& grid, int B) {
  if (B < 1 || B > grid.max_bandwidth()) {
    throw Error(ErrorCode::kBandwidthExceedsGrid,
                "bandwidth " + std::to_string(B) + " exceeds grid limit " +
                    std::to_string(grid.max_bandwidth()));
  }
}

}  // namespace

double SphericalGrid::theta(int h) const { return kPi * (h + 0.5) / H; }
double SphericalGrid::phi(int w) const { return 2.0 * kPi * w / W; }

SphericalGrid make_grid(int W, int H) {
  if (W < 4 || H < 4 || W % 2 != 0 || H % 2 != 0) {
    throw Error(ErrorCode::kInvalidGrid,
                "grid must be even and >= 4, got " + std::to_string(W) + "x" + std::to_string(H));
  }
  return build_grid(W, H);
}

SphericalSignal::SphericalSignal(SphericalGrid g, int d)
    : grid(std::move(g)), channels(d), values(static_cast<std::size_t>(grid.cells()) * d, 0.0) {}

std::vector<double> integrate(const SphericalSignal& signal) {
  std::vector<double> out(signal.channels, 0.0);
  const auto& g = signal.grid;
  for (int h = 0; h < g.H; ++h) {
    for (int w = 0; w < g.W; ++w) {
      for (int c = 0; c < signal.channels; ++c) {
        out[c] += g.quad_weights[h] * signal.at(g.index(w, h), c);
      }
    }
  }
  return out;
}

int bin_index(const SphericalGrid& grid, const Vec3& d) {
  const double r = d.norm();
  double theta = r > 0.0 ? std::acos(std::clamp(d.z() / r, -1.0, 1.0)) : 0.0;
  double phi = std::atan2(d.y(), d.x());
  if (phi < 0.0) phi += 2.0 * kPi;
  int h = static_cast<int>(std::floor(theta / (kPi / grid.H)));
  h = std::clamp(h, 0, grid.H - 1);
  int w = static_cast<int>(std::floor((phi + kPi / grid.W) / (2.0 * kPi / grid.W)));
  w = ((w % grid.W) + grid.W) % grid.W;
  return grid.index(w, h);
}

SphericalInput convert_to_spherical(const Crop& crop, const SphericalGrid& grid) {
  if (crop.points.empty()) throw Error(ErrorCode::kDegenerateInput, "crop has no points");
  if (crop.colors.size() != crop.points.size()) {
    throw Error(ErrorCode::kShapeMismatch, "crop colors and points differ in length");
  }
  SphericalInput out{SphericalSignal(grid, 3), SphericalSignal(grid, 1), centroid(crop.points)};
  std::vector<int> winner(grid.cells(), -1);
  std::vector<double> best(grid.cells(), -1.0);
  for (std::size_t i = 0; i < crop.points.size(); ++i) {
    const Vec3 d = crop.points[i] - out.center;
    const double r = d.norm();
    const int cell = bin_index(grid, d);
    if (r > best[cell]) {
      best[cell] = r;
      winner[cell] = static_cast<int>(i);
    }
  }
  for (int cell = 0; cell < grid.cells(); ++cell) {
    if (winner[cell] < 0) continue;
    out.radius.at(cell, 0) = best[cell];
    for (int c = 0; c < 3; ++c) out.color.at(cell, c) = crop.colors[winner[cell]][c];
  }
  return out;
}

SpectralCoeffs::SpectralCoeffs(int B, int d)
    : bandwidth(B), channels(d), values(static_cast<std::size_t>(B) * B * d) {}

std::complex<double> spherical_harmonic(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  if (am > l) return 0.0;
  const auto p = legendre_table(l + 1, theta);
  const double plm = p[l * (l + 1) / 2 + am];
  const std::complex<double> y = plm * std::polar(1.0, am * phi);
  if (m >= 0) return y;
  return (am % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
}

SpectralCoeffs sht_forward(const SphericalSignal& signal, int B) {
  const auto& g = signal.grid;
  check_bandwidth(g, B);
  SpectralCoeffs out(B, signal.channels);
  for (int h = 0; h < g.H; ++h) {
    const auto p = legendre_table(B, g.theta(h));
    for (int w = 0; w < g.W; ++w) {
      const int cell = g.index(w, h);
      const double phi = g.phi(w);
      for (int l = 0; l < B; ++l) {
        for (int m = -l; m <= l; ++m) {
          const int am = std::abs(m);
          // conj(Y_ℓ^m) for m ≥ 0 is P̄ e^{-imφ}; negative m follows from symmetry.
          std::complex<double> ybar = p[l * (l + 1) / 2 + am] * std::polar(1.0, -am * phi);
          if (m < 0) ybar = (am % 2 == 0 ? 1.0 : -1.0) * std::conj(ybar);
          const double wq = g.quad_weights[h];
          for (int c = 0; c < signal.channels; ++c) out.at(l, m, c) += wq * signal.at(cell, c) * ybar;
        }
      }
    }
  }
  return out;
}

namespace {

void check_real_spectrum(const SpectralCoeffs& coeffs) {
  for (int c = 0; c < coeffs.channels; ++c) {
    for (int l = 0; l < coeffs.bandwidth; ++l) {
      for (int m = 0; m <= l; ++m) {
        const double sign = m % 2 == 0 ? 1.0 : -1.0;
        const auto expected = sign * std::conj(coeffs.at(l, m, c));
        if (std::abs(coeffs.at(l, -m, c) - expected) > 1e-6) {
          throw Error(ErrorCode::kNonRealSpectrum,
                      "coefficient (" + std::to_string(l) + "," + std::to_string(m) +
                          ") breaks conjugate symmetry");
        }
      }
    }
  }
}

std::complex<double> synthesize_at(const SpectralCoeffs& coeffs, int c, const std::vector<double>& p,
                                   double phi) {
  std::complex<double> acc = 0.0;
  for (int l = 0; l < coeffs.bandwidth; ++l) {
    for (int m = -l; m <= l; ++m) {
      const int am = std::abs(m);
      std::complex<double> y = p[l * (l + 1) / 2 + am] * std::polar(1.0, am * phi);
      if (m < 0) y = (am % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
      acc += coeffs.at(l, m, c) * y;
    }
  }
  return acc;
}

}  // namespace

SphericalSignal sht_inverse(const SpectralCoeffs& coeffs, const SphericalGrid& grid) {
  check_real_spectrum(coeffs);
  if (coeffs.bandwidth > grid.max_bandwidth()) {
    throw Error(ErrorCode::kBandwidthExceedsGrid, "coefficients exceed grid bandwidth");
  }
  SphericalSignal out(grid, coeffs.channels);
  for (int h = 0; h < grid.H; ++h) {
    const auto p = legendre_table(coeffs.bandwidth, grid.theta(h));
    for (int w = 0; w < grid.W; ++w) {
      for (int c = 0; c < coeffs.channels; ++c) {
        out.at(grid.index(w, h), c) = synthesize_at(coeffs, c, p, grid.phi(w)).real();
      }
    }
  }
  return out;
}

std::vector<double> sht_evaluate(const SpectralCoeffs& coeffs, int channel,
                                 const std::vector<Vec3>& directions) {
  std::vector<double> out;
  out.reserve(directions.size());
  for (const auto& d : directions) {
    const double r = d.norm();
    const double theta = std::acos(std::clamp(d.z() / r, -1.0, 1.0));
    const double phi = std::atan2(d.y(), d.x());
    out.push_back(synthesize_at(coeffs, channel, legendre_table(coeffs.bandwidth, theta), phi).real());
  }
  return out;
}

SphericalBasis::SphericalBasis(SphericalGrid grid, int bandwidth)
    : grid_(std::move(grid)), bandwidth_(bandwidth) {
  check_bandwidth(grid_, bandwidth_);
  const int K = size();
  degree_.resize(K);
  for (int l = 0; l < bandwidth_; ++l) {
    for (int m = -l; m <= l; ++m) degree_[SpectralCoeffs::index(l, m)] = l;
  }
  synthesis_.resize(grid_.cells(), K);
  analysis_.resize(K, grid_.cells());
  for (int h = 0; h < grid_.H; ++h) {
    const auto p = legendre_table(bandwidth_, grid_.theta(h));
    for (int w = 0; w < grid_.W; ++w) {
      const int cell = grid_.index(w, h);
      const double phi = grid_.phi(w);
      for (int l = 0; l < bandwidth_; ++l) {
        for (int m = -l; m <= l; ++m) {
          const int am = std::abs(m);
          const double plm = p[l * (l + 1) / 2 + am];
          double y = plm;
          if (m > 0) y = std::sqrt(2.0) * plm * std::cos(am * phi);
          if (m < 0) y = std::sqrt(2.0) * plm * std::sin(am * phi);
          const int k = SpectralCoeffs::index(l, m);
          synthesis_(cell, k) = y;
          analysis_(k, cell) = grid_.quad_weights[h] * y;
        }
      }
    }
  }
}

std::shared_ptr<const SphericalBasis> cached_basis(int W, int H, int B) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, int>, std::shared_ptr<const SphericalBasis>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{W, H, B}];
  if (!slot) slot = std::make_shared<const SphericalBasis>(build_grid(W, H), B);
  return slot;
}

ZonalFilter::ZonalFilter(int cin, int cout, int B)
    : in_channels(cin), out_channels(cout), bandwidth(B),
      taps(static_cast<std::size_t>(cin) * cout * B, 0.0) {}

SphericalSignal zonal_conv(const SphericalSignal& signal, const ZonalFilter& filter) {
  if (signal.channels != filter.in_channels) {
    throw Error(ErrorCode::kShapeMismatch, "zonal_conv: signal has " + std::to_string(signal.channels) +
                                               " channels, filter expects " +
                                               std::to_string(filter.in_channels));
  }
  const auto& g = signal.grid;
  const auto basis = cached_basis(g.W, g.H, filter.bandwidth);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      signal.values.data(), g.cells(), signal.channels);
  const Eigen::MatrixXd cin = basis->analysis() * x;
  Eigen::MatrixXd cout = Eigen::MatrixXd::Zero(basis->size(), filter.out_channels);
  for (int k = 0; k < basis->size(); ++k) {
    const int l = basis->degree_of(k);
    for (int i = 0; i < filter.in_channels; ++i) {
      for (int o = 0; o < filter.out_channels; ++o) cout(k, o) += filter.tap(i, o, l) * cin(k, i);
    }
  }
  SphericalSignal out(g, filter.out_channels);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> y(
      out.values.data(), g.cells(), filter.out_channels);
  y = basis->synthesis() * cout;
  return out;
}

SphericalSignal rotate_signal_azimuthal(const SphericalSignal& signal, int k) {
  const auto& g = signal.grid;
  SphericalSignal out(g, signal.channels);
  for (int h = 0; h < g.H; ++h) {
    for (int w = 0; w < g.W; ++w) {
      const int src = g.index(w, h);
      const int dst = g.index(((w + k) % g.W + g.W) % g.W, h);
      for (int c = 0; c < signal.channels; ++c) out.at(dst, c) = signal.at(src, c);
    }
  }
  return out;
}

SphericalSignal weighted_avg_pool(const SphericalSignal& signal) {
  const auto& g = signal.grid;
  if (g.W % 2 != 0 || g.H % 2 != 0 || g.W < 2 || g.H < 2) {
    throw Error(ErrorCode::kInvalidGrid, "pooling needs even resolution");
  }
  SphericalSignal out(build_grid(g.W / 2, g.H / 2), signal.channels);
  for (int ho = 0; ho < g.H / 2; ++ho) {
    const double w0 = g.quad_weights[2 * ho], w1 = g.quad_weights[2 * ho + 1];
    const double norm = 2.0 * (w0 + w1);
    for (int wo = 0; wo < g.W / 2; ++wo) {
      const int dst = out.grid.index(wo, ho);
      for (int c = 0; c < signal.channels; ++c) {
        const double acc = w0 * (signal.at(g.index(2 * wo, 2 * ho), c) + signal.at(g.index(2 * wo + 1, 2 * ho), c)) +
                           w1 * (signal.at(g.index(2 * wo, 2 * ho + 1), c) +
                                 signal.at(g.index(2 * wo + 1, 2 * ho + 1), c));
        out.at(dst, c) = acc / norm;
      }
    }
  }
  return out;
}

}  // namespace dpn
