#pragma once

#include <Eigen/Core>
#include <complex>
#include <memory>
#include <vector>

#include "dpn/crop.hpp"
#include "dpn/geometry.hpp"

namespace dpn {

/// Equiangular sampling of the sphere. Cells are stored h-major: index h*W + w,
/// polar angle θ_h = π(h+½)/H and azimuth φ_w = 2πw/W.
struct SphericalGrid {
  int W = 0;
  int H = 0;
  std::vector<Vec3> directions;      // W*H unit vectors
  std::vector<double> quad_weights;  // H per-latitude weights (azimuth factor 2π/W included)

  int cells() const { return W * H; }
  int index(int w, int h) const { return h * W + w; }
  double theta(int h) const;
  double phi(int w) const;
  /// Largest bandwidth the grid resolves exactly: min(W, H) / 2.
  int max_bandwidth() const { return std::min(W, H) / 2; }
};

/// Throws kInvalidGrid unless W and H are even and ≥ 4.
SphericalGrid make_grid(int W, int H);

/// W×H×d samples; values stored cell-major with channels innermost.
struct SphericalSignal {
  SphericalGrid grid;
  int channels = 0;
  std::vector<double> values;

  SphericalSignal() = default;
  SphericalSignal(SphericalGrid g, int d);

  double& at(int cell, int c) { return values[static_cast<std::size_t>(cell) * channels + c]; }
  double at(int cell, int c) const { return values[static_cast<std::size_t>(cell) * channels + c]; }
};

/// Σ quad_weight · f over the grid, per channel.
std::vector<double> integrate(const SphericalSignal& signal);

/// Bin a point direction (relative to the origin) into the grid, half-open bins
/// centred on the grid directions.
int bin_index(const SphericalGrid& grid, const Vec3& direction);

struct SphericalInput {
  SphericalSignal color;   // d = 3
  SphericalSignal radius;  // d = 1
  Vec3 center;
};

/// Per-bin farthest point from the crop centroid; empty bins are zero. Ties
/// keep the lower point index.
SphericalInput convert_to_spherical(const Crop& crop, const SphericalGrid& grid);

/// Complex coefficients c(ℓ, m), 0 ≤ ℓ < B, |m| ≤ ℓ, per channel.
struct SpectralCoeffs {
  int bandwidth = 0;
  int channels = 0;
  std::vector<std::complex<double>> values;

  SpectralCoeffs(int B, int d);
  static int index(int l, int m) { return l * l + l + m; }
  std::complex<double>& at(int l, int m, int c) {
    return values[static_cast<std::size_t>(c) * bandwidth * bandwidth + index(l, m)];
  }
  const std::complex<double>& at(int l, int m, int c) const {
    return values[static_cast<std::size_t>(c) * bandwidth * bandwidth + index(l, m)];
  }
};

/// Orthonormal complex spherical harmonic Y_ℓ^m with the Condon–Shortley phase.
std::complex<double> spherical_harmonic(int l, int m, double theta, double phi);

/// Throws kBandwidthExceedsGrid when B > grid.max_bandwidth().
SpectralCoeffs sht_forward(const SphericalSignal& signal, int B);

/// Throws kNonRealSpectrum when the coefficients violate the conjugate
/// symmetry of a real signal by more than 1e-6.
SphericalSignal sht_inverse(const SpectralCoeffs& coeffs, const SphericalGrid& grid);

/// Evaluates the band-limited function described by `coeffs` at arbitrary
/// unit directions (real part).
std::vector<double> sht_evaluate(const SpectralCoeffs& coeffs, int channel,
                                 const std::vector<Vec3>& directions);

/// Real orthonormal harmonic basis sampled on a grid, used by the spectral
/// convolution. Row k of `analysis` integrates against basis function k
/// (quadrature weights folded in); `synthesis` is its sampled transpose.
class SphericalBasis {
 public:
  SphericalBasis(SphericalGrid grid, int bandwidth);

  const SphericalGrid& grid() const { return grid_; }
  int bandwidth() const { return bandwidth_; }
  int size() const { return bandwidth_ * bandwidth_; }
  int degree_of(int k) const { return degree_[k]; }
  const Eigen::MatrixXd& analysis() const { return analysis_; }
  const Eigen::MatrixXd& synthesis() const { return synthesis_; }

 private:
  SphericalGrid grid_;
  int bandwidth_;
  std::vector<int> degree_;
  Eigen::MatrixXd analysis_;   // B² × cells
  Eigen::MatrixXd synthesis_;  // cells × B²
};

/// Process-wide cache of bases keyed by (W, H, B).
std::shared_ptr<const SphericalBasis> cached_basis(int W, int H, int B);

/// Zonal filter taps, one per (in-channel, out-channel, degree).
struct ZonalFilter {
  int in_channels = 0;
  int out_channels = 0;
  int bandwidth = 0;
  std::vector<double> taps;

  ZonalFilter(int cin, int cout, int B);
  double& tap(int i, int o, int l) {
    return taps[(static_cast<std::size_t>(i) * out_channels + o) * bandwidth + l];
  }
  double tap(int i, int o, int l) const {
    return taps[(static_cast<std::size_t>(i) * out_channels + o) * bandwidth + l];
  }
};

/// Spectral convolution: out_o(ℓ,m) = Σ_i tap(i,o,ℓ) · in_i(ℓ,m), then synthesis.
/// Throws kShapeMismatch when channels disagree and kBandwidthExceedsGrid
/// when the filter bandwidth exceeds the grid.
SphericalSignal zonal_conv(const SphericalSignal& signal, const ZonalFilter& filter);

/// Cyclic shift of the azimuth axis by k bins (rotation by 2πk/W about z).
SphericalSignal rotate_signal_azimuthal(const SphericalSignal& signal, int k);

/// Quadrature-weighted mean over 2×2 cell blocks, giving a (W/2, H/2) signal.
/// The coarse grid may go down to 2×2. Throws kInvalidGrid for odd W or H.
SphericalSignal weighted_avg_pool(const SphericalSignal& signal);

}  // namespace dpn
