#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "dpn/error.hpp"
#include "dpn/sphere.hpp"
#include "test_support.hpp"

using namespace dpn;

namespace {

// Random polynomial in (x, y, z) of total degree ≤ 3: band-limited below ℓ = 4
// by construction, independent of the harmonic code under test.
struct CubicPoly {
  std::vector<double> c;
  explicit CubicPoly(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    for (int i = 0; i < 20; ++i) c.push_back(g(rng));
  }
  double operator()(const Vec3& d) const {
    const double x = d.x(), y = d.y(), z = d.z();
    const double terms[20] = {1, x, y, z, x * x, y * y, z * z, x * y, x * z, y * z,
                              x * x * x, y * y * y, z * z * z, x * x * y, x * x * z,
                              y * y * x, y * y * z, z * z * x, z * z * y, x * y * z};
    double s = 0.0;
    for (int i = 0; i < 20; ++i) s += c[i] * terms[i];
    return s;
  }
};

SphericalSignal sample(const SphericalGrid& grid, int d, const std::function<double(const Vec3&, int)>& f) {
  SphericalSignal s(grid, d);
  for (int cell = 0; cell < grid.cells(); ++cell) {
    for (int c = 0; c < d; ++c) s.at(cell, c) = f(grid.directions[cell], c);
  }
  return s;
}

double max_diff(const SphericalSignal& a, const SphericalSignal& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

ZonalFilter random_filter(int cin, int cout, int B, std::mt19937_64& rng) {
  ZonalFilter f(cin, cout, B);
  std::normal_distribution<double> g;
  for (double& t : f.taps) t = g(rng);
  return f;
}

}  // namespace

TEST_CASE("make_grid") {
  const auto g4 = make_grid(4, 4);
  CHECK(g4.cells() == 16);
  CHECK(std::abs(g4.quad_weights[0] - g4.quad_weights[3]) < 1e-15);
  CHECK(std::abs(g4.quad_weights[1] - g4.quad_weights[2]) < 1e-15);
  for (const auto& d : make_grid(16, 8).directions) CHECK(std::abs(d.norm() - 1.0) < 1e-12);

  for (int n : {8, 16, 32}) {
    double total = 0.0;
    const auto g = make_grid(n, n);
    for (int h = 0; h < g.H; ++h) total += g.W * g.quad_weights[h];
    CHECK(std::abs(total - 4.0 * kPi) < 1e-6);
  }

  const auto g32 = make_grid(32, 32);
  const auto zz = sample(g32, 1, [](const Vec3& d, int) { return d.z() * d.z(); });
  CHECK(std::abs(integrate(zz)[0] - 4.0 * kPi / 3.0) < 1e-3);

  for (auto [W, H] : {std::pair{3, 4}, {4, 5}, {2, 4}, {4, 2}, {0, 0}}) {
    try {
      make_grid(W, H);
      FAIL("expected InvalidGrid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidGrid);
    }
  }
}

TEST_CASE("bin_index round-trips grid directions and is half-open") {
  const auto g = make_grid(16, 8);
  for (int cell = 0; cell < g.cells(); ++cell) CHECK(bin_index(g, g.directions[cell]) == cell);
  // Azimuth bins are centred on φ_w; the boundary at φ = π/W belongs to bin 1.
  const double phi = kPi / 16, theta = g.theta(3);
  const Vec3 d(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
  CHECK(bin_index(g, d) == g.index(1, 3));
}

TEST_CASE("convert_to_spherical") {
  const auto g = make_grid(8, 8);
  SUBCASE("antipodal pair") {
    Crop crop;
    crop.points = {{0.3, 0.1, 1.0}, {-0.3, -0.1, 1.0}};
    crop.points[0] = Vec3(0.5, 0.5, 1.5) + Vec3(0.6, 0.0, 0.8);
    crop.points[1] = Vec3(0.5, 0.5, 1.5) - Vec3(0.6, 0.0, 0.8);
    crop.colors = {{1, 0, 0}, {0, 1, 0}};
    const auto in = convert_to_spherical(crop, g);
    int nonzero = 0;
    for (int cell = 0; cell < g.cells(); ++cell) {
      if (in.radius.at(cell, 0) != 0.0) {
        ++nonzero;
        CHECK(std::abs(in.radius.at(cell, 0) - 1.0) < 1e-12);
      }
    }
    CHECK(nonzero == 2);
    CHECK((in.center - Vec3(0.5, 0.5, 1.5)).norm() < 1e-12);
  }
  SUBCASE("farthest point wins a shared bin, empty bins are zero") {
    Crop crop;
    const Vec3 dir = g.directions[g.index(2, 3)];
    // The third point balances the centroid to the origin.
    crop.points = {0.5 * dir, 0.8 * dir, -1.3 * dir};
    crop.colors = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, {0.7, 0.8, 0.9}};
    const auto in = convert_to_spherical(crop, g);
    const int cell = g.index(2, 3);
    CHECK(std::abs(in.radius.at(cell, 0) - 0.8) < 1e-12);
    CHECK(in.color.at(cell, 0) == 0.4);
    CHECK(in.color.at(cell, 2) == 0.6);
    const int empty = g.index(6, 0);
    CHECK(in.radius.at(empty, 0) == 0.0);
    CHECK(in.color.at(empty, 1) == 0.0);
  }
  SUBCASE("single point gives an all-zero radius map") {
    Crop crop;
    crop.points = {{1, 2, 3}};
    crop.colors = {{1, 1, 1}};
    const auto in = convert_to_spherical(crop, g);
    for (double v : in.radius.values) CHECK(v == 0.0);
  }
  SUBCASE("permutation invariance") {
    std::mt19937_64 rng(41);
    Crop crop;
    for (int i = 0; i < 300; ++i) {
      crop.points.push_back(testing::random_vec(rng));
      crop.colors.push_back(testing::random_vec(rng, 0, 1));
    }
    Crop shuffled = crop;
    std::vector<int> order(300);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < 300; ++i) {
      shuffled.points[i] = crop.points[order[i]];
      shuffled.colors[i] = crop.colors[order[i]];
    }
    const auto a = convert_to_spherical(crop, g), b = convert_to_spherical(shuffled, g);
    CHECK(max_diff(a.radius, b.radius) < 1e-12);
    CHECK(max_diff(a.color, b.color) == 0.0);
  }
}

TEST_CASE("sht_forward examples") {
  const auto g = make_grid(16, 16);
  const auto one = sample(g, 1, [](const Vec3&, int) { return 1.0; });
  const auto c1 = sht_forward(one, 8);
  CHECK(std::abs(c1.at(0, 0, 0) - std::complex<double>(std::sqrt(4 * kPi), 0)) < 1e-6);
  for (int l = 1; l < 8; ++l) {
    for (int m = -l; m <= l; ++m) CHECK(std::abs(c1.at(l, m, 0)) < 1e-6);
  }

  // Y_1^0 = sqrt(3 / 4π) cos θ.
  const double k = std::sqrt(3.0 / (4.0 * kPi));
  const auto y10 = sample(g, 1, [k](const Vec3& d, int) { return k * d.z(); });
  const auto c = sht_forward(y10, 8);
  CHECK(std::abs(c.at(1, 0, 0) - 1.0) < 1e-6);
  for (int l = 0; l < 8; ++l) {
    for (int m = -l; m <= l; ++m) {
      if (l != 1 || m != 0) CHECK(std::abs(c.at(l, m, 0)) < 1e-6);
    }
  }

  try {
    sht_forward(one, 9);
    FAIL("expected BandwidthExceedsGrid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBandwidthExceedsGrid);
  }
}

TEST_CASE("spherical_harmonic matches closed forms") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> th(0.01, kPi - 0.01), ph(0, 2 * kPi);
  for (int i = 0; i < 50; ++i) {
    const double t = th(rng), p = ph(rng);
    const auto y11 = spherical_harmonic(1, 1, t, p);
    const auto ref11 = -std::sqrt(3.0 / (8 * kPi)) * std::sin(t) * std::polar(1.0, p);
    CHECK(std::abs(y11 - ref11) < 1e-12);
    const auto y20 = spherical_harmonic(2, 0, t, p);
    CHECK(std::abs(y20.real() - std::sqrt(5.0 / (16 * kPi)) * (3 * std::cos(t) * std::cos(t) - 1)) < 1e-12);
    const auto y2m2 = spherical_harmonic(2, -2, t, p);
    const auto ref2m2 = std::sqrt(15.0 / (32 * kPi)) * std::sin(t) * std::sin(t) * std::polar(1.0, -2 * p);
    CHECK(std::abs(y2m2 - ref2m2) < 1e-12);
  }
}

TEST_CASE("sht roundtrip, conjugate symmetry and Parseval") {
  std::mt19937_64 rng(47);
  const auto g = make_grid(16, 16);
  for (int trial = 0; trial < 10; ++trial) {
    const CubicPoly p(rng), q(rng);
    const auto f = sample(g, 2, [&](const Vec3& d, int c) { return c == 0 ? p(d) : q(d); });
    const auto coeffs = sht_forward(f, 4);
    CHECK(max_diff(sht_inverse(coeffs, g), f) < 1e-6);

    for (int c = 0; c < 2; ++c) {
      double energy = 0.0;
      for (int l = 0; l < 4; ++l) {
        for (int m = -l; m <= l; ++m) {
          const auto expected = (m % 2 == 0 ? 1.0 : -1.0) * std::conj(coeffs.at(l, m, c));
          CHECK(std::abs(coeffs.at(l, -m, c) - expected) < 1e-9);
          energy += std::norm(coeffs.at(l, m, c));
        }
      }
      double quad = 0.0;
      for (int cell = 0; cell < g.cells(); ++cell) {
        quad += g.quad_weights[cell / g.W] * f.at(cell, c) * f.at(cell, c);
      }
      CHECK(std::abs(quad - energy) < 1e-5 * std::max(1.0, quad));
    }
  }
}

TEST_CASE("sht_inverse examples and symmetry check") {
  const auto g = make_grid(8, 8);
  SpectralCoeffs zero(4, 1);
  for (double v : sht_inverse(zero, g).values) CHECK(v == 0.0);

  SpectralCoeffs dc(4, 1);
  dc.at(0, 0, 0) = std::sqrt(4 * kPi);
  for (double v : sht_inverse(dc, g).values) CHECK(std::abs(v - 1.0) < 1e-9);

  SpectralCoeffs bad(4, 1);
  bad.at(1, 1, 0) = 1.0;
  try {
    sht_inverse(bad, g);
    FAIL("expected NonRealSpectrum");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonRealSpectrum);
  }
}

TEST_CASE("zonal_conv") {
  std::mt19937_64 rng(53);
  const auto g = make_grid(16, 16);
  const int B = 4;
  const CubicPoly p(rng);
  const auto f = sample(g, 1, [&](const Vec3& d, int) { return p(d); });

  SUBCASE("unit taps are the identity on band-limited signals") {
    ZonalFilter id(1, 1, B);
    for (double& t : id.taps) t = 1.0;
    CHECK(max_diff(zonal_conv(f, id), f) < 1e-6);
  }
  SUBCASE("degree-zero taps give the spherical mean") {
    ZonalFilter dc(1, 1, B);
    dc.tap(0, 0, 0) = 1.0;
    const auto out = zonal_conv(f, dc);
    const double mean = integrate(f)[0] / (4 * kPi);
    for (double v : out.values) CHECK(std::abs(v - mean) < 1e-9);
  }
  SUBCASE("azimuthal shift equivariance") {
    const auto x = sample(g, 3, [&](const Vec3& d, int c) { return std::exp(d.x() + 0.3 * c * d.y()) - d.z(); });
    const auto filt = random_filter(3, 2, 8, rng);
    for (int k : {1, 3, 8, 15}) {
      CHECK(max_diff(zonal_conv(rotate_signal_azimuthal(x, k), filt),
                     rotate_signal_azimuthal(zonal_conv(x, filt), k)) < 1e-10);
    }
  }
  SUBCASE("linearity") {
    const auto a = sample(g, 2, [](const Vec3& d, int c) { return std::sin(3 * d.x() + c); });
    const auto b = sample(g, 2, [](const Vec3& d, int c) { return std::cos(2 * d.z() - c * d.y()); });
    SphericalSignal mix(g, 2);
    for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = 0.7 * a.values[i] - 1.3 * b.values[i];
    const auto filt = random_filter(2, 3, 8, rng);
    const auto ca = zonal_conv(a, filt), cb = zonal_conv(b, filt), cm = zonal_conv(mix, filt);
    double worst = 0.0;
    for (std::size_t i = 0; i < cm.values.size(); ++i) {
      worst = std::max(worst, std::abs(cm.values[i] - (0.7 * ca.values[i] - 1.3 * cb.values[i])));
    }
    CHECK(worst < 1e-9);
  }
  SUBCASE("arbitrary rotation equivariance is close") {
    // A smooth, non-band-limited bump whose rotation is analytic.
    const Vec3 v = Vec3(0.3, -0.5, 0.8).normalized();
    const auto bump = [](const Vec3& d, const Vec3& axis) { return std::exp(2.0 * d.dot(axis)); };
    const auto filt = random_filter(1, 1, B, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const Mat3 R = testing::random_rotation(rng);
      const auto f0 = sample(g, 1, [&](const Vec3& d, int) { return bump(d, v); });
      const auto fr = sample(g, 1, [&](const Vec3& d, int) { return bump(d, R * v); });
      const auto conv_rot = zonal_conv(fr, filt);
      std::vector<Vec3> back;
      for (const auto& d : g.directions) back.push_back(R.transpose() * d);
      const auto rotated_conv = sht_evaluate(sht_forward(zonal_conv(f0, filt), B), 0, back);
      double num = 0.0, den = 0.0;
      for (int cell = 0; cell < g.cells(); ++cell) {
        num += std::pow(conv_rot.at(cell, 0) - rotated_conv[cell], 2);
        den += std::pow(rotated_conv[cell], 2);
      }
      CHECK(std::sqrt(num / den) < 0.05);
    }
  }
  SUBCASE("errors") {
    ZonalFilter wrong(2, 1, B);
    try {
      zonal_conv(f, wrong);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kShapeMismatch);
    }
    ZonalFilter wide(1, 1, 9);
    CHECK_THROWS_AS(zonal_conv(f, wide), Error);
  }
}

TEST_CASE("rotate_signal_azimuthal") {
  const auto g = make_grid(8, 4);
  const auto f = sample(g, 2, [](const Vec3& d, int c) { return d.x() + 2 * d.y() + c * d.z(); });
  CHECK(max_diff(rotate_signal_azimuthal(f, 0), f) == 0.0);
  CHECK(max_diff(rotate_signal_azimuthal(f, 8), f) == 0.0);
  CHECK(max_diff(rotate_signal_azimuthal(rotate_signal_azimuthal(f, 3), -3), f) == 0.0);
  // Shifting by one bin rotates the sampled field by 2π/W about z.
  const auto shifted = rotate_signal_azimuthal(f, 1);
  const Mat3 Rz = rot_z(2 * kPi / 8);
  for (int cell = 0; cell < g.cells(); ++cell) {
    const Vec3 d = Rz.transpose() * g.directions[cell];
    CHECK(std::abs(shifted.at(cell, 0) - (d.x() + 2 * d.y())) < 1e-12);
  }
}

TEST_CASE("weighted_avg_pool") {
  const auto g = make_grid(8, 8);
  const auto five = sample(g, 1, [](const Vec3&, int) { return 5.0; });
  const auto pooled = weighted_avg_pool(five);
  CHECK(pooled.grid.W == 4);
  CHECK(pooled.grid.H == 4);
  for (double v : pooled.values) CHECK(std::abs(v - 5.0) < 1e-15);

  const auto g4 = make_grid(4, 4);
  SphericalSignal spike(g4, 1);
  spike.at(g4.index(1, 2), 0) = 3.0;
  const auto ps = weighted_avg_pool(spike);
  const double w2 = g4.quad_weights[2], w3 = g4.quad_weights[3];
  int nonzero = 0;
  for (int cell = 0; cell < ps.grid.cells(); ++cell) {
    if (ps.at(cell, 0) != 0.0) {
      ++nonzero;
      CHECK(cell == ps.grid.index(0, 1));
      CHECK(std::abs(ps.at(cell, 0) - 3.0 * w2 / (2 * w2 + 2 * w3)) < 1e-15);
    }
  }
  CHECK(nonzero == 1);

  const auto f = sample(g, 2, [](const Vec3& d, int c) { return std::exp(d.x() * (c + 1)) + d.y(); });
  CHECK(max_diff(weighted_avg_pool(rotate_signal_azimuthal(f, 2)),
                 rotate_signal_azimuthal(weighted_avg_pool(f), 1)) < 1e-12);
}
