// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dyconfid/core.hpp"
#include "dyconfid/random.hpp"

namespace dyconfid {

/// Magnitudes for the two augmentation recipes. Rotation is always a uniform
/// angle about the vertical (z) axis.
struct AugmentConfig {
  double weak_scale_lo = 0.8, weak_scale_hi = 1.2;
  double strong_scale_lo = 0.6, strong_scale_hi = 1.4;
  double translate = 0.2;  // per-axis uniform in [-t, t]
  double jitter_sigma = 0.02;
  double jitter_clip = 0.05;  // bound on the per-point jitter norm
  double second_scale_lo = 0.8, second_scale_hi = 1.2;
};

struct WeakTransform {
  double angle = 0.0;
  double scale = 1.0;
};

struct StrongTransform {
  double angle = 0.0;
  double scale = 1.0;
  Point3 translation{0.0, 0.0, 0.0};
  std::vector<Point3> jitter;  // one displacement per point
  double second_scale = 1.0;
};

inline Point3 rotate_z(const Point3& p, double c, double s) {
  return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

inline WeakTransform sample_weak(Rng& rng, const AugmentConfig& cfg = {}) {
  WeakTransform t;
  t.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  t.scale = rng.uniform(cfg.weak_scale_lo, cfg.weak_scale_hi);
  return t;
}

inline StrongTransform sample_strong(Rng& rng, std::size_t num_points, const AugmentConfig& cfg = {}) {
  StrongTransform t;
  t.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  t.scale = rng.uniform(cfg.strong_scale_lo, cfg.strong_scale_hi);
  for (double& v : t.translation) v = rng.uniform(-cfg.translate, cfg.translate);
  t.jitter.resize(num_points);
  for (auto& d : t.jitter) {
    for (double& v : d) v = rng.normal(0.0, cfg.jitter_sigma);
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (norm > cfg.jitter_clip)
      for (double& v : d) v *= cfg.jitter_clip / norm;
  }
  t.second_scale = rng.uniform(cfg.second_scale_lo, cfg.second_scale_hi);
  return t;
}

inline PointCloud apply(const WeakTransform& t, const PointCloud& cloud) {
  if (t.angle == 0.0 && t.scale == 1.0) return cloud;
  const double c = std::cos(t.angle), s = std::sin(t.angle);
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    auto q = rotate_z(p, c, s);
    for (double& v : q) v *= t.scale;
    out.push_back(q);
  }
  return PointCloud(std::move(out));
}

/// rotation -> scale -> translation -> jitter -> second scale.
inline PointCloud apply(const StrongTransform& t, const PointCloud& cloud) {
  const double c = std::cos(t.angle), s = std::sin(t.angle);
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto q = rotate_z(cloud[i], c, s);
    for (std::size_t d = 0; d < 3; ++d) {
      q[d] = q[d] * t.scale + t.translation[d];
      if (i < t.jitter.size()) q[d] += t.jitter[i][d];
      q[d] *= t.second_scale;
    }
    out.push_back(q);
  }
  return PointCloud(std::move(out));
}

inline PointCloud weak_augment(const PointCloud& cloud, Rng& rng, const AugmentConfig& cfg = {}) {
  return apply(sample_weak(rng, cfg), cloud);
}

inline PointCloud strong_augment(const PointCloud& cloud, Rng& rng, const AugmentConfig& cfg = {}) {
  return apply(sample_strong(rng, cloud.size(), cfg), cloud);
}

}  // namespace dyconfid
