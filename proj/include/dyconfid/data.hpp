// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dyconfid/binary_io.hpp"
#include "dyconfid/core.hpp"
#include "dyconfid/random.hpp"

namespace dyconfid {

enum class Primitive : std::uint8_t { Sphere, Cube, Plane, Line, Cylinder, Cross, Helix, Torus };

inline constexpr std::array<std::string_view, 8> kPrimitiveNames = {
    "sphere", "cube", "plane", "line", "cylinder", "cross", "helix", "torus"};

inline std::string_view to_string(Primitive p) { return kPrimitiveNames[static_cast<std::size_t>(p)]; }

inline Primitive parse_primitive(std::string_view s) {
  for (std::size_t i = 0; i < kPrimitiveNames.size(); ++i)
    if (kPrimitiveNames[i] == s) return static_cast<Primitive>(i);
  throw ConfigError({"primitive: unknown primitive '" + std::string(s) + "'"});
}

struct ShapeSpec {
  Primitive primitive = Primitive::Sphere;
  double noise = 0.02;         // per-coordinate Gaussian sigma, must be < 0.3
  double scale_jitter = 0.15;  // per-axis scale drawn from [1 - j, 1 + j]

  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

/// `counts` is the training pool per class (labeled + unlabeled); the test
/// split adds `test_per_class` instances per class on top.
struct DatasetSpec {
  std::vector<ShapeSpec> classes;
  std::vector<int> counts;
  double labeled_fraction = 0.1;
  int test_per_class = 40;
  int points_per_cloud = 64;
  std::uint64_t seed = 0;

  int num_classes() const { return static_cast<int>(classes.size()); }

  /// round(count * fraction), at least 1, at most count.
  std::vector<int> labeled_counts() const {
    std::vector<int> out(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
      out[c] = std::clamp(static_cast<int>(std::lround(counts[c] * labeled_fraction)), 1, counts[c]);
    return out;
  }

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// Eight-class long-tail benchmark used by the default experiments.
inline DatasetSpec default_benchmark(std::uint64_t seed = 0) {
  DatasetSpec s;
  s.classes = {
      {Primitive::Sphere, 0.06, 0.15},   {Primitive::Cube, 0.06, 0.15},
      {Primitive::Cylinder, 0.06, 0.15}, {Primitive::Torus, 0.06, 0.15},
      {Primitive::Plane, 0.06, 0.15},    {Primitive::Helix, 0.06, 0.15},
      {Primitive::Cross, 0.06, 0.15},    {Primitive::Line, 0.06, 0.15},
  };
  s.counts = {400, 200, 100, 50, 25, 12, 12, 12};
  s.labeled_fraction = 0.1;
  s.test_per_class = 40;
  s.points_per_cloud = 64;
  s.seed = seed;
  return s;
}

inline void validate_dataset_spec(const DatasetSpec& s) {
  std::vector<std::string> bad;
  if (s.classes.size() < 2) bad.emplace_back("classes: need at least 2");
  if (s.counts.size() != s.classes.size()) bad.emplace_back("counts: one count per class");
  for (std::size_t c = 0; c < s.counts.size(); ++c)
    if (s.counts[c] < 2)
      bad.push_back("counts[" + std::to_string(c) + "]: need >= 2 (one labeled, one unlabeled)");
  for (std::size_t c = 0; c < s.classes.size(); ++c)
    if (!(s.classes[c].noise >= 0.0 && s.classes[c].noise < 0.3))
      bad.push_back("classes[" + std::to_string(c) + "].noise: sigma in [0, 0.3)");
  if (!(s.labeled_fraction > 0.0 && s.labeled_fraction <= 1.0)) bad.emplace_back("labeled_fraction: in (0, 1]");
  if (s.test_per_class < 1) bad.emplace_back("test_per_class: >= 1");
  if (s.points_per_cloud < static_cast<int>(PointCloud::kMinPoints)) bad.emplace_back("points_per_cloud: N >= 8");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

/// Raw surface sample for a primitive, before scaling and noise.
inline Point3 sample_surface(Primitive p, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  switch (p) {
    case Primitive::Sphere: {
      const double z = rng.uniform(-1.0, 1.0);
      const double t = rng.uniform(0.0, 2.0 * pi);
      const double r = std::sqrt(1.0 - z * z);
      return {r * std::cos(t), r * std::sin(t), z};
    }
    case Primitive::Cube: {
      const auto face = rng.below(6);
      const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
      const double s = face % 2 == 0 ? 1.0 : -1.0;
      switch (face / 2) {
        case 0: return {s, a, b};
        case 1: return {a, s, b};
        default: return {a, b, s};
      }
    }
    case Primitive::Plane: return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0};
    case Primitive::Line: return {0.0, 0.0, rng.uniform(-1.0, 1.0)};
    case Primitive::Cylinder: {
      const double t = rng.uniform(0.0, 2.0 * pi);
      return {0.5 * std::cos(t), 0.5 * std::sin(t), rng.uniform(-1.0, 1.0)};
    }
    case Primitive::Cross: {
      const double u = rng.uniform(-1.0, 1.0);
      return rng.below(2) == 0 ? Point3{u, 0.0, 0.0} : Point3{0.0, 0.0, u};
    }
    case Primitive::Helix: {
      const double u = rng.uniform(-1.0, 1.0);
      const double t = 3.0 * pi * u;
      return {0.5 * std::cos(t), 0.5 * std::sin(t), u};
    }
    case Primitive::Torus: {
      const double t = rng.uniform(0.0, 2.0 * pi), q = rng.uniform(0.0, 2.0 * pi);
      const double R = 0.7, r = 0.25;
      return {(R + r * std::cos(q)) * std::cos(t), (R + r * std::cos(q)) * std::sin(t), r * std::sin(q)};
    }
  }
  throw std::logic_error("unknown primitive");
}

/// Samples one cloud, centered on its centroid and scaled into the unit ball.
inline PointCloud sample_shape(const ShapeSpec& shape, int num_points, Rng& rng) {
  std::array<double, 3> axis_scale{};
  for (double& a : axis_scale) a = rng.uniform(1.0 - shape.scale_jitter, 1.0 + shape.scale_jitter);
  std::vector<Point3> pts(static_cast<std::size_t>(num_points));
  Point3 centroid{0.0, 0.0, 0.0};
  for (auto& p : pts) {
    p = sample_surface(shape.primitive, rng);
    for (std::size_t d = 0; d < 3; ++d) {
      p[d] = p[d] * axis_scale[d] + rng.normal(0.0, shape.noise);
      centroid[d] += p[d];
    }
  }
  double radius = 0.0;
  for (auto& p : pts) {
    for (std::size_t d = 0; d < 3; ++d) p[d] -= centroid[d] / static_cast<double>(num_points);
    radius = std::max(radius, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  }
  if (radius > 0.0)
    for (auto& p : pts)
      for (double& v : p) v /= radius;
  return PointCloud(std::move(pts));
}

struct Dataset {
  DatasetSpec spec;
  std::vector<Instance> instances;

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < instances.size(); ++i)
      if (instances[i].split() == s) out.push_back(i);
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr std::uint64_t kDataStream = 0xda7a;

/// Deterministic given spec.seed; instance ids are 0..n-1 in class order.
inline Dataset generate(const DatasetSpec& spec) {
  validate_dataset_spec(spec);
  Dataset ds;
  ds.spec = spec;
  const auto labeled = spec.labeled_counts();
  InstanceId next = 0;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const int total = spec.counts[c] + spec.test_per_class;
    for (int k = 0; k < total; ++k) {
      Rng rng(stream_seed(spec.seed, kDataStream, static_cast<std::uint64_t>(next)));
      const Split split = k < labeled[c] ? Split::Labeled : (k < spec.counts[c] ? Split::Unlabeled : Split::Test);
      ds.instances.emplace_back(next, sample_shape(spec.classes[c], spec.points_per_cloud, rng),
                                static_cast<ClassIndex>(c), split);
      ++next;
    }
  }
  return ds;
}

// Container: "DYDS" | version | spec | instance records | crc32.
inline constexpr std::uint32_t kDatasetMagic = 0x53445944;  // "DYDS"
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  ByteWriter w;
  w.u32(kDatasetMagic);
  w.u32(kDatasetVersion);
  const auto& s = ds.spec;
  w.u32(static_cast<std::uint32_t>(s.classes.size()));
  for (std::size_t c = 0; c < s.classes.size(); ++c) {
    w.u8(static_cast<std::uint8_t>(s.classes[c].primitive));
    w.f64(s.classes[c].noise);
    w.f64(s.classes[c].scale_jitter);
    w.i32(s.counts[c]);
  }
  w.f64(s.labeled_fraction);
  w.i32(s.test_per_class);
  w.i32(s.points_per_cloud);
  w.u64(s.seed);
  w.u64(ds.instances.size());
  for (const auto& inst : ds.instances) {
    w.i64(inst.id());
    w.u8(static_cast<std::uint8_t>(inst.split()));
    w.i32(inst.evaluation_label());
    w.u32(static_cast<std::uint32_t>(inst.cloud().size()));
    for (const auto& p : inst.cloud().points())
      for (double v : p) w.f64(v);
  }
  w.seal();
  return w.data();
}

inline Dataset decode_dataset(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  if (r.empty()) throw FormatError("dataset: empty file");
  r.verify_seal("dataset");
  if (r.u32() != kDatasetMagic) throw FormatError("dataset: bad magic");
  if (const auto ver = r.u32(); ver != kDatasetVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(ver));
  Dataset ds;
  auto& s = ds.spec;
  const auto C = r.u32();
  if (C < 2 || C > 1u << 16) throw FormatError("dataset: bad class count");
  s.classes.resize(C);
  s.counts.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    const auto prim = r.u8();
    if (prim >= kPrimitiveNames.size()) throw FormatError("dataset: bad primitive tag");
    s.classes[c].primitive = static_cast<Primitive>(prim);
    s.classes[c].noise = r.f64();
    s.classes[c].scale_jitter = r.f64();
    s.counts[c] = r.i32();
  }
  s.labeled_fraction = r.f64();
  s.test_per_class = r.i32();
  s.points_per_cloud = r.i32();
  s.seed = r.u64();
  const auto n = r.u64();
  if (n > r.remaining()) throw FormatError("dataset: instance count exceeds file size");
  ds.instances.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto id = r.i64();
    const auto split = r.u8();
    if (split > 2) throw FormatError("dataset: bad split tag");
    const auto label = r.i32();
    if (label < 0 || static_cast<std::uint32_t>(label) >= C) throw FormatError("dataset: label out of range");
    const auto np = r.u32();
    if (np < PointCloud::kMinPoints || static_cast<std::size_t>(np) * 24 > r.remaining())
      throw FormatError("dataset: bad point count");
    std::vector<Point3> pts(np);
    for (auto& p : pts)
      for (double& v : p) v = r.f64();
    try {
      ds.instances.emplace_back(id, PointCloud(std::move(pts)), label, static_cast<Split>(split));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("dataset: invalid instance: ") + e.what());
    }
  }
  if (r.remaining() != 0) throw FormatError("dataset: trailing bytes");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  write_bytes(encode_dataset(ds), path);
}

inline Dataset load_dataset(const std::string& path) { return decode_dataset(read_bytes(path)); }

/// One instance per line: id split label x0 y0 z0 x1 ... (shortest round-trip doubles).
inline void export_text(const Dataset& ds, std::ostream& out) {
  char buf[32];
  for (const auto& inst : ds.instances) {
    out << inst.id() << ' ' << to_string(inst.split()) << ' ' << inst.evaluation_label();
    for (const auto& p : inst.cloud().points())
      for (double v : p) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
      }
    out << '\n';
  }
}

}  // namespace dyconfid
